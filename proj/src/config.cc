// Copyright 2026 The ACAM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "acam/config.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>

#include "acam/error.h"

namespace acam::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& raw) {
  const std::string s = trim(raw);
  std::size_t pos = 0;
  if (s.empty() || s[0] == '-') throw std::invalid_argument("expected a non-negative integer");
  const unsigned long long v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

double parse_double(const std::string& raw) {
  const std::string s = trim(raw);
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("expected a number");
  return v;
}

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("expected true or false");
}

std::vector<std::string> parse_list(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream in(raw);
  std::string part;
  while (std::getline(in, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << values[i];
  }
  return out.str();
}

ConfigKey size_key(std::string section, std::string key, std::size_t& field,
                   std::string help) {
  return {std::move(section), std::move(key), std::to_string(field),
          std::move(help), [&field](const std::string& v) { field = parse_size(v); }};
}

ConfigKey u64_key(std::string section, std::string key, std::uint64_t& field,
                  std::string help) {
  return {std::move(section), std::move(key), std::to_string(field),
          std::move(help), [&field](const std::string& v) { field = parse_size(v); }};
}

ConfigKey double_key(std::string section, std::string key, double& field,
                     std::string help) {
  return {std::move(section), std::move(key), fmt(field), std::move(help),
          [&field](const std::string& v) { field = parse_double(v); }};
}

ConfigKey bool_key(std::string section, std::string key, bool& field,
                   std::string help) {
  return {std::move(section), std::move(key), fmt(field), std::move(help),
          [&field](const std::string& v) { field = parse_bool(v); }};
}

ConfigKey string_key(std::string section, std::string key, std::string& field,
                     std::string help) {
  return {std::move(section), std::move(key), field, std::move(help),
          [&field](const std::string& v) { field = trim(v); }};
}

}  // namespace

std::vector<ConfigKey> run_config_keys(RunConfig& c) {
  auto& h = c.hyper;
  auto& t = c.train;
  std::vector<ConfigKey> keys = {
      string_key("data", "interactions", c.interactions_path,
                 "TSV of user, item, timestamp"),
      string_key("data", "triples", c.triples_path,
                 "TSV of head, relation, tail (empty: no attributes)"),
      {"data", "relations", join(c.relations),
       "comma-separated attribute names in slot order (empty: first seen)",
       [&c](const std::string& v) { c.relations = parse_list(v); }},
      string_key("data", "out_dir", c.out_dir, "output directory"),
      size_key("model", "d", h.dim, "embedding width"),
      size_key("model", "d_k", h.key_dim, "co-attention key width"),
      size_key("model", "d_v", h.value_dim, "co-attention value width"),
      size_key("model", "m", h.num_attributes, "attribute slots per item"),
      size_key("model", "l", h.history_length, "history length"),
      double_key("model", "lambda1", h.lambda1, "weight of the transH term"),
      double_key("model", "lambda2", h.lambda2, "weight of the L2 term"),
      bool_key("model", "tie_kv", h.tie_kv, "share key and value transforms"),
      bool_key("model", "attention_softmax", h.attention_softmax,
               "softmax-normalize history attention weights"),
      bool_key("model", "coattention", h.coattention,
               "false replaces softmax(S) by uniform weights"),
      size_key("model", "mlp_hidden1", h.mlp_hidden1, "first MLP hidden width"),
      size_key("model", "mlp_hidden2", h.mlp_hidden2, "second MLP hidden width"),
      double_key("train", "learning_rate", t.learning_rate, "Adam step size"),
      size_key("train", "batch_size", t.batch_size, "pairs per step"),
      size_key("train", "epochs", t.epochs, "passes over the training pairs"),
      size_key("train", "negatives", t.negatives_per_positive,
               "negatives per training positive"),
      size_key("train", "kge_batch", t.kge_batch, "triples sampled per step"),
      u64_key("train", "seed", t.seed, "initialization and sampling seed"),
      double_key("train", "popularity_floor", t.popularity_floor,
                 "additive smoothing of negative-sampling popularity"),
      size_key("eval", "test_positives", c.split.test_positives,
               "most recent interactions held out per user"),
      size_key("eval", "negatives", c.split.negatives_per_positive,
               "evaluation negatives per test positive"),
      size_key("eval", "repetitions", c.eval.repetitions,
               "evaluation runs with fresh negatives"),
      {"eval", "n_values", join(c.eval.n_values), "metric cutoffs",
       [&c](const std::string& v) {
         c.eval.n_values.clear();
         for (const auto& part : parse_list(v)) {
           c.eval.n_values.push_back(parse_size(part));
         }
       }},
      u64_key("eval", "seed", c.eval.seed, "evaluation negative-sampling seed"),
  };
  return keys;
}

std::vector<ConfigKey> world_spec_keys(synth::WorldSpec& s) {
  return {
      size_key("world", "users", s.num_users, "number of users"),
      size_key("world", "items", s.num_items, "number of items"),
      size_key("world", "attributes", s.num_attributes, "attributes per item"),
      size_key("world", "values_per_attribute", s.values_per_attribute,
               "distinct values per attribute"),
      size_key("world", "min_interactions", s.min_interactions,
               "fewest interactions per user"),
      size_key("world", "max_interactions", s.max_interactions,
               "most interactions per user"),
      size_key("world", "taste_seeds", s.taste_seeds,
               "items a user's taste is seeded from"),
      double_key("world", "rho", s.rho, "preference share of each draw"),
      double_key("world", "sharpness", s.sharpness,
                 "inverse temperature of preferences"),
      double_key("world", "popularity_skew", s.popularity_skew,
                 "Zipf exponent of item popularity"),
      double_key("world", "multi_value_prob", s.multi_value_prob,
                 "chance of a second value per attribute"),
      double_key("world", "pair_noise", s.pair_noise,
                 "noise on planted correlated directions"),
      u64_key("world", "seed", s.seed, "generator seed"),
  };
}

std::string describe_keys(const std::vector<ConfigKey>& keys) {
  std::ostringstream out;
  out << "Config keys (section.key = default):\n";
  for (const auto& k : keys) {
    out << "  " << k.qualified() << " = " << k.default_value << "\n      "
        << k.help << "\n";
  }
  return out.str();
}

void apply_config_file(const std::string& path, std::vector<ConfigKey>& keys,
                       const Overrides& overrides,
                       const std::function<void()>& after_file,
                       std::vector<std::string>* problems) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError("config not found: " + path);
  }
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot parse config " + path + ": " + e.what());
  }
  std::map<std::string, ConfigKey*> by_name;
  for (auto& k : keys) by_name.emplace(k.qualified(), &k);

  std::vector<std::string> errors;
  auto apply = [&](const std::string& name, const std::string& value) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      errors.push_back(name + ": unknown key");
      return;
    }
    try {
      it->second->set(value);
    } catch (const std::exception&) {
      errors.push_back(name + ": invalid value '" + value + "' (" +
                       it->second->help + ")");
    }
  };
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      errors.push_back(section + ": key outside any section");
      continue;
    }
    for (const auto& [key, value] : body) {
      apply(section + "." + key, value.get_value<std::string>());
    }
  }
  if (after_file) after_file();
  for (const auto& [name, value] : overrides) apply(name, value);
  if (problems) {
    problems->insert(problems->end(), errors.begin(), errors.end());
    return;
  }
  if (errors.empty()) return;
  std::string msg = "invalid config " + path + ":";
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

RunConfig load_run_config(const std::string& path, const Overrides& overrides,
                          bool require_data) {
  RunConfig config;
  auto keys = run_config_keys(config);
  // Relative paths in the file are taken relative to the file itself;
  // paths given as overrides stay relative to the working directory.
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&base](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) {
      p = (base / p).lexically_normal().string();
    }
  };
  bool out_dir_in_file = false;
  for (auto& k : keys) {
    if (k.qualified() != "data.out_dir") continue;
    k.set = [&config, &out_dir_in_file](const std::string& v) {
      config.out_dir = v;
      out_dir_in_file = true;
    };
  }
  std::vector<std::string> errors;
  apply_config_file(
      path, keys, overrides,
      [&] {
        resolve(config.interactions_path);
        resolve(config.triples_path);
        if (out_dir_in_file) resolve(config.out_dir);
      },
      &errors);

  auto collect = [&](auto&& check) {
    try {
      check();
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  };
  collect([&] { config.hyper.validate(); });
  collect([&] { config.train.validate(); });
  collect([&] { config.split.validate(); });
  if (config.eval.repetitions < 1) errors.push_back("eval.repetitions must be >= 1");
  if (config.eval.n_values.empty()) errors.push_back("eval.n_values is empty");
  for (std::size_t n : config.eval.n_values) {
    if (n == 0) errors.push_back("eval.n_values entries must be >= 1");
  }
  if (config.relations.size() > config.hyper.num_attributes) {
    errors.push_back("data.relations lists more than model.m attributes");
  }
  if (require_data) {
    if (config.interactions_path.empty()) {
      errors.push_back("data.interactions: required");
    } else if (!std::filesystem::is_regular_file(config.interactions_path)) {
      errors.push_back("data.interactions: file not found: " +
                       config.interactions_path);
    }
    if (!config.triples_path.empty() &&
        !std::filesystem::is_regular_file(config.triples_path)) {
      errors.push_back("data.triples: file not found: " + config.triples_path);
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid config " + path + ":";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return config;
}

synth::WorldSpec load_world_spec(const std::string& path,
                                 const Overrides& overrides) {
  synth::WorldSpec spec;
  auto keys = world_spec_keys(spec);
  apply_config_file(path, keys, overrides);
  spec.validate();
  return spec;
}

}  // namespace acam::cli
