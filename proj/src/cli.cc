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

#include "acam/cli.h"

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "acam/config.h"
#include "acam/error.h"
#include "acam/eval.h"
#include "acam/gradcheck.h"
#include "acam/kgstore.h"
#include "acam/model.h"
#include "acam/synthgen.h"
#include "acam/training.h"

namespace acam::cli {

namespace {

namespace fs = std::filesystem;

struct Corpus {
  kg::InteractionLog log;
  kg::KnowledgeGraph kg;
  eval::Split split;
};

Corpus load_corpus(const RunConfig& config) {
  Corpus c;
  c.log = kg::load_interactions(config.interactions_path);
  if (config.triples_path.empty()) {
    c.kg.attributes = kg::AttributeTable(c.log.items.size(),
                                         config.hyper.num_attributes);
    for (const auto& name : c.log.items.names()) c.kg.entities.intern(name);
  } else {
    c.kg = kg::load_triples(config.triples_path, config.hyper.num_attributes,
                            &c.log.items, config.relations);
  }
  c.split = eval::split(c.log.interactions, c.log.users.size(),
                        c.log.items.size(), config.split);
  return c;
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << body;
}

std::size_t eval_threads() {
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ACAM_THREADS")) {
    try {
      threads = std::min<std::size_t>(threads, std::max(1, std::stoi(env)));
    } catch (const std::exception&) {
      throw ConfigError(std::string("ACAM_THREADS is not an integer: ") + env);
    }
  }
  return threads;
}

// Flags shared by the run-config commands.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::vector<std::string> sets;
};

Overrides collect_overrides(const CommonFlags& flags) {
  Overrides o;
  for (const auto& s : flags.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects section.key=value, got '" + s + "'");
    }
    o.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (flags.out_dir) o.emplace_back("data.out_dir", *flags.out_dir);
  return o;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("config", flags.config, "config file (sectioned key = value)")
      ->required();
  cmd->add_option("--seed", flags.seed, "seed override");
  cmd->add_option("--out", flags.out_dir, "output directory override");
  cmd->add_option("--set", flags.sets,
                  "override any config key: section.key=value (repeatable)");
}

std::string run_keys_help() {
  RunConfig defaults;
  return describe_keys(run_config_keys(defaults));
}

int cmd_generate(const std::string& spec_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, std::ostream& out) {
  Overrides o;
  if (seed) o.emplace_back("world.seed", std::to_string(*seed));
  const synth::WorldSpec spec = load_world_spec(spec_path, o);
  const auto data = synth::generate(spec);
  synth::write_dataset(data, out_dir);
  out << "wrote " << data.interactions.size() << " interactions for "
      << spec.num_users << " users and " << spec.num_items << " items to "
      << out_dir << "\n";
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, std::optional<std::size_t> epochs,
              std::optional<double> lambda1, bool no_coattention,
              std::ostream& out) {
  Overrides o = collect_overrides(flags);
  if (flags.seed) o.emplace_back("train.seed", std::to_string(*flags.seed));
  if (epochs) o.emplace_back("train.epochs", std::to_string(*epochs));
  if (lambda1) {
    std::ostringstream v;
    v << std::setprecision(17) << *lambda1;
    o.emplace_back("model.lambda1", v.str());
  }
  if (no_coattention) o.emplace_back("model.coattention", "false");
  const RunConfig config = load_run_config(flags.config, o, true);
  const Corpus corpus = load_corpus(config);

  const fs::path dir(config.out_dir);
  fs::create_directories(dir);
  const fs::path checkpoint = dir / "checkpoint.acam";
  const fs::path log_path = dir / "train_log.csv";
  std::vector<train::EpochStats> log;
  auto hook = [&](const model::ModelParams& params, const train::EpochStats& e) {
    log.push_back(e);
    model::save_checkpoint(params, checkpoint.string());
    write_file(log_path, train::epoch_log_csv(log));
    out << "epoch " << e.epoch << " loss " << e.loss_total << " (bce "
        << e.loss_bce << ", kge " << e.loss_kge << ", l2 " << e.loss_l2
        << ") " << e.seconds << "s\n";
  };
  const auto result =
      train::train(corpus.split, corpus.kg, config.hyper, config.train, hook);
  model::save_checkpoint(result.params, checkpoint.string());
  write_file(log_path, train::epoch_log_csv(result.log));
  out << "checkpoint: " << checkpoint.string() << "\n";
  return kExitOk;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& checkpoint_path,
                 bool oracle, std::ostream& out, std::ostream& err) {
  Overrides o = collect_overrides(flags);
  if (flags.seed) o.emplace_back("eval.seed", std::to_string(*flags.seed));
  RunConfig config = load_run_config(flags.config, o, true);
  const model::ModelParams params = model::load_checkpoint(checkpoint_path);
  config.hyper = params.hyper;
  const Corpus corpus = load_corpus(config);
  if (params.num_entities() != corpus.kg.entities.size()) {
    throw ConfigError("checkpoint has " + std::to_string(params.num_entities()) +
                      " entities but the data defines " +
                      std::to_string(corpus.kg.entities.size()));
  }
  const eval::Split& split = corpus.split;
  eval::ScoreFn score;
  if (oracle) {
    // Debug upper bound: a test positive outranks every negative.
    score = [&split](kg::UserId u, std::span<const kg::ItemId> items) {
      std::vector<double> s;
      const auto& test = split.test[u];
      for (kg::ItemId v : items) {
        s.push_back(std::find(test.begin(), test.end(), v) != test.end() ? 1.0 : 0.0);
      }
      return s;
    };
  } else {
    const std::size_t length = params.hyper.history_length;
    score = [&split, &params, &corpus, length](
                kg::UserId u, std::span<const kg::ItemId> items) {
      const auto recent = split.recent_train(u, length);
      const auto history = model::UserHistory::from_recent(recent, length);
      diff::Tape tape(params.store);
      model::Network net(tape, params, corpus.kg.attributes);
      std::vector<double> s;
      s.reserve(items.size());
      for (kg::ItemId v : items) s.push_back(net.predict(history, v).value()[0]);
      return s;
    };
  }
  const train::PopularitySampler sampler(split.train_popularity(),
                                         config.train.popularity_floor);
  eval::EvalOptions options = config.eval;
  options.threads = eval_threads();
  const eval::MetricTable table =
      eval::evaluate(score, split, sampler, config.split, options);

  const fs::path dir(config.out_dir);
  fs::create_directories(dir);
  write_file(dir / "metrics.csv", table.to_csv());
  write_file(dir / "metrics.json", table.to_json());
  out << table.to_csv();
  if (table.users_skipped) {
    err << "skipped " << table.users_skipped << " users without history\n";
  }
  return kExitOk;
}

int cmd_gradcheck(const CommonFlags& flags, std::ostream& out) {
  Overrides o = collect_overrides(flags);
  if (flags.seed) o.emplace_back("train.seed", std::to_string(*flags.seed));
  const RunConfig config = load_run_config(flags.config, o, false);

  Corpus corpus;
  if (!config.interactions_path.empty()) {
    if (!fs::is_regular_file(config.interactions_path)) {
      throw ConfigError("data.interactions: file not found: " +
                        config.interactions_path);
    }
    corpus = load_corpus(config);
  } else {
    synth::WorldSpec spec;
    spec.num_users = 6;
    spec.num_items = 16;
    spec.num_attributes = config.hyper.num_attributes;
    spec.values_per_attribute = 3;
    spec.min_interactions = 5;
    spec.max_interactions = 7;
    spec.seed = config.train.seed;
    const auto world = synth::generate(spec);
    const fs::path tmp = fs::temp_directory_path() /
                         ("acam_gradcheck_" + std::to_string(::getpid()));
    synth::write_dataset(world, tmp.string());
    RunConfig tiny = config;
    tiny.interactions_path = (tmp / "interactions.tsv").string();
    tiny.triples_path = (tmp / "triples.tsv").string();
    tiny.relations.clear();
    tiny.split.test_positives = 1;
    corpus = load_corpus(tiny);
    fs::remove_all(tmp);
  }

  model::ModelParams params = model::init_params(
      config.hyper, corpus.kg.entities.size(), config.train.seed);
  std::mt19937_64 rng(config.train.seed);
  // Zero biases put a unit exactly on a ReLU kink whenever all of its
  // inputs are dead; check at a generic point instead.
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (diff::ParamId id = 0; id < params.store.size(); ++id) {
    if (params.store.name(id).find("_b") == std::string::npos) continue;
    for (double& v : params.store.value(id).data()) v = jitter(rng);
  }
  const train::PopularitySampler sampler(corpus.split.train_popularity(),
                                         config.train.popularity_floor);
  auto pairs = train::build_epoch_pairs(corpus.split, sampler,
                                        config.train.negatives_per_positive,
                                        config.hyper.history_length, rng);
  if (pairs.empty()) throw Error("gradcheck: no training pairs in the data");
  pairs.resize(std::min<std::size_t>(pairs.size(), 8));
  std::vector<model::UserHistory> histories;
  for (const auto& p : pairs) {
    histories.push_back(
        train::history_for(corpus.split, p, config.hyper.history_length));
  }
  std::vector<kg::Triple> triples(
      corpus.kg.triples.begin(),
      corpus.kg.triples.begin() +
          std::min<std::size_t>(corpus.kg.triples.size(), 8));

  const auto report = diff::check_gradients(
      params.store, [&](diff::Tape& tape) {
        model::Network net(tape, params, corpus.kg.attributes);
        return train::joint_loss(net, pairs, histories, triples, params).total;
      });
  out << report.summary();
  return report.failing_tensors() == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ACAM: attribute-level co-attention recommender", "acam"};
  app.require_subcommand(1);

  std::string spec_path, gen_out;
  std::optional<std::uint64_t> gen_seed;
  auto* generate = app.add_subcommand("generate", "write a synthetic dataset");
  generate->add_option("spec", spec_path, "world spec file ([world] section)")
      ->required();
  generate->add_option("out_dir", gen_out, "output directory")->required();
  generate->add_option("--seed", gen_seed, "world.seed override");
  {
    synth::WorldSpec defaults;
    generate->footer(describe_keys(world_spec_keys(defaults)));
  }

  CommonFlags train_flags;
  std::optional<std::size_t> epochs;
  std::optional<double> lambda1;
  bool no_coattention = false;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, train_flags);
  train_cmd->add_option("--epochs", epochs, "train.epochs override");
  train_cmd->add_option("--lambda1", lambda1, "model.lambda1 override");
  train_cmd->add_flag("--no-coattention", no_coattention,
                      "replace softmax(S) by uniform weights");
  train_cmd->footer(run_keys_help());

  CommonFlags eval_flags;
  std::string checkpoint;
  bool oracle = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint");
  add_common(eval_cmd, eval_flags);
  eval_cmd->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_flag("--oracle-scorer", oracle,
                     "debug: score by the held-out test set");
  eval_cmd->footer(run_keys_help());

  CommonFlags grad_flags;
  auto* grad_cmd = app.add_subcommand("gradcheck",
                                      "finite-difference check of the loss gradient");
  add_common(grad_cmd, grad_flags);
  grad_cmd->footer(run_keys_help());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*generate) return cmd_generate(spec_path, gen_out, gen_seed, out);
    if (*train_cmd) {
      return cmd_train(train_flags, epochs, lambda1, no_coattention, out);
    }
    if (*eval_cmd) return cmd_evaluate(eval_flags, checkpoint, oracle, out, err);
    if (*grad_cmd) return cmd_gradcheck(grad_flags, out);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace acam::cli
