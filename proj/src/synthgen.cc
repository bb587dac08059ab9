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

#include "acam/synthgen.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "acam/error.h"
#include "acam/sampler.h"
#include "json.hpp"

namespace acam::synth {

using train::unit_uniform;

void WorldSpec::validate() const {
  std::vector<std::string> errors;
  if (num_users < 1) errors.push_back("users must be >= 1");
  if (num_items < 1) errors.push_back("items must be >= 1");
  if (num_attributes < 1) errors.push_back("attributes must be >= 1");
  if (values_per_attribute < 1) errors.push_back("values_per_attribute must be >= 1");
  if (values_per_attribute > num_items) {
    errors.push_back("values_per_attribute exceeds the number of items");
  }
  if (min_interactions < 1) errors.push_back("min_interactions must be >= 1");
  if (min_interactions > max_interactions) {
    errors.push_back("min_interactions exceeds max_interactions");
  }
  if (max_interactions > num_items) {
    errors.push_back("max_interactions exceeds the number of items");
  }
  if (taste_seeds < 1 || taste_seeds > num_items) {
    errors.push_back("taste_seeds must be in [1, items]");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) errors.push_back("rho must be in [0, 1]");
  if (!(sharpness >= 0.0)) errors.push_back("sharpness must be >= 0");
  if (!(popularity_skew >= 0.0)) errors.push_back("popularity_skew must be >= 0");
  if (!(multi_value_prob >= 0.0 && multi_value_prob <= 1.0)) {
    errors.push_back("multi_value_prob must be in [0, 1]");
  }
  if (multi_value_prob > 0.0 && values_per_attribute < 2) {
    errors.push_back("multi-valued attributes need values_per_attribute >= 2");
  }
  if (!(pair_noise >= 0.0)) errors.push_back("pair_noise must be >= 0");
  if (errors.empty()) return;
  std::string msg = "infeasible world spec:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

namespace {

double gaussian(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(unit_uniform(rng) * n));
}

void normalize(Latent& z) {
  double n = 0.0;
  for (double v : z) n += v * v;
  n = std::sqrt(n);
  if (n == 0.0) return;
  for (double& v : z) v /= n;
}

Latent random_unit(std::mt19937_64& rng) {
  Latent z;
  for (double& v : z) v = gaussian(rng);
  normalize(z);
  return z;
}

double dot(const Latent& a, const Latent& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kLatentDim; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

// Index drawn proportionally to `mass` (nonnegative, positive total).
std::size_t draw(const std::vector<double>& mass, double total,
                 std::mt19937_64& rng) {
  double x = unit_uniform(rng) * total;
  std::size_t last = 0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0.0) continue;
    last = i;
    if (x < mass[i]) return i;
    x -= mass[i];
  }
  return last;
}

}  // namespace

std::string user_name(std::size_t u) { return "u" + std::to_string(u); }
std::string item_name(std::size_t v) { return "i" + std::to_string(v); }
std::string attribute_name(std::size_t a) { return "attr" + std::to_string(a + 1); }
std::string value_name(std::size_t a, std::size_t k) {
  return "a" + std::to_string(a + 1) + "_v" + std::to_string(k);
}

World build_world(const WorldSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  World w;
  w.spec = spec;
  const std::size_t m = spec.num_attributes, vals = spec.values_per_attribute;

  // Attribute 0 values get independent directions; every value of a later
  // attribute shares the direction of one attribute-0 value.
  w.value_latents.assign(m, std::vector<Latent>(vals));
  for (auto& z : w.value_latents[0]) z = random_unit(rng);
  for (std::size_t a = 1; a < m; ++a) {
    std::vector<std::size_t> partner(vals);
    std::iota(partner.begin(), partner.end(), std::size_t{0});
    shuffle(partner, rng);
    for (std::size_t k = 0; k < vals; ++k) {
      Latent z = w.value_latents[0][partner[k]];
      for (double& v : z) v += spec.pair_noise * gaussian(rng) / std::sqrt(kLatentDim);
      normalize(z);
      w.value_latents[a][k] = z;
      w.planted.push_back({0, partner[k], a, k});
    }
  }

  // Every value is used by at least one item.
  w.item_values.assign(spec.num_items, std::vector<std::vector<std::size_t>>(m));
  for (std::size_t a = 0; a < m; ++a) {
    std::vector<std::size_t> primary(spec.num_items);
    for (std::size_t i = 0; i < spec.num_items; ++i) primary[i] = i % vals;
    shuffle(primary, rng);
    for (std::size_t i = 0; i < spec.num_items; ++i) {
      auto& slot = w.item_values[i][a];
      slot.push_back(primary[i]);
      if (unit_uniform(rng) < spec.multi_value_prob) {
        std::size_t extra = uniform_index(rng, vals - 1);
        if (extra >= primary[i]) ++extra;
        slot.push_back(extra);
      }
    }
  }
  w.item_latents.resize(spec.num_items);
  for (std::size_t i = 0; i < spec.num_items; ++i) {
    Latent z{};
    std::size_t count = 0;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t k : w.item_values[i][a]) {
        for (std::size_t c = 0; c < kLatentDim; ++c) z[c] += w.value_latents[a][k][c];
        ++count;
      }
    }
    for (double& v : z) v /= static_cast<double>(count);
    normalize(z);
    w.item_latents[i] = z;
  }

  std::vector<std::size_t> ranks(spec.num_items);
  std::iota(ranks.begin(), ranks.end(), std::size_t{1});
  shuffle(ranks, rng);
  w.item_bias.resize(spec.num_items);
  for (std::size_t i = 0; i < spec.num_items; ++i) {
    w.item_bias[i] = -spec.popularity_skew * std::log(static_cast<double>(ranks[i]));
  }

  w.user_seeds.resize(spec.num_users);
  w.user_latents.resize(spec.num_users);
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    std::vector<std::size_t> all(spec.num_items);
    std::iota(all.begin(), all.end(), std::size_t{0});
    // Partial shuffle: the first taste_seeds entries are a uniform sample.
    for (std::size_t k = 0; k < spec.taste_seeds; ++k) {
      std::swap(all[k], all[k + uniform_index(rng, spec.num_items - k)]);
    }
    w.user_seeds[u].assign(all.begin(), all.begin() + spec.taste_seeds);
    w.user_latents[u] = taste_from_items(w, w.user_seeds[u]);
  }
  return w;
}

Latent taste_from_items(const World& world,
                        const std::vector<std::size_t>& items) {
  Latent z{};
  for (std::size_t i : items) {
    for (std::size_t c = 0; c < kLatentDim; ++c) z[c] += world.item_latents.at(i)[c];
  }
  normalize(z);
  return z;
}

std::vector<double> interaction_distribution(const World& world,
                                             const Latent& user) {
  const auto& spec = world.spec;
  const std::size_t n = world.item_latents.size();
  std::vector<double> logits(n);
  double mx = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = spec.sharpness * dot(user, world.item_latents[i]) + world.item_bias[i];
    mx = std::max(mx, logits[i]);
  }
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    z += l;
  }
  const double uniform = (1.0 - spec.rho) / static_cast<double>(n);
  for (double& l : logits) l = spec.rho * l / z + uniform;
  return logits;
}

SyntheticDataset generate(const WorldSpec& spec) {
  SyntheticDataset out;
  out.world = build_world(spec);
  const World& w = out.world;
  // Separate stream so the world does not shift when interaction counts do.
  std::mt19937_64 rng(spec.seed ^ 0x1a7e57f00dULL);
  std::int64_t clock = 0;
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    const std::size_t count =
        spec.min_interactions +
        uniform_index(rng, spec.max_interactions - spec.min_interactions + 1);
    std::vector<double> mass = interaction_distribution(w, w.user_latents[u]);
    double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t item = draw(mass, total, rng);
      out.interactions.push_back({u, item, ++clock});
      total -= mass[item];
      mass[item] = 0.0;
    }
  }

  std::ostringstream inter;
  inter << "user\titem\ttimestamp\n";
  for (const auto& row : out.interactions) {
    inter << user_name(row.user) << '\t' << item_name(row.item) << '\t'
          << row.timestamp << '\n';
  }
  out.interactions_tsv = inter.str();

  std::ostringstream triples;
  for (std::size_t i = 0; i < spec.num_items; ++i) {
    for (std::size_t a = 0; a < spec.num_attributes; ++a) {
      for (std::size_t k : w.item_values[i][a]) {
        triples << item_name(i) << '\t' << attribute_name(a) << '\t'
                << value_name(a, k) << '\n';
      }
    }
  }
  out.triples_tsv = triples.str();

  nlohmann::ordered_json gt;
  gt["spec"] = {{"users", spec.num_users},
                {"items", spec.num_items},
                {"attributes", spec.num_attributes},
                {"values_per_attribute", spec.values_per_attribute},
                {"rho", spec.rho},
                {"seed", spec.seed}};
  auto& pairs = gt["planted_pairs"];
  pairs = nlohmann::ordered_json::array();
  for (const auto& p : w.planted) {
    pairs.push_back({value_name(p.attribute_a, p.value_a),
                     value_name(p.attribute_b, p.value_b)});
  }
  auto& users = gt["users"];
  users = nlohmann::ordered_json::object();
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    const auto dist = interaction_distribution(w, w.user_latents[u]);
    std::vector<std::size_t> order(dist.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t top = std::min<std::size_t>(20, order.size());
    std::partial_sort(order.begin(), order.begin() + top, order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return dist[a] != dist[b] ? dist[a] > dist[b] : a < b;
                      });
    nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
    for (std::size_t s : w.user_seeds[u]) seeds.push_back(item_name(s));
    nlohmann::ordered_json preferred = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < top; ++k) preferred.push_back(item_name(order[k]));
    users[user_name(u)] = {{"taste_seeds", seeds}, {"top_items", preferred}};
  }
  out.ground_truth_json = gt.dump(2) + "\n";
  return out;
}

void write_dataset(const SyntheticDataset& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& body) {
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << body;
  };
  write("interactions.tsv", data.interactions_tsv);
  write("triples.tsv", data.triples_tsv);
  write("ground_truth.json", data.ground_truth_json);
}

}  // namespace acam::synth
