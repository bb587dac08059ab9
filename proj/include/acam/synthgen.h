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

// Synthetic implicit-feedback worlds with planted attribute correlations.

#ifndef ACAM_SYNTHGEN_H_
#define ACAM_SYNTHGEN_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace acam::synth {

inline constexpr std::size_t kLatentDim = 8;
using Latent = std::array<double, kLatentDim>;

struct WorldSpec {
  std::size_t num_users = 200;
  std::size_t num_items = 500;
  std::size_t num_attributes = 2;
  std::size_t values_per_attribute = 20;
  // Per-user interaction counts are uniform in [min, max].
  std::size_t min_interactions = 20;
  std::size_t max_interactions = 40;
  // Size of the item set a user's taste is seeded from.
  std::size_t taste_seeds = 3;
  // Fraction of each draw that follows preferences; the rest is uniform.
  double rho = 0.8;
  // Inverse temperature of the preference softmax.
  double sharpness = 4.0;
  // Zipf exponent of the per-item popularity bias (0 disables it).
  double popularity_skew = 1.5;
  // Probability that an attribute carries a second value.
  double multi_value_prob = 0.2;
  // Noise mixed into the shared direction of a planted pair.
  double pair_noise = 0.3;
  std::uint64_t seed = 1;

  // Throws ConfigError naming every violated constraint.
  void validate() const;
};

struct PlantedPair {
  std::size_t attribute_a, value_a;  // attribute 0
  std::size_t attribute_b, value_b;
};

struct World {
  WorldSpec spec;
  // [attribute][value]
  std::vector<std::vector<Latent>> value_latents;
  // [item][attribute] -> value indices
  std::vector<std::vector<std::vector<std::size_t>>> item_values;
  std::vector<Latent> item_latents;  // unit length
  std::vector<double> item_bias;     // log popularity prior
  std::vector<std::vector<std::size_t>> user_seeds;
  std::vector<Latent> user_latents;  // unit length
  std::vector<PlantedPair> planted;
};

// Latents, items and users; no interactions yet.
World build_world(const WorldSpec& spec);

// Unit-normalized mean latent of `items`.
Latent taste_from_items(const World& world, const std::vector<std::size_t>& items);

// rho * softmax(sharpness * <user, item> + bias) + (1 - rho) / N.
std::vector<double> interaction_distribution(const World& world,
                                             const Latent& user);

struct SyntheticRow {
  std::size_t user, item;
  std::int64_t timestamp;
};

struct SyntheticDataset {
  World world;
  std::vector<SyntheticRow> interactions;
  std::string interactions_tsv;
  std::string triples_tsv;
  std::string ground_truth_json;
};

SyntheticDataset generate(const WorldSpec& spec);

// Writes interactions.tsv, triples.tsv and ground_truth.json into `dir`,
// creating it if needed.
void write_dataset(const SyntheticDataset& data, const std::string& dir);

std::string user_name(std::size_t u);
std::string item_name(std::size_t v);
std::string attribute_name(std::size_t a);
std::string value_name(std::size_t a, std::size_t k);

}  // namespace acam::synth

#endif  // ACAM_SYNTHGEN_H_
