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

#include "acam/sampler.h"

#include <algorithm>
#include <cmath>

#include "acam/error.h"

namespace acam::train {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

PopularitySampler::PopularitySampler(std::span<const double> popularity,
                                     double floor) {
  if (popularity.empty()) throw Error("popularity sampler needs items");
  if (!(floor >= 0.0)) throw ConfigError("popularity floor must be >= 0");
  weights_.reserve(popularity.size());
  cumulative_.reserve(popularity.size());
  double total = 0.0;
  for (double p : popularity) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error("popularity counts must be finite and >= 0");
    }
    weights_.push_back(p + floor);
    has_zero_weight_ = has_zero_weight_ || p + floor == 0.0;
    total += p + floor;
    cumulative_.push_back(total);
  }
  if (!(total > 0.0)) throw Error("popularity sampler has zero total mass");
}

std::vector<ItemId> PopularitySampler::sample(std::size_t count,
                                              std::span<const ItemId> excluded,
                                              std::mt19937_64& rng) const {
  const std::size_t n = weights_.size();
  std::size_t blocked = 0;
  for (std::size_t i = 0; i < excluded.size(); ++i) {
    if (excluded[i] < n && (i == 0 || excluded[i] != excluded[i - 1])) ++blocked;
  }
  // Items with zero weight (floor 0, never seen) cannot be drawn either.
  std::size_t eligible = n - blocked;
  if (has_zero_weight_) {
    eligible = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (weights_[i] > 0.0 &&
          !std::binary_search(excluded.begin(), excluded.end(),
                              static_cast<ItemId>(i))) {
        ++eligible;
      }
    }
  }
  if (eligible < count) {
    throw Error("negative sampling: only " + std::to_string(eligible) +
                " eligible items for " + std::to_string(count) + " draws");
  }
  std::vector<ItemId> chosen;
  chosen.reserve(count);
  auto taken = [&](ItemId item) {
    return std::binary_search(excluded.begin(), excluded.end(), item) ||
           std::find(chosen.begin(), chosen.end(), item) != chosen.end();
  };
  const double total = cumulative_.back();
  std::size_t tries = 0;
  const std::size_t max_tries = 64 + 16 * count;
  while (chosen.size() < count && tries < max_tries) {
    ++tries;
    const double x = unit_uniform(rng) * total;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    if (it == cumulative_.end()) --it;
    const auto item = static_cast<ItemId>(it - cumulative_.begin());
    if (weights_[item] > 0.0 && !taken(item)) chosen.push_back(item);
  }
  if (chosen.size() == count) return chosen;

  // Dense pool: draw exactly from the remaining eligible mass.
  std::vector<ItemId> pool;
  std::vector<double> mass;
  for (std::size_t i = 0; i < n; ++i) {
    const auto item = static_cast<ItemId>(i);
    if (weights_[i] > 0.0 && !taken(item)) {
      pool.push_back(item);
      mass.push_back(weights_[i]);
    }
  }
  while (chosen.size() < count) {
    double sum = 0.0;
    for (double m : mass) sum += m;
    double x = unit_uniform(rng) * sum;
    std::size_t pick = 0;
    while (pick + 1 < mass.size() && x >= mass[pick]) {
      x -= mass[pick];
      ++pick;
    }
    chosen.push_back(pool[pick]);
    pool.erase(pool.begin() + pick);
    mass.erase(mass.begin() + pick);
  }
  return chosen;
}

std::vector<ItemId> sample_negatives(std::size_t k,
                                     const PopularitySampler& popularity,
                                     std::span<const ItemId> positives,
                                     std::mt19937_64& rng) {
  return popularity.sample(k, positives, rng);
}

}  // namespace acam::train
