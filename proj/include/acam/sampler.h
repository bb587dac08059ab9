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

#ifndef ACAM_SAMPLER_H_
#define ACAM_SAMPLER_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "acam/kgstore.h"

namespace acam::train {

using kg::ItemId;

// Draws items with probability proportional to popularity + floor.
class PopularitySampler {
 public:
  PopularitySampler(std::span<const double> popularity, double floor = 0.1);

  std::size_t num_items() const { return weights_.size(); }
  double weight(ItemId item) const { return weights_.at(item); }

  // `count` distinct items, none in `excluded` (sorted ascending), drawn
  // sequentially without replacement. Throws when fewer than `count`
  // eligible items exist.
  std::vector<ItemId> sample(std::size_t count,
                             std::span<const ItemId> excluded,
                             std::mt19937_64& rng) const;

 private:
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  bool has_zero_weight_ = false;
};

// Convenience wrapper: k negatives for a user whose train and test positives
// are `positives` (sorted ascending).
std::vector<ItemId> sample_negatives(std::size_t k,
                                     const PopularitySampler& popularity,
                                     std::span<const ItemId> positives,
                                     std::mt19937_64& rng);

// Uniform double in [0, 1) from 53 random bits.
double unit_uniform(std::mt19937_64& rng);

}  // namespace acam::train

#endif  // ACAM_SAMPLER_H_
