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

// Leave-recent-out split, ranked candidate lists and the HR@n / nDCG@n / RR
// metrics.

#ifndef ACAM_EVAL_H_
#define ACAM_EVAL_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acam/kgstore.h"
#include "acam/sampler.h"

namespace acam::eval {

using kg::ItemId;
using kg::UserId;

struct SplitSpec {
  std::size_t test_positives = 10;
  std::size_t negatives_per_positive = 4;

  void validate() const;
};

struct Split {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  // Per user, oldest first.
  std::vector<std::vector<ItemId>> train;
  // Per user, oldest first; empty for users excluded from evaluation.
  std::vector<std::vector<ItemId>> test;
  // Users with a test set, ascending.
  std::vector<UserId> eval_users;

  // Up to `count` most recent training items, most recent first, skipping
  // `exclude`.
  std::vector<ItemId> recent_train(UserId user, std::size_t count,
                                   std::optional<ItemId> exclude = {}) const;
  // Train and test positives of `user`, sorted ascending.
  std::vector<ItemId> positives(UserId user) const;
  // Interaction counts over the training split, per item.
  std::vector<double> train_popularity() const;
};

// Per user, the `test_positives` most recent interactions (stable by input
// order on timestamp ties) form the test set. Users with no more than
// `test_positives` interactions keep everything in training and are not
// evaluated.
Split split(std::span<const kg::Interaction> interactions,
            std::size_t num_users, std::size_t num_items,
            const SplitSpec& spec);

// One user's scored candidates, sorted by score descending with ties broken
// by item id ascending.
struct RankedList {
  std::vector<ItemId> items;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;

  static RankedList rank(std::vector<ItemId> items, std::vector<double> scores,
                         std::vector<std::uint8_t> labels);
  std::size_t positives() const;
};

// Fraction of the top n that is relevant (precision at n).
double hr_at_n(const RankedList& list, std::size_t n);
// DCG of the top n over the ideal DCG with min(n, P) relevant top slots.
double ndcg_at_n(const RankedList& list, std::size_t n);
// 1 / rank of the first relevant item.
double rr(const RankedList& list);

// Scores for `candidates` of `user`. Must be safe to call concurrently.
using ScoreFn =
    std::function<std::vector<double>(UserId, std::span<const ItemId>)>;

struct MetricValue {
  std::string metric;  // "hr", "ndcg" or "rr"
  std::size_t n;       // 0 for rr
  double value;
  double stderr_;
};

struct MetricTable {
  std::vector<MetricValue> values;
  std::size_t users_evaluated = 0;
  std::size_t users_skipped = 0;
  std::size_t repetitions = 0;

  // Throws if the metric is missing.
  double get(const std::string& metric, std::size_t n = 0) const;
  // `metric,n,value,stderr` rows; rr has an empty n.
  std::string to_csv() const;
  std::string to_json() const;
};

struct EvalOptions {
  std::vector<std::size_t> n_values = {3, 5, 10};
  std::size_t repetitions = 3;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

// Pools each evaluated user's test positives with negatives_per_positive
// popularity-sampled negatives per positive, ranks them by `score` and
// averages the metrics over users and repetitions (fresh negatives each
// repetition). Users without training history are skipped and counted.
MetricTable evaluate(const ScoreFn& score, const Split& data,
                     const train::PopularitySampler& sampler,
                     const SplitSpec& spec, const EvalOptions& options);

}  // namespace acam::eval

#endif  // ACAM_EVAL_H_
