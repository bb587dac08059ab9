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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "acam/error.h"
#include "acam/eval.h"
#include "doctest.h"
#include "nlohmann/json.hpp"

namespace acam::eval {
namespace {

RankedList from_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<ItemId> items(labels.size());
  std::vector<double> scores(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    items[i] = static_cast<ItemId>(i);
    scores[i] = static_cast<double>(labels.size() - i);
  }
  return RankedList::rank(items, scores, labels);
}

TEST_CASE("split keeps the latest interactions for test") {
  std::vector<kg::Interaction> log;
  for (ItemId v = 0; v < 12; ++v) log.push_back({0, v, 100 - static_cast<int>(v)});
  for (ItemId v = 0; v < 10; ++v) log.push_back({1, v, static_cast<int>(v)});
  // Ties: stable by input order.
  for (ItemId v = 0; v < 4; ++v) log.push_back({2, v, 7});
  SplitSpec spec;
  Split s = split(log, 3, 12, spec);
  CHECK(s.train[0] == std::vector<ItemId>{11, 10});
  CHECK(s.test[0].size() == 10);
  CHECK(s.test[0].front() == 9);
  CHECK(s.eval_users == std::vector<UserId>{0});
  CHECK(s.train[1].size() == 10);
  CHECK(s.test[1].empty());
  CHECK(s.recent_train(0, 5) == std::vector<ItemId>{10, 11});
  CHECK(s.recent_train(0, 5, ItemId{10}) == std::vector<ItemId>{11});

  spec.test_positives = 2;
  s = split(log, 3, 12, spec);
  CHECK(s.train[2] == std::vector<ItemId>{0, 1});
  CHECK(s.test[2] == std::vector<ItemId>{2, 3});
  const auto pos = s.positives(2);
  CHECK(pos == std::vector<ItemId>{0, 1, 2, 3});
  const auto pop = s.train_popularity();
  CHECK(pop.size() == 12);
  CHECK(pop[0] == 2.0);  // u1 and u2 train, u0 test
}

TEST_CASE("split spec validation") {
  SplitSpec spec;
  spec.negatives_per_positive = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("ranking breaks ties by item id") {
  const auto list = RankedList::rank({5, 2, 9, 1}, {0.5, 0.5, 0.9, 0.1}, {0, 1, 0, 1});
  CHECK(list.items == std::vector<ItemId>{9, 2, 5, 1});
  CHECK(list.labels == std::vector<std::uint8_t>{0, 1, 0, 1});
  CHECK(list.positives() == 2);
}

TEST_CASE("hand computed metric values") {
  const auto all = from_labels({1, 1, 1, 0});
  CHECK(hr_at_n(all, 3) == 1.0);
  CHECK(ndcg_at_n(all, 3) == 1.0);

  const auto late = from_labels({0, 0, 0, 1, 0});
  CHECK(hr_at_n(late, 3) == 0.0);
  CHECK(ndcg_at_n(late, 3) == 0.0);
  CHECK(rr(late) == 0.25);

  // One positive at rank 2, the other nine below the top 3.
  std::vector<std::uint8_t> labels(50, 0);
  labels[1] = 1;
  for (int k = 3; k < 12; ++k) labels[k] = 1;
  const auto one = from_labels(labels);
  CHECK(hr_at_n(one, 3) == doctest::Approx(1.0 / 3));
  CHECK(ndcg_at_n(one, 3) == doctest::Approx(0.2961).epsilon(1e-4));
  CHECK(rr(one) == 0.5);

  const auto mix = from_labels({0, 1, 0, 1});
  CHECK(hr_at_n(mix, 4) == 0.5);
  CHECK(ndcg_at_n(mix, 4) == doctest::Approx(0.6509).epsilon(1e-4));
  CHECK(rr(mix) == 0.5);

  CHECK_THROWS_AS(hr_at_n(mix, 0), Error);
  CHECK_THROWS_AS(ndcg_at_n(mix, 5), Error);
  CHECK_THROWS_AS(rr(from_labels({0, 0})), Error);
}

TEST_CASE("metrics equal brute force loops") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t len = 5 + rng() % 46;
    std::vector<std::uint8_t> labels(len, 0);
    const std::size_t p = 1 + rng() % len;
    for (std::size_t i = 0; i < p; ++i) labels[i] = 1;
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto list = from_labels(labels);
    for (std::size_t n = 1; n <= len; ++n) {
      double hits = 0, dcg = 0, idcg = 0;
      for (std::size_t k = 0; k < n; ++k) {
        hits += labels[k];
        dcg += labels[k] / std::log2(k + 2.0);
      }
      for (std::size_t k = 0; k < std::min(n, p); ++k) idcg += 1.0 / std::log2(k + 2.0);
      CHECK(hr_at_n(list, n) == hits / n);
      CHECK(ndcg_at_n(list, n) == dcg / idcg);
    }
    std::size_t first = 0;
    while (!labels[first]) ++first;
    CHECK(rr(list) == 1.0 / (first + 1));
  }
}

TEST_CASE("metrics ignore monotone score transforms") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ItemId> items(20);
    std::iota(items.begin(), items.end(), 0);
    std::vector<double> s(20), t(20);
    std::vector<std::uint8_t> labels(20);
    for (std::size_t i = 0; i < 20; ++i) {
      s[i] = std::round(u(rng) * 4) / 4;  // ties included
      t[i] = std::exp(2 * s[i]) + 1;
      labels[i] = rng() % 4 == 0;
    }
    labels[0] = 1;
    const auto a = RankedList::rank(items, s, labels);
    const auto b = RankedList::rank(items, t, labels);
    for (std::size_t n : {3, 5, 10}) {
      CHECK(hr_at_n(a, n) == hr_at_n(b, n));
      CHECK(ndcg_at_n(a, n) == ndcg_at_n(b, n));
    }
    CHECK(rr(a) == rr(b));
    CHECK(rr(a) > 0.0);
    CHECK(rr(a) <= 1.0);
  }
}

// 30 users with 14 interactions each over 200 items.
Split synthetic_split() {
  std::vector<kg::Interaction> log;
  std::int64_t ts = 0;
  for (UserId u = 0; u < 30; ++u) {
    for (int k = 0; k < 14; ++k) log.push_back({u, (u * 7 + k * 13) % 200, ts++});
  }
  return split(log, 30, 200, SplitSpec{});
}

TEST_CASE("perfect and random scorers") {
  const Split s = synthetic_split();
  const train::PopularitySampler sampler(s.train_popularity());
  ScoreFn perfect = [&s](UserId u, std::span<const ItemId> items) {
    std::vector<double> out;
    for (ItemId v : items) {
      out.push_back(std::count(s.test[u].begin(), s.test[u].end(), v) ? 1.0 : 0.0);
    }
    return out;
  };
  const MetricTable t = evaluate(perfect, s, sampler, SplitSpec{}, EvalOptions{});
  CHECK(t.get("hr", 3) == 1.0);
  CHECK(t.get("ndcg", 3) == 1.0);
  CHECK(t.get("rr") == 1.0);
  CHECK(t.users_evaluated == 30);
  CHECK_THROWS(t.get("hr", 7));

  ScoreFn constant = [](UserId, std::span<const ItemId> items) {
    return std::vector<double>(items.size(), 0.0);
  };
  EvalOptions opt;
  opt.threads = 3;
  const MetricTable c1 = evaluate(constant, s, sampler, SplitSpec{}, opt);
  opt.threads = 1;
  const MetricTable c2 = evaluate(constant, s, sampler, SplitSpec{}, opt);
  CHECK(c1.to_csv() == c2.to_csv());
  opt.seed = 2;
  CHECK(evaluate(constant, s, sampler, SplitSpec{}, opt).to_csv() != c1.to_csv());
}

TEST_CASE("random scorer hit ratio converges to the positive fraction") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  double sum3 = 0, sum10 = 0;
  const int lists = 10000;
  for (int i = 0; i < lists; ++i) {
    std::vector<ItemId> items(50);
    std::iota(items.begin(), items.end(), 0);
    std::vector<double> scores(50);
    std::vector<std::uint8_t> labels(50, 0);
    for (std::size_t k = 0; k < 50; ++k) scores[k] = u(rng);
    for (std::size_t k = 0; k < 10; ++k) labels[k] = 1;
    const auto list = RankedList::rank(items, scores, labels);
    sum3 += hr_at_n(list, 3);
    sum10 += hr_at_n(list, 10);
  }
  CHECK(std::abs(sum3 / lists - 0.2) <= 0.01);
  CHECK(std::abs(sum10 / lists - 0.2) <= 0.01);
}

TEST_CASE("metric table output formats") {
  MetricTable t;
  t.values = {{"hr", 3, 0.5, 0.1}, {"rr", 0, 0.25, 0.0}};
  CHECK(t.to_csv() == "metric,n,value,stderr\nhr,3,0.5,0.10000000000000001\nrr,,0.25,0\n");
  const auto j = nlohmann::json::parse(t.to_json());
  CHECK(j.is_object());
  CHECK(t.get("rr") == 0.25);
}

TEST_CASE("users without history are skipped") {
  std::vector<kg::Interaction> log;
  for (ItemId v = 0; v < 12; ++v) log.push_back({0, v, v});
  Split s = split(log, 1, 100, SplitSpec{});
  s.train[0].clear();
  const train::PopularitySampler sampler(std::vector<double>(100, 1.0));
  ScoreFn constant = [](UserId, std::span<const ItemId> items) {
    return std::vector<double>(items.size(), 0.0);
  };
  const MetricTable t = evaluate(constant, s, sampler, SplitSpec{}, EvalOptions{});
  CHECK(t.users_skipped == 1);
  CHECK(t.users_evaluated == 0);
}

}  // namespace
}  // namespace acam::eval
