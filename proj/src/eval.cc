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

#include "acam/eval.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "acam/error.h"
#include "json.hpp"

namespace acam::eval {

void SplitSpec::validate() const {
  if (test_positives < 1) throw ConfigError("test positives per user must be >= 1");
  if (negatives_per_positive < 1) {
    throw ConfigError("evaluation negatives per positive must be >= 1");
  }
}

std::vector<ItemId> Split::recent_train(UserId user, std::size_t count,
                                        std::optional<ItemId> exclude) const {
  std::vector<ItemId> out;
  const auto& items = train.at(user);
  for (auto it = items.rbegin(); it != items.rend() && out.size() < count; ++it) {
    if (exclude && *it == *exclude) continue;
    out.push_back(*it);
  }
  return out;
}

std::vector<ItemId> Split::positives(UserId user) const {
  std::vector<ItemId> out(train.at(user));
  out.insert(out.end(), test.at(user).begin(), test.at(user).end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> Split::train_popularity() const {
  std::vector<double> counts(num_items, 0.0);
  for (const auto& items : train) {
    for (ItemId v : items) counts.at(v) += 1.0;
  }
  return counts;
}

Split split(std::span<const kg::Interaction> interactions,
            std::size_t num_users, std::size_t num_items,
            const SplitSpec& spec) {
  spec.validate();
  std::vector<std::vector<kg::Interaction>> by_user(num_users);
  for (const auto& x : interactions) {
    if (x.user >= num_users || x.item >= num_items) {
      throw Error("interaction references an id outside the vocabulary");
    }
    by_user[x.user].push_back(x);
  }
  Split out;
  out.num_users = num_users;
  out.num_items = num_items;
  out.train.resize(num_users);
  out.test.resize(num_users);
  for (UserId u = 0; u < num_users; ++u) {
    auto& rows = by_user[u];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) {
                       return a.timestamp < b.timestamp;
                     });
    const bool evaluated = rows.size() > spec.test_positives;
    const std::size_t cut = evaluated ? rows.size() - spec.test_positives
                                      : rows.size();
    for (std::size_t k = 0; k < rows.size(); ++k) {
      (k < cut ? out.train[u] : out.test[u]).push_back(rows[k].item);
    }
    if (evaluated) out.eval_users.push_back(u);
  }
  return out;
}

RankedList RankedList::rank(std::vector<ItemId> items,
                            std::vector<double> scores,
                            std::vector<std::uint8_t> labels) {
  if (items.size() != scores.size() || items.size() != labels.size()) {
    throw DimensionError("ranked list: items, scores and labels differ in length");
  }
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return items[a] < items[b];
  });
  RankedList out;
  for (std::size_t k : order) {
    out.items.push_back(items[k]);
    out.scores.push_back(scores[k]);
    out.labels.push_back(labels[k] ? 1 : 0);
  }
  return out;
}

std::size_t RankedList::positives() const {
  return static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

namespace {

void check_cutoff(const RankedList& list, std::size_t n) {
  if (n == 0) throw Error("metric cutoff n must be >= 1");
  if (n > list.labels.size()) {
    throw Error("metric cutoff n = " + std::to_string(n) +
                " exceeds list length " + std::to_string(list.labels.size()));
  }
}

}  // namespace

double hr_at_n(const RankedList& list, std::size_t n) {
  check_cutoff(list, n);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) hits += list.labels[k];
  return static_cast<double>(hits) / static_cast<double>(n);
}

double ndcg_at_n(const RankedList& list, std::size_t n) {
  check_cutoff(list, n);
  const std::size_t p = list.positives();
  if (p == 0) throw Error("ndcg: list has no relevant items");
  double dcg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (list.labels[k]) dcg += 1.0 / std::log2(static_cast<double>(k + 2));
  }
  double ideal = 0.0;
  for (std::size_t k = 0; k < std::min(n, p); ++k) {
    ideal += 1.0 / std::log2(static_cast<double>(k + 2));
  }
  return dcg / ideal;
}

double rr(const RankedList& list) {
  for (std::size_t k = 0; k < list.labels.size(); ++k) {
    if (list.labels[k]) return 1.0 / static_cast<double>(k + 1);
  }
  throw Error("rr: list has no relevant items");
}

double MetricTable::get(const std::string& metric, std::size_t n) const {
  for (const auto& v : values) {
    if (v.metric == metric && v.n == n) return v.value;
  }
  throw Error("metric not computed: " + metric + "@" + std::to_string(n));
}

std::string MetricTable::to_csv() const {
  std::ostringstream out;
  out << "metric,n,value,stderr\n" << std::setprecision(17);
  for (const auto& v : values) {
    out << v.metric << ',';
    if (v.metric != "rr") out << v.n;
    out << ',' << v.value << ',' << v.stderr_ << '\n';
  }
  return out.str();
}

std::string MetricTable::to_json() const {
  nlohmann::ordered_json j;
  j["users_evaluated"] = users_evaluated;
  j["users_skipped"] = users_skipped;
  j["repetitions"] = repetitions;
  auto& metrics = j["metrics"];
  metrics = nlohmann::ordered_json::object();
  for (const auto& v : values) {
    const std::string key = v.metric == "rr" ? "rr" : v.metric + "@" + std::to_string(v.n);
    metrics[key] = {{"value", v.value}, {"stderr", v.stderr_}};
  }
  return j.dump(2) + "\n";
}

MetricTable evaluate(const ScoreFn& score, const Split& data,
                     const train::PopularitySampler& sampler,
                     const SplitSpec& spec, const EvalOptions& options) {
  spec.validate();
  if (options.repetitions < 1) throw ConfigError("evaluation repetitions must be >= 1");
  for (std::size_t n : options.n_values) {
    if (n == 0) throw ConfigError("metric cutoff n must be >= 1");
  }
  MetricTable table;
  table.repetitions = options.repetitions;

  std::vector<UserId> users;
  for (UserId u : data.eval_users) {
    if (data.train.at(u).empty() || data.test.at(u).empty()) {
      ++table.users_skipped;
    } else {
      users.push_back(u);
    }
  }
  table.users_evaluated = users.size();

  struct Job {
    UserId user;
    std::vector<ItemId> candidates;
    std::vector<std::uint8_t> labels;
    std::vector<double> scores;
  };
  std::mt19937_64 rng(options.seed);
  std::vector<Job> jobs;
  jobs.reserve(users.size() * options.repetitions);
  for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
    for (UserId u : users) {
      const auto& pos = data.test[u];
      Job job{u, pos, std::vector<std::uint8_t>(pos.size(), 1), {}};
      const auto excluded = data.positives(u);
      auto negs = train::sample_negatives(spec.negatives_per_positive * pos.size(),
                                          sampler, excluded, rng);
      job.candidates.insert(job.candidates.end(), negs.begin(), negs.end());
      job.labels.resize(job.candidates.size(), 0);
      jobs.push_back(std::move(job));
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      jobs[k].scores = score(jobs[k].user, jobs[k].candidates);
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // metric slots: hr@n..., ndcg@n..., rr
  const std::size_t nn = options.n_values.size();
  const std::size_t slots = 2 * nn + 1;
  std::vector<std::vector<double>> per_user(users.size(),
                                            std::vector<double>(slots, 0.0));
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    Job& job = jobs[k];
    if (job.scores.size() != job.candidates.size()) {
      throw Error("scorer returned the wrong number of scores");
    }
    RankedList list = RankedList::rank(std::move(job.candidates),
                                       std::move(job.scores),
                                       std::move(job.labels));
    auto& acc = per_user[k % users.size()];
    for (std::size_t i = 0; i < nn; ++i) {
      const std::size_t n = std::min(options.n_values[i], list.items.size());
      acc[i] += hr_at_n(list, n);
      acc[nn + i] += ndcg_at_n(list, n);
    }
    acc[2 * nn] += rr(list);
  }

  auto summarize = [&](std::size_t slot) {
    const double reps = static_cast<double>(options.repetitions);
    const double count = static_cast<double>(users.size());
    double mean = 0.0;
    for (const auto& acc : per_user) mean += acc[slot] / reps;
    if (users.empty()) return std::pair{0.0, 0.0};
    mean /= count;
    double var = 0.0;
    for (const auto& acc : per_user) {
      const double d = acc[slot] / reps - mean;
      var += d * d;
    }
    const double se = users.size() > 1 ? std::sqrt(var / (count - 1.0) / count) : 0.0;
    return std::pair{mean, se};
  };
  for (std::size_t i = 0; i < nn; ++i) {
    auto [v, se] = summarize(i);
    table.values.push_back({"hr", options.n_values[i], v, se});
  }
  for (std::size_t i = 0; i < nn; ++i) {
    auto [v, se] = summarize(nn + i);
    table.values.push_back({"ndcg", options.n_values[i], v, se});
  }
  auto [v, se] = summarize(2 * nn);
  table.values.push_back({"rr", 0, v, se});
  return table;
}

}  // namespace acam::eval
