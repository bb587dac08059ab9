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

// Joint cross-entropy + transH objective and the Adam training loop.

#ifndef ACAM_TRAINING_H_
#define ACAM_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "acam/error.h"
#include "acam/eval.h"
#include "acam/kgstore.h"
#include "acam/model.h"
#include "acam/sampler.h"
#include "acam/tape.h"

namespace acam::train {

using kg::UserId;

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t epochs = 10;
  std::size_t negatives_per_positive = 4;
  std::size_t kge_batch = 256;
  std::uint64_t seed = 1;
  double popularity_floor = 0.1;

  void validate() const;
};

struct LabeledPair {
  UserId user;
  ItemId item;
  std::uint8_t label;
  // The positive this pair was generated for; it is left out of the user's
  // history so a positive never sees itself.
  ItemId anchor;
};

// Every pair of one epoch: each training positive followed by
// `negatives` popularity-sampled negatives, then shuffled. Positives whose
// history would be empty are dropped together with their negatives.
std::vector<LabeledPair> build_epoch_pairs(const eval::Split& data,
                                           const PopularitySampler& sampler,
                                           std::size_t negatives,
                                           std::size_t history_length,
                                           std::mt19937_64& rng);

model::UserHistory history_for(const eval::Split& data, const LabeledPair& pair,
                               std::size_t history_length);

struct LossTerms {
  diff::Var total;
  diff::Var bce;  // mean binary cross-entropy
  diff::Var kge;  // lambda1 * mean transH energy (absent when not used)
  diff::Var l2;   // lambda2 * ||Theta||^2 (absent when not used)
  double bce_value = 0.0, kge_value = 0.0, l2_value = 0.0;
};

// mean BCE over `pairs` + lambda1 * mean energy over `triples`
// + lambda2 * squared norm of every parameter. Terms with a zero weight or
// an empty sample are left off the tape.
LossTerms joint_loss(model::Network& net, std::span<const LabeledPair> pairs,
                     std::span<const model::UserHistory> histories,
                     std::span<const kg::Triple> triples,
                     const model::ModelParams& params);

class Adam {
 public:
  explicit Adam(const diff::ParamStore& store, double learning_rate,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(diff::ParamStore& store, const diff::Gradients& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<diff::Tensor> m_, v_;
};

struct EpochStats {
  std::size_t epoch;
  double loss_total, loss_bce, loss_kge, loss_l2;
  double seconds;
};

// `epoch,loss_total,loss_bce,loss_kge,loss_l2,seconds` with header.
std::string epoch_log_csv(std::span<const EpochStats> log);

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct TrainResult {
  model::ModelParams params;
  std::vector<EpochStats> log;
};

using EpochHook =
    std::function<void(const model::ModelParams&, const EpochStats&)>;

// Initializes parameters from config.seed and trains for config.epochs.
TrainResult train(const eval::Split& data, const kg::KnowledgeGraph& kg,
                  const model::Hyperparams& hyper, const TrainConfig& config,
                  const EpochHook& on_epoch = {});

// Continues training `params` in place.
std::vector<EpochStats> train_params(model::ModelParams& params,
                                     const eval::Split& data,
                                     const kg::KnowledgeGraph& kg,
                                     const TrainConfig& config,
                                     const EpochHook& on_epoch = {});

// Mean transH energy over `triples` at the current parameters.
double mean_energy(const model::ModelParams& params,
                   std::span<const kg::Triple> triples);

using StepHook = std::function<void(const model::ModelParams&)>;

// Minimizes the transH term alone with full-batch Adam. Returns the mean
// energy before the first step and after each step (steps + 1 values).
// Relation normals are renormalized after every step, before `on_step`.
std::vector<double> train_kge_only(model::ModelParams& params,
                                   std::span<const kg::Triple> triples,
                                   std::size_t steps, double learning_rate,
                                   const StepHook& on_step = {});

}  // namespace acam::train

#endif  // ACAM_TRAINING_H_
