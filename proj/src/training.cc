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

#include "acam/training.h"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace acam::train {

using diff::Var;

void TrainConfig::validate() const {
  std::vector<std::string> errors;
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    errors.push_back("learning_rate must be > 0");
  }
  if (batch_size < 1) errors.push_back("batch_size must be >= 1");
  if (negatives_per_positive < 1) {
    errors.push_back("negatives per positive must be >= 1");
  }
  if (kge_batch < 1) errors.push_back("kge_batch must be >= 1");
  if (!(popularity_floor >= 0.0)) errors.push_back("popularity floor must be >= 0");
  if (errors.empty()) return;
  std::string msg = "invalid training config:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

namespace {

// Fisher-Yates driven directly by the engine so the order only depends on
// the seed, not on the standard library's shuffle.
template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(unit_uniform(rng) * i);
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

std::string param_norms(const model::ModelParams& params) {
  std::ostringstream out;
  out << std::setprecision(6);
  for (diff::ParamId id = 0; id < params.store.size(); ++id) {
    out << "\n  " << params.store.name(id) << ": "
        << std::sqrt(params.store.value(id).squared_norm());
  }
  return out.str();
}

}  // namespace

std::vector<LabeledPair> build_epoch_pairs(const eval::Split& data,
                                           const PopularitySampler& sampler,
                                           std::size_t negatives,
                                           std::size_t history_length,
                                           std::mt19937_64& rng) {
  std::vector<LabeledPair> pairs;
  for (UserId u = 0; u < data.num_users; ++u) {
    const auto& items = data.train[u];
    if (items.empty()) continue;
    const auto excluded = data.positives(u);
    for (ItemId v : items) {
      if (data.recent_train(u, history_length, v).empty()) continue;
      pairs.push_back({u, v, 1, v});
      for (ItemId neg : sample_negatives(negatives, sampler, excluded, rng)) {
        pairs.push_back({u, neg, 0, v});
      }
    }
  }
  shuffle_in_place(pairs, rng);
  return pairs;
}

model::UserHistory history_for(const eval::Split& data, const LabeledPair& pair,
                               std::size_t history_length) {
  const auto recent = data.recent_train(pair.user, history_length, pair.anchor);
  return model::UserHistory::from_recent(recent, history_length);
}

LossTerms joint_loss(model::Network& net, std::span<const LabeledPair> pairs,
                     std::span<const model::UserHistory> histories,
                     std::span<const kg::Triple> triples,
                     const model::ModelParams& params) {
  if (pairs.empty()) throw Error("joint_loss: empty pair batch");
  if (pairs.size() != histories.size()) {
    throw Error("joint_loss: one history per pair required");
  }
  diff::Tape& tape = net.tape();
  const auto& h = params.hyper;
  std::vector<Var> losses;
  losses.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    Var prob = net.predict(histories[k], pairs[k].item);
    losses.push_back(diff::binary_cross_entropy(prob, pairs[k].label));
  }
  LossTerms terms;
  terms.bce = diff::mean(diff::vstack(losses));
  terms.total = terms.bce;
  terms.bce_value = terms.bce.value()[0];
  if (h.lambda1 > 0.0 && !triples.empty()) {
    terms.kge = diff::scale(
        kg::kge_batch_loss(triples, tape.param(params.entities),
                           tape.param(params.relation_normals),
                           tape.param(params.relation_translations)),
        h.lambda1);
    terms.kge_value = terms.kge.value()[0];
    terms.total = diff::add(terms.total, terms.kge);
  }
  if (h.lambda2 > 0.0) {
    std::vector<Var> norms;
    for (diff::ParamId id = 0; id < params.store.size(); ++id) {
      norms.push_back(diff::squared_norm(tape.param(id)));
    }
    terms.l2 = diff::scale(diff::sum(diff::vstack(norms)), h.lambda2);
    terms.l2_value = terms.l2.value()[0];
    terms.total = diff::add(terms.total, terms.l2);
  }
  return terms;
}

Adam::Adam(const diff::ParamStore& store, double learning_rate, double beta1,
           double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (diff::ParamId id = 0; id < store.size(); ++id) {
    m_.emplace_back(store.value(id).shape());
    v_.emplace_back(store.value(id).shape());
  }
}

void Adam::step(diff::ParamStore& store, const diff::Gradients& grads) {
  if (grads.size() != store.size()) throw Error("Adam: gradient table mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (diff::ParamId id = 0; id < store.size(); ++id) {
    auto p = store.value(id).data();
    auto g = grads[id].data();
    auto m = m_[id].data();
    auto v = v_[id].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

std::string epoch_log_csv(std::span<const EpochStats> log) {
  std::ostringstream out;
  out << "epoch,loss_total,loss_bce,loss_kge,loss_l2,seconds\n"
      << std::setprecision(17);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.loss_total << ',' << e.loss_bce << ','
        << e.loss_kge << ',' << e.loss_l2 << ',' << std::setprecision(6)
        << e.seconds << std::setprecision(17) << '\n';
  }
  return out.str();
}

TrainResult train(const eval::Split& data, const kg::KnowledgeGraph& kg,
                  const model::Hyperparams& hyper, const TrainConfig& config,
                  const EpochHook& on_epoch) {
  const std::size_t entities = std::max(kg.entities.size(), data.num_items);
  TrainResult result{model::init_params(hyper, entities, config.seed), {}};
  result.log = train_params(result.params, data, kg, config, on_epoch);
  return result;
}

std::vector<EpochStats> train_params(model::ModelParams& params,
                                     const eval::Split& data,
                                     const kg::KnowledgeGraph& kg,
                                     const TrainConfig& config,
                                     const EpochHook& on_epoch) {
  config.validate();
  const auto& hyper = params.hyper;
  std::size_t train_items = 0;
  for (const auto& items : data.train) train_items += items.size();
  if (train_items == 0) throw TrainingError("training split is empty");

  const PopularitySampler sampler(data.train_popularity(),
                                  config.popularity_floor);
  std::mt19937_64 rng(config.seed ^ 0x5eed5eed5eed5eedULL);
  Adam adam(params.store, config.learning_rate);
  std::vector<EpochStats> log;
  std::size_t batch_index = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto pairs = build_epoch_pairs(data, sampler,
                                         config.negatives_per_positive,
                                         hyper.history_length, rng);
    if (pairs.empty()) {
      throw TrainingError("no training pairs: every user needs two or more "
                          "training interactions");
    }
    EpochStats stats{epoch, 0.0, 0.0, 0.0, 0.0, 0.0};
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < pairs.size(); begin += config.batch_size) {
      const std::size_t end = std::min(pairs.size(), begin + config.batch_size);
      std::span<const LabeledPair> batch(pairs.data() + begin, end - begin);
      std::vector<model::UserHistory> histories;
      histories.reserve(batch.size());
      for (const auto& pair : batch) {
        histories.push_back(history_for(data, pair, hyper.history_length));
      }
      std::vector<kg::Triple> triples;
      if (hyper.lambda1 > 0.0 && !kg.triples.empty()) {
        triples.reserve(config.kge_batch);
        for (std::size_t k = 0; k < config.kge_batch; ++k) {
          const auto pick = static_cast<std::size_t>(
              unit_uniform(rng) * static_cast<double>(kg.triples.size()));
          triples.push_back(kg.triples[std::min(pick, kg.triples.size() - 1)]);
        }
      }

      diff::Tape tape(params.store);
      model::Network net(tape, params, kg.attributes);
      LossTerms terms = joint_loss(net, batch, histories, triples, params);
      const double total = terms.total.value()[0];
      if (!std::isfinite(total)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_index) +
                            "; parameter norms:" + param_norms(params));
      }
      const diff::Gradients grads = tape.backward(terms.total);
      adam.step(params.store, grads);
      params.renormalize_relations();

      stats.loss_total += total;
      stats.loss_bce += terms.bce_value;
      stats.loss_kge += terms.kge_value;
      stats.loss_l2 += terms.l2_value;
      ++steps;
      ++batch_index;
    }
    const double inv = 1.0 / static_cast<double>(steps);
    stats.loss_total *= inv;
    stats.loss_bce *= inv;
    stats.loss_kge *= inv;
    stats.loss_l2 *= inv;
    stats.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    log.push_back(stats);
    if (on_epoch) on_epoch(params, stats);
  }
  return log;
}

double mean_energy(const model::ModelParams& params,
                   std::span<const kg::Triple> triples) {
  diff::Tape tape(params.store);
  Var loss = kg::kge_batch_loss(triples, tape.param(params.entities),
                                tape.param(params.relation_normals),
                                tape.param(params.relation_translations));
  return loss.value()[0];
}

std::vector<double> train_kge_only(model::ModelParams& params,
                                   std::span<const kg::Triple> triples,
                                   std::size_t steps, double learning_rate,
                                   const StepHook& on_step) {
  Adam adam(params.store, learning_rate);
  std::vector<double> energies{mean_energy(params, triples)};
  for (std::size_t s = 0; s < steps; ++s) {
    diff::Tape tape(params.store);
    Var loss = kg::kge_batch_loss(triples, tape.param(params.entities),
                                  tape.param(params.relation_normals),
                                  tape.param(params.relation_translations));
    adam.step(params.store, tape.backward(loss));
    params.renormalize_relations();
    energies.push_back(mean_energy(params, triples));
    if (on_step) on_step(params);
  }
  return energies;
}

}  // namespace acam::train
