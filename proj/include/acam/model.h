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

// The ACAM scoring network: attribute-based item and user representations,
// candidate-conditioned attention pooling over the user's history,
// attribute-level co-attention and the prediction MLP.

#ifndef ACAM_MODEL_H_
#define ACAM_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "acam/kgstore.h"
#include "acam/tape.h"

namespace acam::model {

using kg::ItemId;

struct Hyperparams {
  std::size_t dim = 512;        // d
  std::size_t key_dim = 512;    // d_K
  std::size_t value_dim = 512;  // d_V
  std::size_t num_attributes = 4;  // M
  std::size_t history_length = 3;  // L
  double lambda1 = 0.1;
  double lambda2 = 0.001;
  // K and V share their transform (d = d_K = d_V).
  bool tie_kv = true;
  // Normalize history weights with a softmax over the history.
  bool attention_softmax = false;
  // false replaces softmax(S) by uniform weights (ablation).
  bool coattention = true;
  std::size_t mlp_hidden1 = 256;
  std::size_t mlp_hidden2 = 128;

  // Throws ConfigError listing every violated constraint.
  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

// Every trainable tensor. Ids index into `store`; with tie_kv the value
// transforms alias the key transforms.
struct ModelParams {
  Hyperparams hyper;
  diff::ParamStore store;

  diff::ParamId entities;        // |E| x d
  diff::ParamId unknown_values;  // M x d, used for empty attribute slots
  diff::ParamId relation_normals;       // M x d, unit rows
  diff::ParamId relation_translations;  // M x d
  diff::ParamId attn_w1, attn_b1, attn_w2, attn_b2;  // 2d -> d -> 1
  diff::ParamId key_w_user, key_b_user, value_w_user, value_b_user;
  diff::ParamId key_w_item, key_b_item, value_w_item, value_b_item;
  diff::ParamId mlp_w1, mlp_b1, mlp_w2, mlp_b2, mlp_w3, mlp_b3;

  std::size_t num_entities() const { return store.value(entities).rows(); }
  void renormalize_relations();
  bool operator==(const ModelParams& other) const {
    return hyper == other.hyper && store == other.store;
  }
};

// Random initialization: embeddings ~ N(0, 0.1^2), dense weights Xavier
// uniform, biases zero, relation normals unit length.
ModelParams init_params(const Hyperparams& hyper, std::size_t num_entities,
                        std::uint64_t seed);

// Zero-filled parameters of the right shapes (relation normals still unit).
ModelParams zero_params(const Hyperparams& hyper, std::size_t num_entities);

// The user's L most recent items, most recent first. Positions with
// valid[j] == 0 are padding and never contribute.
struct UserHistory {
  std::vector<ItemId> items;
  std::vector<std::uint8_t> valid;

  // Pads `recent` (most recent first, truncated to L) to length L.
  static UserHistory from_recent(std::span<const ItemId> recent,
                                 std::size_t length);
  std::size_t valid_count() const;
};

struct CoAttention {
  diff::Var user;      // r_u, [d_V]
  diff::Var item;      // r_v, [d_V]
  diff::Var affinity;  // S, (M+1) x (M+1)
};

// Builds the forward pass on a tape. Item representations are cached per
// builder, so one builder should serve one tape between resets.
class Network {
 public:
  Network(diff::Tape& tape, const ModelParams& params,
          const kg::AttributeTable& attributes);

  // (M+1) x d: row 0 the item embedding, row i the mean embedding of the
  // item's relation-(i-1) values or that slot's unknown embedding.
  diff::Var item_representation(ItemId item);

  // (M+1) x d: row i = sum_j w_ij * a_i^j with w_ij = FFN(a_i^j ++ a_i^v).
  diff::Var user_representation(const UserHistory& history,
                                diff::Var candidate);

  CoAttention coattention(diff::Var user_rep, diff::Var item_rep);

  // Probability that the user likes `item`, as a 1x1 Var.
  diff::Var predict(const UserHistory& history, ItemId item);

  diff::Tape& tape() { return tape_; }

 private:
  diff::Var transform(diff::Var rep, diff::ParamId w, diff::ParamId b);

  diff::Tape& tape_;
  const ModelParams& params_;
  const kg::AttributeTable& attributes_;
  std::unordered_map<ItemId, diff::Var> item_cache_;
};

// Convenience: ŷ for one (history, item) on a private tape.
double predict(const UserHistory& history, ItemId item,
               const ModelParams& params,
               const kg::AttributeTable& attributes);

// Binary checkpoint: "ACAM", u32 format version, hyperparameter block, then
// each tensor as (u32 name length, name, u32 rank, u64 dims, f64 data), all
// little-endian.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace acam::model

#endif  // ACAM_MODEL_H_
