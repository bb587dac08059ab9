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

#include "acam/model.h"

#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include "acam/error.h"

namespace acam::model {

using diff::ParamId;
using diff::Tensor;
using diff::Var;

void Hyperparams::validate() const {
  std::vector<std::string> errors;
  if (dim < 1) errors.push_back("d must be >= 1");
  if (key_dim < 1) errors.push_back("d_K must be >= 1");
  if (value_dim < 1) errors.push_back("d_V must be >= 1");
  if (num_attributes < 1) errors.push_back("M must be >= 1");
  if (history_length < 1) errors.push_back("L must be >= 1");
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) {
    errors.push_back("lambda1 must be finite and >= 0");
  }
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) {
    errors.push_back("lambda2 must be finite and >= 0");
  }
  if (tie_kv && (dim != key_dim || dim != value_dim)) {
    errors.push_back("tie_kv requires d = d_K = d_V");
  }
  if (mlp_hidden1 < 1 || mlp_hidden2 < 1) {
    errors.push_back("MLP hidden widths must be >= 1");
  }
  if (errors.empty()) return;
  std::string msg = "invalid hyperparameters:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

void ModelParams::renormalize_relations() {
  kg::renormalize_rows(store.value(relation_normals));
}

namespace {

ModelParams allocate(const Hyperparams& h, std::size_t num_entities) {
  h.validate();
  const std::size_t d = h.dim, m = h.num_attributes;
  ModelParams p;
  p.hyper = h;
  auto& s = p.store;
  p.entities = s.add("entities", Tensor({num_entities, d}));
  p.unknown_values = s.add("unknown_values", Tensor({m, d}));
  p.relation_normals = s.add("relation_normals", Tensor({m, d}));
  p.relation_translations = s.add("relation_translations", Tensor({m, d}));
  p.attn_w1 = s.add("attn_w1", Tensor({2 * d, d}));
  p.attn_b1 = s.add("attn_b1", Tensor({d}));
  p.attn_w2 = s.add("attn_w2", Tensor({d, 1}));
  p.attn_b2 = s.add("attn_b2", Tensor({1}));
  p.key_w_user = s.add("key_w_user", Tensor({d, h.key_dim}));
  p.key_b_user = s.add("key_b_user", Tensor({h.key_dim}));
  if (h.tie_kv) {
    p.value_w_user = p.key_w_user;
    p.value_b_user = p.key_b_user;
  } else {
    p.value_w_user = s.add("value_w_user", Tensor({d, h.value_dim}));
    p.value_b_user = s.add("value_b_user", Tensor({h.value_dim}));
  }
  p.key_w_item = s.add("key_w_item", Tensor({d, h.key_dim}));
  p.key_b_item = s.add("key_b_item", Tensor({h.key_dim}));
  if (h.tie_kv) {
    p.value_w_item = p.key_w_item;
    p.value_b_item = p.key_b_item;
  } else {
    p.value_w_item = s.add("value_w_item", Tensor({d, h.value_dim}));
    p.value_b_item = s.add("value_b_item", Tensor({h.value_dim}));
  }
  const std::size_t mlp_in = 2 * h.value_dim + 2 * d;
  p.mlp_w1 = s.add("mlp_w1", Tensor({mlp_in, h.mlp_hidden1}));
  p.mlp_b1 = s.add("mlp_b1", Tensor({h.mlp_hidden1}));
  p.mlp_w2 = s.add("mlp_w2", Tensor({h.mlp_hidden1, h.mlp_hidden2}));
  p.mlp_b2 = s.add("mlp_b2", Tensor({h.mlp_hidden2}));
  p.mlp_w3 = s.add("mlp_w3", Tensor({h.mlp_hidden2, 1}));
  p.mlp_b3 = s.add("mlp_b3", Tensor({1}));
  return p;
}

void unit_axis_normals(ModelParams& p) {
  Tensor& w = p.store.value(p.relation_normals);
  for (std::size_t r = 0; r < w.rows(); ++r) w(r, r % w.cols()) = 1.0;
}

}  // namespace

ModelParams zero_params(const Hyperparams& hyper, std::size_t num_entities) {
  ModelParams p = allocate(hyper, num_entities);
  unit_axis_normals(p);
  return p;
}

ModelParams init_params(const Hyperparams& hyper, std::size_t num_entities,
                        std::uint64_t seed) {
  ModelParams p = allocate(hyper, num_entities);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  auto fill_normal = [&](ParamId id) {
    for (double& v : p.store.value(id).data()) v = normal(rng);
  };
  auto fill_xavier = [&](ParamId id) {
    Tensor& t = p.store.value(id);
    const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    for (double& v : t.data()) v = uniform(rng);
  };
  fill_normal(p.entities);
  fill_normal(p.unknown_values);
  fill_normal(p.relation_normals);
  p.renormalize_relations();
  fill_normal(p.relation_translations);
  for (ParamId id : {p.attn_w1, p.attn_w2, p.key_w_user, p.value_w_user,
                     p.key_w_item, p.value_w_item, p.mlp_w1, p.mlp_w2,
                     p.mlp_w3}) {
    // Tied ids appear twice; only draw once.
    if (id == p.value_w_user && hyper.tie_kv) continue;
    if (id == p.value_w_item && hyper.tie_kv) continue;
    fill_xavier(id);
  }
  return p;
}

UserHistory UserHistory::from_recent(std::span<const ItemId> recent,
                                     std::size_t length) {
  UserHistory h;
  h.items.assign(length, 0);
  h.valid.assign(length, 0);
  for (std::size_t j = 0; j < length && j < recent.size(); ++j) {
    h.items[j] = recent[j];
    h.valid[j] = 1;
  }
  return h;
}

std::size_t UserHistory::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid) n += v != 0;
  return n;
}

Network::Network(diff::Tape& tape, const ModelParams& params,
                 const kg::AttributeTable& attributes)
    : tape_(tape), params_(params), attributes_(attributes) {}

Var Network::item_representation(ItemId item) {
  if (auto it = item_cache_.find(item); it != item_cache_.end()) {
    return it->second;
  }
  if (item >= params_.num_entities()) {
    throw Error("unknown item id " + std::to_string(item));
  }
  const std::size_t m = params_.hyper.num_attributes;
  Var entities = tape_.param(params_.entities);
  std::vector<std::vector<std::uint32_t>> groups{{item}};
  bool all_filled = true;
  for (std::size_t r = 0; r < m; ++r) {
    const auto& values =
        attributes_.values(item, static_cast<kg::RelationId>(r));
    all_filled = all_filled && !values.empty();
    groups.emplace_back(values.begin(), values.end());
  }
  Var rep;
  if (all_filled) {
    rep = diff::gather_mean(entities, std::move(groups));
  } else {
    Var unknown = tape_.param(params_.unknown_values);
    std::vector<Var> rows;
    rows.reserve(m + 1);
    for (std::size_t r = 0; r <= m; ++r) {
      if (!groups[r].empty()) {
        rows.push_back(diff::gather_mean(entities, {std::move(groups[r])}));
      } else {
        rows.push_back(diff::gather_mean(
            unknown, {{static_cast<std::uint32_t>(r - 1)}}));
      }
    }
    rep = diff::vstack(rows);
  }
  item_cache_.emplace(item, rep);
  return rep;
}

Var Network::user_representation(const UserHistory& history, Var candidate) {
  std::vector<Var> reps;
  for (std::size_t j = 0; j < history.items.size(); ++j) {
    if (history.valid.at(j)) reps.push_back(item_representation(history.items[j]));
  }
  if (reps.empty()) throw Error("user history has no valid items");
  const std::size_t slots = params_.hyper.num_attributes + 1;

  std::vector<Var> inputs;
  inputs.reserve(reps.size());
  for (const Var& rep : reps) {
    const Var pair[] = {rep, candidate};
    inputs.push_back(diff::hconcat(pair));
  }
  Var x = inputs.size() == 1 ? inputs[0] : diff::vstack(inputs);
  Var hidden = diff::tanh_map(diff::add_rowwise(
      diff::matmul(x, tape_.param(params_.attn_w1)),
      tape_.param(params_.attn_b1)));
  Var scores = diff::add_rowwise(
      diff::matmul(hidden, tape_.param(params_.attn_w2)),
      tape_.param(params_.attn_b2));
  // Row j holds the weights of history item j for every attribute slot.
  Var weights = diff::reshape(scores, {reps.size(), slots});
  if (params_.hyper.attention_softmax) weights = diff::softmax_cols(weights);

  Var pooled;
  for (std::size_t j = 0; j < reps.size(); ++j) {
    Var term = diff::scale_rows(reps[j], diff::row(weights, j));
    pooled = j == 0 ? term : diff::add(pooled, term);
  }
  return pooled;
}

Var Network::transform(Var rep, diff::ParamId w, diff::ParamId b) {
  return diff::tanh_map(diff::add_rowwise(diff::matmul(rep, tape_.param(w)),
                                          tape_.param(b)));
}

CoAttention Network::coattention(Var user_rep, Var item_rep) {
  const auto& h = params_.hyper;
  const std::size_t slots = h.num_attributes + 1;
  for (const Var& rep : {user_rep, item_rep}) {
    if (rep.value().rows() != slots || rep.value().cols() != h.dim) {
      throw DimensionError("coattention expects (M+1) x d = [" +
                           std::to_string(slots) + "x" + std::to_string(h.dim) +
                           "], got " + rep.value().shape_string());
    }
  }
  Var key_u = transform(user_rep, params_.key_w_user, params_.key_b_user);
  Var key_v = transform(item_rep, params_.key_w_item, params_.key_b_item);
  Var value_u = h.tie_kv ? key_u
                         : transform(user_rep, params_.value_w_user,
                                     params_.value_b_user);
  Var value_v = h.tie_kv ? key_v
                         : transform(item_rep, params_.value_w_item,
                                     params_.value_b_item);
  Var affinity = diff::matmul(key_u, diff::transpose(key_v));
  Var by_col, by_row;
  if (h.coattention) {
    by_col = diff::softmax_cols(affinity);
    by_row = diff::softmax_rows(affinity);
  } else {
    Tensor uniform({slots, slots});
    uniform.fill(1.0 / static_cast<double>(slots));
    by_col = tape_.constant(uniform);
    by_row = tape_.constant(std::move(uniform));
  }
  Var revised_u = diff::matmul(diff::transpose(by_col), value_u);
  Var revised_v = diff::matmul(by_row, value_v);
  return {diff::sum_cols(revised_u), diff::sum_cols(revised_v), affinity};
}

Var Network::predict(const UserHistory& history, ItemId item) {
  Var item_rep = item_representation(item);
  Var user_rep = user_representation(history, item_rep);
  CoAttention co = coattention(user_rep, item_rep);
  const Var parts[] = {co.user, co.item, diff::avg_over_attributes(user_rep),
                       diff::avg_over_attributes(item_rep)};
  Var x = diff::concat(parts);
  auto dense = [&](Var in, ParamId w, ParamId b) {
    return diff::add_rowwise(diff::matmul(in, tape_.param(w)), tape_.param(b));
  };
  Var h1 = diff::relu_map(dense(x, params_.mlp_w1, params_.mlp_b1));
  Var h2 = diff::relu_map(dense(h1, params_.mlp_w2, params_.mlp_b2));
  return diff::sigmoid_map(dense(h2, params_.mlp_w3, params_.mlp_b3));
}

double predict(const UserHistory& history, ItemId item,
               const ModelParams& params,
               const kg::AttributeTable& attributes) {
  diff::Tape tape(params.store);
  Network net(tape, params, attributes);
  return net.predict(history, item).value()[0];
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'A', 'C', 'A', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const std::string& s) { out_.write(s.data(), s.size()); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, const std::string& path) : in_(in), path_(path) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    if (!in_.read(s.data(), n)) fail();
    return s;
  }

 private:
  std::uint64_t le(int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      const int c = in_.get();
      if (c == EOF) fail();
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
  }
  [[noreturn]] void fail() {
    throw ParseError(path_, 0, "truncated checkpoint");
  }
  std::ifstream& in_;
  const std::string& path_;
};

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint: " + path);
  Writer w(out);
  out.write(kMagic, 4);
  w.u32(kFormatVersion);
  const Hyperparams& h = params.hyper;
  for (std::size_t v : {h.dim, h.key_dim, h.value_dim, h.num_attributes,
                        h.history_length, h.mlp_hidden1, h.mlp_hidden2}) {
    w.u64(v);
  }
  w.f64(h.lambda1);
  w.f64(h.lambda2);
  w.u8(h.tie_kv);
  w.u8(h.attention_softmax);
  w.u8(h.coattention);
  const auto& store = params.store;
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (ParamId id = 0; id < store.size(); ++id) {
    const Tensor& t = store.value(id);
    w.u32(static_cast<std::uint32_t>(store.name(id).size()));
    w.bytes(store.name(id));
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t dim : t.shape()) w.u64(dim);
    for (double v : t.data()) w.f64(v);
  }
  if (!out) throw Error("failed writing checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open checkpoint");
  Reader r(in, path);
  if (r.bytes(4) != std::string(kMagic, 4)) {
    throw ParseError(path, 0, "not an ACAM checkpoint (bad magic)");
  }
  if (std::uint32_t version = r.u32(); version != kFormatVersion) {
    throw ParseError(path, 0,
                     "unsupported checkpoint version " + std::to_string(version));
  }
  Hyperparams h;
  h.dim = r.u64();
  h.key_dim = r.u64();
  h.value_dim = r.u64();
  h.num_attributes = r.u64();
  h.history_length = r.u64();
  h.mlp_hidden1 = r.u64();
  h.mlp_hidden2 = r.u64();
  h.lambda1 = r.f64();
  h.lambda2 = r.f64();
  h.tie_kv = r.u8() != 0;
  h.attention_softmax = r.u8() != 0;
  h.coattention = r.u8() != 0;

  std::map<std::string, Tensor> tensors;
  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 2) throw ParseError(path, 0, "bad tensor rank");
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& dim : shape) {
      dim = r.u64();
      n *= dim;
    }
    std::vector<double> data(n);
    for (double& v : data) v = r.f64();
    tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  auto entities = tensors.find("entities");
  if (entities == tensors.end()) {
    throw ParseError(path, 0, "checkpoint has no entity table");
  }
  ModelParams p = allocate(h, entities->second.rows());
  if (tensors.size() != p.store.size()) {
    throw ParseError(path, 0, "checkpoint tensor count does not match hyperparameters");
  }
  for (ParamId id = 0; id < p.store.size(); ++id) {
    auto it = tensors.find(p.store.name(id));
    if (it == tensors.end()) {
      throw ParseError(path, 0, "missing tensor " + p.store.name(id));
    }
    if (it->second.shape() != p.store.value(id).shape()) {
      throw ParseError(path, 0, "tensor " + p.store.name(id) + " has shape " +
                                    it->second.shape_string() + ", expected " +
                                    p.store.value(id).shape_string());
    }
    p.store.value(id) = std::move(it->second);
  }
  return p;
}

}  // namespace acam::model
