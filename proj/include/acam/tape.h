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

// Define-by-run reverse-mode differentiation over dense tensors.
//
// A Tape records every operation applied to Vars during a forward pass.
// Trainable leaves come from a ParamStore; backward() walks the tape in
// reverse creation order and returns one gradient tensor per stored
// parameter. A Tape must only be used from one thread, but several tapes
// may read the same ParamStore concurrently.

#ifndef ACAM_TAPE_H_
#define ACAM_TAPE_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "acam/tensor.h"

namespace acam::diff {

using ParamId = std::size_t;

// Named trainable tensors. Ids are dense and stable once assigned.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor value);

  std::size_t size() const { return values_.size(); }
  Tensor& value(ParamId id) { return values_.at(id); }
  const Tensor& value(ParamId id) const { return values_.at(id); }
  const std::string& name(ParamId id) const { return names_.at(id); }
  std::optional<ParamId> find(const std::string& name) const;

  double squared_norm() const;
  bool operator==(const ParamStore& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

// One gradient per parameter of the store, zero for unused parameters.
using Gradients = std::vector<Tensor>;

enum class Op : std::uint8_t {
  kParam,
  kConstant,
  kMatmul,
  kTranspose,
  kAdd,
  kSub,
  kScale,
  kAddRowwise,
  kTanh,
  kRelu,
  kSigmoid,
  kSoftmaxRows,
  kSoftmaxCols,
  kSumCols,
  kMeanRows,
  kConcat,
  kHConcat,
  kVStack,
  kWeightedSum,
  kGatherMean,
  kRow,
  kScaleRows,
  kRowDot,
  kRowSquaredNorm,
  kSum,
  kMean,
  kSquaredNorm,
  kReshape,
  kBinaryCrossEntropy,
};

class Tape;

// Handle to one tape node. Cheap to copy; invalid once the tape is reset.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  explicit Tape(const ParamStore& params) : params_(&params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf bound to a stored parameter. Repeated calls return the same node,
  // so every use of a parameter accumulates into one gradient.
  Var param(ParamId id);
  Var constant(Tensor value);

  // Gradient of the scalar `loss` with respect to every parameter.
  // Clears the tape afterwards.
  Gradients backward(Var loss);

  void reset();
  std::size_t size() const { return nodes_.size(); }
  Op op(std::size_t id) const { return nodes_.at(id).op; }
  const ParamStore& params() const { return *params_; }

  // Used by operation implementations.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  Var record(Op op, std::vector<std::size_t> inputs, Tensor value,
             BackwardFn backward);
  const Tensor& value(std::size_t id) const;
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  // Gradient buffer of node `id`, zero-initialized on first access.
  Tensor& grad_buffer(std::size_t id);
  const std::vector<std::size_t>& inputs(std::size_t id) const {
    return nodes_[id].inputs;
  }

 private:
  struct Node {
    Op op;
    std::vector<std::size_t> inputs;
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    BackwardFn backward;
    std::optional<ParamId> param;
  };

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::unordered_map<ParamId, std::size_t> param_nodes_;
};

// Primitives. Every function validates shapes and throws DimensionError on
// mismatch. Rank-1 inputs are treated as 1 x n rows where a matrix is needed.

Var matmul(Var a, Var b);
Var transpose(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double factor);
// x[m x n] + bias[n] added to every row.
Var add_rowwise(Var x, Var bias);
Var tanh_map(Var x);
Var relu_map(Var x);
Var sigmoid_map(Var x);
Var softmax_rows(Var x);
Var softmax_cols(Var x);
// Column sums of x[m x n] -> [n].
Var sum_cols(Var x);
// Mean of the rows of x[m x n] -> [n].
Var avg_over_attributes(Var x);
// Horizontal concatenation of row vectors -> [1 x sum(k_i)].
Var concat(std::span<const Var> parts);
// Horizontal concatenation of matrices with equal row counts.
Var hconcat(std::span<const Var> parts);
// Vertical stacking; rank-1 parts count as one row.
Var vstack(std::span<const Var> parts);
// sum_j weights[j] * vectors[j, :] -> [d].
Var weighted_sum(Var weights, Var vectors);
// Row g of the result is the mean of table rows groups[g]; groups nonempty.
Var gather_mean(Var table, std::vector<std::vector<std::uint32_t>> groups);
Var row(Var x, std::size_t index);
// Row i of x scaled by s[i].
Var scale_rows(Var x, Var s);
// Per-row dot products of two m x n matrices -> [m].
Var row_dot(Var a, Var b);
Var row_squared_norm(Var x);
Var sum(Var x);
Var mean(Var x);
Var squared_norm(Var x);
Var reshape(Var x, std::vector<std::size_t> shape);
// -[y log p + (1-y) log(1-p)] with p clamped to [eps, 1-eps].
Var binary_cross_entropy(Var prob, double label, double eps = 1e-12);

}  // namespace acam::diff

#endif  // ACAM_TAPE_H_
