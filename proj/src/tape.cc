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

#include "acam/tape.h"

#include <algorithm>
#include <cmath>

#include "acam/error.h"

namespace acam::diff {

// ---------------------------------------------------------------------------
// ParamStore

ParamId ParamStore::add(std::string name, Tensor value) {
  if (find(name)) throw Error("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<ParamId> ParamStore::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<ParamId>(it - names_.begin());
}

double ParamStore::squared_norm() const {
  double s = 0.0;
  for (const auto& v : values_) s += v.squared_norm();
  return s;
}

bool ParamStore::operator==(const ParamStore& other) const {
  return names_ == other.names_ && values_ == other.values_;
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::param(ParamId id) {
  if (auto it = param_nodes_.find(id); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node node;
  node.op = Op::kParam;
  node.external = &params_->value(id);
  node.param = id;
  nodes_.push_back(std::move(node));
  param_nodes_.emplace(id, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  return record(Op::kConstant, {}, std::move(value), nullptr);
}

Var Tape::record(Op op, std::vector<std::size_t> inputs, Tensor value,
                 BackwardFn backward) {
  Node node;
  node.op = op;
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& node = nodes_.at(id);
  return node.external ? *node.external : node.value;
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(value(id).shape());
  return node.grad;
}

Gradients Tape::backward(Var loss) {
  if (loss.tape() != this) throw Error("loss belongs to another tape");
  if (value(loss.id()).size() != 1) {
    throw DimensionError("backward needs a scalar loss, got shape " +
                         value(loss.id()).shape_string());
  }
  grad_buffer(loss.id())[0] = 1.0;
  Gradients grads;
  grads.reserve(params_->size());
  for (ParamId p = 0; p < params_->size(); ++p) {
    grads.emplace_back(params_->value(p).shape());
  }
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty()) continue;
    if (node.param) {
      grads[*node.param] = std::move(node.grad);
    } else if (node.backward) {
      node.backward(*this, i);
    }
  }
  reset();
  return grads;
}

void Tape::reset() {
  nodes_.clear();
  param_nodes_.clear();
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

Tape& tape_of(std::initializer_list<Var> vars) {
  Tape* tape = vars.begin()->tape();
  for (const Var& v : vars) {
    if (v.tape() != tape || tape == nullptr) {
      throw Error("operands belong to different tapes");
    }
  }
  return *tape;
}

[[noreturn]] void shape_error(const char* op, const Tensor& a,
                              const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       a.shape_string() + " and " + b.shape_string());
}

std::vector<std::size_t> matrix_shape(std::size_t rows, std::size_t cols) {
  return {rows, cols};
}

// C += A * B for row-major blocks; transposes select which operand is read
// column-wise.
void gemm_acc(const Tensor& a, bool ta, const Tensor& b, bool tb, Tensor& c) {
  const std::size_t m = c.rows(), n = c.cols();
  const std::size_t k = ta ? a.rows() : a.cols();
  const double* A = a.data().data();
  const double* B = b.data().data();
  double* C = c.data().data();
  const std::size_t lda = a.cols(), ldb = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ta ? A[p * lda + i] : A[i * lda + p];
      if (aip == 0.0) continue;
      double* crow = C + i * n;
      if (tb) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * B[j * ldb + p];
      } else {
        const double* brow = B + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }
}

template <typename Fn, typename Deriv>
Var elementwise(Op op, Var x, Fn fn, Deriv deriv) {
  Tape& t = tape_of({x});
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  return t.record(op, {x.id()}, std::move(out),
                  [deriv](Tape& t, std::size_t self) {
                    const std::size_t in = t.inputs(self)[0];
                    const Tensor& y = t.value(self);
                    const Tensor& g = t.grad(self);
                    Tensor& gx = t.grad_buffer(in);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      gx[i] += g[i] * deriv(y[i]);
                    }
                  });
}

// Softmax along rows (by_rows) or columns.
Var softmax_impl(Op op, Var x, bool by_rows) {
  Tape& t = tape_of({x});
  const Tensor& in = x.value();
  const std::size_t m = in.rows(), n = in.cols();
  Tensor out(in.shape());
  const std::size_t groups = by_rows ? m : n;
  const std::size_t len = by_rows ? n : m;
  auto at = [by_rows, n](std::size_t g, std::size_t k) {
    return by_rows ? g * n + k : k * n + g;
  };
  for (std::size_t g = 0; g < groups; ++g) {
    double mx = -INFINITY;
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, in[at(g, k)]);
    double z = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      out[at(g, k)] = std::exp(in[at(g, k)] - mx);
      z += out[at(g, k)];
    }
    for (std::size_t k = 0; k < len; ++k) out[at(g, k)] /= z;
  }
  return t.record(op, {x.id()}, std::move(out),
                  [groups, len, at](Tape& t, std::size_t self) {
                    const Tensor& y = t.value(self);
                    const Tensor& g = t.grad(self);
                    Tensor& gx = t.grad_buffer(t.inputs(self)[0]);
                    for (std::size_t r = 0; r < groups; ++r) {
                      double dot = 0.0;
                      for (std::size_t k = 0; k < len; ++k) {
                        dot += g[at(r, k)] * y[at(r, k)];
                      }
                      for (std::size_t k = 0; k < len; ++k) {
                        gx[at(r, k)] += y[at(r, k)] * (g[at(r, k)] - dot);
                      }
                    }
                  });
}

// Shared by concat / hconcat: column offsets of each part.
Var hconcat_impl(Op op, std::span<const Var> parts, bool row_vectors) {
  if (parts.empty()) throw Error("concat of an empty list");
  Tape& t = *parts[0].tape();
  const std::size_t m = parts[0].value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids, offsets;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw Error("operands belong to different tapes");
    const Tensor& v = p.value();
    if (v.rows() != m || (row_vectors && m != 1)) {
      shape_error(row_vectors ? "concat" : "hconcat", parts[0].value(), v);
    }
    ids.push_back(p.id());
    offsets.push_back(total);
    total += v.cols();
  }
  Tensor out(matrix_shape(m, total));
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < m; ++r) {
      std::copy(v.row(r).begin(), v.row(r).end(),
                out.row(r).begin() + offsets[k]);
    }
  }
  return t.record(op, std::move(ids), std::move(out),
                  [offsets](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad(self);
                    const auto& in = t.inputs(self);
                    for (std::size_t k = 0; k < in.size(); ++k) {
                      Tensor& gx = t.grad_buffer(in[k]);
                      for (std::size_t r = 0; r < gx.rows(); ++r) {
                        for (std::size_t c = 0; c < gx.cols(); ++c) {
                          gx(r, c) += g(r, offsets[k] + c);
                        }
                      }
                    }
                  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows() || bv.rank() != 2) shape_error("matmul", av, bv);
  Tensor out(matrix_shape(av.rows(), bv.cols()));
  gemm_acc(av, false, bv, false, out);
  return t.record(Op::kMatmul, {a.id(), b.id()}, std::move(out),
                  [](Tape& t, std::size_t self) {
                    const auto& in = t.inputs(self);
                    const Tensor& g = t.grad(self);
                    // dA = dC * B^T, dB = A^T * dC
                    gemm_acc(g, false, t.value(in[1]), true, t.grad_buffer(in[0]));
                    gemm_acc(t.value(in[0]), true, g, false, t.grad_buffer(in[1]));
                  });
}

Var transpose(Var x) {
  Tape& t = tape_of({x});
  const Tensor& in = x.value();
  const std::size_t m = in.rows(), n = in.cols();
  Tensor out(matrix_shape(n, m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(j, i) = in(i, j);
  }
  return t.record(Op::kTranspose, {x.id()}, std::move(out),
                  [m, n](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad(self);
                    Tensor& gx = t.grad_buffer(t.inputs(self)[0]);
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t j = 0; j < n; ++j) gx(i, j) += g(j, i);
                    }
                  });
}

namespace {

Var add_sub(Op op, Var a, Var b, double sign) {
  Tape& t = tape_of({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_error(sign > 0 ? "add" : "sub", av, bv);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + sign * bv[i];
  return t.record(op, {a.id(), b.id()}, std::move(out),
                  [sign](Tape& t, std::size_t self) {
                    const auto& in = t.inputs(self);
                    const Tensor& g = t.grad(self);
                    Tensor& ga = t.grad_buffer(in[0]);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                    Tensor& gb = t.grad_buffer(in[1]);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      gb[i] += sign * g[i];
                    }
                  });
}

}  // namespace

Var add(Var a, Var b) { return add_sub(Op::kAdd, a, b, 1.0); }
Var sub(Var a, Var b) { return add_sub(Op::kSub, a, b, -1.0); }

Var scale(Var x, double factor) {
  Tape& t = tape_of({x});
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = factor * in[i];
  return t.record(Op::kScale, {x.id()}, std::move(out),
                  [factor](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad(self);
                    Tensor& gx = t.grad_buffer(t.inputs(self)[0]);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      gx[i] += factor * g[i];
                    }
                  });
}

Var add_rowwise(Var x, Var bias) {
  Tape& t = tape_of({x, bias});
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || bv.size() != xv.cols()) {
    shape_error("add_rowwise", xv, bv);
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
  }
  return t.record(Op::kAddRowwise, {x.id(), bias.id()}, std::move(out),
                  [](Tape& t, std::size_t self) {
                    const auto& in = t.inputs(self);
                    const Tensor& g = t.grad(self);
                    Tensor& gx = t.grad_buffer(in[0]);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                    Tensor& gb = t.grad_buffer(in[1]);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      for (std::size_t c = 0; c < g.cols(); ++c) {
                        gb[c] += g(r, c);
                      }
                    }
                  });
}

Var tanh_map(Var x) {
  return elementwise(
      Op::kTanh, x, [](double v) { return std::tanh(v); },
      [](double y) { return 1.0 - y * y; });
}

Var relu_map(Var x) {
  return elementwise(
      Op::kRelu, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid_map(Var x) {
  return elementwise(
      Op::kSigmoid, x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Var softmax_rows(Var x) { return softmax_impl(Op::kSoftmaxRows, x, true); }
Var softmax_cols(Var x) { return softmax_impl(Op::kSoftmaxCols, x, false); }

Var sum_cols(Var x) {
  Tape& t = tape_of({x});
  const Tensor& in = x.value();
  Tensor out({in.cols()});
  for (std::size_t r = 0; r < in.rows(); ++r) {
    for (std::size_t c = 0; c < in.cols(); ++c) out[c] += in(r, c);
  }
  return t.record(Op::kSumCols, {x.id()}, std::move(out),
                  [](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad(self);
                    Tensor& gx = t.grad_buffer(t.inputs(self)[0]);
                    for (std::size_t r = 0; r < gx.rows(); ++r) {
                      for (std::size_t c = 0; c < gx.cols(); ++c) {
                        gx(r, c) += g[c];
                      }
                    }
                  });
}

Var avg_over_attributes(Var x) {
  const std::size_t m = x.value().rows();
  if (m == 0) throw DimensionError("avg_over_attributes of an empty matrix");
  Tape& t = tape_of({x});
  const Tensor& in = x.value();
  Tensor out({in.cols()});
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < in.cols(); ++c) out[c] += in(r, c);
  }
  const double inv = 1.0 / static_cast<double>(m);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] *= inv;
  return t.record(Op::kMeanRows, {x.id()}, std::move(out),
                  [inv](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad(self);
                    Tensor& gx = t.grad_buffer(t.inputs(self)[0]);
                    for (std::size_t r = 0; r < gx.rows(); ++r) {
                      for (std::size_t c = 0; c < gx.cols(); ++c) {
                        gx(r, c) += inv * g[c];
                      }
                    }
                  });
}

Var concat(std::span<const Var> parts) {
  return hconcat_impl(Op::kConcat, parts, true);
}

Var hconcat(std::span<const Var> parts) {
  return hconcat_impl(Op::kHConcat, parts, false);
}

Var vstack(std::span<const Var> parts) {
  if (parts.empty()) throw Error("vstack of an empty list");
  Tape& t = *parts[0].tape();
  const std::size_t n = parts[0].value().cols();
  std::size_t total = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw Error("operands belong to different tapes");
    if (p.value().cols() != n) shape_error("vstack", parts[0].value(), p.value());
    ids.push_back(p.id());
    total += p.value().rows();
  }
  Tensor out(matrix_shape(total, n));
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto src = p.value().data();
    std::copy(src.begin(), src.end(), out.data().begin() + offset);
    offset += src.size();
  }
  return t.record(Op::kVStack, std::move(ids), std::move(out),
                  [](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad(self);
                    std::size_t offset = 0;
                    for (std::size_t in : t.inputs(self)) {
                      Tensor& gx = t.grad_buffer(in);
                      for (std::size_t i = 0; i < gx.size(); ++i) {
                        gx[i] += g[offset + i];
                      }
                      offset += gx.size();
                    }
                  });
}

Var weighted_sum(Var weights, Var vectors) {
  Tape& t = tape_of({weights, vectors});
  const Tensor& w = weights.value();
  const Tensor& v = vectors.value();
  if (w.size() == 0 || w.size() != v.rows() || v.rank() != 2) {
    shape_error("weighted_sum", w, v);
  }
  Tensor out({v.cols()});
  for (std::size_t j = 0; j < v.rows(); ++j) {
    for (std::size_t c = 0; c < v.cols(); ++c) out[c] += w[j] * v(j, c);
  }
  return t.record(Op::kWeightedSum, {weights.id(), vectors.id()},
                  std::move(out), [](Tape& t, std::size_t self) {
                    const auto& in = t.inputs(self);
                    const Tensor& g = t.grad(self);
                    const Tensor& w = t.value(in[0]);
                    const Tensor& v = t.value(in[1]);
                    Tensor& gw = t.grad_buffer(in[0]);
                    for (std::size_t j = 0; j < v.rows(); ++j) {
                      double s = 0.0;
                      for (std::size_t c = 0; c < v.cols(); ++c) {
                        s += g[c] * v(j, c);
                      }
                      gw[j] += s;
                    }
                    Tensor& gv = t.grad_buffer(in[1]);
                    for (std::size_t j = 0; j < v.rows(); ++j) {
                      for (std::size_t c = 0; c < v.cols(); ++c) {
                        gv(j, c) += w[j] * g[c];
                      }
                    }
                  });
}

Var gather_mean(Var table, std::vector<std::vector<std::uint32_t>> groups) {
  Tape& t = tape_of({table});
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw DimensionError("gather_mean needs a matrix table");
  const std::size_t d = tv.cols();
  Tensor out(matrix_shape(groups.size(), d));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw Error("gather_mean: empty group");
    const double inv = 1.0 / static_cast<double>(groups[g].size());
    for (std::uint32_t id : groups[g]) {
      if (id >= tv.rows()) {
        throw DimensionError("gather_mean: row " + std::to_string(id) +
                             " out of range for table " + tv.shape_string());
      }
      auto src = tv.row(id);
      auto dst = out.row(g);
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
    for (double& x : out.row(g)) x *= inv;
  }
  return t.record(Op::kGatherMean, {table.id()}, std::move(out),
                  [groups = std::move(groups)](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad(self);
                    Tensor& gt = t.grad_buffer(t.inputs(self)[0]);
                    for (std::size_t r = 0; r < groups.size(); ++r) {
                      const double inv =
                          1.0 / static_cast<double>(groups[r].size());
                      auto src = g.row(r);
                      for (std::uint32_t id : groups[r]) {
                        auto dst = gt.row(id);
                        for (std::size_t c = 0; c < src.size(); ++c) {
                          dst[c] += inv * src[c];
                        }
                      }
                    }
                  });
}

Var row(Var x, std::size_t index) {
  Tape& t = tape_of({x});
  const Tensor& in = x.value();
  if (index >= in.rows()) {
    throw DimensionError("row " + std::to_string(index) + " out of range for " +
                         in.shape_string());
  }
  auto src = in.row(index);
  Tensor out({in.cols()}, std::vector<double>(src.begin(), src.end()));
  return t.record(Op::kRow, {x.id()}, std::move(out),
                  [index](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad(self);
                    auto dst = t.grad_buffer(t.inputs(self)[0]).row(index);
                    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += g[c];
                  });
}

Var scale_rows(Var x, Var s) {
  Tape& t = tape_of({x, s});
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  if (sv.size() != xv.rows()) shape_error("scale_rows", xv, sv);
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (double& v : out.row(r)) v *= sv[r];
  }
  return t.record(Op::kScaleRows, {x.id(), s.id()}, std::move(out),
                  [](Tape& t, std::size_t self) {
                    const auto& in = t.inputs(self);
                    const Tensor& g = t.grad(self);
                    const Tensor& xv = t.value(in[0]);
                    const Tensor& sv = t.value(in[1]);
                    Tensor& gx = t.grad_buffer(in[0]);
                    for (std::size_t r = 0; r < xv.rows(); ++r) {
                      for (std::size_t c = 0; c < xv.cols(); ++c) {
                        gx(r, c) += sv[r] * g(r, c);
                      }
                    }
                    Tensor& gs = t.grad_buffer(in[1]);
                    for (std::size_t r = 0; r < xv.rows(); ++r) {
                      double acc = 0.0;
                      for (std::size_t c = 0; c < xv.cols(); ++c) {
                        acc += xv(r, c) * g(r, c);
                      }
                      gs[r] += acc;
                    }
                  });
}

Var row_dot(Var a, Var b) {
  Tape& t = tape_of({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_error("row_dot", av, bv);
  Tensor out({av.rows()});
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) acc += av(r, c) * bv(r, c);
    out[r] = acc;
  }
  return t.record(Op::kRowDot, {a.id(), b.id()}, std::move(out),
                  [](Tape& t, std::size_t self) {
                    const auto& in = t.inputs(self);
                    const Tensor& g = t.grad(self);
                    const Tensor& av = t.value(in[0]);
                    const Tensor& bv = t.value(in[1]);
                    Tensor& ga = t.grad_buffer(in[0]);
                    for (std::size_t r = 0; r < av.rows(); ++r) {
                      for (std::size_t c = 0; c < av.cols(); ++c) {
                        ga(r, c) += g[r] * bv(r, c);
                      }
                    }
                    Tensor& gb = t.grad_buffer(in[1]);
                    for (std::size_t r = 0; r < av.rows(); ++r) {
                      for (std::size_t c = 0; c < av.cols(); ++c) {
                        gb(r, c) += g[r] * av(r, c);
                      }
                    }
                  });
}

Var row_squared_norm(Var x) {
  Tape& t = tape_of({x});
  const Tensor& in = x.value();
  Tensor out({in.rows()});
  for (std::size_t r = 0; r < in.rows(); ++r) {
    double acc = 0.0;
    for (double v : in.row(r)) acc += v * v;
    out[r] = acc;
  }
  return t.record(Op::kRowSquaredNorm, {x.id()}, std::move(out),
                  [](Tape& t, std::size_t self) {
                    const std::size_t in = t.inputs(self)[0];
                    const Tensor& g = t.grad(self);
                    const Tensor& xv = t.value(in);
                    Tensor& gx = t.grad_buffer(in);
                    for (std::size_t r = 0; r < xv.rows(); ++r) {
                      for (std::size_t c = 0; c < xv.cols(); ++c) {
                        gx(r, c) += 2.0 * g[r] * xv(r, c);
                      }
                    }
                  });
}

namespace {

Var total_impl(Op op, Var x, double factor) {
  Tape& t = tape_of({x});
  const Tensor& in = x.value();
  double acc = 0.0;
  for (double v : in.data()) acc += v;
  return t.record(op, {x.id()}, Tensor::scalar(factor * acc),
                  [factor](Tape& t, std::size_t self) {
                    const double g = t.grad(self)[0] * factor;
                    Tensor& gx = t.grad_buffer(t.inputs(self)[0]);
                    for (double& v : gx.data()) v += g;
                  });
}

}  // namespace

Var sum(Var x) { return total_impl(Op::kSum, x, 1.0); }

Var mean(Var x) {
  if (x.value().size() == 0) throw Error("mean of an empty tensor");
  return total_impl(Op::kMean, x, 1.0 / static_cast<double>(x.value().size()));
}

Var squared_norm(Var x) {
  Tape& t = tape_of({x});
  return t.record(Op::kSquaredNorm, {x.id()},
                  Tensor::scalar(x.value().squared_norm()),
                  [](Tape& t, std::size_t self) {
                    const std::size_t in = t.inputs(self)[0];
                    const double g = t.grad(self)[0];
                    const Tensor& xv = t.value(in);
                    Tensor& gx = t.grad_buffer(in);
                    for (std::size_t i = 0; i < xv.size(); ++i) {
                      gx[i] += 2.0 * g * xv[i];
                    }
                  });
}

Var reshape(Var x, std::vector<std::size_t> shape) {
  Tape& t = tape_of({x});
  const Tensor& in = x.value();
  Tensor out(std::move(shape),
             std::vector<double>(in.data().begin(), in.data().end()));
  return t.record(Op::kReshape, {x.id()}, std::move(out),
                  [](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad(self);
                    Tensor& gx = t.grad_buffer(t.inputs(self)[0]);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                  });
}

Var binary_cross_entropy(Var prob, double label, double eps) {
  Tape& t = tape_of({prob});
  if (prob.value().size() != 1) {
    throw DimensionError("binary_cross_entropy needs a scalar, got " +
                         prob.value().shape_string());
  }
  const double raw = prob.value()[0];
  const double p = std::clamp(raw, eps, 1.0 - eps);
  const bool clamped = p != raw;
  const double loss =
      -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
  return t.record(Op::kBinaryCrossEntropy, {prob.id()}, Tensor::scalar(loss),
                  [p, label, clamped](Tape& t, std::size_t self) {
                    if (clamped) return;
                    const double g = t.grad(self)[0];
                    t.grad_buffer(t.inputs(self)[0])[0] +=
                        g * (-label / p + (1.0 - label) / (1.0 - p));
                  });
}

}  // namespace acam::diff
