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

#include <cmath>
#include <random>
#include <vector>

#include "acam/error.h"
#include "acam/model.h"
#include "doctest.h"
#include "oracles.h"
#include "test_util.h"

namespace acam::model {
namespace {

using diff::Tape;
using diff::Tensor;

Hyperparams tiny(std::size_t m = 2, std::size_t l = 2) {
  Hyperparams h;
  h.dim = h.key_dim = h.value_dim = 4;
  h.num_attributes = m;
  h.history_length = l;
  h.mlp_hidden1 = 4;
  h.mlp_hidden2 = 2;
  return h;
}

// Entities 0..5 are items; 6..11 attribute values. Item 5 has no attributes,
// item 4 has only its first slot.
kg::AttributeTable tiny_attributes(std::size_t m) {
  kg::AttributeTable t(12, m);
  for (kg::EntityId item = 0; item < 4; ++item) {
    for (kg::RelationId r = 0; r < m; ++r) {
      t.add(item, r, 6 + (item + 2 * r) % 6);
      if ((item + r) % 2 == 0) t.add(item, r, 6 + (item + 3 * r + 1) % 6);
    }
  }
  t.add(4, 0, 7);
  return t;
}

// Every tensor drawn from N(0, sd^2), relation normals renormalized.
void randomize(ModelParams& p, std::uint64_t seed, double sd = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  for (std::size_t id = 0; id < p.store.size(); ++id) {
    for (auto& v : p.store.value(id).data()) v = n(rng);
  }
  p.renormalize_relations();
}

void check_mat(const Tensor& got, const oracle::Mat& want, double tol) {
  REQUIRE(got.rows() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    REQUIRE(got.cols() == want[i].size());
    for (std::size_t k = 0; k < want[i].size(); ++k) {
      CHECK(std::abs(got(i, k) - want[i][k]) <= tol);
    }
  }
}

TEST_CASE("hyperparameter validation reports every violation") {
  Hyperparams h;
  h.dim = 0;
  h.lambda1 = -1;
  h.key_dim = 3;
  try {
    h.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("lambda1") != std::string::npos);
    CHECK(what.find("tie_kv") != std::string::npos);
  }
  CHECK_NOTHROW(Hyperparams{}.validate());
}

TEST_CASE("item representation averages attribute values") {
  Hyperparams h = tiny(1);
  h.dim = h.key_dim = h.value_dim = 2;
  ModelParams p = zero_params(h, 3);
  auto& e = p.store.value(p.entities);
  e(1, 0) = 2;
  e(2, 1) = 2;
  p.store.value(p.unknown_values)(0, 0) = 9;
  kg::AttributeTable attrs(3, 1);
  attrs.add(0, 0, 1);
  attrs.add(0, 0, 2);
  Tape t(p.store);
  Network net(t, p, attrs);
  const Tensor rep = net.item_representation(0).value();
  CHECK(rep.shape() == std::vector<std::size_t>{2, 2});
  CHECK(rep(1, 0) == 1.0);
  CHECK(rep(1, 1) == 1.0);
  // Entity 1 has no attributes: unknown embedding.
  const Tensor cold = net.item_representation(1).value();
  CHECK(cold(0, 0) == 2.0);
  CHECK(cold(1, 0) == 9.0);
  CHECK_THROWS_AS(net.item_representation(3), Error);
}

TEST_CASE("default item representation shape") {
  Hyperparams h;
  ModelParams p = init_params(h, 3, 1);
  kg::AttributeTable attrs(3, h.num_attributes);
  Tape t(p.store);
  Network net(t, p, attrs);
  CHECK(net.item_representation(2).value().shape() ==
        std::vector<std::size_t>{5, 512});
}

TEST_CASE("forward pass matches loop oracles") {
  for (bool softmax : {false, true}) {
    for (bool tied : {true, false}) {
      for (bool coatt : {true, false}) {
        Hyperparams h = tiny(2, 3);
        h.attention_softmax = softmax;
        h.tie_kv = tied;
        h.coattention = coatt;
        if (!tied) h.key_dim = 3, h.value_dim = 5;
        const auto attrs = tiny_attributes(2);
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
          ModelParams p = init_params(h, 12, seed);
          randomize(p, seed);
          UserHistory hist{{3, 4, 0}, {1, seed % 2 == 0 ? 0 : 1, 1}};
          for (ItemId item : {0u, 2u, 5u}) {
            Tape t(p.store);
            Network net(t, p, attrs);
            const auto want_v = oracle::item_rep(p, attrs, item);
            check_mat(net.item_representation(item).value(), want_v, 1e-12);
            const auto want_u = oracle::user_rep(p, attrs, hist, want_v);
            diff::Var user = net.user_representation(hist, net.item_representation(item));
            check_mat(user.value(), want_u, 1e-12);
            const auto co = net.coattention(user, net.item_representation(item));
            const auto want_co = oracle::coattention(p, want_u, want_v);
            check_mat(co.affinity.value(), want_co.s, 1e-12);
            check_mat(co.user.value(), {want_co.ru}, 1e-12);
            check_mat(co.item.value(), {want_co.rv}, 1e-12);
            const double y = predict(hist, item, p, attrs);
            CHECK(std::abs(y - oracle::predict(p, attrs, hist, item)) <= 1e-12);
            CHECK(y > 0.0);
            CHECK(y < 1.0);
          }
        }
      }
    }
  }
}

TEST_CASE("hand-set coattention with M = 1") {
  Hyperparams h = tiny(1);
  h.dim = h.key_dim = h.value_dim = 2;
  ModelParams p = zero_params(h, 2);
  // Identity key transform with zero bias: K = tanh(E).
  for (auto id : {p.key_w_user, p.key_w_item}) {
    p.store.value(id) = Tensor::matrix({{1, 0}, {0, 1}});
  }
  kg::AttributeTable attrs(2, 1);
  Tape t(p.store);
  Network net(t, p, attrs);
  auto eu = t.constant(Tensor::matrix({{0.5, -0.2}, {0.1, 0.9}}));
  auto ev = t.constant(Tensor::matrix({{-0.4, 0.3}, {0.7, 0.2}}));
  const auto co = net.coattention(eu, ev);
  // Hand expansion.
  double ku[2][2], kv[2][2];
  const double u[2][2] = {{0.5, -0.2}, {0.1, 0.9}};
  const double v[2][2] = {{-0.4, 0.3}, {0.7, 0.2}};
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k) ku[i][k] = std::tanh(u[i][k]), kv[i][k] = std::tanh(v[i][k]);
  }
  double s[2][2];
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) s[i][j] = ku[i][0] * kv[j][0] + ku[i][1] * kv[j][1];
  }
  double ru[2] = {0, 0}, rv[2] = {0, 0};
  for (int j = 0; j < 2; ++j) {
    const double zc = std::exp(s[0][j]) + std::exp(s[1][j]);
    for (int i = 0; i < 2; ++i) {
      // U row j = sum_i colsoftmax(S)[i][j] * Vu[i]
      for (int k = 0; k < 2; ++k) ru[k] += std::exp(s[i][j]) / zc * ku[i][k];
    }
  }
  for (int i = 0; i < 2; ++i) {
    const double zr = std::exp(s[i][0]) + std::exp(s[i][1]);
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) rv[k] += std::exp(s[i][j]) / zr * kv[j][k];
    }
  }
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(co.user.value()[k] - ru[k]) <= 1e-12);
    CHECK(std::abs(co.item.value()[k] - rv[k]) <= 1e-12);
  }
}

TEST_CASE("zero inputs give uniform attention") {
  Hyperparams h = tiny(2);
  ModelParams p = init_params(h, 12, 3);
  kg::AttributeTable attrs(12, 2);
  Tape t(p.store);
  Network net(t, p, attrs);
  auto zero = t.constant(Tensor({3, 4}));
  const auto co = net.coattention(zero, zero);
  for (double v : co.affinity.value().data()) CHECK(v == 0.0);
  for (double v : co.user.value().data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(net.coattention(t.constant(Tensor({2, 4})), zero), DimensionError);
}

TEST_CASE("permuting attributes permutes S and leaves r unchanged") {
  Hyperparams h = tiny(2);
  ModelParams p = init_params(h, 12, 4);
  randomize(p, 4);
  kg::AttributeTable attrs(12, 2);
  std::mt19937_64 rng(9);
  const Tensor eu = testing::random_tensor({3, 4}, rng);
  const Tensor ev = testing::random_tensor({3, 4}, rng);
  const std::size_t perm[3] = {2, 0, 1};
  Tensor pu({3, 4}), pv({3, 4});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) pu(i, k) = eu(perm[i], k), pv(i, k) = ev(perm[i], k);
  }
  Tape t(p.store);
  Network net(t, p, attrs);
  const auto a = net.coattention(t.constant(eu), t.constant(ev));
  const auto b = net.coattention(t.constant(pu), t.constant(pv));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(b.affinity.value()(i, j) ==
            doctest::Approx(a.affinity.value()(perm[i], perm[j])).epsilon(1e-12));
    }
  }
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(b.user.value()[k] == doctest::Approx(a.user.value()[k]).epsilon(1e-12));
    CHECK(b.item.value()[k] == doctest::Approx(a.item.value()[k]).epsilon(1e-12));
  }
}

TEST_CASE("single history item and unit weights") {
  Hyperparams h = tiny(2, 1);
  ModelParams p = init_params(h, 12, 5);
  randomize(p, 5);
  const auto attrs = tiny_attributes(2);
  // Freeze the attention net to output exactly 1.
  p.store.value(p.attn_w2).fill(0.0);
  p.store.value(p.attn_b2).fill(1.0);
  Tape t(p.store);
  Network net(t, p, attrs);
  UserHistory two{{1, 2}, {1, 1}};
  const Tensor sum_rep = net.user_representation(two, net.item_representation(3)).value();
  const Tensor r1 = net.item_representation(1).value();
  const Tensor r2 = net.item_representation(2).value();
  for (std::size_t i = 0; i < sum_rep.size(); ++i) {
    CHECK(sum_rep[i] == doctest::Approx(r1[i] + r2[i]).epsilon(1e-14));
  }
  UserHistory one = UserHistory::from_recent(std::vector<ItemId>{1}, 1);
  const Tensor single = net.user_representation(one, net.item_representation(3)).value();
  CHECK(single == r1);
}

TEST_CASE("masked positions and empty histories") {
  Hyperparams h = tiny(2, 3);
  ModelParams p = init_params(h, 12, 6);
  randomize(p, 6);
  const auto attrs = tiny_attributes(2);
  Tape t(p.store);
  Network net(t, p, attrs);
  auto cand = net.item_representation(0);
  UserHistory masked{{1, 5, 2}, {1, 0, 1}};
  UserHistory dropped{{1, 2}, {1, 1}};
  const Tensor a = net.user_representation(masked, cand).value();
  const Tensor b = net.user_representation(dropped, cand).value();
  CHECK(a == b);
  UserHistory none{{1, 2}, {0, 0}};
  CHECK_THROWS_AS(net.user_representation(none, cand), Error);
  const auto padded = UserHistory::from_recent(std::vector<ItemId>{4}, 3);
  CHECK(padded.items.size() == 3);
  CHECK(padded.valid_count() == 1);
}

TEST_CASE("user representation depends on the candidate") {
  Hyperparams h = tiny(2, 2);
  ModelParams p = init_params(h, 12, 7);
  randomize(p, 7);
  const auto attrs = tiny_attributes(2);
  Tape t(p.store);
  Network net(t, p, attrs);
  UserHistory hist{{1, 2}, {1, 1}};
  const Tensor a = net.user_representation(hist, net.item_representation(0)).value();
  const Tensor b = net.user_representation(hist, net.item_representation(3)).value();
  CHECK_FALSE(a == b);
}

TEST_CASE("coattention ablation switch changes predictions") {
  Hyperparams h = tiny(2, 2);
  h.mlp_hidden1 = h.mlp_hidden2 = 16;  // a 4/2 relu stack is often fully dead
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ModelParams p = init_params(h, 12, seed);
    randomize(p, seed);
    const auto attrs = tiny_attributes(2);
    UserHistory hist{{1, 2}, {1, 1}};
    const double full = predict(hist, 0, p, attrs);
    p.hyper.coattention = false;
    CHECK(predict(hist, 0, p, attrs) != full);
  }
}

TEST_CASE("tied parameters are the same tensors") {
  Hyperparams h = tiny();
  ModelParams tied = init_params(h, 12, 1);
  CHECK(tied.value_w_user == tied.key_w_user);
  CHECK(tied.value_b_item == tied.key_b_item);
  CHECK_FALSE(tied.store.find("value_w_user").has_value());
  h.tie_kv = false;
  ModelParams untied = init_params(h, 12, 1);
  CHECK(untied.value_w_user != untied.key_w_user);
}

TEST_CASE("zero parameters predict one half") {
  const Hyperparams h = tiny();
  const ModelParams p = zero_params(h, 12);
  const auto attrs = tiny_attributes(2);
  UserHistory hist{{1, 2}, {1, 1}};
  CHECK(predict(hist, 3, p, attrs) == 0.5);
}

TEST_CASE("predict is deterministic") {
  Hyperparams h = tiny();
  ModelParams p = init_params(h, 12, 2);
  randomize(p, 2);
  const auto attrs = tiny_attributes(2);
  UserHistory hist{{1, 2}, {1, 1}};
  CHECK(predict(hist, 3, p, attrs) == predict(hist, 3, p, attrs));
  CHECK(init_params(h, 12, 2) == init_params(h, 12, 2));
  CHECK_FALSE(init_params(h, 12, 2) == init_params(h, 12, 3));
}

TEST_CASE("initialization has unit relation normals") {
  Hyperparams h = tiny(3);
  const ModelParams p = init_params(h, 10, 1);
  const Tensor& w = p.store.value(p.relation_normals);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0;
    for (double v : w.row(r)) s += v * v;
    CHECK(std::abs(std::sqrt(s) - 1.0) <= 1e-12);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  testing::TempDir dir;
  for (bool tied : {true, false}) {
    Hyperparams h = tiny();
    h.tie_kv = tied;
    h.attention_softmax = !tied;
    h.lambda1 = 0.05;
    ModelParams p = init_params(h, 12, 11);
    randomize(p, 11);
    const auto path = dir.file(tied ? "tied.acam" : "untied.acam");
    save_checkpoint(p, path);
    const ModelParams q = load_checkpoint(path);
    CHECK(q == p);
    CHECK(q.hyper == p.hyper);
    CHECK((q.value_w_user == q.key_w_user) == tied);
    const std::string bytes = testing::read_file(path);
    CHECK(bytes.substr(0, 4) == "ACAM");
  }
  CHECK_THROWS_AS(load_checkpoint(dir.write("junk.acam", "JUNKJUNK")), Error);
  CHECK_THROWS_AS(load_checkpoint(dir.file("none.acam")), Error);
  // Truncated file.
  ModelParams p = init_params(tiny(), 12, 1);
  save_checkpoint(p, dir.file("full.acam"));
  const std::string full = testing::read_file(dir.file("full.acam"));
  CHECK_THROWS_AS(load_checkpoint(dir.write("cut.acam", full.substr(0, full.size() / 2))),
                  Error);
}

}  // namespace
}  // namespace acam::model
