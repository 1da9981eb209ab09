// Copyright 2026 The AGN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "agn/model.h"

#include <doctest.h>

#include <cmath>

#include "agn/error.h"
#include "test_util.h"

using namespace agn;
using agn::testing::gradient_check;

namespace {

ModelDims small_dims() {
  ModelDims d;
  d.freq_bins = 8;
  d.embedding_dim = 4;
  d.blstm_layers = 1;
  d.hidden_units = 6;
  d.fc_layers = 1;
  d.fc_units = 0;
  return d;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng,
                              double lo = 0.0, double hi = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

}  // namespace

TEST_CASE("parameter shapes and count") {
  const ModelDims d = small_dims();
  const ModelParams p = ModelParams::zeros(d);
  REQUIRE(p.blstm.size() == 1);
  CHECK(p.blstm[0].forward.w_input.rows() == 24);
  CHECK(p.blstm[0].forward.w_input.cols() == 12);  // F + K
  CHECK(p.blstm[0].backward.w_recurrent.cols() == 6);
  REQUIRE(p.dense.size() == 1);
  CHECK(p.dense[0].weight.rows() == 8);
  CHECK(p.dense[0].weight.cols() == 12);  // both directions
  // Two directions of 4H(F+K) + 4H*H + 4H, then F*2H + F.
  const std::size_t lstm = 24 * 12 + 24 * 6 + 24;
  CHECK(p.num_parameters() == 2 * lstm + 8 * 12 + 8);
  CHECK(p.tensors().size() == p.tensor_names().size());

  ModelDims deep;
  const ModelParams q = ModelParams::zeros(deep);
  CHECK(q.blstm[1].forward.w_input.cols() == 128);
  CHECK(q.dense[0].weight.rows() == 64);
  CHECK(q.dense[1].weight.rows() == 129);
}

TEST_CASE("initialization ranges") {
  Rng rng(41);
  const ModelDims d = small_dims();
  const ModelParams p = ModelParams::initialized(d, rng);
  const double lim = 1.0 / std::sqrt(12.0 + 6.0);
  CHECK(p.blstm[0].forward.w_input.cwiseAbs().maxCoeff() <= lim);
  CHECK(p.blstm[0].forward.bias.segment(6, 6).isOnes());
  CHECK(p.blstm[0].forward.bias.head(6).isZero());
  CHECK(p.all_finite());
}

TEST_CASE("dims validation") {
  ModelDims d;
  CHECK_NOTHROW(d.validate());
  d.hidden_units = 0;
  CHECK_THROWS_AS(d.validate(), InvalidConfig);
  d = ModelDims{};
  d.fc_layers = 0;
  CHECK_THROWS_AS(d.validate(), InvalidConfig);
  const ModelDims big = ModelDims::full_scale();
  CHECK(big.blstm_layers == 5);
  CHECK(big.hidden_units == 512);
  CHECK(big.embedding_dim == 512);
}

TEST_CASE("superpose sums the selected rows") {
  Rng rng(42);
  const EmbeddingTable e = EmbeddingTable::random({"a", "b", "c", "d"}, 3, rng);
  const Eigen::VectorXd s = superpose(e, {0, 1, 0, 1});
  const Eigen::VectorXd expected = e.weights.row(1) + e.weights.row(3);
  CHECK((s - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(superpose(e, {0, 0, 0, 0}), InvalidInput);
  CHECK_THROWS_AS(superpose(e, {1, 0}), DimensionMismatch);
}

TEST_CASE("embedding table append and lookup") {
  Rng rng(43);
  EmbeddingTable e = EmbeddingTable::random({"a", "b"}, 4, rng);
  const Eigen::MatrixXd before = e.weights;
  e.append({"x", "y"}, rng, 0.1, true);
  CHECK(e.rows() == 4);
  CHECK(e.find("y") == 3);
  CHECK(e.find("zz") == -1);
  CHECK(e.weights.topRows(2) == before);
  CHECK_THROWS_AS(e.append({"a"}, rng), InvalidInput);
}

TEST_CASE("indicator_for_table maps labels to rows") {
  Rng rng(44);
  const EmbeddingTable e = EmbeddingTable::random({"p", "q", "r"}, 2, rng);
  const Indicator b = indicator_for_table(e, {"r", "p"}, {1, 0});
  CHECK(b == Indicator{0, 0, 1});
  CHECK_THROWS_AS(indicator_for_table(e, {"r", "zz"}, {1, 1}), DimensionMismatch);
}

TEST_CASE("mask is strictly inside (0, 1)") {
  Rng rng(45);
  const ModelDims d = small_dims();
  ModelParams p = ModelParams::initialized(d, rng);
  const CompressedMagnitude x{random_matrix(8, 7, rng, 0.0, 3.0), 0.3};
  const Eigen::VectorXd e = Eigen::VectorXd::Constant(4, 0.2);
  Mask m = forward(x, e, p);
  CHECK(m.values.rows() == 8);
  CHECK(m.values.cols() == 7);
  CHECK(m.values.minCoeff() > 0.0);
  CHECK(m.values.maxCoeff() < 1.0);
  // Saturate the output layer in both directions.
  p.dense[0].bias.setConstant(1e4);
  m = forward(x, e, p);
  CHECK(m.values.maxCoeff() < 1.0);
  p.dense[0].bias.setConstant(-1e4);
  m = forward(x, e, p);
  CHECK(m.values.minCoeff() > 0.0);
}

TEST_CASE("additive bias and concatenation agree") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(100 + trial);
    ModelDims d;
    d.freq_bins = static_cast<int>(rng.uniform_int(2, 12));
    d.embedding_dim = static_cast<int>(rng.uniform_int(1, 6));
    d.blstm_layers = static_cast<int>(rng.uniform_int(1, 3));
    d.hidden_units = static_cast<int>(rng.uniform_int(1, 8));
    d.fc_layers = static_cast<int>(rng.uniform_int(1, 3));
    d.fc_units = static_cast<int>(rng.uniform_int(1, 8));
    const int batch = static_cast<int>(rng.uniform_int(1, 3));
    const int frames = static_cast<int>(rng.uniform_int(1, 9));
    const ModelParams p = ModelParams::initialized(d, rng);
    const Eigen::MatrixXd x = random_matrix(d.freq_bins, frames * batch, rng, 0.0, 2.0);
    const Eigen::MatrixXd e = random_matrix(d.embedding_dim, batch, rng, -1.0, 1.0);
    const ForwardCache a = forward_batch(p, x, e, batch, GateInput::kAdditiveBias);
    const ForwardCache c = forward_batch(p, x, e, batch, GateInput::kConcatenate);
    for (std::size_t l = 0; l < a.blstm.size(); ++l) {
      CHECK((a.blstm[l].forward.preact - c.blstm[l].forward.preact).cwiseAbs().maxCoeff() <=
            1e-12);
      CHECK((a.blstm[l].backward.preact - c.blstm[l].backward.preact).cwiseAbs().maxCoeff() <=
            1e-12);
    }
    CHECK((a.mask - c.mask).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("batched forward equals per-sequence forward") {
  Rng rng(46);
  ModelDims d = small_dims();
  d.blstm_layers = 2;
  d.fc_layers = 2;
  d.fc_units = 5;
  const ModelParams p = ModelParams::initialized(d, rng);
  std::vector<Eigen::MatrixXd> grids;
  Eigen::MatrixXd e(4, 3);
  for (int b = 0; b < 3; ++b) {
    grids.push_back(random_matrix(8, 6, rng));
    e.col(b) = random_matrix(4, 1, rng, -1, 1);
  }
  const Eigen::MatrixXd packed = pack_batch(grids);
  for (int b = 0; b < 3; ++b) {
    CHECK(unpack_sequence(packed, 3, b) == grids[b]);
  }
  const ForwardCache c = forward_batch(p, packed, e, 3);
  for (int b = 0; b < 3; ++b) {
    const Mask m = forward({grids[b], 0.3}, e.col(b), p);
    CHECK((unpack_sequence(c.mask, 3, b) - m.values).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("forward rejects inconsistent shapes") {
  Rng rng(47);
  const ModelParams p = ModelParams::initialized(small_dims(), rng);
  CHECK_THROWS_AS(forward({random_matrix(9, 3, rng), 0.3}, Eigen::VectorXd::Zero(4), p),
                  DimensionMismatch);
  CHECK_THROWS_AS(forward({random_matrix(8, 3, rng), 0.3}, Eigen::VectorXd::Zero(5), p),
                  DimensionMismatch);
  CHECK_THROWS_AS(forward_batch(p, random_matrix(8, 7, rng), Eigen::MatrixXd::Zero(4, 2), 2),
                  DimensionMismatch);
}

TEST_CASE("apply_mask and loss") {
  Eigen::MatrixXd m(1, 2), x(1, 2), t(1, 2);
  m << 0.5, 0.25;
  x << 2.0, 4.0;
  t << 1.0, 3.0;
  const CompressedMagnitude est = apply_mask({m}, {x, 0.3});
  CHECK(est.values(0, 0) == 1.0);
  CHECK(est.values(0, 1) == 1.0);
  CHECK(loss({t, 0.3}, est) == 4.0);
  CHECK_THROWS_AS(loss({Eigen::MatrixXd::Zero(2, 2), 0.3}, est), DimensionMismatch);
}

TEST_CASE("analytic gradients match central differences") {
  SUBCASE("one BLSTM layer, one FC layer") {
    const auto r = gradient_check(small_dims(), 5, 1, 200, 48);
    CHECK(r.checked == 204);
    CHECK(r.failed == 0);
  }
  SUBCASE("stacked layers, batch of two") {
    ModelDims d = small_dims();
    d.blstm_layers = 2;
    d.hidden_units = 4;
    d.fc_layers = 2;
    d.fc_units = 5;
    const auto r = gradient_check(d, 4, 2, 300, 49);
    CHECK(r.failed == 0);
  }
}

TEST_CASE("backward reports the loss it differentiates") {
  Rng rng(50);
  const ModelParams p = ModelParams::initialized(small_dims(), rng);
  const Eigen::MatrixXd x = random_matrix(8, 10, rng);
  const Eigen::MatrixXd t = random_matrix(8, 10, rng);
  const Eigen::MatrixXd e = random_matrix(4, 2, rng);
  const ForwardCache c = forward_batch(p, x, e, 2);
  const Gradients g = backward(p, c, t);
  CHECK(g.loss == doctest::Approx((t - c.mask.cwiseProduct(x)).squaredNorm()).epsilon(1e-14));
  CHECK(g.embeddings.rows() == 4);
  CHECK(g.embeddings.cols() == 2);
}

TEST_CASE("backward refuses empty or stale caches") {
  Rng rng(51);
  ModelParams p = ModelParams::initialized(small_dims(), rng);
  const Eigen::MatrixXd x = random_matrix(8, 3, rng);
  CHECK_THROWS_AS(backward(p, ForwardCache{}, x), InvalidState);
  const ForwardCache c = forward_batch(p, x, Eigen::MatrixXd::Zero(4, 1), 1);
  ++p.revision;
  CHECK_THROWS_AS(backward(p, c, x), InvalidState);
}

TEST_CASE("embedding row gradients route by indicator") {
  Rng rng(52);
  const EmbeddingTable e = EmbeddingTable::random({"a", "b", "c"}, 2, rng);
  Eigen::MatrixXd g(2, 2);
  g << 1.0, 10.0,
       2.0, 20.0;
  const Eigen::MatrixXd rows = embedding_row_gradients(e, {{1, 1, 0}, {0, 1, 0}}, g);
  Eigen::MatrixXd expected(3, 2);
  expected << 1.0, 2.0,
              11.0, 22.0,
              0.0, 0.0;
  CHECK(rows == expected);
}

TEST_CASE("model creation checks the spectral front end") {
  ModelDims d;
  d.freq_bins = 65;
  CHECK_THROWS_AS(AgnModel::create(d, {"a"}, StftConfig{}, 0.3, 1), DimensionMismatch);
  StftConfig s;
  s.window_len = 128;
  s.hop = 64;
  const AgnModel m = AgnModel::create(d, {"a", "b"}, s, 0.3, 1);
  CHECK(m.embeddings.rows() == 2);
  const AgnModel m2 = AgnModel::create(d, {"a", "b"}, s, 0.3, 1);
  CHECK(m.params.blstm[0].forward.w_input == m2.params.blstm[0].forward.w_input);
  CHECK(m.embeddings.weights == m2.embeddings.weights);
}
