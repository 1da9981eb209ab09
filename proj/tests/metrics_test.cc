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

#include "agn/metrics.h"

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "agn/error.h"
#include "test_util.h"

using namespace agn;
using agn::testing::noise_corpus;
using agn::testing::random_waveform;

namespace {

Waveform wave(std::vector<double> v) { return Waveform(std::move(v), 8000); }

Waveform scaled(const Waveform& w, double a) {
  Waveform out = w;
  for (double& v : out.samples) v *= a;
  return out;
}

// Explicit projection, independent of the library implementation.
struct Projection {
  std::vector<double> t_proj;
  std::vector<double> noise;
};

Projection project(const Waveform& est, const Waveform& t) {
  double dot = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    dot += est.samples[i] * t.samples[i];
    tt += t.samples[i] * t.samples[i];
  }
  Projection p;
  for (std::size_t i = 0; i < t.size(); ++i) {
    p.t_proj.push_back(dot / tt * t.samples[i]);
    p.noise.push_back(est.samples[i] - p.t_proj.back());
  }
  return p;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

TEST_CASE("si_snr hand example") {
  CHECK(std::abs(si_snr(wave({1.0, 1.0}), wave({1.0, 0.0}))) <= 1e-12);
  // est = [2, 1] against [1, 0]: projection [2, 0], noise [0, 1], 10 log10 4.
  CHECK(si_snr(wave({2.0, 1.0}), wave({1.0, 0.0})) ==
        doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-14));
}

TEST_CASE("si_snr caps") {
  Rng rng(71);
  const Waveform t = random_waveform(500, rng);
  CHECK(si_snr(t, t) == kSiSnrCapDb);
  CHECK(si_snr(scaled(t, 3.7), t) == kSiSnrCapDb);
  CHECK(si_snr(scaled(t, -0.2), t) == kSiSnrCapDb);
  // Orthogonal estimate: zero projection.
  CHECK(si_snr(wave({0.0, 1.0}), wave({1.0, 0.0})) == -kSiSnrCapDb);
  CHECK(si_snr(wave({0.0, 0.0}), wave({1.0, 0.0})) == -kSiSnrCapDb);
}

TEST_CASE("si_snr errors") {
  CHECK_THROWS_AS(si_snr(wave({1.0, 0.0}), wave({0.0, 0.0})), InvalidInput);
  CHECK_THROWS_AS(si_snr(wave({1.0}), wave({1.0, 0.0})), InvalidInput);
}

TEST_CASE("si_snr is scale invariant") {
  Rng rng(72);
  for (int trial = 0; trial < 50; ++trial) {
    const Waveform t = random_waveform(1000, rng);
    const Waveform est = random_waveform(1000, rng);
    const double base = si_snr(est, t);
    for (double a : {1e-3, 0.5, 7.0, 1e4, -2.0}) {
      CHECK(std::abs(si_snr(scaled(est, a), t) - base) <= 1e-9);
    }
    // Scaling the target does not matter either.
    CHECK(std::abs(si_snr(est, scaled(t, 0.01)) - base) <= 1e-9);
  }
}

TEST_CASE("si_snr matches the explicit projection") {
  Rng rng(73);
  for (int trial = 0; trial < 50; ++trial) {
    const Waveform t = random_waveform(800, rng);
    Waveform est = random_waveform(800, rng);
    for (std::size_t i = 0; i < est.size(); ++i) est.samples[i] += t.samples[i];
    const Projection p = project(est, t);
    double dot = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) dot += p.noise[i] * t.samples[i];
    CHECK(std::abs(dot) <= 1e-9 * std::sqrt(norm2(p.noise) * norm2(t.samples)));
    const double expected = 10.0 * std::log10(norm2(p.t_proj) / norm2(p.noise));
    CHECK(si_snr(est, t) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("report aggregation") {
  EvalReport r;
  r.sisnr_db = {1.0, 4.0, 2.0, 10.0};
  r.mixture_sisnr_db = {0.0, 0.0, 1.0, 1.0};
  r.finalize();
  CHECK(r.count == 4);
  CHECK(*r.mean == 4.25);
  CHECK(*r.median == 3.0);
  CHECK(*r.mixture_mean == 0.5);
  CHECK(*r.mean_improvement() == 3.75);

  EvalReport empty;
  empty.finalize();
  CHECK(empty.count == 0);
  CHECK_FALSE(empty.mean.has_value());
  CHECK_FALSE(empty.mean_improvement().has_value());
  std::ostringstream s;
  write_report_summary(empty, s);
  CHECK(s.str().find("mean_sisnr_db = undefined") != std::string::npos);
}

TEST_CASE("report files") {
  EvalReport r;
  r.sisnr_db = {1.5, -2.25};
  r.mixture_sisnr_db = {0.0, 0.0};
  r.checkpoint_id = "abc";
  r.finalize();
  std::ostringstream csv, sum;
  write_report_csv(r, csv);
  CHECK(csv.str() == "index,sisnr_db\n0,1.5\n1,-2.25\n");
  write_report_summary(r, sum);
  CHECK(sum.str().find("count = 2\n") != std::string::npos);
  CHECK(sum.str().find("mean_sisnr_db = -0.375\n") != std::string::npos);
  CHECK(sum.str().find("checkpoint = abc\n") != std::string::npos);
}

TEST_CASE("evaluate: oracle beats mixture, determinism, empty run") {
  const Corpus c = noise_corpus(4, 2, 12000, 74);
  ModelDims d;
  d.embedding_dim = 4;
  d.blstm_layers = 1;
  d.hidden_units = 4;
  d.fc_layers = 1;
  const AgnModel m = AgnModel::create(d, c.labels(), {}, 0.3, 3);
  TaskConfig task;
  task.tau = 4000;
  task.g_range = {1, 2};
  task.h_range = {1, 2};
  task.seed = 8;

  const EvalReport oracle = evaluate(m, c, task, 10, EvalEstimate::kOracleTarget);
  REQUIRE(oracle.count == 10);
  CHECK(*oracle.mean > *oracle.mixture_mean);

  const EvalReport a = evaluate(m, c, task, 10);
  const EvalReport b = evaluate(m, c, task, 10);
  CHECK(a.sisnr_db == b.sisnr_db);
  CHECK(a.mixture_sisnr_db == oracle.mixture_sisnr_db);
  double sum = 0.0;
  for (double v : a.sisnr_db) sum += v;
  CHECK(std::abs(sum / 10.0 - *a.mean) <= 1e-12);

  const EvalReport none = evaluate(m, c, task, 0);
  CHECK(none.count == 0);
  CHECK_FALSE(none.mean.has_value());
}
