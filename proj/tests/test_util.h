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

#ifndef AGN_TESTS_TEST_UTIL_H_
#define AGN_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "agn/dsp.h"
#include "agn/model.h"
#include "agn/rng.h"
#include "agn/task.h"

namespace agn::testing {

inline Waveform random_waveform(std::size_t n, Rng& rng, double scale = 0.3) {
  Waveform w = Waveform::zeros(n);
  for (double& v : w.samples) v = scale * rng.normal();
  return w;
}

inline double energy(const Waveform& w) {
  double e = 0.0;
  for (double v : w.samples) e += v * v;
  return e;
}

// O(n^2) DFT of a Hann-windowed frame, non-negative bins only. Independent
// of the FFT path used by stft().
inline std::vector<std::complex<double>> direct_dft_frame(
    const std::vector<double>& signal, std::size_t start, int n) {
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
      const double ang = -2.0 * std::numbers::pi * k * i / n;
      acc += signal[start + i] * w * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

inline double relative_rms_error(const std::vector<double>& a,
                                 const std::vector<double>& b,
                                 std::size_t begin, std::size_t end) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

// Noise-burst corpus: cheap to build, every utterance non-silent.
inline Corpus noise_corpus(int speakers, int utterances, std::size_t len,
                           std::uint64_t seed,
                           CorpusRole role = CorpusRole::kWellKnown) {
  Corpus c;
  c.role = role;
  Rng rng(seed);
  for (int s = 0; s < speakers; ++s) {
    SpeakerProfile p;
    p.speaker_id = s;
    p.label = "s" + std::to_string(s);
    for (int u = 0; u < utterances; ++u) {
      p.utterances.push_back(random_waveform(len, rng, 0.1 * (s + 1)));
    }
    c.profiles.push_back(std::move(p));
  }
  return c;
}

// Loss recomputed from a plain forward pass, for finite differences.
inline double forward_loss(const ModelParams& params,
                           const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& embeddings, int batch,
                           const Eigen::MatrixXd& targets) {
  const ForwardCache c = forward_batch(params, inputs, embeddings, batch);
  return (targets - c.mask.cwiseProduct(inputs)).squaredNorm();
}

struct GradCheckResult {
  int checked = 0;
  int failed = 0;
  double worst_rel = 0.0;  // over every checked entry
  double worst_abs = 0.0;
};

// Central differences on `count` randomly chosen weights plus every
// embedding coordinate. An entry passes if its relative error is within
// rel_tol or its absolute error within abs_tol.
inline GradCheckResult gradient_check(const ModelDims& dims, int frames,
                                      int batch, int count, std::uint64_t seed,
                                      double h = 1e-5, double rel_tol = 1e-4,
                                      double abs_tol = 1e-6) {
  Rng rng(seed);
  ModelParams params = ModelParams::initialized(dims, rng);
  const int cols = frames * batch;
  Eigen::MatrixXd x(dims.freq_bins, cols), t(dims.freq_bins, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = rng.uniform(0.0, 2.0);
    t.data()[i] = x.data()[i] * rng.uniform(0.0, 1.0);
  }
  Eigen::MatrixXd emb(dims.embedding_dim, batch);
  for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = rng.normal();

  const ForwardCache cache = forward_batch(params, x, emb, batch);
  const Gradients g = backward(params, cache, t);

  GradCheckResult r;
  auto judge = [&](double analytic, double numeric) {
    const double abs_err = std::abs(analytic - numeric);
    const double rel = abs_err / std::max(std::abs(analytic) + std::abs(numeric), 1e-300);
    ++r.checked;
    if (rel > rel_tol && abs_err > abs_tol) ++r.failed;
    r.worst_rel = std::max(r.worst_rel, rel);
    r.worst_abs = std::max(r.worst_abs, abs_err);
  };

  auto spans = params.tensors();
  const auto grad_spans = g.params.tensors();
  std::size_t total = 0;
  for (const auto& s : spans) total += s.size();
  for (int n = 0; n < count; ++n) {
    std::size_t flat = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(total) - 1));
    std::size_t k = 0;
    while (flat >= spans[k].size()) flat -= spans[k++].size();
    double& w = spans[k][flat];
    const double saved = w;
    w = saved + h;
    const double lp = forward_loss(params, x, emb, batch, t);
    w = saved - h;
    const double lm = forward_loss(params, x, emb, batch, t);
    w = saved;
    judge(grad_spans[k][flat], (lp - lm) / (2.0 * h));
  }
  for (Eigen::Index i = 0; i < emb.size(); ++i) {
    Eigen::MatrixXd ep = emb, em = emb;
    ep.data()[i] += h;
    em.data()[i] -= h;
    const double numeric = (forward_loss(params, x, ep, batch, t) -
                            forward_loss(params, x, em, batch, t)) / (2.0 * h);
    judge(g.embeddings.data()[i], numeric);
  }
  return r;
}

}  // namespace agn::testing

#endif  // AGN_TESTS_TEST_UTIL_H_
