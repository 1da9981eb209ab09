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

#include "agn/dsp.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "agn/error.h"

namespace agn {
namespace {

constexpr double kEnvelopeFloor = 1e-8;
// Denominators are clamped to this fraction of the peak envelope so that
// modified (inconsistent) spectrograms are not amplified near the edges.
constexpr double kEnvelopeClamp = 0.1;

// Real-to-complex and complex-to-real plans for one transform size. Plans
// are created under a global lock because the FFTW planner is not
// reentrant; execution on the per-object buffers is.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    static std::mutex planner_mutex;
    std::lock_guard<std::mutex> lock(planner_mutex);
    forward_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(n, out_, in_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* real() { return in_; }
  fftw_complex* spectrum() { return out_; }
  void forward() { fftw_execute(forward_); }
  // Unnormalised: result is n times the inverse DFT.
  void inverse() { fftw_execute(inverse_); }
  int size() const { return n_; }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

RealFft& fft_for(int n) {
  thread_local std::map<int, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

std::vector<double> window_for(const StftConfig& cfg) {
  switch (cfg.window) {
    case WindowKind::kHann:
      return hann_window(cfg.window_len);
  }
  throw InvalidInput("unknown window kind");
}

}  // namespace

void Waveform::validate() const {
  if (sample_rate <= 0) throw InvalidInput("waveform sample rate must be > 0");
  for (double v : samples) {
    if (!std::isfinite(v)) throw InvalidInput("waveform has non-finite sample");
  }
}

void StftConfig::validate() const {
  if (window_len < 2) throw InvalidInput("stft window must be >= 2 samples");
  if (hop < 1 || hop > window_len) {
    throw InvalidInput("stft hop must be in [1, window_len]");
  }
}

int StftConfig::num_frames(std::size_t len) const {
  if (len < static_cast<std::size_t>(window_len)) return 0;
  return static_cast<int>((len - window_len) / hop) + 1;
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  if (w.size() < static_cast<std::size_t>(cfg.window_len)) {
    throw InvalidInput("stft: signal of " + std::to_string(w.size()) +
                       " samples is shorter than one window (" +
                       std::to_string(cfg.window_len) + ")");
  }
  const int n = cfg.window_len;
  const int bins = cfg.num_bins();
  const int frames = cfg.num_frames(w.size());
  const std::vector<double> win = window_for(cfg);

  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.source_len = w.size();
  spec.sample_rate = w.sample_rate;
  spec.bins.resize(bins, frames);

  RealFft& fft = fft_for(n);
  for (int t = 0; t < frames; ++t) {
    const double* src = w.samples.data() + static_cast<std::size_t>(t) * cfg.hop;
    for (int i = 0; i < n; ++i) fft.real()[i] = src[i] * win[i];
    fft.forward();
    for (int f = 0; f < bins; ++f) {
      spec.bins(f, t) = {fft.spectrum()[f][0], fft.spectrum()[f][1]};
    }
  }
  return spec;
}

Waveform istft(const ComplexSpectrogram& spec) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (spec.num_bins() != cfg.num_bins()) {
    throw InvalidInput("istft: spectrogram has " +
                       std::to_string(spec.num_bins()) + " bins, config needs " +
                       std::to_string(cfg.num_bins()));
  }
  if (spec.num_frames() != cfg.num_frames(spec.source_len)) {
    throw InvalidInput("istft: frame count " +
                       std::to_string(spec.num_frames()) +
                       " inconsistent with source length " +
                       std::to_string(spec.source_len));
  }
  const int n = cfg.window_len;
  const std::vector<double> win = window_for(cfg);
  std::vector<double> out(spec.source_len, 0.0);
  std::vector<double> envelope(spec.source_len, 0.0);

  RealFft& fft = fft_for(n);
  for (int t = 0; t < spec.num_frames(); ++t) {
    for (int f = 0; f < spec.num_bins(); ++f) {
      fft.spectrum()[f][0] = spec.bins(f, t).real();
      fft.spectrum()[f][1] = spec.bins(f, t).imag();
    }
    // c2r ignores the imaginary part of DC and Nyquist, which is the
    // Hermitian projection we want.
    fft.inverse();
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
    for (int i = 0; i < n; ++i) {
      out[start + i] += win[i] * fft.real()[i] / n;
      envelope[start + i] += win[i] * win[i];
    }
  }
  double peak = 0.0;
  for (double e : envelope) peak = std::max(peak, e);
  const double clamp = kEnvelopeClamp * peak;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = envelope[i] < kEnvelopeFloor
                 ? 0.0
                 : out[i] / std::max(envelope[i], clamp);
  }
  return Waveform(std::move(out), spec.sample_rate);
}

Eigen::MatrixXd magnitude(const ComplexSpectrogram& spec) {
  return spec.bins.cwiseAbs();
}

CompressedMagnitude compress(const Eigen::MatrixXd& mag, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("compress: p must be in (0, 1]");
  CompressedMagnitude cm;
  cm.p = p;
  cm.values.resize(mag.rows(), mag.cols());
  for (Eigen::Index i = 0; i < mag.size(); ++i) {
    const double u = mag.data()[i];
    if (!(u >= 0.0) || !std::isfinite(u)) {
      throw InvalidInput("compress: entries must be finite and >= 0");
    }
    cm.values.data()[i] = u == 0.0 ? 0.0 : std::pow(u, p);
  }
  return cm;
}

Eigen::MatrixXd decompress(const CompressedMagnitude& cm) {
  if (!(cm.p > 0.0 && cm.p <= 1.0)) {
    throw InvalidInput("decompress: p must be in (0, 1]");
  }
  const double inv = 1.0 / cm.p;
  Eigen::MatrixXd out(cm.values.rows(), cm.values.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double u = cm.values.data()[i];
    if (!(u >= 0.0)) throw InvalidInput("decompress: negative entry");
    out.data()[i] = u == 0.0 ? 0.0 : std::pow(u, inv);
  }
  return out;
}

Waveform reconstruct(const CompressedMagnitude& est,
                     const ComplexSpectrogram& mixture_spec) {
  if (est.values.rows() != mixture_spec.bins.rows() ||
      est.values.cols() != mixture_spec.bins.cols()) {
    throw DimensionMismatch("reconstruct: estimate is " +
                            std::to_string(est.values.rows()) + "x" +
                            std::to_string(est.values.cols()) +
                            ", mixture spectrogram is " +
                            std::to_string(mixture_spec.bins.rows()) + "x" +
                            std::to_string(mixture_spec.bins.cols()));
  }
  const Eigen::MatrixXd mag = decompress(est);
  ComplexSpectrogram out;
  out.config = mixture_spec.config;
  out.source_len = mixture_spec.source_len;
  out.sample_rate = mixture_spec.sample_rate;
  out.bins.resize(mag.rows(), mag.cols());
  for (Eigen::Index i = 0; i < mag.size(); ++i) {
    const double phase = std::arg(mixture_spec.bins.data()[i]);
    out.bins.data()[i] = std::polar(mag.data()[i], phase);
  }
  return istft(out);
}

CompressedMagnitude compressed_spectrogram(const Waveform& w,
                                           const StftConfig& cfg, double p) {
  return compress(magnitude(stft(w, cfg)), p);
}

Waveform downsample_2x(const Waveform& w) {
  if (w.sample_rate != 16000) {
    throw InvalidInput("downsample_2x: expected 16000 Hz input, got " +
                       std::to_string(w.sample_rate));
  }
  constexpr int kTaps = 129;
  constexpr int kHalf = kTaps / 2;
  constexpr double kCutoff = 0.25;  // cycles/sample at the input rate
  static const std::vector<double> taps = [] {
    std::vector<double> h(kTaps);
    double sum = 0.0;
    for (int i = 0; i < kTaps; ++i) {
      const double m = i - kHalf;
      const double x = 2.0 * kCutoff * m;
      const double sinc =
          m == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double a = 2.0 * std::numbers::pi * i / (kTaps - 1);
      const double blackman = 0.42 - 0.5 * std::cos(a) + 0.08 * std::cos(2 * a);
      h[i] = 2.0 * kCutoff * sinc * blackman;
      sum += h[i];
    }
    for (double& v : h) v /= sum;
    return h;
  }();

  const long n = static_cast<long>(w.size());
  // Mirror the signal about its end points so DC is preserved at the edges.
  auto at = [&](long i) {
    if (n == 1) return w.samples[0];
    const long period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return w.samples[i < n ? i : period - i];
  };
  std::vector<double> out((w.size() + 1) / 2);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const long center = 2 * static_cast<long>(k);
    double acc = 0.0;
    for (int j = 0; j < kTaps; ++j) acc += taps[j] * at(center + j - kHalf);
    out[k] = acc;
  }
  return Waveform(std::move(out), 8000);
}

}  // namespace agn
