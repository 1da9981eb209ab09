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

#ifndef AGN_DSP_H_
#define AGN_DSP_H_

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace agn {

constexpr int kModelSampleRate = 8000;

// Mono audio. Samples are nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kModelSampleRate;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {}
  static Waveform zeros(std::size_t n, int rate = kModelSampleRate) {
    return Waveform(std::vector<double>(n, 0.0), rate);
  }

  std::size_t size() const { return samples.size(); }
  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  // Throws InvalidInput on non-finite samples or a non-positive rate.
  void validate() const;
};

enum class WindowKind { kHann };

struct StftConfig {
  int window_len = 256;  // 32 ms at 8 kHz
  int hop = 128;         // 16 ms at 8 kHz
  WindowKind window = WindowKind::kHann;

  void validate() const;
  int num_bins() const { return window_len / 2 + 1; }
  // Frames without center padding; 0 if the signal is shorter than a window.
  int num_frames(std::size_t len) const;
  bool operator==(const StftConfig&) const = default;
};

// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

using ComplexGrid =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

// F x T grid; column t holds frame t.
struct ComplexSpectrogram {
  ComplexGrid bins;
  StftConfig config;
  std::size_t source_len = 0;
  int sample_rate = kModelSampleRate;

  int num_bins() const { return static_cast<int>(bins.rows()); }
  int num_frames() const { return static_cast<int>(bins.cols()); }
};

// Power-law compressed magnitude, F x T, entries >= 0.
struct CompressedMagnitude {
  Eigen::MatrixXd values;
  double p = 0.3;

  int num_bins() const { return static_cast<int>(values.rows()); }
  int num_frames() const { return static_cast<int>(values.cols()); }
};

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg = {});

// Weighted overlap-add with the analysis window, normalised by the summed
// squared window. Samples whose envelope is below 1e-8 are set to zero;
// elsewhere the envelope is clamped from below at 10% of its peak, which
// only affects the first and last few dozen samples.
Waveform istft(const ComplexSpectrogram& spec);

Eigen::MatrixXd magnitude(const ComplexSpectrogram& spec);

CompressedMagnitude compress(const Eigen::MatrixXd& mag, double p = 0.3);
Eigen::MatrixXd decompress(const CompressedMagnitude& cm);

// Inverse STFT of decompress(est) combined with the phase of mixture_spec.
Waveform reconstruct(const CompressedMagnitude& est,
                     const ComplexSpectrogram& mixture_spec);

// Shorthand for compress(magnitude(stft(w, cfg)), p).
CompressedMagnitude compressed_spectrogram(const Waveform& w,
                                           const StftConfig& cfg, double p);

// 16 kHz -> 8 kHz: windowed-sinc low-pass at the output Nyquist, then
// keep every other sample.
Waveform downsample_2x(const Waveform& w);

}  // namespace agn

#endif  // AGN_DSP_H_
