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

#include "agn/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <vector>

#include "agn/error.h"

namespace agn {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kF0Low = 90.0;
constexpr double kF0High = 300.0;
constexpr double kNoiseLow = 700.0;
constexpr double kNoiseHigh = 3500.0;
constexpr double kPeak = 0.5;

// RBJ constant-peak band-pass biquad.
struct BandPass {
  double b0, b2, a1, a2;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  BandPass(double center, double bandwidth, double rate) {
    const double w0 = kTwoPi * center / rate;
    const double q = center / bandwidth;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0 = alpha / a0;
    b2 = -alpha / a0;
    a1 = -2.0 * std::cos(w0) / a0;
    a2 = (1.0 - alpha) / a0;
  }
  double operator()(double x) {
    const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

SynthVoice synth_voice(std::uint64_t seed, int index, int count) {
  if (count < 1 || index < 0 || index >= count) {
    throw InvalidInput("synth_voice: index out of range");
  }
  // Shared permutations pair f0 strata with noise-band strata.
  Rng perm_rng = Rng::keyed(seed, 0x5e7, 0);
  std::vector<int> f0_order(count);
  std::vector<int> band_order(count);
  std::iota(f0_order.begin(), f0_order.end(), 0);
  std::iota(band_order.begin(), band_order.end(), 0);
  for (int i = count - 1; i > 0; --i) {
    std::swap(f0_order[i], f0_order[perm_rng.uniform_int(0, i)]);
    std::swap(band_order[i], band_order[perm_rng.uniform_int(0, i)]);
  }

  Rng rng = Rng::keyed(seed, 0x5e8, static_cast<std::uint64_t>(index));
  SynthVoice v;
  const double f0_slot = (f0_order[index] + rng.uniform(0.2, 0.8)) / count;
  v.f0_hz = kF0Low * std::pow(kF0High / kF0Low, f0_slot);
  const double band_slot = (band_order[index] + rng.uniform(0.3, 0.7)) / count;
  v.noise_center_hz = kNoiseLow + (kNoiseHigh - kNoiseLow) * band_slot;
  v.noise_bandwidth_hz = rng.uniform(150.0, 300.0);
  v.noise_gain = rng.uniform(0.3, 0.6);

  // Three distinct harmonic numbers in 1..6, ascending.
  std::array<int, 6> h{1, 2, 3, 4, 5, 6};
  for (int i = 5; i > 0; --i) std::swap(h[i], h[rng.uniform_int(0, i)]);
  std::sort(h.begin(), h.begin() + 3);
  for (int i = 0; i < 3; ++i) {
    v.harmonics[i] = h[i];
    v.harmonic_gains[i] = rng.uniform(0.5, 1.0);
  }
  v.vibrato_depth = rng.uniform(0.01, 0.03);
  v.vibrato_hz = rng.uniform(3.0, 6.0);
  return v;
}

Waveform synth_utterance(const SynthVoice& voice, std::size_t samples,
                         Rng& rng) {
  const double rate = kModelSampleRate;
  std::vector<double> out(samples, 0.0);

  // Syllable envelope: bursts of 0.15-0.5 s separated by 0.05-0.3 s pauses,
  // with 10 ms raised-cosine edges.
  std::vector<double> env(samples, 0.0);
  const auto ramp = static_cast<std::size_t>(0.01 * rate);
  std::size_t pos = static_cast<std::size_t>(rng.uniform(0.0, 0.2) * rate);
  while (pos < samples) {
    const auto on = static_cast<std::size_t>(rng.uniform(0.15, 0.5) * rate);
    const double level = rng.uniform(0.6, 1.0);
    for (std::size_t i = 0; i < on && pos + i < samples; ++i) {
      double g = 1.0;
      if (i < ramp) {
        g = 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
      } else if (on - i <= ramp) {
        g = 0.5 - 0.5 * std::cos(std::numbers::pi * (on - i) / ramp);
      }
      env[pos + i] = level * g;
    }
    pos += on + static_cast<std::size_t>(rng.uniform(0.05, 0.3) * rate);
  }

  BandPass bp(voice.noise_center_hz, voice.noise_bandwidth_hz, rate);
  double phase = rng.uniform(0.0, kTwoPi);
  const double vib_phase = rng.uniform(0.0, kTwoPi);
  // Slow AR(1) drift of the fundamental, about 1.5% standard deviation.
  double drift = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    drift = 0.9995 * drift + 0.0008 * rng.uniform(-1.0, 1.0);
    const double t = i / rate;
    const double f = voice.f0_hz *
                     (1.0 + drift +
                      voice.vibrato_depth *
                          std::sin(kTwoPi * voice.vibrato_hz * t + vib_phase));
    phase = std::fmod(phase + kTwoPi * f / rate, kTwoPi);
    double harm = 0.0;
    for (int k = 0; k < 3; ++k) {
      harm += voice.harmonic_gains[k] * std::sin(voice.harmonics[k] * phase);
    }
    const double noise = bp(rng.normal()) * 4.0 * voice.noise_gain;
    out[i] = env[i] * (harm / 3.0 + noise);
  }

  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? kPeak / peak : 0.0;
  for (double& v : out) v = std::round(v * scale * 32768.0) / 32768.0;
  return Waveform(std::move(out), kModelSampleRate);
}

Corpus synth_corpus(const SynthCorpusSpec& spec, CorpusRole role) {
  if (spec.speakers < 1) throw InvalidInput("synth_corpus: need >= 1 speaker");
  if (!(spec.utterance_seconds > 0.0) || spec.seconds < spec.utterance_seconds) {
    throw InvalidInput("synth_corpus: " + std::to_string(spec.seconds) +
                       " s per speaker is shorter than one utterance (" +
                       std::to_string(spec.utterance_seconds) + " s)");
  }
  const auto utt_len =
      static_cast<std::size_t>(std::llround(spec.utterance_seconds * kModelSampleRate));
  const auto total =
      static_cast<std::size_t>(std::llround(spec.seconds * kModelSampleRate));
  Corpus corpus;
  corpus.role = role;
  for (int s = 0; s < spec.speakers; ++s) {
    char label[64];
    std::snprintf(label, sizeof(label), "%s%03d", spec.label_prefix.c_str(), s);
    SpeakerProfile p{s, label, {}};
    const SynthVoice voice = synth_voice(spec.seed, s, spec.speakers);
    std::size_t done = 0;
    for (std::uint64_t u = 0; done < total; ++u) {
      const std::size_t len = std::min(utt_len, total - done);
      Rng rng = Rng::keyed(spec.seed, 0x5e9 + static_cast<std::uint64_t>(s), u);
      p.utterances.push_back(synth_utterance(voice, len, rng));
      done += len;
    }
    corpus.profiles.push_back(std::move(p));
  }
  return corpus;
}

double spectral_centroid_hz(const Waveform& w) {
  const StftConfig cfg;
  const ComplexSpectrogram spec = stft(w, cfg);
  double num = 0.0;
  double den = 0.0;
  for (int f = 0; f < spec.num_bins(); ++f) {
    const double hz = static_cast<double>(f) * w.sample_rate / cfg.window_len;
    const double power = spec.bins.row(f).cwiseAbs2().sum();
    num += hz * power;
    den += power;
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace agn
