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

#ifndef AGN_SYNTH_H_
#define AGN_SYNTH_H_

#include <array>
#include <cstdint>
#include <string>

#include "agn/dsp.h"
#include "agn/rng.h"
#include "agn/task.h"

namespace agn {

// Synthetic stand-in for a real speaker: a vibrato harmonic comb plus
// band-passed noise, switched on and off in syllable-length bursts.
struct SynthVoice {
  double f0_hz = 150.0;
  std::array<int, 3> harmonics{1, 2, 3};
  std::array<double, 3> harmonic_gains{1.0, 1.0, 1.0};
  double noise_center_hz = 1500.0;
  double noise_bandwidth_hz = 300.0;
  double noise_gain = 0.5;
  double vibrato_depth = 0.02;  // fraction of f0
  double vibrato_hz = 5.0;
};

// Voice `index` of `count` for a given seed. Fundamentals and noise bands
// are stratified over the count so voices within one corpus never share a
// stratum.
SynthVoice synth_voice(std::uint64_t seed, int index, int count);

// One utterance of `samples` samples at 8 kHz, quantised to the 16-bit grid
// so that a WAV round trip is lossless.
Waveform synth_utterance(const SynthVoice& voice, std::size_t samples,
                         Rng& rng);

struct SynthCorpusSpec {
  int speakers = 8;
  double seconds = 120.0;  // per speaker
  double utterance_seconds = 10.0;
  std::uint64_t seed = 0;
  std::string label_prefix = "spk";
};

// Speakers labelled <prefix>000, <prefix>001, ...; each gets
// floor(seconds / utterance_seconds) full utterances plus a shorter final
// one for any remainder. Throws InvalidInput if seconds is below one
// utterance.
Corpus synth_corpus(const SynthCorpusSpec& spec,
                    CorpusRole role = CorpusRole::kWellKnown);

// Power-weighted mean frequency of a waveform, in Hz.
double spectral_centroid_hz(const Waveform& w);

}  // namespace agn

#endif  // AGN_SYNTH_H_
