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

#ifndef AGN_TASK_H_
#define AGN_TASK_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agn/dsp.h"
#include "agn/rng.h"

namespace agn {

struct SpeakerProfile {
  int speaker_id = 0;      // dense index within its corpus
  std::string label;       // external id, e.g. the manifest speaker column
  std::vector<Waveform> utterances;

  std::size_t total_samples() const;
};

enum class CorpusRole { kWellKnown, kNew };

struct Corpus {
  std::vector<SpeakerProfile> profiles;
  CorpusRole role = CorpusRole::kWellKnown;

  int size() const { return static_cast<int>(profiles.size()); }
  std::vector<std::string> labels() const;
  // Dense unique ids 0..N-1 in order, non-empty 8 kHz utterances.
  void validate() const;
};

struct IntRange {
  int min = 1;
  int max = 3;
  bool operator==(const IntRange&) const = default;
};

struct RealRange {
  double min = -5.0;
  double max = 5.0;
  bool operator==(const RealRange&) const = default;
};

struct TaskConfig {
  long tau = 40000;
  IntRange g_range{1, 3};
  IntRange h_range{1, 3};
  RealRange snr_range_db{-5.0, 5.0};
  // Each group (target, interferer) is a single-active conversation.
  bool conversation_mode = true;
  std::uint64_t seed = 0;

  // Throws InvalidConfig; num_speakers < 0 skips the corpus-size check.
  void validate(int num_speakers = -1) const;
};

// G-hot vector over the N speakers of a corpus (or rows of a table).
using Indicator = std::vector<std::uint8_t>;

struct MixtureExample {
  Waveform x;            // t + alpha * d, sample-exact
  Waveform t;            // target: sum of target_tracks
  Waveform d;            // interferer before scaling: sum of interferer_tracks
  Indicator indicator;   // B
  int g = 0;
  int h = 0;
  std::vector<int> z;    // g target ids followed by h interferer ids
  double snr_db = 0.0;
  double alpha = 0.0;
  // Per-speaker contribution signals, in z order.
  std::vector<Waveform> target_tracks;
  std::vector<Waveform> interferer_tracks;
};

struct Segment {
  int speaker = 0;  // position in the speaker list
  long begin = 0;
  long end = 0;     // exclusive
};

struct Conversation {
  Waveform mix;
  std::vector<Waveform> tracks;  // one per listed speaker
  std::vector<Segment> segments;
};

// Random utterance, random tau-long crop, zero-padded at the end if short.
Waveform crop_utterance(const SpeakerProfile& speaker, long tau, Rng& rng);

// Single-active timeline: 2n segments (one for n == 1), minimum length
// tau / (4n), assigned round-robin from a random first speaker.
Conversation build_conversation(std::span<const SpeakerProfile* const> speakers,
                                long tau, Rng& rng);

struct MixResult {
  Waveform x;
  double alpha = 0.0;
};

// alpha such that 10 log10(|t|^2 / |alpha d|^2) == snr_db.
MixResult mix_at_snr(const Waveform& t, const Waveform& d, double snr_db);

Indicator build_indicator(std::span<const int> z, int g, int n);

MixtureExample sample_task(const Corpus& corpus, const TaskConfig& cfg,
                           Rng& rng);

// Example `index` of the stream defined by cfg.seed; independent of the
// order in which indices are requested.
MixtureExample sample_task_at(const Corpus& corpus, const TaskConfig& cfg,
                              std::uint64_t index);

struct CorpusSplit {
  Corpus head;
  Corpus tail;
};

// Per speaker, the first seconds_head of audio (the crossing utterance is
// cut at the boundary) goes to head and the remainder to tail.
CorpusSplit split_corpus(const Corpus& corpus, double seconds_head = 100.0);

// Well-known: train = tail, eval = head. New: train = head, eval = tail.
Corpus train_split(const Corpus& corpus, double seconds_head = 100.0);
Corpus eval_split(const Corpus& corpus, double seconds_head = 100.0);

}  // namespace agn

#endif  // AGN_TASK_H_
