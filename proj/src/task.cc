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

#include "agn/task.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "agn/error.h"

namespace agn {
namespace {

constexpr int kMaxSilentRetries = 32;

double energy(const Waveform& w) {
  double e = 0.0;
  for (double v : w.samples) e += v * v;
  return e;
}

void add_into(Waveform& acc, const Waveform& w) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc.samples[i] += w.samples[i];
}

// Copy `len` samples of a random utterance starting at a random position
// into dst[begin, begin + len); zero-pads when the utterance is shorter.
void fill_from_speaker(const SpeakerProfile& speaker, long begin, long len,
                       Rng& rng, std::vector<double>& dst) {
  const auto& utts = speaker.utterances;
  const Waveform& u =
      utts[rng.uniform_int(0, static_cast<long>(utts.size()) - 1)];
  const long ulen = static_cast<long>(u.size());
  long start = 0;
  if (ulen > len) start = rng.uniform_int(0, ulen - len);
  const long n = std::min(len, ulen - start);
  std::copy_n(u.samples.begin() + start, n, dst.begin() + begin);
}

}  // namespace

std::size_t SpeakerProfile::total_samples() const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.size();
  return n;
}

std::vector<std::string> Corpus::labels() const {
  std::vector<std::string> out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) out.push_back(p.label);
  return out;
}

void Corpus::validate() const {
  std::set<std::string> seen;
  for (int i = 0; i < size(); ++i) {
    const auto& p = profiles[i];
    if (p.speaker_id != i) {
      throw InvalidInput("corpus speaker ids must be dense 0..N-1; position " +
                         std::to_string(i) + " has id " +
                         std::to_string(p.speaker_id));
    }
    if (!seen.insert(p.label).second) {
      throw InvalidInput("duplicate speaker label '" + p.label + "'");
    }
    if (p.utterances.empty()) {
      throw InvalidInput("speaker '" + p.label + "' has no utterances");
    }
    for (const auto& u : p.utterances) {
      if (u.sample_rate != kModelSampleRate) {
        throw InvalidInput("speaker '" + p.label + "' has audio at " +
                           std::to_string(u.sample_rate) + " Hz");
      }
    }
  }
}

void TaskConfig::validate(int num_speakers) const {
  if (tau < 1) throw InvalidConfig("tau must be positive");
  if (g_range.min < 1 || g_range.min > g_range.max) {
    throw InvalidConfig("g range must satisfy 1 <= g_min <= g_max");
  }
  if (h_range.min < 1 || h_range.min > h_range.max) {
    throw InvalidConfig("h range must satisfy 1 <= h_min <= h_max");
  }
  if (!(snr_range_db.min <= snr_range_db.max) ||
      !std::isfinite(snr_range_db.min) || !std::isfinite(snr_range_db.max)) {
    throw InvalidConfig("snr range must be finite with min <= max");
  }
  if (num_speakers >= 0 && g_range.max + h_range.max > num_speakers) {
    throw InvalidConfig("g_max + h_max = " +
                        std::to_string(g_range.max + h_range.max) +
                        " exceeds corpus size " + std::to_string(num_speakers));
  }
}

Waveform crop_utterance(const SpeakerProfile& speaker, long tau, Rng& rng) {
  if (speaker.utterances.empty()) {
    throw InvalidInput("speaker '" + speaker.label + "' has no utterances");
  }
  Waveform out = Waveform::zeros(tau);
  fill_from_speaker(speaker, 0, tau, rng, out.samples);
  return out;
}

Conversation build_conversation(std::span<const SpeakerProfile* const> speakers,
                                long tau, Rng& rng) {
  if (speakers.empty()) throw InvalidInput("build_conversation: no speakers");
  if (tau < 1) throw InvalidInput("build_conversation: tau must be positive");
  const int n = static_cast<int>(speakers.size());
  for (const auto* s : speakers) {
    if (s == nullptr || s->utterances.empty()) {
      throw InvalidInput("build_conversation: speaker without utterances");
    }
  }

  Conversation conv;
  if (n == 1) {
    conv.segments.push_back({0, 0, tau});
  } else {
    const int num_segments = 2 * n;
    const long min_len = tau / (4L * n);
    const long slack = tau - num_segments * min_len;
    std::vector<long> cuts(num_segments - 1);
    for (auto& c : cuts) c = rng.uniform_int(0, slack);
    std::sort(cuts.begin(), cuts.end());
    const int first = static_cast<int>(rng.uniform_int(0, n - 1));
    long begin = 0;
    long prev_cut = 0;
    for (int j = 0; j < num_segments; ++j) {
      const long cut = j + 1 < num_segments ? cuts[j] : slack;
      const long len = min_len + (cut - prev_cut);
      conv.segments.push_back({(first + j) % n, begin, begin + len});
      begin += len;
      prev_cut = cut;
    }
  }

  conv.tracks.assign(n, Waveform::zeros(tau));
  for (const auto& seg : conv.segments) {
    fill_from_speaker(*speakers[seg.speaker], seg.begin, seg.end - seg.begin,
                      rng, conv.tracks[seg.speaker].samples);
  }
  conv.mix = Waveform::zeros(tau);
  for (const auto& tr : conv.tracks) add_into(conv.mix, tr);
  return conv;
}

MixResult mix_at_snr(const Waveform& t, const Waveform& d, double snr_db) {
  if (t.size() != d.size()) {
    throw InvalidInput("mix_at_snr: target and interferer lengths differ");
  }
  if (!std::isfinite(snr_db)) throw InvalidInput("mix_at_snr: snr not finite");
  const double et = energy(t);
  const double ed = energy(d);
  if (et <= 0.0) throw InvalidInput("mix_at_snr: silent target, SNR undefined");
  if (ed <= 0.0) {
    throw InvalidInput("mix_at_snr: silent interferer, SNR undefined");
  }
  MixResult r;
  r.alpha = std::sqrt(et / (ed * std::pow(10.0, snr_db / 10.0)));
  r.x = Waveform::zeros(t.size(), t.sample_rate);
  for (std::size_t i = 0; i < t.size(); ++i) {
    r.x.samples[i] = t.samples[i] + r.alpha * d.samples[i];
  }
  return r;
}

Indicator build_indicator(std::span<const int> z, int g, int n) {
  if (n < 1) throw InvalidInput("build_indicator: N must be >= 1");
  if (g < 1 || g > static_cast<int>(z.size())) {
    throw InvalidInput("build_indicator: G must be in [1, len(z)]");
  }
  std::vector<std::uint8_t> seen(n, 0);
  for (int id : z) {
    if (id < 0 || id >= n) {
      throw InvalidInput("build_indicator: speaker id " + std::to_string(id) +
                         " outside [0, " + std::to_string(n) + ")");
    }
    if (seen[id]++) {
      throw InvalidInput("build_indicator: duplicate speaker id " +
                         std::to_string(id));
    }
  }
  Indicator b(n, 0);
  for (int k = 0; k < g; ++k) b[z[k]] = 1;
  return b;
}

MixtureExample sample_task(const Corpus& corpus, const TaskConfig& cfg,
                           Rng& rng) {
  cfg.validate();
  if (cfg.g_range.max + cfg.h_range.max > corpus.size()) {
    throw InvalidInput("corpus of " + std::to_string(corpus.size()) +
                       " speakers is too small for g_max + h_max = " +
                       std::to_string(cfg.g_range.max + cfg.h_range.max));
  }
  if (corpus.size() < 1) throw InvalidInput("sample_task: empty corpus");

  MixtureExample ex;
  ex.g = static_cast<int>(rng.uniform_int(cfg.g_range.min, cfg.g_range.max));
  ex.h = static_cast<int>(rng.uniform_int(cfg.h_range.min, cfg.h_range.max));

  // Partial Fisher-Yates: first g + h entries are a draw without
  // replacement.
  std::vector<int> ids(corpus.size());
  std::iota(ids.begin(), ids.end(), 0);
  const int k = ex.g + ex.h;
  for (int i = 0; i < k; ++i) {
    const long j = rng.uniform_int(i, corpus.size() - 1);
    std::swap(ids[i], ids[j]);
  }
  ex.z.assign(ids.begin(), ids.begin() + k);

  auto build_group = [&](int begin, int count, std::vector<Waveform>& tracks) {
    tracks.clear();
    if (cfg.conversation_mode) {
      std::vector<const SpeakerProfile*> group;
      for (int i = 0; i < count; ++i) {
        group.push_back(&corpus.profiles[ex.z[begin + i]]);
      }
      tracks = build_conversation(group, cfg.tau, rng).tracks;
    } else {
      for (int i = 0; i < count; ++i) {
        tracks.push_back(
            crop_utterance(corpus.profiles[ex.z[begin + i]], cfg.tau, rng));
      }
    }
    Waveform sum = Waveform::zeros(cfg.tau);
    for (const auto& tr : tracks) add_into(sum, tr);
    return sum;
  };

  // Audio with long pauses can yield an all-silent draw for short tau;
  // redraw the audio (not the speakers) from the same stream.
  for (int attempt = 0;; ++attempt) {
    ex.t = build_group(0, ex.g, ex.target_tracks);
    ex.d = build_group(ex.g, ex.h, ex.interferer_tracks);
    if (energy(ex.t) > 0.0 && energy(ex.d) > 0.0) break;
    if (attempt + 1 >= kMaxSilentRetries) {
      throw InvalidInput("sample_task: corpus keeps yielding silent signals");
    }
  }
  ex.snr_db = cfg.snr_range_db.min == cfg.snr_range_db.max
                  ? cfg.snr_range_db.min
                  : rng.uniform(cfg.snr_range_db.min, cfg.snr_range_db.max);
  MixResult mixed = mix_at_snr(ex.t, ex.d, ex.snr_db);
  ex.x = std::move(mixed.x);
  ex.alpha = mixed.alpha;
  ex.indicator = build_indicator(ex.z, ex.g, corpus.size());
  return ex;
}

MixtureExample sample_task_at(const Corpus& corpus, const TaskConfig& cfg,
                              std::uint64_t index) {
  Rng rng = Rng::keyed(cfg.seed, /*stream=*/0x7a5c, index);
  return sample_task(corpus, cfg, rng);
}

CorpusSplit split_corpus(const Corpus& corpus, double seconds_head) {
  if (!(seconds_head > 0.0)) throw InvalidInput("split: seconds_head must be > 0");
  CorpusSplit out;
  out.head.role = out.tail.role = corpus.role;
  for (const auto& p : corpus.profiles) {
    const int rate = p.utterances.empty() ? kModelSampleRate
                                          : p.utterances.front().sample_rate;
    const auto head_len =
        static_cast<std::size_t>(std::llround(seconds_head * rate));
    if (p.total_samples() <= head_len) {
      throw InvalidInput("split: speaker '" + p.label + "' has " +
                         std::to_string(p.total_samples() / double(rate)) +
                         " s of audio, needs more than " +
                         std::to_string(seconds_head) + " s");
    }
    SpeakerProfile head{p.speaker_id, p.label, {}};
    SpeakerProfile tail{p.speaker_id, p.label, {}};
    std::size_t used = 0;
    for (const auto& u : p.utterances) {
      if (used >= head_len) {
        tail.utterances.push_back(u);
        continue;
      }
      const std::size_t take = std::min(u.size(), head_len - used);
      if (take == u.size()) {
        head.utterances.push_back(u);
      } else {
        head.utterances.emplace_back(
            std::vector<double>(u.samples.begin(), u.samples.begin() + take),
            u.sample_rate);
        tail.utterances.emplace_back(
            std::vector<double>(u.samples.begin() + take, u.samples.end()),
            u.sample_rate);
      }
      used += take;
    }
    out.head.profiles.push_back(std::move(head));
    out.tail.profiles.push_back(std::move(tail));
  }
  return out;
}

Corpus train_split(const Corpus& corpus, double seconds_head) {
  CorpusSplit s = split_corpus(corpus, seconds_head);
  return corpus.role == CorpusRole::kWellKnown ? std::move(s.tail)
                                               : std::move(s.head);
}

Corpus eval_split(const Corpus& corpus, double seconds_head) {
  CorpusSplit s = split_corpus(corpus, seconds_head);
  return corpus.role == CorpusRole::kWellKnown ? std::move(s.head)
                                               : std::move(s.tail);
}

}  // namespace agn
