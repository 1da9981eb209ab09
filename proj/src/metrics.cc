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

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "agn/error.h"

namespace agn {
namespace {

constexpr std::size_t kEvalBatch = 8;

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::optional<double> median_of(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double si_snr(const Waveform& estimate, const Waveform& target) {
  if (estimate.size() != target.size()) {
    throw InvalidInput("si_snr: estimate has " +
                       std::to_string(estimate.size()) +
                       " samples, target has " + std::to_string(target.size()));
  }
  double dot = 0.0;
  double tt = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    dot += estimate.samples[i] * target.samples[i];
    tt += target.samples[i] * target.samples[i];
  }
  if (tt <= 0.0) throw InvalidInput("si_snr: silent target");
  const double scale = dot / tt;
  double proj = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double p = scale * target.samples[i];
    const double e = estimate.samples[i] - p;
    proj += p * p;
    noise += e * e;
  }
  if (proj == 0.0) return -kSiSnrCapDb;
  if (noise < 1e-30 * proj) return kSiSnrCapDb;
  return std::clamp(10.0 * std::log10(proj / noise), -kSiSnrCapDb, kSiSnrCapDb);
}

std::optional<double> EvalReport::mean_improvement() const {
  if (!mean || !mixture_mean) return std::nullopt;
  return *mean - *mixture_mean;
}

void EvalReport::finalize() {
  count = sisnr_db.size();
  mean = mean_of(sisnr_db);
  median = median_of(sisnr_db);
  mixture_mean = mean_of(mixture_sisnr_db);
}

EvalReport evaluate(const AgnModel& model, const Corpus& corpus,
                    const TaskConfig& task, std::size_t num_examples,
                    EvalEstimate estimate) {
  task.validate(corpus.size());
  const auto labels = corpus.labels();
  for (const auto& l : labels) {
    if (model.embeddings.find(l) < 0) {
      throw DimensionMismatch("evaluate: corpus speaker '" + l +
                              "' has no embedding row");
    }
  }
  EvalReport report;
  report.task = task;

  for (std::size_t start = 0; start < num_examples; start += kEvalBatch) {
    const std::size_t n = std::min(kEvalBatch, num_examples - start);
    std::vector<MixtureExample> examples;
    std::vector<ComplexSpectrogram> specs;
    std::vector<CompressedMagnitude> inputs;
    std::vector<Eigen::MatrixXd> grids;
    Eigen::MatrixXd embs(model.embeddings.dim(), static_cast<Eigen::Index>(n));
    for (std::size_t b = 0; b < n; ++b) {
      examples.push_back(sample_task_at(corpus, task, start + b));
      specs.push_back(stft(examples.back().x, model.stft));
      inputs.push_back(compress(magnitude(specs.back()), model.compression_p));
      grids.push_back(inputs.back().values);
      embs.col(static_cast<Eigen::Index>(b)) = superpose(
          model.embeddings,
          indicator_for_table(model.embeddings, labels,
                              examples.back().indicator));
    }
    Eigen::MatrixXd masks;
    if (estimate == EvalEstimate::kNetwork) {
      masks = forward_batch(model.params, pack_batch(grids), embs,
                            static_cast<int>(n))
                  .mask;
    }
    for (std::size_t b = 0; b < n; ++b) {
      CompressedMagnitude est;
      if (estimate == EvalEstimate::kNetwork) {
        Mask m{unpack_sequence(masks, static_cast<int>(n), static_cast<int>(b))};
        est = apply_mask(m, inputs[b]);
      } else {
        est = compressed_spectrogram(examples[b].t, model.stft,
                                     model.compression_p);
      }
      const Waveform y = reconstruct(est, specs[b]);
      report.sisnr_db.push_back(si_snr(y, examples[b].t));
      report.mixture_sisnr_db.push_back(si_snr(examples[b].x, examples[b].t));
    }
  }
  report.finalize();
  return report;
}

void write_report_summary(const EvalReport& r, std::ostream& out) {
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string("undefined");
    std::ostringstream s;
    s << std::setprecision(17) << *v;
    return s.str();
  };
  out << "count = " << r.count << "\n";
  out << "mean_sisnr_db = " << opt(r.mean) << "\n";
  out << "median_sisnr_db = " << opt(r.median) << "\n";
  out << "mixture_mean_sisnr_db = " << opt(r.mixture_mean) << "\n";
  out << "mean_improvement_db = " << opt(r.mean_improvement()) << "\n";
  out << "sisnr_cap_db = " << kSiSnrCapDb << "\n";
  out << "tau = " << r.task.tau << "\n";
  out << "g_min = " << r.task.g_range.min << "\n";
  out << "g_max = " << r.task.g_range.max << "\n";
  out << "h_min = " << r.task.h_range.min << "\n";
  out << "h_max = " << r.task.h_range.max << "\n";
  out << "snr_min_db = " << r.task.snr_range_db.min << "\n";
  out << "snr_max_db = " << r.task.snr_range_db.max << "\n";
  out << "conversation_mode = " << (r.task.conversation_mode ? 1 : 0) << "\n";
  out << "seed = " << r.task.seed << "\n";
  out << "checkpoint = " << r.checkpoint_id << "\n";
}

void write_report_csv(const EvalReport& r, std::ostream& out) {
  out << "index,sisnr_db\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < r.sisnr_db.size(); ++i) {
    out << i << "," << r.sisnr_db[i] << "\n";
  }
}

}  // namespace agn
