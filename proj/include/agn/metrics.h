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

#ifndef AGN_METRICS_H_
#define AGN_METRICS_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "agn/dsp.h"
#include "agn/model.h"
#include "agn/task.h"

namespace agn {

// Reports are clamped to +-kSiSnrCapDb so that perfect or fully orthogonal
// estimates stay finite.
constexpr double kSiSnrCapDb = 120.0;

// Scale-invariant SNR of `estimate` against `target`, in dB.
double si_snr(const Waveform& estimate, const Waveform& target);

struct EvalReport {
  std::vector<double> sisnr_db;          // separated output vs target
  std::vector<double> mixture_sisnr_db;  // raw mixture vs target
  std::size_t count = 0;
  // Empty when count == 0.
  std::optional<double> mean;
  std::optional<double> median;
  std::optional<double> mixture_mean;
  TaskConfig task;
  std::string checkpoint_id;

  // Mean improvement over the mixture, when defined.
  std::optional<double> mean_improvement() const;
  // Recomputes count/mean/median from the per-example lists.
  void finalize();
};

// How the estimate is formed during evaluation.
enum class EvalEstimate {
  kNetwork,      // mask from the network
  kOracleTarget  // the true compressed target magnitude (upper bound)
};

// Runs num_examples tasks (indices 0..num_examples-1 of task.seed) through
// forward -> apply_mask -> reconstruct -> si_snr. Any failure aborts.
EvalReport evaluate(const AgnModel& model, const Corpus& corpus,
                    const TaskConfig& task, std::size_t num_examples,
                    EvalEstimate estimate = EvalEstimate::kNetwork);

// Plain `key = value` summary.
void write_report_summary(const EvalReport& report, std::ostream& out);
// `index,sisnr_db` rows with a header line.
void write_report_csv(const EvalReport& report, std::ostream& out);

}  // namespace agn

#endif  // AGN_METRICS_H_
