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

#ifndef AGN_OPTIM_H_
#define AGN_OPTIM_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "agn/model.h"
#include "agn/task.h"

namespace agn {

enum class TrainMode { kPretrain, kFinetuneConventional, kFinetuneRobust };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& s);

struct TrainConfig {
  double base_lr = 3e-4;
  double decay_rate = 0.95;
  long decay_every_steps = 3000;
  double rms_decay = 0.9;
  double rms_epsilon = 1e-8;
  int batch_size = 8;
  long max_steps = 1000;
  TrainMode mode = TrainMode::kPretrain;
  std::uint64_t seed = 0;
  // Probe-batch evaluation period in steps; 0 disables evaluation and early
  // stopping.
  long eval_every = 0;
  int eval_examples = 8;
  // Stop after this many consecutive probe evaluations without a new best
  // loss; 0 disables.
  int early_stop_patience = 5;
  long checkpoint_every = 0;
  // Global-norm gradient clip over the trainable set; 0 disables.
  double clip_norm = 0.0;

  void validate() const;
};

// Staircase decay: base_lr * decay_rate^floor(step / decay_every_steps).
double lr_schedule(long step, const TrainConfig& cfg);

// Trainable set: theta (all network weights) and/or individual embedding
// rows. Everything else is frozen.
struct ParameterPartition {
  bool theta = false;
  std::vector<std::uint8_t> embedding_rows;

  // pretrain: theta + rows; conventional: theta + rows; robust: rows only.
  // `rows` are the table rows of the speakers being trained on.
  static ParameterPartition for_mode(TrainMode mode, int table_rows,
                                     std::span<const int> rows);
};

// Running mean of squared gradients for the trainable parameters.
struct OptimizerState {
  std::optional<ModelParams> theta_sq;  // present iff theta is trainable
  Eigen::MatrixXd embedding_sq;          // N x K; frozen rows stay zero
  long step = 0;

  static OptimizerState fresh(const AgnModel& model,
                              const ParameterPartition& partition);
};

// One RMSProp update on flat arrays:
//   s <- rho s + (1 - rho) g^2;  p <- p - lr g / (sqrt(s) + eps).
void rmsprop_update(std::span<double> params, std::span<const double> grads,
                    std::span<double> sq, double lr, double rho, double eps);

// Applies one RMSProp step to every trainable tensor of the model. Throws
// TrainingDivergence without touching anything if a gradient is not finite.
void rmsprop_step(AgnModel& model, const ModelParams& theta_grads,
                  const Eigen::MatrixXd& embedding_grads,
                  OptimizerState& state, const ParameterPartition& partition,
                  double lr, const TrainConfig& cfg);

struct StepLog {
  long step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct EvalLog {
  long step = 0;
  double probe_loss = 0.0;
  double mean_sisnr_db = 0.0;
};

struct TrainLog {
  std::vector<StepLog> steps;
  std::vector<EvalLog> evals;
  bool stopped_early = false;
};

// `step<TAB>lr<TAB>loss` and `eval<TAB>step<TAB>mean_sisnr_db` lines.
void write_log_line(std::ostream& out, const StepLog& s);
void write_log_line(std::ostream& out, const EvalLog& e);

struct TrainOptions {
  // Written every cfg.checkpoint_every steps and at the end; empty disables.
  std::string checkpoint_path;
  // Receives log lines as they are produced.
  std::ostream* log_stream = nullptr;
  // Called after every step; returning false stops training.
  std::function<bool(const StepLog&)> on_step;
};

// Losses and gradients for one batch of tasks; exposed for tests.
struct BatchResult {
  Gradients grads;
  Eigen::MatrixXd embedding_row_grads;  // N x K
};
BatchResult compute_batch(const AgnModel& model, const Corpus& corpus,
                          std::span<const MixtureExample> examples);

// Summed loss over a fixed set of examples (no gradients).
double batch_loss(const AgnModel& model, const Corpus& corpus,
                  std::span<const MixtureExample> examples);

// Generic loop: sample -> forward -> loss -> backward -> rmsprop for
// cfg.max_steps steps (continuing from state.step).
TrainLog train(AgnModel& model, OptimizerState& state, const Corpus& corpus,
               const TaskConfig& task, const TrainConfig& cfg,
               const ParameterPartition& partition,
               const TrainOptions& options = {});

// Joint training of theta and the rows of the corpus speakers.
TrainLog pretrain(AgnModel& model, OptimizerState& state, const Corpus& corpus,
                  const TaskConfig& task, const TrainConfig& cfg,
                  const TrainOptions& options = {});

// Appends randomly initialised rows for corpus speakers not yet in the
// table, then trains them (and theta in conventional mode). Well-known rows
// are always frozen. Starts a fresh optimizer state.
TrainLog finetune(AgnModel& model, OptimizerState& state, const Corpus& corpus,
                  const TaskConfig& task, const TrainConfig& cfg,
                  const TrainOptions& options = {});

}  // namespace agn

#endif  // AGN_OPTIM_H_
