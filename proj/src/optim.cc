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

#include "agn/optim.h"

#include <cmath>
#include <limits>
#include <string>

#include "agn/checkpoint.h"
#include "agn/error.h"
#include "agn/metrics.h"

namespace agn {
namespace {

constexpr std::uint64_t kTrainStream = 0x7a11;
constexpr std::uint64_t kProbeStream = 0x9b0e;
constexpr std::uint64_t kAppendStream = 0x3e77;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return Rng::keyed(seed, stream, 0).next_u64();
}

std::vector<int> rows_for(const EmbeddingTable& table, const Corpus& corpus) {
  std::vector<int> rows;
  for (const auto& p : corpus.profiles) {
    const int r = table.find(p.label);
    if (r < 0) {
      throw DimensionMismatch("speaker '" + p.label +
                              "' has no embedding row in the model");
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kPretrain:
      return "pretrain";
    case TrainMode::kFinetuneConventional:
      return "conventional";
    case TrainMode::kFinetuneRobust:
      return "robust";
  }
  return "unknown";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "pretrain") return TrainMode::kPretrain;
  if (s == "conventional" || s == "finetune_conventional") {
    return TrainMode::kFinetuneConventional;
  }
  if (s == "robust" || s == "finetune_robust") return TrainMode::kFinetuneRobust;
  throw InvalidConfig("unknown training mode '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(base_lr > 0.0)) throw InvalidConfig("base_lr must be > 0");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) {
    throw InvalidConfig("decay_rate must be in (0, 1]");
  }
  if (decay_every_steps < 1) throw InvalidConfig("decay_every_steps must be >= 1");
  if (!(rms_decay >= 0.0 && rms_decay < 1.0)) {
    throw InvalidConfig("rms_decay must be in [0, 1)");
  }
  if (!(rms_epsilon > 0.0)) throw InvalidConfig("rms_epsilon must be > 0");
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (max_steps < 0) throw InvalidConfig("max_steps must be >= 0");
  if (eval_every < 0 || checkpoint_every < 0) {
    throw InvalidConfig("eval_every and checkpoint_every must be >= 0");
  }
  if (eval_every > 0 && eval_examples < 1) {
    throw InvalidConfig("eval_examples must be >= 1 when evaluating");
  }
  if (early_stop_patience < 0) throw InvalidConfig("early_stop_patience < 0");
  if (!(clip_norm >= 0.0)) throw InvalidConfig("clip_norm must be >= 0");
}

double lr_schedule(long step, const TrainConfig& cfg) {
  if (step < 0) throw InvalidInput("lr_schedule: negative step");
  return cfg.base_lr *
         std::pow(cfg.decay_rate,
                  static_cast<double>(step / cfg.decay_every_steps));
}

ParameterPartition ParameterPartition::for_mode(TrainMode mode, int table_rows,
                                                std::span<const int> rows) {
  ParameterPartition p;
  p.theta = mode != TrainMode::kFinetuneRobust;
  p.embedding_rows.assign(table_rows, 0);
  for (int r : rows) {
    if (r < 0 || r >= table_rows) throw InvalidInput("partition row out of range");
    p.embedding_rows[r] = 1;
  }
  return p;
}

OptimizerState OptimizerState::fresh(const AgnModel& model,
                                     const ParameterPartition& partition) {
  OptimizerState s;
  if (partition.theta) s.theta_sq = ModelParams::zeros(model.params.dims);
  s.embedding_sq = Eigen::MatrixXd::Zero(model.embeddings.rows(),
                                         model.embeddings.dim());
  return s;
}

void rmsprop_update(std::span<double> params, std::span<const double> grads,
                    std::span<double> sq, double lr, double rho, double eps) {
  if (params.size() != grads.size() || params.size() != sq.size()) {
    throw DimensionMismatch("rmsprop_update: size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    sq[i] = rho * sq[i] + (1.0 - rho) * g * g;
    params[i] -= lr * g / (std::sqrt(sq[i]) + eps);
  }
}

void rmsprop_step(AgnModel& model, const ModelParams& theta_grads,
                  const Eigen::MatrixXd& embedding_grads,
                  OptimizerState& state, const ParameterPartition& partition,
                  double lr, const TrainConfig& cfg) {
  EmbeddingTable& table = model.embeddings;
  if (embedding_grads.rows() != table.rows() ||
      embedding_grads.cols() != table.dim() ||
      state.embedding_sq.rows() != table.rows() ||
      state.embedding_sq.cols() != table.dim() ||
      static_cast<int>(partition.embedding_rows.size()) != table.rows()) {
    throw DimensionMismatch("rmsprop_step: embedding shapes disagree");
  }
  if (partition.theta) {
    if (!state.theta_sq || !(state.theta_sq->dims == model.params.dims) ||
        !(theta_grads.dims == model.params.dims)) {
      throw InvalidState("rmsprop_step: optimizer state lacks theta slots");
    }
    if (!theta_grads.all_finite()) {
      throw TrainingDivergence("non-finite network gradient", state.step);
    }
  }
  for (int r = 0; r < table.rows(); ++r) {
    if (partition.embedding_rows[r] && !embedding_grads.row(r).allFinite()) {
      throw TrainingDivergence("non-finite embedding gradient", state.step);
    }
  }

  double scale = 1.0;
  if (cfg.clip_norm > 0.0) {
    double sq = 0.0;
    if (partition.theta) {
      for (auto t : theta_grads.tensors()) {
        for (double g : t) sq += g * g;
      }
    }
    for (int r = 0; r < table.rows(); ++r) {
      if (partition.embedding_rows[r]) sq += embedding_grads.row(r).squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
  }

  if (partition.theta) {
    auto params = model.params.tensors();
    auto grads = theta_grads.tensors();
    auto sq = state.theta_sq->tensors();
    std::vector<double> scaled;
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::span<const double> g = grads[i];
      if (scale != 1.0) {
        scaled.assign(g.begin(), g.end());
        for (double& v : scaled) v *= scale;
        g = scaled;
      }
      rmsprop_update(params[i], g, sq[i], lr, cfg.rms_decay, cfg.rms_epsilon);
    }
    ++model.params.revision;
  }
  // Row updates go through a row-major copy so each row is contiguous.
  for (int r = 0; r < table.rows(); ++r) {
    if (!partition.embedding_rows[r]) continue;
    Eigen::VectorXd p = table.weights.row(r).transpose();
    Eigen::VectorXd g = scale * embedding_grads.row(r).transpose();
    Eigen::VectorXd s = state.embedding_sq.row(r).transpose();
    rmsprop_update({p.data(), static_cast<std::size_t>(p.size())},
                   {g.data(), static_cast<std::size_t>(g.size())},
                   {s.data(), static_cast<std::size_t>(s.size())}, lr,
                   cfg.rms_decay, cfg.rms_epsilon);
    table.weights.row(r) = p.transpose();
    state.embedding_sq.row(r) = s.transpose();
  }
  ++state.step;
}

void write_log_line(std::ostream& out, const StepLog& s) {
  out << s.step << '\t' << s.lr << '\t' << s.loss << '\n';
}

void write_log_line(std::ostream& out, const EvalLog& e) {
  out << "eval\t" << e.step << '\t' << e.mean_sisnr_db << '\n';
}

namespace {

struct PreparedBatch {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  Eigen::MatrixXd embeddings;
  std::vector<Indicator> indicators;
  int batch = 0;
};

PreparedBatch prepare(const AgnModel& model, const Corpus& corpus,
                      std::span<const MixtureExample> examples) {
  if (examples.empty()) throw InvalidInput("empty batch");
  const auto labels = corpus.labels();
  PreparedBatch pb;
  pb.batch = static_cast<int>(examples.size());
  std::vector<Eigen::MatrixXd> xs;
  std::vector<Eigen::MatrixXd> ts;
  pb.embeddings.resize(model.embeddings.dim(), pb.batch);
  for (int b = 0; b < pb.batch; ++b) {
    const MixtureExample& ex = examples[b];
    xs.push_back(
        compressed_spectrogram(ex.x, model.stft, model.compression_p).values);
    ts.push_back(
        compressed_spectrogram(ex.t, model.stft, model.compression_p).values);
    pb.indicators.push_back(
        indicator_for_table(model.embeddings, labels, ex.indicator));
    pb.embeddings.col(b) = superpose(model.embeddings, pb.indicators.back());
  }
  pb.inputs = pack_batch(xs);
  pb.targets = pack_batch(ts);
  return pb;
}

}  // namespace

BatchResult compute_batch(const AgnModel& model, const Corpus& corpus,
                          std::span<const MixtureExample> examples) {
  const PreparedBatch pb = prepare(model, corpus, examples);
  const ForwardCache cache =
      forward_batch(model.params, pb.inputs, pb.embeddings, pb.batch);
  BatchResult r;
  r.grads = backward(model.params, cache, pb.targets);
  r.embedding_row_grads = embedding_row_gradients(
      model.embeddings, pb.indicators, r.grads.embeddings);
  return r;
}

double batch_loss(const AgnModel& model, const Corpus& corpus,
                  std::span<const MixtureExample> examples) {
  const PreparedBatch pb = prepare(model, corpus, examples);
  const ForwardCache cache =
      forward_batch(model.params, pb.inputs, pb.embeddings, pb.batch);
  const Eigen::ArrayXXd est = cache.mask.array() * pb.inputs.array();
  return (est - pb.targets.array()).square().sum();
}

TrainLog train(AgnModel& model, OptimizerState& state, const Corpus& corpus,
               const TaskConfig& task, const TrainConfig& cfg,
               const ParameterPartition& partition,
               const TrainOptions& options) {
  cfg.validate();
  corpus.validate();
  task.validate(corpus.size());
  rows_for(model.embeddings, corpus);

  TaskConfig train_task = task;
  train_task.seed = derive_seed(cfg.seed, kTrainStream);
  TaskConfig probe_task = task;
  probe_task.seed = derive_seed(cfg.seed, kProbeStream);

  std::vector<MixtureExample> probe;
  if (cfg.eval_every > 0) {
    for (int i = 0; i < cfg.eval_examples; ++i) {
      probe.push_back(sample_task_at(corpus, probe_task, i));
    }
  }

  auto save = [&] {
    if (options.checkpoint_path.empty()) return;
    save_checkpoint(model, state,
                    Rng::keyed(cfg.seed, kTrainStream, state.step).state(),
                    options.checkpoint_path);
  };

  TrainLog log;
  double best_probe = std::numeric_limits<double>::infinity();
  int evals_since_best = 0;
  const long end_step = state.step + cfg.max_steps;
  while (state.step < end_step) {
    const long step = state.step;
    std::vector<MixtureExample> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      batch.push_back(sample_task_at(
          corpus, train_task,
          static_cast<std::uint64_t>(step) * cfg.batch_size + b));
    }
    BatchResult r = compute_batch(model, corpus, batch);
    if (!std::isfinite(r.grads.loss)) {
      throw TrainingDivergence(
          "loss is not finite at step " + std::to_string(step), step);
    }
    const double lr = lr_schedule(step, cfg);
    rmsprop_step(model, r.grads.params, r.embedding_row_grads, state, partition,
                 lr, cfg);
    if (!model.params.all_finite() || !model.embeddings.weights.allFinite()) {
      throw TrainingDivergence(
          "parameters overflowed at step " + std::to_string(step), step);
    }

    StepLog sl{step, lr, r.grads.loss};
    log.steps.push_back(sl);
    if (options.log_stream) write_log_line(*options.log_stream, sl);

    bool stop = options.on_step && !options.on_step(sl);
    if (cfg.eval_every > 0 && state.step % cfg.eval_every == 0) {
      EvalLog el;
      el.step = state.step;
      el.probe_loss = batch_loss(model, corpus, probe);
      el.mean_sisnr_db =
          *evaluate(model, corpus, probe_task, probe.size()).mean;
      log.evals.push_back(el);
      if (options.log_stream) write_log_line(*options.log_stream, el);
      if (el.probe_loss < best_probe) {
        best_probe = el.probe_loss;
        evals_since_best = 0;
      } else if (cfg.early_stop_patience > 0 &&
                 ++evals_since_best >= cfg.early_stop_patience) {
        log.stopped_early = true;
        stop = true;
      }
    }
    if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0) {
      save();
    }
    if (stop) break;
  }
  save();
  return log;
}

TrainLog pretrain(AgnModel& model, OptimizerState& state, const Corpus& corpus,
                  const TaskConfig& task, const TrainConfig& cfg,
                  const TrainOptions& options) {
  if (cfg.mode != TrainMode::kPretrain) {
    throw InvalidConfig("pretrain called with mode " + to_string(cfg.mode));
  }
  const std::vector<int> rows = rows_for(model.embeddings, corpus);
  const ParameterPartition partition = ParameterPartition::for_mode(
      cfg.mode, model.embeddings.rows(), rows);
  for (int r = 0; r < model.embeddings.rows(); ++r) {
    model.embeddings.trainable[r] = partition.embedding_rows[r];
  }
  if (!state.theta_sq) state = OptimizerState::fresh(model, partition);
  return train(model, state, corpus, task, cfg, partition, options);
}

TrainLog finetune(AgnModel& model, OptimizerState& state, const Corpus& corpus,
                  const TaskConfig& task, const TrainConfig& cfg,
                  const TrainOptions& options) {
  if (cfg.mode == TrainMode::kPretrain) {
    throw InvalidConfig("finetune needs mode conventional or robust");
  }
  std::vector<std::string> missing;
  for (const auto& p : corpus.profiles) {
    if (model.embeddings.find(p.label) < 0) missing.push_back(p.label);
  }
  if (!missing.empty()) {
    Rng rng = Rng::keyed(cfg.seed, kAppendStream, 0);
    model.embeddings.append(missing, rng);
  }
  const std::vector<int> rows = rows_for(model.embeddings, corpus);
  const ParameterPartition partition = ParameterPartition::for_mode(
      cfg.mode, model.embeddings.rows(), rows);
  for (int r = 0; r < model.embeddings.rows(); ++r) {
    model.embeddings.trainable[r] = partition.embedding_rows[r];
  }
  state = OptimizerState::fresh(model, partition);
  return train(model, state, corpus, task, cfg, partition, options);
}

}  // namespace agn
