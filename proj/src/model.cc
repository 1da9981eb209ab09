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

#include "agn/model.h"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <string>

#include "agn/error.h"

namespace agn {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string shape(const MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void fill_uniform(MatrixXd& m, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform(-bound, bound);
  }
}

LstmParams lstm_zeros(int in, int h) {
  return {MatrixXd::Zero(4 * h, in), MatrixXd::Zero(4 * h, h),
          VectorXd::Zero(4 * h)};
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& z) {
  return (1.0 + (-z).exp()).inverse();
}

// Runs one direction over the whole sequence. On entry c.preact holds the
// input contribution (W_x x_t + b [+ W_eh e]); the recurrent term is added
// in place as the recursion proceeds.
void run_direction(const LstmParams& p, int frames, int batch, bool reverse,
                   LstmDirectionCache& c) {
  const int h = static_cast<int>(p.w_recurrent.cols());
  const Eigen::Index cols = c.preact.cols();
  c.gates.resize(4 * h, cols);
  c.cell.resize(h, cols);
  c.cell_tanh.resize(h, cols);
  c.hidden.resize(h, cols);
  for (int s = 0; s < frames; ++s) {
    const int t = reverse ? frames - 1 - s : s;
    const int prev = reverse ? t + 1 : t - 1;
    auto z = c.preact.middleCols(t * batch, batch);
    if (s > 0) {
      z.noalias() += p.w_recurrent * c.hidden.middleCols(prev * batch, batch);
    }
    auto g = c.gates.middleCols(t * batch, batch);
    g.topRows(2 * h).array() = sigmoid(z.topRows(2 * h).array());
    g.middleRows(2 * h, h).array() = z.middleRows(2 * h, h).array().tanh();
    g.bottomRows(h).array() = sigmoid(z.bottomRows(h).array());
    auto cell = c.cell.middleCols(t * batch, batch).array();
    cell = g.topRows(h).array() * g.middleRows(2 * h, h).array();
    if (s > 0) {
      cell += g.middleRows(h, h).array() *
              c.cell.middleCols(prev * batch, batch).array();
    }
    auto ct = c.cell_tanh.middleCols(t * batch, batch).array();
    ct = cell.tanh();
    c.hidden.middleCols(t * batch, batch).array() = g.bottomRows(h).array() * ct;
  }
}

// BPTT for one direction. d_hidden is the loss gradient arriving at this
// direction's outputs from the layer above; returns d loss / d preact.
MatrixXd backprop_direction(const LstmParams& p, const LstmDirectionCache& c,
                            const MatrixXd& d_hidden, int frames, int batch,
                            bool reverse) {
  const int h = static_cast<int>(p.w_recurrent.cols());
  MatrixXd dz(4 * h, c.preact.cols());
  MatrixXd dh_next = MatrixXd::Zero(h, batch);
  Eigen::ArrayXXd dc_next = Eigen::ArrayXXd::Zero(h, batch);
  for (int s = frames - 1; s >= 0; --s) {
    const int t = reverse ? frames - 1 - s : s;
    const int prev = reverse ? t + 1 : t - 1;
    const auto g = c.gates.middleCols(t * batch, batch).array();
    const auto in_gate = g.topRows(h);
    const auto forget = g.middleRows(h, h);
    const auto cand = g.middleRows(2 * h, h);
    const auto out_gate = g.bottomRows(h);
    const auto ct = c.cell_tanh.middleCols(t * batch, batch).array();

    const Eigen::ArrayXXd dh =
        d_hidden.middleCols(t * batch, batch).array() + dh_next.array();
    const Eigen::ArrayXXd dc =
        dh * out_gate * (1.0 - ct.square()) + dc_next;

    auto dzt = dz.middleCols(t * batch, batch);
    dzt.topRows(h).array() = dc * cand * in_gate * (1.0 - in_gate);
    if (s > 0) {
      dzt.middleRows(h, h).array() =
          dc * c.cell.middleCols(prev * batch, batch).array() * forget *
          (1.0 - forget);
    } else {
      dzt.middleRows(h, h).setZero();
    }
    dzt.middleRows(2 * h, h).array() = dc * in_gate * (1.0 - cand.square());
    dzt.bottomRows(h).array() = dh * ct * out_gate * (1.0 - out_gate);

    dc_next = dc * forget;
    dh_next.noalias() = p.w_recurrent.transpose() * dzt;
  }
  return dz;
}

// Weight gradients of one direction given its pre-activation gradients.
void accumulate_recurrent_grads(const LstmDirectionCache& c,
                                const MatrixXd& dz, int frames, int batch,
                                bool reverse, LstmParams& g) {
  g.bias = dz.rowwise().sum();
  g.w_recurrent.setZero();
  if (frames < 2) return;
  const Eigen::Index n = static_cast<Eigen::Index>(frames - 1) * batch;
  if (!reverse) {
    g.w_recurrent.noalias() =
        dz.rightCols(n) * c.hidden.leftCols(n).transpose();
  } else {
    g.w_recurrent.noalias() =
        dz.leftCols(n) * c.hidden.rightCols(n).transpose();
  }
}

// Sum over time of each sequence's columns: 4H x TB -> 4H x batch.
MatrixXd sum_over_time(const MatrixXd& m, int frames, int batch) {
  MatrixXd out = MatrixXd::Zero(m.rows(), batch);
  for (int t = 0; t < frames; ++t) out += m.middleCols(t * batch, batch);
  return out;
}

MatrixXd concat_rows(const MatrixXd& top, const MatrixXd& bottom) {
  MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

void ModelDims::validate() const {
  if (freq_bins < 1 || embedding_dim < 1 || blstm_layers < 1 ||
      hidden_units < 1 || fc_layers < 1 || (fc_layers > 1 && fc_units < 1)) {
    throw InvalidConfig(
        "model dims must be positive (freq_bins, embedding_dim, blstm_layers, "
        "hidden_units, fc_layers, fc_units)");
  }
}

ModelDims ModelDims::full_scale(int freq_bins) {
  return {freq_bins, 512, 5, 512, 3, 512};
}

ModelParams ModelParams::zeros(const ModelDims& dims) {
  dims.validate();
  ModelParams p;
  p.dims = dims;
  const int h = dims.hidden_units;
  for (int l = 0; l < dims.blstm_layers; ++l) {
    const int in = l == 0 ? dims.freq_bins + dims.embedding_dim : 2 * h;
    p.blstm.push_back({lstm_zeros(in, h), lstm_zeros(in, h)});
  }
  int in = 2 * h;
  for (int j = 0; j < dims.fc_layers; ++j) {
    const int out = j + 1 == dims.fc_layers ? dims.freq_bins : dims.fc_units;
    p.dense.push_back({MatrixXd::Zero(out, in), VectorXd::Zero(out)});
    in = out;
  }
  return p;
}

ModelParams ModelParams::initialized(const ModelDims& dims, Rng& rng) {
  ModelParams p = zeros(dims);
  const int h = dims.hidden_units;
  for (auto& layer : p.blstm) {
    for (LstmParams* d : {&layer.forward, &layer.backward}) {
      const double bound =
          1.0 / std::sqrt(static_cast<double>(d->w_input.cols() + h));
      fill_uniform(d->w_input, bound, rng);
      fill_uniform(d->w_recurrent, bound, rng);
      d->bias.segment(h, h).setOnes();
    }
  }
  for (auto& d : p.dense) {
    fill_uniform(d.weight, 1.0 / std::sqrt(static_cast<double>(d.weight.cols())),
                 rng);
  }
  return p;
}

std::vector<std::span<double>> ModelParams::tensors() {
  std::vector<std::span<double>> out;
  auto add = [&](auto& m) { out.emplace_back(m.data(), m.size()); };
  for (auto& layer : blstm) {
    for (LstmParams* d : {&layer.forward, &layer.backward}) {
      add(d->w_input);
      add(d->w_recurrent);
      add(d->bias);
    }
  }
  for (auto& d : dense) {
    add(d.weight);
    add(d.bias);
  }
  return out;
}

std::vector<std::span<const double>> ModelParams::tensors() const {
  auto mutable_views = const_cast<ModelParams*>(this)->tensors();
  return {mutable_views.begin(), mutable_views.end()};
}

std::vector<std::string> ModelParams::tensor_names() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < blstm.size(); ++l) {
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string base = "blstm" + std::to_string(l) + "." + dir;
      out.push_back(base + ".w_input");
      out.push_back(base + ".w_recurrent");
      out.push_back(base + ".bias");
    }
  }
  for (std::size_t j = 0; j < dense.size(); ++j) {
    out.push_back("dense" + std::to_string(j) + ".weight");
    out.push_back("dense" + std::to_string(j) + ".bias");
  }
  return out;
}

std::size_t ModelParams::num_parameters() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (auto t : tensors()) {
    for (double v : t) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

int EmbeddingTable::find(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

void EmbeddingTable::append(const std::vector<std::string>& new_labels,
                            Rng& rng, double stddev, bool trainable_rows) {
  for (const auto& l : new_labels) {
    if (find(l) >= 0) {
      throw InvalidInput("embedding table already has speaker '" + l + "'");
    }
  }
  const int old_rows = rows();
  const int k = dim();
  MatrixXd grown(old_rows + static_cast<int>(new_labels.size()), k);
  grown.topRows(old_rows) = weights;
  for (int r = old_rows; r < grown.rows(); ++r) {
    for (int c = 0; c < k; ++c) grown(r, c) = rng.normal(0.0, stddev);
  }
  weights = std::move(grown);
  labels.insert(labels.end(), new_labels.begin(), new_labels.end());
  trainable.resize(labels.size(), trainable_rows ? 1 : 0);
}

EmbeddingTable EmbeddingTable::random(const std::vector<std::string>& labels,
                                      int dim, Rng& rng, double stddev) {
  if (dim < 1) throw InvalidInput("embedding dim must be >= 1");
  EmbeddingTable t;
  t.weights.resize(0, dim);
  t.append(labels, rng, stddev, true);
  return t;
}

AgnModel AgnModel::create(const ModelDims& dims,
                          const std::vector<std::string>& labels,
                          const StftConfig& stft, double p,
                          std::uint64_t seed) {
  stft.validate();
  if (dims.freq_bins != stft.num_bins()) {
    throw DimensionMismatch("model has " + std::to_string(dims.freq_bins) +
                            " frequency bins, STFT produces " +
                            std::to_string(stft.num_bins()));
  }
  Rng rng = Rng::keyed(seed, /*stream=*/0x1417, 0);
  AgnModel m;
  m.params = ModelParams::initialized(dims, rng);
  m.embeddings = EmbeddingTable::random(labels, dims.embedding_dim, rng);
  m.stft = stft;
  m.compression_p = p;
  return m;
}

Eigen::VectorXd superpose(const EmbeddingTable& table, const Indicator& b) {
  if (static_cast<int>(b.size()) != table.rows()) {
    throw DimensionMismatch("superpose: indicator has " +
                            std::to_string(b.size()) + " entries, table has " +
                            std::to_string(table.rows()) + " rows");
  }
  VectorXd e = VectorXd::Zero(table.dim());
  int selected = 0;
  for (int r = 0; r < table.rows(); ++r) {
    if (b[r]) {
      e += table.weights.row(r).transpose();
      ++selected;
    }
  }
  if (selected == 0) throw InvalidInput("superpose: no target speaker selected");
  return e;
}

Indicator indicator_for_table(const EmbeddingTable& table,
                              const std::vector<std::string>& corpus_labels,
                              const Indicator& corpus_indicator) {
  if (corpus_labels.size() != corpus_indicator.size()) {
    throw DimensionMismatch("indicator length differs from corpus size");
  }
  Indicator out(table.rows(), 0);
  for (std::size_t i = 0; i < corpus_labels.size(); ++i) {
    if (!corpus_indicator[i]) continue;
    const int r = table.find(corpus_labels[i]);
    if (r < 0) {
      throw DimensionMismatch("speaker '" + corpus_labels[i] +
                              "' has no embedding row");
    }
    out[r] = 1;
  }
  return out;
}

Eigen::MatrixXd pack_batch(std::span<const Eigen::MatrixXd> grids) {
  if (grids.empty()) throw InvalidInput("pack_batch: empty batch");
  const Eigen::Index rows = grids[0].rows();
  const Eigen::Index frames = grids[0].cols();
  const Eigen::Index batch = static_cast<Eigen::Index>(grids.size());
  MatrixXd out(rows, frames * batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    if (grids[b].rows() != rows || grids[b].cols() != frames) {
      throw DimensionMismatch("pack_batch: grids differ in shape");
    }
    for (Eigen::Index t = 0; t < frames; ++t) {
      out.col(t * batch + b) = grids[b].col(t);
    }
  }
  return out;
}

Eigen::MatrixXd unpack_sequence(const Eigen::MatrixXd& packed, int batch,
                                int index) {
  const Eigen::Index frames = packed.cols() / batch;
  MatrixXd out(packed.rows(), frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    out.col(t) = packed.col(t * batch + index);
  }
  return out;
}

ForwardCache forward_batch(const ModelParams& params,
                           const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& embeddings, int batch,
                           GateInput mode) {
  const ModelDims& dims = params.dims;
  if (batch < 1) throw InvalidInput("forward: batch must be >= 1");
  if (inputs.rows() != dims.freq_bins) {
    throw DimensionMismatch("forward: input has " +
                            std::to_string(inputs.rows()) +
                            " frequency rows, model expects " +
                            std::to_string(dims.freq_bins));
  }
  if (inputs.cols() == 0 || inputs.cols() % batch != 0) {
    throw DimensionMismatch("forward: input columns " +
                            std::to_string(inputs.cols()) +
                            " not a positive multiple of batch " +
                            std::to_string(batch));
  }
  if (embeddings.rows() != dims.embedding_dim || embeddings.cols() != batch) {
    throw DimensionMismatch("forward: embeddings are " + shape(embeddings) +
                            ", expected " + std::to_string(dims.embedding_dim) +
                            "x" + std::to_string(batch));
  }

  ForwardCache c;
  c.batch = batch;
  c.frames = static_cast<int>(inputs.cols() / batch);
  c.embeddings = embeddings;
  c.params = &params;
  c.params_revision = params.revision;
  const int frames = c.frames;
  const int f = dims.freq_bins;
  const int k = dims.embedding_dim;
  const Eigen::Index cols = inputs.cols();

  c.blstm.resize(dims.blstm_layers);
  for (int l = 0; l < dims.blstm_layers; ++l) {
    BlstmLayerCache& lc = c.blstm[l];
    if (l == 0) {
      lc.input = inputs;
    } else {
      lc.input = concat_rows(c.blstm[l - 1].forward.hidden,
                             c.blstm[l - 1].backward.hidden);
    }
    const BlstmLayerParams& lp = params.blstm[l];
    for (bool reverse : {false, true}) {
      const LstmParams& p = reverse ? lp.backward : lp.forward;
      LstmDirectionCache& dc = reverse ? lc.backward : lc.forward;
      if (l > 0) {
        dc.preact.noalias() = p.w_input * lc.input;
        dc.preact.colwise() += p.bias;
      } else if (mode == GateInput::kConcatenate) {
        MatrixXd appended(f + k, cols);
        appended.topRows(f) = inputs;
        for (int t = 0; t < frames; ++t) {
          appended.bottomRows(k).middleCols(t * batch, batch) = embeddings;
        }
        dc.preact.noalias() = p.w_input * appended;
        dc.preact.colwise() += p.bias;
      } else {
        // W_eh e + b is constant over time for each sequence.
        MatrixXd gain = p.w_input.rightCols(k) * embeddings;
        gain.colwise() += p.bias;
        dc.preact.noalias() = p.w_input.leftCols(f) * inputs;
        for (int t = 0; t < frames; ++t) {
          dc.preact.middleCols(t * batch, batch) += gain;
        }
      }
      run_direction(p, frames, batch, reverse, dc);
    }
  }

  const BlstmLayerCache& top = c.blstm.back();
  MatrixXd x = concat_rows(top.forward.hidden, top.backward.hidden);
  const int num_dense = static_cast<int>(params.dense.size());
  c.dense_preact.resize(num_dense);
  c.dense_output.resize(num_dense - 1);
  for (int j = 0; j < num_dense; ++j) {
    const DenseParams& d = params.dense[j];
    const MatrixXd& in = j == 0 ? x : c.dense_output[j - 1];
    c.dense_preact[j].noalias() = d.weight * in;
    c.dense_preact[j].colwise() += d.bias;
    if (j + 1 < num_dense) {
      c.dense_output[j] = c.dense_preact[j].cwiseMax(0.0);
    }
  }
  // Keep the mask strictly inside (0, 1) even when the sigmoid saturates.
  static const double kUpper = std::nextafter(1.0, 0.0);
  c.mask = sigmoid(c.dense_preact.back().array())
               .max(DBL_MIN)
               .min(kUpper)
               .matrix();
  return c;
}

Mask forward(const CompressedMagnitude& input, const Eigen::VectorXd& embedding,
             const ModelParams& params, ForwardCache* cache, GateInput mode) {
  ForwardCache c = forward_batch(params, input.values, embedding, 1, mode);
  Mask m{c.mask};
  if (cache != nullptr) *cache = std::move(c);
  return m;
}

CompressedMagnitude apply_mask(const Mask& mask,
                               const CompressedMagnitude& input) {
  if (mask.values.rows() != input.values.rows() ||
      mask.values.cols() != input.values.cols()) {
    throw DimensionMismatch("apply_mask: mask " + shape(mask.values) +
                            " vs input " + shape(input.values));
  }
  return {mask.values.cwiseProduct(input.values), input.p};
}

double loss(const CompressedMagnitude& target,
            const CompressedMagnitude& estimate) {
  if (target.values.rows() != estimate.values.rows() ||
      target.values.cols() != estimate.values.cols()) {
    throw DimensionMismatch("loss: target " + shape(target.values) +
                            " vs estimate " + shape(estimate.values));
  }
  return (target.values - estimate.values).squaredNorm();
}

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& targets) {
  if (cache.empty()) throw InvalidState("backward: no forward cache");
  if (cache.params != &params || cache.params_revision != params.revision) {
    throw InvalidState("backward: forward cache is stale for these parameters");
  }
  const MatrixXd& x = cache.blstm[0].input;
  if (targets.rows() != x.rows() || targets.cols() != x.cols()) {
    throw DimensionMismatch("backward: targets " + shape(targets) +
                            " vs inputs " + shape(x));
  }
  const ModelDims& dims = params.dims;
  const int frames = cache.frames;
  const int batch = cache.batch;
  const int f = dims.freq_bins;
  const int k = dims.embedding_dim;
  const int h = dims.hidden_units;

  Gradients g;
  g.params = ModelParams::zeros(dims);
  g.embeddings = MatrixXd::Zero(k, batch);

  const Eigen::ArrayXXd m = cache.mask.array();
  const Eigen::ArrayXXd diff = m * x.array() - targets.array();
  g.loss = diff.square().sum();
  MatrixXd dy = (2.0 * diff * x.array() * m * (1.0 - m)).matrix();

  const BlstmLayerCache& top = cache.blstm.back();
  const MatrixXd top_out = concat_rows(top.forward.hidden, top.backward.hidden);
  const int num_dense = static_cast<int>(params.dense.size());
  MatrixXd d_in;
  for (int j = num_dense - 1; j >= 0; --j) {
    const MatrixXd& in = j == 0 ? top_out : cache.dense_output[j - 1];
    g.params.dense[j].weight.noalias() = dy * in.transpose();
    g.params.dense[j].bias = dy.rowwise().sum();
    d_in.noalias() = params.dense[j].weight.transpose() * dy;
    if (j > 0) {
      dy = (cache.dense_preact[j - 1].array() > 0.0)
               .select(d_in.array(), 0.0)
               .matrix();
    }
  }

  for (int l = dims.blstm_layers - 1; l >= 0; --l) {
    const BlstmLayerCache& lc = cache.blstm[l];
    const BlstmLayerParams& lp = params.blstm[l];
    BlstmLayerParams& gl = g.params.blstm[l];
    const MatrixXd d_fwd = d_in.topRows(h);
    const MatrixXd d_bwd = d_in.bottomRows(h);
    MatrixXd d_below;
    if (l > 0) d_below = MatrixXd::Zero(2 * h, x.cols());
    for (bool reverse : {false, true}) {
      const LstmParams& p = reverse ? lp.backward : lp.forward;
      const LstmDirectionCache& dc = reverse ? lc.backward : lc.forward;
      LstmParams& gp = reverse ? gl.backward : gl.forward;
      const MatrixXd dz = backprop_direction(p, dc, reverse ? d_bwd : d_fwd,
                                             frames, batch, reverse);
      accumulate_recurrent_grads(dc, dz, frames, batch, reverse, gp);
      if (l == 0) {
        gp.w_input.leftCols(f).noalias() = dz * x.transpose();
        const MatrixXd dz_sum = sum_over_time(dz, frames, batch);
        gp.w_input.rightCols(k).noalias() =
            dz_sum * cache.embeddings.transpose();
        g.embeddings.noalias() += p.w_input.rightCols(k).transpose() * dz_sum;
      } else {
        gp.w_input.noalias() = dz * lc.input.transpose();
        d_below.noalias() += p.w_input.transpose() * dz;
      }
    }
    d_in = std::move(d_below);
  }
  return g;
}

Eigen::MatrixXd embedding_row_gradients(
    const EmbeddingTable& table, const std::vector<Indicator>& indicators,
    const Eigen::MatrixXd& embedding_grads) {
  if (static_cast<Eigen::Index>(indicators.size()) != embedding_grads.cols() ||
      embedding_grads.rows() != table.dim()) {
    throw DimensionMismatch("embedding_row_gradients: batch shape mismatch");
  }
  MatrixXd out = MatrixXd::Zero(table.rows(), table.dim());
  for (std::size_t b = 0; b < indicators.size(); ++b) {
    if (static_cast<int>(indicators[b].size()) != table.rows()) {
      throw DimensionMismatch("embedding_row_gradients: indicator length");
    }
    for (int r = 0; r < table.rows(); ++r) {
      if (indicators[b][r]) out.row(r) += embedding_grads.col(b).transpose();
    }
  }
  return out;
}

}  // namespace agn
