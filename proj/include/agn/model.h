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

#ifndef AGN_MODEL_H_
#define AGN_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "agn/dsp.h"
#include "agn/rng.h"
#include "agn/task.h"

namespace agn {

// Layer sizes of the BLSTM-FC gating network. fc_layers counts every fully
// connected layer including the F-wide output layer.
struct ModelDims {
  int freq_bins = 129;
  int embedding_dim = 32;
  int blstm_layers = 2;
  int hidden_units = 64;
  int fc_layers = 2;
  int fc_units = 64;

  void validate() const;
  // 5 BLSTM layers, 3 FC layers, 512 units everywhere, K = 512.
  static ModelDims full_scale(int freq_bins = 129);
  bool operator==(const ModelDims&) const = default;
};

// One LSTM direction. Gate rows are ordered input, forget, cell, output.
struct LstmParams {
  Eigen::MatrixXd w_input;      // 4H x in
  Eigen::MatrixXd w_recurrent;  // 4H x H
  Eigen::VectorXd bias;         // 4H
};

struct BlstmLayerParams {
  LstmParams forward;
  LstmParams backward;
};

struct DenseParams {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

// Network weights theta. In the first BLSTM layer the trailing K columns of
// w_input are the embedding path W_eh; the leading F columns are W_ih.
struct ModelParams {
  ModelDims dims;
  std::vector<BlstmLayerParams> blstm;
  std::vector<DenseParams> dense;
  // Bumped by every in-place update; forward caches remember it.
  std::uint64_t revision = 0;

  static ModelParams zeros(const ModelDims& dims);
  // LSTM and dense weights uniform in +-1/sqrt(fan_in), forget-gate bias 1,
  // other biases 0.
  static ModelParams initialized(const ModelDims& dims, Rng& rng);

  // Every tensor as a flat span, in a fixed order shared by checkpoints,
  // optimizer state and gradient containers.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::vector<std::string> tensor_names() const;
  std::size_t num_parameters() const;
  bool all_finite() const;
};

// Speaker embeddings E, one row per speaker.
struct EmbeddingTable {
  Eigen::MatrixXd weights;          // N x K
  std::vector<std::string> labels;  // row -> external speaker id
  std::vector<std::uint8_t> trainable;

  int rows() const { return static_cast<int>(weights.rows()); }
  int dim() const { return static_cast<int>(weights.cols()); }
  // Row index of `label`, or -1.
  int find(const std::string& label) const;
  // Appends rows drawn i.i.d. from N(0, stddev^2). Rejects labels already
  // present.
  void append(const std::vector<std::string>& new_labels, Rng& rng,
              double stddev = 0.1, bool trainable_rows = true);
  static EmbeddingTable random(const std::vector<std::string>& labels, int dim,
                               Rng& rng, double stddev = 0.1);
};

// Everything needed to run separation: network, embeddings and the
// spectral front-end settings the network was trained with.
struct AgnModel {
  ModelParams params;
  EmbeddingTable embeddings;
  StftConfig stft;
  double compression_p = 0.3;

  // Fresh model: initialized weights and N(0, 0.1^2) embedding rows, one per
  // label. dims.freq_bins must match the STFT bin count.
  static AgnModel create(const ModelDims& dims,
                         const std::vector<std::string>& labels,
                         const StftConfig& stft, double p, std::uint64_t seed);
};

struct Mask {
  Eigen::MatrixXd values;  // F x T, entries in (0, 1)
};

// E^T B: sum of the rows selected by the G-hot vector.
Eigen::VectorXd superpose(const EmbeddingTable& table, const Indicator& b);

// Indicator over the table rows for the given corpus-local indicator, using
// the corpus labels to locate rows.
Indicator indicator_for_table(const EmbeddingTable& table,
                              const std::vector<std::string>& corpus_labels,
                              const Indicator& corpus_indicator);

// How the embedding enters layer 1. Both are the same function; the second
// exists to check the first.
enum class GateInput {
  kAdditiveBias,  // W_ih x_t + W_eh e added as a per-sequence bias
  kConcatenate,   // W [x_t; e] on the appended input column
};

struct LstmDirectionCache {
  Eigen::MatrixXd preact;     // 4H x TB gate pre-activations
  Eigen::MatrixXd gates;      // 4H x TB activations
  Eigen::MatrixXd cell;       // H x TB
  Eigen::MatrixXd cell_tanh;  // H x TB
  Eigen::MatrixXd hidden;     // H x TB
};

struct BlstmLayerCache {
  Eigen::MatrixXd input;  // in x TB (layer 1: F x TB, no embedding rows)
  LstmDirectionCache forward;
  LstmDirectionCache backward;
};

// Activations for one batch. Columns are time-major: column t * batch + b
// holds frame t of sequence b.
struct ForwardCache {
  int batch = 0;
  int frames = 0;
  Eigen::MatrixXd embeddings;  // K x batch
  std::vector<BlstmLayerCache> blstm;
  std::vector<Eigen::MatrixXd> dense_preact;  // per dense layer
  std::vector<Eigen::MatrixXd> dense_output;  // ReLU output (hidden layers)
  Eigen::MatrixXd mask;                       // F x TB
  const ModelParams* params = nullptr;
  std::uint64_t params_revision = 0;

  bool empty() const { return params == nullptr; }
};

// Packs F x T grids (all the same T) into the time-major batch layout.
Eigen::MatrixXd pack_batch(std::span<const Eigen::MatrixXd> grids);
Eigen::MatrixXd unpack_sequence(const Eigen::MatrixXd& packed, int batch,
                                int index);

ForwardCache forward_batch(const ModelParams& params,
                           const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& embeddings, int batch,
                           GateInput mode = GateInput::kAdditiveBias);

Mask forward(const CompressedMagnitude& input, const Eigen::VectorXd& embedding,
             const ModelParams& params, ForwardCache* cache = nullptr,
             GateInput mode = GateInput::kAdditiveBias);

CompressedMagnitude apply_mask(const Mask& mask,
                               const CompressedMagnitude& input);

// Squared Frobenius norm of target - estimate.
double loss(const CompressedMagnitude& target,
            const CompressedMagnitude& estimate);

struct Gradients {
  ModelParams params;          // same layout as the network weights
  Eigen::MatrixXd embeddings;  // K x batch, d loss / d (E^T B) per sequence
  double loss = 0.0;           // summed over the batch
};

// Reverse-mode gradients of the summed loss over the batch, through the
// mask, FC stack and both recurrent directions (BPTT). targets uses the
// same packed layout as the forward inputs.
Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& targets);

// Routes per-sequence embedding gradients onto table rows: row r receives
// the sum over sequences whose indicator selects r.
Eigen::MatrixXd embedding_row_gradients(
    const EmbeddingTable& table, const std::vector<Indicator>& indicators,
    const Eigen::MatrixXd& embedding_grads);

}  // namespace agn

#endif  // AGN_MODEL_H_
