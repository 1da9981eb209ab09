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

#include "agn/checkpoint.h"

#include <cstring>

#include "agn/error.h"
#include "agn/io_util.h"

namespace agn {
namespace {

void put_tensors(std::vector<std::uint8_t>& out, const ModelParams& p) {
  for (auto t : p.tensors()) {
    for (double v : t) put_f64(out, v);
  }
}

void get_tensors(ByteReader& r, ModelParams& p) {
  for (auto t : p.tensors()) {
    for (double& v : t) v = r.f64();
  }
}

void put_rows(std::vector<std::uint8_t>& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
  }
}

void get_rows(ByteReader& r, Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const AgnModel& model,
                                               const OptimizerState& state,
                                               const Rng::State& rng_state) {
  const ModelDims& d = model.params.dims;
  const EmbeddingTable& table = model.embeddings;
  if (table.dim() != d.embedding_dim ||
      static_cast<int>(table.labels.size()) != table.rows() ||
      static_cast<int>(table.trainable.size()) != table.rows()) {
    throw InvalidState("checkpoint: embedding table inconsistent with model");
  }
  // An empty optimizer state (nothing trained yet) is stored as zeros.
  const Eigen::MatrixXd emb_sq =
      state.embedding_sq.size() == 0
          ? Eigen::MatrixXd::Zero(table.rows(), table.dim())
          : state.embedding_sq;
  if (emb_sq.rows() != table.rows() || emb_sq.cols() != table.dim()) {
    throw InvalidState("checkpoint: optimizer state does not match table");
  }
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
  put_u32(out, kCheckpointVersion);
  for (int v : {d.freq_bins, d.embedding_dim, d.blstm_layers, d.hidden_units,
                d.fc_layers, d.fc_units, model.stft.window_len, model.stft.hop,
                static_cast<int>(model.stft.window)}) {
    put_u32(out, static_cast<std::uint32_t>(v));
  }
  put_f64(out, model.compression_p);
  put_u64(out, static_cast<std::uint64_t>(table.rows()));
  put_u64(out, model.params.num_parameters());
  put_u64(out, static_cast<std::uint64_t>(state.step));
  for (auto w : rng_state) put_u64(out, w);
  out.push_back(state.theta_sq ? 1 : 0);

  put_tensors(out, model.params);
  put_rows(out, table.weights);
  for (auto t : table.trainable) out.push_back(t ? 1 : 0);
  if (state.theta_sq) put_tensors(out, *state.theta_sq);
  put_rows(out, emb_sq);
  for (const auto& l : table.labels) {
    put_u32(out, static_cast<std::uint32_t>(l.size()));
    out.insert(out.end(), l.begin(), l.end());
  }
  put_u64(out, fnv1a64(out));
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw FormatError("not an AGN checkpoint (bad magic)");
  }
  const std::span<const std::uint8_t> body(bytes.data(), bytes.size() - 8);
  ByteReader tail(std::span<const std::uint8_t>(bytes).last(8));
  if (tail.u64() != fnv1a64(body)) {
    throw ChecksumError("checkpoint checksum mismatch (corrupt or truncated)");
  }
  ByteReader r(body);
  r.skip(8);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  ModelDims d;
  d.freq_bins = r.i32();
  d.embedding_dim = r.i32();
  d.blstm_layers = r.i32();
  d.hidden_units = r.i32();
  d.fc_layers = r.i32();
  d.fc_units = r.i32();
  c.model.stft.window_len = r.i32();
  c.model.stft.hop = r.i32();
  const std::int32_t window = r.i32();
  if (window != static_cast<int>(WindowKind::kHann)) {
    throw FormatError("unknown window kind in checkpoint");
  }
  c.model.compression_p = r.f64();
  const std::uint64_t rows = r.u64();
  const std::uint64_t num_params = r.u64();
  c.optimizer.step = r.i64();
  for (auto& w : c.rng_state) w = r.u64();
  const bool has_theta_state = r.u8() != 0;

  try {
    d.validate();
  } catch (const InvalidConfig& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  c.model.params = ModelParams::zeros(d);
  if (c.model.params.num_parameters() != num_params) {
    throw FormatError("checkpoint parameter count disagrees with its dims");
  }
  if (rows > r.remaining() / 8) throw FormatError("implausible embedding rows");
  get_tensors(r, c.model.params);
  EmbeddingTable& table = c.model.embeddings;
  table.weights.resize(static_cast<Eigen::Index>(rows), d.embedding_dim);
  get_rows(r, table.weights);
  table.trainable.resize(rows);
  for (auto& t : table.trainable) t = r.u8();
  if (has_theta_state) {
    c.optimizer.theta_sq = ModelParams::zeros(d);
    get_tensors(r, *c.optimizer.theta_sq);
  }
  c.optimizer.embedding_sq.resize(static_cast<Eigen::Index>(rows),
                                  d.embedding_dim);
  get_rows(r, c.optimizer.embedding_sq);
  for (std::uint64_t i = 0; i < rows; ++i) {
    const std::uint32_t len = r.u32();
    auto s = r.bytes(len);
    table.labels.emplace_back(s.begin(), s.end());
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const AgnModel& model, const OptimizerState& state,
                     const Rng::State& rng_state, const std::string& path) {
  atomic_write_file(path, serialize_checkpoint(model, state, rng_state));
}

Checkpoint load_checkpoint(const std::string& path) {
  try {
    return deserialize_checkpoint(read_file_bytes(path));
  } catch (const FormatError& e) {
    if (dynamic_cast<const ChecksumError*>(&e)) {
      throw ChecksumError("'" + path + "': " + e.what());
    }
    throw FormatError("'" + path + "': " + e.what());
  }
}

void check_dims(const Checkpoint& ckpt, const ModelDims& dims) {
  const ModelDims& c = ckpt.model.params.dims;
  auto check = [](const char* name, int have, int want) {
    if (have != want) {
      throw DimensionMismatch(std::string("checkpoint ") + name + " is " +
                              std::to_string(have) + ", config expects " +
                              std::to_string(want));
    }
  };
  check("freq_bins", c.freq_bins, dims.freq_bins);
  check("embedding_dim", c.embedding_dim, dims.embedding_dim);
  check("blstm_layers", c.blstm_layers, dims.blstm_layers);
  check("hidden_units", c.hidden_units, dims.hidden_units);
  check("fc_layers", c.fc_layers, dims.fc_layers);
  check("fc_units", c.fc_units, dims.fc_units);
}

}  // namespace agn
