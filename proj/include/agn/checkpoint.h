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

#ifndef AGN_CHECKPOINT_H_
#define AGN_CHECKPOINT_H_

#include <cstdint>
#include <string>
#include <vector>

#include "agn/model.h"
#include "agn/optim.h"
#include "agn/rng.h"

namespace agn {

constexpr char kCheckpointMagic[9] = "AGNCKPT1";
constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  AgnModel model;
  OptimizerState optimizer;
  Rng::State rng_state{};
};

// Layout (all integers and floats little-endian):
//   "AGNCKPT1"
//   u32 version
//   i32 freq_bins, embedding_dim, blstm_layers, hidden_units, fc_layers,
//       fc_units, window_len, hop, window kind
//   f64 compression_p
//   u64 embedding rows, u64 theta parameter count, i64 optimizer step
//   u64 x4 rng state, u8 has theta optimizer state
//   f64 theta tensors (ModelParams::tensors order)
//   f64 embedding weights, row-major N x K; u8 x N trainable flags
//   f64 theta optimizer state (if present), f64 embedding state row-major
//   per row: u32 byte length + label bytes
//   u64 FNV-1a of every preceding byte
std::vector<std::uint8_t> serialize_checkpoint(const AgnModel& model,
                                               const OptimizerState& state,
                                               const Rng::State& rng_state);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const AgnModel& model, const OptimizerState& state,
                     const Rng::State& rng_state, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Throws DimensionMismatch naming the first differing field.
void check_dims(const Checkpoint& ckpt, const ModelDims& dims);

}  // namespace agn

#endif  // AGN_CHECKPOINT_H_
