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

#ifndef AGN_CONFIG_H_
#define AGN_CONFIG_H_

#include <string>

#include "agn/dsp.h"
#include "agn/model.h"
#include "agn/optim.h"
#include "agn/task.h"

namespace agn {

// Everything a training or evaluation run reads from its config file.
// Defaults are the desk-scale setup.
struct RunConfig {
  ModelDims model;  // freq_bins is derived from stft
  StftConfig stft;
  double compression_p = 0.3;
  TaskConfig task;
  TrainConfig train;
  double split_seconds = 100.0;

  void validate() const;
};

// Flat `key = value` lines; `#` starts a comment. Unknown keys, duplicate
// keys and malformed values throw InvalidConfig with the line number.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// Writes every key; parse_config(format_config(c)) reproduces c.
std::string format_config(const RunConfig& config);

}  // namespace agn

#endif  // AGN_CONFIG_H_
