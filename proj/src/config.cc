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

#include "agn/config.h"

#include <charconv>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <vector>

#include "agn/error.h"
#include "agn/io_util.h"

namespace agn {
namespace {

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

long parse_long(const std::string& v) {
  long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw InvalidConfig("expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw InvalidConfig("expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& v) {
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0.0;
  in >> out;
  if (!in || !in.eof()) throw InvalidConfig("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw InvalidConfig("expected true/false, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(17) << v;
  return s.str();
}

#define INT_FIELD(name, expr)                                            \
  Field {                                                                \
    name, [](RunConfig& c, const std::string& v) {                       \
      expr = static_cast<std::remove_reference_t<decltype(expr)>>(      \
          parse_long(v));                                                \
    },                                                                   \
        [](const RunConfig& c) { return std::to_string(expr); }          \
  }
#define REAL_FIELD(name, expr)                                                \
  Field {                                                                     \
    name, [](RunConfig& c, const std::string& v) { expr = parse_double(v); }, \
        [](const RunConfig& c) { return fmt(expr); }                          \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      INT_FIELD("blstm_layers", c.model.blstm_layers),
      INT_FIELD("hidden_units", c.model.hidden_units),
      INT_FIELD("fc_layers", c.model.fc_layers),
      INT_FIELD("fc_units", c.model.fc_units),
      INT_FIELD("embedding_dim", c.model.embedding_dim),
      INT_FIELD("window_len", c.stft.window_len),
      INT_FIELD("hop", c.stft.hop),
      REAL_FIELD("compression_p", c.compression_p),
      INT_FIELD("tau", c.task.tau),
      INT_FIELD("g_min", c.task.g_range.min),
      INT_FIELD("g_max", c.task.g_range.max),
      INT_FIELD("h_min", c.task.h_range.min),
      INT_FIELD("h_max", c.task.h_range.max),
      REAL_FIELD("snr_min_db", c.task.snr_range_db.min),
      REAL_FIELD("snr_max_db", c.task.snr_range_db.max),
      Field{"conversation_mode",
            [](RunConfig& c, const std::string& v) {
              c.task.conversation_mode = parse_bool(v);
            },
            [](const RunConfig& c) {
              return std::string(c.task.conversation_mode ? "true" : "false");
            }},
      Field{"task_seed",
            [](RunConfig& c, const std::string& v) { c.task.seed = parse_u64(v); },
            [](const RunConfig& c) { return std::to_string(c.task.seed); }},
      REAL_FIELD("split_seconds", c.split_seconds),
      REAL_FIELD("base_lr", c.train.base_lr),
      REAL_FIELD("decay_rate", c.train.decay_rate),
      INT_FIELD("decay_every_steps", c.train.decay_every_steps),
      REAL_FIELD("rms_decay", c.train.rms_decay),
      REAL_FIELD("rms_epsilon", c.train.rms_epsilon),
      INT_FIELD("batch_size", c.train.batch_size),
      INT_FIELD("max_steps", c.train.max_steps),
      Field{"seed",
            [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64(v); },
            [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      INT_FIELD("eval_every", c.train.eval_every),
      INT_FIELD("eval_examples", c.train.eval_examples),
      INT_FIELD("early_stop_patience", c.train.early_stop_patience),
      INT_FIELD("checkpoint_every", c.train.checkpoint_every),
      REAL_FIELD("clip_norm", c.train.clip_norm),
  };
  return f;
}

#undef INT_FIELD
#undef REAL_FIELD

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  stft.validate();
  ModelDims dims = model;
  dims.freq_bins = stft.num_bins();
  dims.validate();
  if (!(compression_p > 0.0 && compression_p <= 1.0)) {
    throw InvalidConfig("compression_p must be in (0, 1]");
  }
  task.validate();
  if (task.tau < stft.window_len) {
    throw InvalidConfig("tau must be at least one STFT window");
  }
  train.validate();
  if (!(split_seconds > 0.0)) throw InvalidConfig("split_seconds must be > 0");
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    auto where = [&] { return "config line " + std::to_string(lineno) + ": "; };
    if (eq == std::string::npos) {
      throw InvalidConfig(where() + "expected `key = value`");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (key == f.key) field = &f;
    }
    if (field == nullptr) throw InvalidConfig(where() + "unknown key '" + key + "'");
    if (!seen.insert(key).second) {
      throw InvalidConfig(where() + "duplicate key '" + key + "'");
    }
    try {
      field->set(c, value);
    } catch (const InvalidConfig& e) {
      throw InvalidConfig(where() + key + ": " + e.what());
    }
  }
  c.model.freq_bins = c.stft.num_bins();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(config);
    out += "\n";
  }
  return out;
}

}  // namespace agn
