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

#include "agn/corpus_io.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "agn/error.h"
#include "agn/io_util.h"
#include "agn/wav.h"

namespace agn {

namespace fs = std::filesystem;

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  std::vector<ManifestRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty()) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": expected speaker<TAB>path<TAB>num_samples");
    }
    ManifestRow r{cols[0], cols[1], 0};
    try {
      std::size_t used = 0;
      r.num_samples = std::stoull(cols[2], &used);
      if (used != cols[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": bad sample count '" + cols[2] + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_manifest(const std::vector<ManifestRow>& rows,
                    const std::string& path) {
  std::string text;
  for (const auto& r : rows) {
    text += r.speaker + "\t" + r.path + "\t" + std::to_string(r.num_samples) +
            "\n";
  }
  atomic_write_file(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()),
                              text.size()));
}

Corpus load_corpus(const std::string& manifest_path, CorpusRole role,
                   const std::string& root) {
  const fs::path base =
      root.empty() ? fs::path(manifest_path).parent_path() : fs::path(root);
  Corpus corpus;
  corpus.role = role;
  std::map<std::string, int> index;
  for (const auto& row : read_manifest(manifest_path)) {
    auto [it, inserted] = index.emplace(row.speaker, corpus.size());
    if (inserted) {
      corpus.profiles.push_back({it->second, row.speaker, {}});
    }
    const std::string file = (base / row.path).string();
    Waveform w = read_wav(file);
    if (w.size() != row.num_samples) {
      throw FormatError("'" + file + "' has " + std::to_string(w.size()) +
                        " samples, manifest says " +
                        std::to_string(row.num_samples));
    }
    corpus.profiles[it->second].utterances.push_back(std::move(w));
  }
  corpus.validate();
  return corpus;
}

std::vector<ManifestRow> scan_corpus_tree(const std::string& root) {
  if (!fs::is_directory(root)) {
    throw IoError("'" + root + "' is not a directory");
  }
  std::vector<fs::path> speakers;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) speakers.push_back(e.path());
  }
  std::sort(speakers.begin(), speakers.end());
  std::vector<ManifestRow> rows;
  for (const auto& dir : speakers) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") {
        files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const Waveform w = read_wav(f.string());
      rows.push_back({dir.filename().string(),
                      fs::relative(f, root).generic_string(), w.size()});
    }
  }
  return rows;
}

}  // namespace agn
