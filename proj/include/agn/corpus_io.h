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

#ifndef AGN_CORPUS_IO_H_
#define AGN_CORPUS_IO_H_

#include <cstddef>
#include <string>
#include <vector>

#include "agn/task.h"

namespace agn {

// One manifest line: speaker_id<TAB>relative_wav_path<TAB>num_samples.
// num_samples counts samples at 8 kHz, i.e. after any downsampling.
struct ManifestRow {
  std::string speaker;
  std::string path;
  std::size_t num_samples = 0;
};

std::vector<ManifestRow> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestRow>& rows,
                    const std::string& path);

// Loads every listed file relative to `root` (default: the manifest's
// directory). Speakers get dense ids in order of first appearance.
Corpus load_corpus(const std::string& manifest_path, CorpusRole role,
                   const std::string& root = "");

// Scans root/<speaker>/**/*.wav in sorted order.
std::vector<ManifestRow> scan_corpus_tree(const std::string& root);

}  // namespace agn

#endif  // AGN_CORPUS_IO_H_
