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

#ifndef AGN_WAV_H_
#define AGN_WAV_H_

#include <string>

#include "agn/dsp.h"

namespace agn {

// Mono 16-bit PCM at the file's own rate (8000 or 16000 Hz), scaled by
// 1/32768. Throws FormatError for anything else.
Waveform read_wav_native(const std::string& path);

// As read_wav_native, but 16 kHz input is brought to 8 kHz with
// downsample_2x.
Waveform read_wav(const std::string& path);

// Inverse of the read scaling with round-to-nearest and clipping. The file
// is written to a temporary and renamed into place.
void write_wav(const Waveform& w, const std::string& path);

}  // namespace agn

#endif  // AGN_WAV_H_
