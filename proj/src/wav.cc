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

#include "agn/wav.h"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "agn/error.h"
#include "agn/io_util.h"

namespace agn {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

bool tag_is(std::span<const std::uint8_t> b, const char* tag) {
  return std::memcmp(b.data(), tag, 4) == 0;
}

}  // namespace

Waveform read_wav_native(const std::string& path) {
  const std::vector<std::uint8_t> data = read_file_bytes(path);
  ByteReader r(data);
  auto fail = [&](const std::string& why) {
    return FormatError("'" + path + "': " + why);
  };
  try {
    if (!tag_is(r.bytes(4), "RIFF")) throw fail("not a RIFF file");
    r.u32();
    if (!tag_is(r.bytes(4), "WAVE")) throw fail("not a WAVE file");

    bool have_fmt = false;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
    while (r.remaining() >= 8) {
      auto id = r.bytes(4);
      const std::uint32_t size = r.u32();
      if (tag_is(id, "fmt ")) {
        ByteReader f(r.bytes(size));
        std::uint16_t format = f.u16();
        channels = f.u16();
        rate = f.u32();
        f.u32();  // byte rate
        f.u16();  // block align
        bits = f.u16();
        if (format == kFormatExtensible && size >= 40) {
          f.u16();  // cbSize
          f.u16();  // valid bits
          f.u32();  // channel mask
          format = f.u16();
        }
        if (format != kFormatPcm) throw fail("compressed WAV is not supported");
        have_fmt = true;
      } else if (tag_is(id, "data")) {
        if (!have_fmt) throw fail("data chunk before fmt chunk");
        if (channels != 1) {
          throw fail(std::to_string(channels) + "-channel audio is not supported");
        }
        if (bits != 16) {
          throw fail(std::to_string(bits) + "-bit audio is not supported");
        }
        if (rate != 8000 && rate != 16000) {
          throw fail("sample rate " + std::to_string(rate) +
                     " Hz is not supported (8000 or 16000)");
        }
        auto payload = r.bytes(std::min<std::size_t>(size, r.remaining()));
        Waveform w;
        w.sample_rate = static_cast<int>(rate);
        w.samples.resize(payload.size() / 2);
        for (std::size_t i = 0; i < w.samples.size(); ++i) {
          const auto v = static_cast<std::int16_t>(payload[2 * i] |
                                                   (payload[2 * i + 1] << 8));
          w.samples[i] = v / 32768.0;
        }
        return w;
      } else {
        r.skip(std::min<std::size_t>(size, r.remaining()));
      }
      if (size % 2 && r.remaining() > 0) r.skip(1);
    }
  } catch (const FormatError& e) {
    if (std::string(e.what()).rfind("'" + path, 0) == 0) throw;
    throw fail(e.what());
  }
  throw fail("no data chunk");
}

Waveform read_wav(const std::string& path) {
  Waveform w = read_wav_native(path);
  if (w.sample_rate == 16000) return downsample_2x(w);
  return w;
}

void write_wav(const Waveform& w, const std::string& path) {
  if (w.sample_rate != 8000 && w.sample_rate != 16000) {
    throw InvalidInput("write_wav: sample rate " +
                       std::to_string(w.sample_rate) + " Hz not supported");
  }
  const auto payload = static_cast<std::uint32_t>(w.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + payload);
  auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  tag("RIFF");
  put_u32(out, 36 + payload);
  tag("WAVE");
  tag("fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  tag("data");
  put_u32(out, payload);
  for (double v : w.samples) {
    const double scaled = std::isfinite(v) ? std::round(v * 32768.0) : 0.0;
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  atomic_write_file(path, out);
}

}  // namespace agn
