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

#ifndef AGN_IO_UTIL_H_
#define AGN_IO_UTIL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace agn {

std::vector<std::uint8_t> read_file_bytes(const std::string& path);

// Writes `<path>.tmp` then renames it over `path`.
void atomic_write_file(const std::string& path,
                       std::span<const std::uint8_t> bytes);

// Little-endian append helpers.
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);

// Bounds-checked little-endian reader; throws FormatError past the end.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  std::span<const std::uint8_t> bytes(std::size_t n);
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  void skip(std::size_t n) { bytes(n); }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> data);

}  // namespace agn

#endif  // AGN_IO_UTIL_H_
