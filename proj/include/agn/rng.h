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

#ifndef AGN_RNG_H_
#define AGN_RNG_H_

#include <array>
#include <cstdint>

namespace agn {

// xoshiro256** seeded through splitmix64. All derived distributions are
// implemented here so that streams are identical on every platform (the
// std:: distributions are implementation-defined).
class Rng {
 public:
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed = 0);

  // Independent stream keyed by (seed, stream, index). Used to make example
  // k of a task stream reproducible without generating examples 0..k-1.
  static Rng keyed(std::uint64_t seed, std::uint64_t stream,
                   std::uint64_t index);

  std::uint64_t next_u64();
  // Uniform integer in [lo, hi], inclusive, without modulo bias.
  long uniform_int(long lo, long hi);
  // Uniform double in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);

  const State& state() const { return s_; }
  void set_state(const State& s) { s_ = s; }

 private:
  State s_;
};

std::uint64_t splitmix64(std::uint64_t& x);

}  // namespace agn

#endif  // AGN_RNG_H_
