// Copyright 2026 The cassnat Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CASSNAT_COMMON_RANDOM_H_
#define CASSNAT_COMMON_RANDOM_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace cassnat {

// Seeded generator with platform-independent conversions. The std
// distributions are implementation-defined, so uniform/normal draws are
// derived from the raw 64-bit engine output here instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1).
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Standard normal via Box-Muller (no cached second value).
  double Normal();
  // Uniform integer in [0, n).
  std::uint64_t Index(std::uint64_t n);
  bool Bernoulli(double p) { return Uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t SplitMix64(std::uint64_t x);
// Stable FNV-1a; std::hash is not stable across standard libraries.
std::uint64_t HashString(std::string_view s);
// Seed for an independent stream identified by (seed, stream name, index).
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view stream,
                         std::uint64_t index);

}  // namespace cassnat

#endif  // CASSNAT_COMMON_RANDOM_H_
