// Copyright 2026 The leukmil Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace leukmil {

// Fixed sub-seed offsets: one top-level seed fans out to every module.
namespace seed_offset {
inline constexpr std::uint64_t kSynth = 1000;
inline constexpr std::uint64_t kDetector = 2000;
inline constexpr std::uint64_t kExtractor = 3000;
inline constexpr std::uint64_t kBaggen = 4000;
inline constexpr std::uint64_t kStage1 = 5000;
inline constexpr std::uint64_t kStage2 = 6000;
inline constexpr std::uint64_t kEval = 7000;
inline constexpr std::uint64_t kAblation = 8000;
}  // namespace seed_offset

// Deterministic random stream. The engine is mt19937_64, whose output is
// fixed by the standard; every distribution is implemented here rather than
// taken from <random>, whose algorithms differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Independent stream keyed by (seed, offset), via splitmix64 mixing.
  Rng derive(std::uint64_t offset) const;

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace leukmil
