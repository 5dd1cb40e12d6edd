// Copyright 2026 The noisybag Authors.
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

#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace noisybag {

/// splitmix64 step. Used to expand seeds and to derive independent streams.
std::uint64_t splitmix64(std::uint64_t& state);

/// Hash a list of 64-bit words into one seed (splitmix64 chaining).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words);

/// xoshiro256** 1.0 (Blackman & Vigna), state expanded from a 64-bit seed with
/// splitmix64. Every draw below is specified exactly so that streams are
/// reproducible across implementations and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform();

  /// Uniform integer in [0, bound) by Lemire's multiply-and-reject method.
  /// bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform integer in [lo, hi].
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi);

  /// Standard normal via the basic Box-Muller transform; the second variate of
  /// each pair is cached.
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Seeded Fisher-Yates shuffle (from the back, j = below(i + 1)).
template <typename Container>
void shuffle(Container& items, Rng& rng) {
  for (auto i = items.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace noisybag
