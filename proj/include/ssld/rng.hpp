/*
 * Copyright 2026 The ssl-distill Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace ssld {

/// Seeded random source with derivable substreams.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Distributions are implemented here rather than taken from
/// <random> because the standard leaves their algorithms unspecified, and
/// draws must be identical across platforms. Substream seeds are derived by
/// folding keys into the parent seed with the SplitMix64 finalizer, so a
/// substream depends only on (seed, keys) and never on how many values the
/// parent has already produced.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  Rng substream(std::uint64_t key) const;
  Rng substream(std::initializer_list<std::uint64_t> keys) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  // Standard normal via Box-Muller (one draw per call, no caching).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Fixed substream tags so that stages never share draws.
namespace stream {
inline constexpr std::uint64_t kInit = 0x696e6974;
inline constexpr std::uint64_t kShuffle = 0x73687566;
inline constexpr std::uint64_t kAugment = 0x61756700;
inline constexpr std::uint64_t kSplit = 0x73706c74;
inline constexpr std::uint64_t kGenerate = 0x67656e00;
inline constexpr std::uint64_t kStage = 0x73746167;
}  // namespace stream

}  // namespace ssld
