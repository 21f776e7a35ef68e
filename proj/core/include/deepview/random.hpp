/*
 * Copyright (c) 2026, The DeepView-NLP Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
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
#include <random>
#include <vector>

namespace deepview {

/**
 * Portable seeded random source.
 *
 * The engine is std::mt19937_64 seeded with the 64-bit seed directly; its
 * output sequence is fixed by the C++ standard. The standard distributions
 * are not portable, so bounded integers and doubles are derived here:
 *   - below(n): rejection sampling on raw 64-bit outputs, rejecting values
 *     >= 2^64 - (2^64 mod n), then taking the remainder.
 *   - uniform(): top 53 bits of one output scaled by 2^-53, in [0, 1).
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound);

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

/// `count` distinct indices from [0, n), drawn by partial Fisher-Yates and
/// returned in ascending order.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count,
                                        std::uint64_t seed);

}  // namespace deepview
