/*
 * Copyright 2026 The slidetune Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace slidetune {

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds a path of stream identifiers (e.g. {epoch}, {class, attempt}) into a
// single 64-bit stream key.
constexpr std::uint64_t StreamKey(std::initializer_list<std::uint64_t> path) {
  std::uint64_t key = 0x5ca1ab1e0ddba11ULL;
  for (std::uint64_t p : path) key = Mix64(key ^ Mix64(p));
  return key;
}

// Counter-based generator: the i-th draw is a pure function of
// (seed, stream, i). Results are identical on every platform and independent
// of how many other streams were consumed, which is what makes parallel and
// serial runs agree. Distributions are implemented here rather than taken
// from <random>, whose distribution algorithms are implementation-defined.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(Mix64(Mix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 1))) {}

  std::uint64_t NextU64() { return Mix64(key_ ^ Mix64(counter_++)); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t UniformIndex(std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do {
      x = NextU64();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller (cosine branch only, so each draw consumes
  // exactly two counters).
  double Normal() {
    double u1 = Uniform();
    const double u2 = Uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fisher-Yates shuffle driven by a CounterRng.
template <typename T>
void Shuffle(std::vector<T>& items, CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.UniformIndex(i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace slidetune
