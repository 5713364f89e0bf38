// Copyright 2026 The protoclass Authors
// SPDX-License-Identifier: Apache-2.0
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

#include <cmath>
#include <cstdint>
#include <numbers>

namespace protoclass {

/// SplitMix64 finalizer. Used to derive independent PCG streams from
/// (seed, index) pairs.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// PCG32 (XSH-RR, 64-bit state). All distributions below are implemented
/// on top of the raw 32-bit output so every platform draws identical
/// sequences; the std:: distributions are implementation-defined.
class Pcg32 {
 public:
  using result_type = std::uint32_t;

  constexpr Pcg32(std::uint64_t init_state, std::uint64_t stream) noexcept
      : inc_((stream << 1U) | 1U) {
    next_u32();
    state_ += init_state;
    next_u32();
  }

  /// Stream addressed by (seed, index): episode i of a run never depends on
  /// episodes before it.
  static constexpr Pcg32 for_index(std::uint64_t seed, std::uint64_t index) noexcept {
    const std::uint64_t mixed = splitmix64(seed ^ splitmix64(index));
    return Pcg32(mixed, splitmix64(mixed ^ 0xDA3E39CB94B95BDBULL));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return 0xFFFFFFFFU; }
  constexpr result_type operator()() noexcept { return next_u32(); }

  constexpr std::uint32_t next_u32() noexcept {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18U) ^ old) >> 27U);
    const auto rot = static_cast<std::uint32_t>(old >> 59U);
    return (xorshifted >> rot) | (xorshifted << ((32U - rot) & 31U));
  }

  constexpr std::uint64_t next_u64() noexcept {
    const std::uint64_t hi = next_u32();
    return (hi << 32U) | next_u32();
  }

  /// Unbiased integer in [0, bound). bound must be positive.
  constexpr std::uint64_t uniform_below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  /// Double in (0, 1] with 53 random bits.
  constexpr double uniform_open_closed() noexcept {
    return static_cast<double>((next_u64() >> 11U) + 1U) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller. Both outputs of a transform are used.
  double gaussian() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open_closed();
    const double u2 = uniform_open_closed();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace protoclass
