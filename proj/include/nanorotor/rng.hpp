// Copyright 2026 The nanorotor Authors
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
#include <cmath>
#include <cstdint>

namespace nanorotor::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al. 2011).
inline Counter philox4x32(Counter ctr, Key key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

/// Counter-mode stream: key = seed, counter = (block, index lo, index hi, stream).
/// Distinct (seed, index, stream) triples never share a counter.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t index, std::uint32_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        index_lo_(static_cast<std::uint32_t>(index)),
        index_hi_(static_cast<std::uint32_t>(index >> 32)),
        stream_(stream) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      buf_ = philox4x32({block_++, index_lo_, index_hi_, stream_}, key_);
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t a = next_u32() >> 5, b = next_u32() >> 6;
    return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) * (1.0 / 9007199254740992.0);
  }

  /// Exponential with unit mean.
  double exponential() { return -std::log1p(-uniform()); }

 private:
  Key key_;
  std::uint32_t index_lo_, index_hi_, stream_;
  std::uint32_t block_ = 0;
  Counter buf_{};
  int pos_ = 4;
};

/// Stream id for a k0 component of a mixture.
inline std::uint32_t component_stream(int k0) { return static_cast<std::uint32_t>(k0) ^ 0x80000000u; }

}  // namespace nanorotor::rng
