//
// Copyright 2026 The viewfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef VIEWFL_BASE_FNV1A_HPP_
#define VIEWFL_BASE_FNV1A_HPP_

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace viewfl {

inline constexpr std::uint64_t kFnv1aOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnv1aPrime = 0x100000001b3ULL;

// 64-bit FNV-1a over raw bytes. `state` allows incremental hashing.
constexpr std::uint64_t Fnv1a64(std::string_view bytes,
                                std::uint64_t state = kFnv1aOffsetBasis) {
  for (const char c : bytes) {
    state ^= static_cast<std::uint8_t>(c);
    state *= kFnv1aPrime;
  }
  return state;
}

// Hashes the little-endian bytes of `value` into `state`.
constexpr std::uint64_t Fnv1a64Mix(std::uint64_t value,
                                   std::uint64_t state = kFnv1aOffsetBasis) {
  for (int i = 0; i < 8; ++i) {
    state ^= (value >> (8 * i)) & 0xffU;
    state *= kFnv1aPrime;
  }
  return state;
}

// Derived seed stream: FNV-1a over (seed, index), both little-endian u64.
constexpr std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t index) {
  return Fnv1a64Mix(index, Fnv1a64Mix(seed));
}

inline std::string Hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string Hex8(std::uint64_t v) { return Hex16(v).substr(8); }

inline std::uint64_t ParseHex16(std::string_view s) {
  if (s.size() != 16) throw std::invalid_argument("expected 16 hex digits");
  std::uint64_t v = 0;
  for (const char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw std::invalid_argument("bad hex digit");
  }
  return v;
}

}  // namespace viewfl

#endif  // VIEWFL_BASE_FNV1A_HPP_
