// Copyright 2026 The PCS Authors
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

#ifndef PCS_RNG_HPP_
#define PCS_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace pcs {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Every random stream in the toolkit is keyed by (root seed, subsystem
// name, index) so that adding a consumer never shifts another's stream.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view name,
                                    std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(root ^ fnv1a64(name)) + index);
}

inline Rng make_rng(std::uint64_t root, std::string_view name,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(root, name, index));
}

// Uniform draw on the open interval (0, 1).
inline double uniform_open01(Rng& rng) {
  // 53 random bits, shifted off zero by half an ulp.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace pcs

#endif  // PCS_RNG_HPP_
