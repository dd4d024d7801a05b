// Copyright 2026 The TreePrompt Authors.
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
#ifndef TREEPROMPT_RANDOM_H_
#define TREEPROMPT_RANDOM_H_

#include <cstdint>
#include <random>
#include <string_view>

#include "treeprompt/tensor.h"

namespace treeprompt {

inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t HashString(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Independent stream for (seed, a, b); used for per-example and
// per-parameter generators.
inline uint64_t StreamSeed(uint64_t seed, uint64_t a, uint64_t b = 0) {
  return SplitMix64(SplitMix64(SplitMix64(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

using Rng = std::mt19937_64;

template <typename T>
Tensor<T> RandomNormal(Shape shape, double stddev, Rng &rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto &v : t.storage()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> RandomUniform(Shape shape, double bound, Rng &rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto &v : t.storage()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace treeprompt

#endif  // TREEPROMPT_RANDOM_H_
