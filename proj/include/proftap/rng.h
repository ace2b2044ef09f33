// Copyright 2026 The ProFTAP Authors.
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

#ifndef PROFTAP_RNG_H_
#define PROFTAP_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace proftap {

// 64-bit FNV-1a. Used for title hashes, id hashing and stage checksums.
std::uint64_t Fnv1a64(std::string_view bytes);

// SplitMix64 finalizer; mixes a seed with a stream index into an
// independent seed.
std::uint64_t MixSeed(std::uint64_t base, std::uint64_t stream);

// Seeded generator whose derived distributions are implemented here rather
// than taken from <random>, so outputs are identical across standard
// library implementations. The engine itself (mt19937_64) is fully
// specified by the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t UniformIndex(std::uint64_t n);

  // Uniform double in [0, 1) with 53 random bits.
  double Uniform01();

  double Normal(double mean, double stddev);

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = UniformIndex(i);
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace proftap

#endif  // PROFTAP_RNG_H_
