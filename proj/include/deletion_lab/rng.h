// Copyright 2026 The Deletion Lab Authors. All Rights Reserved.
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
#ifndef DELETION_LAB_RNG_H_
#define DELETION_LAB_RNG_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace deletion_lab {

// Counter-based, splittable generator. Output i of a stream is a SplitMix64
// finalisation of (key + i * golden gamma), so a stream is fully described by
// (key, counter) and child streams are derived by hashing, not by consuming
// draws. Identical seeds give identical streams on every platform.
//
// Single-owner: not safe to share between threads; hand each worker a Split().
class Rng {
 public:
  using result_type = uint64_t;

  explicit Rng(uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return NextU64(); }

  uint64_t NextU64();
  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi);
  // Unbiased integer in [0, n). n must be positive.
  uint64_t UniformInt(uint64_t n);
  // Standard normal via Box-Muller (one output per two uniforms).
  double Normal();

  // Independent child stream; does not advance this stream.
  Rng Split(uint64_t stream) const;

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }
  static Rng FromState(uint64_t key, uint64_t counter);

 private:
  Rng(uint64_t key, uint64_t counter, bool /*raw*/) : key_(key), counter_(counter) {}

  uint64_t key_;
  uint64_t counter_ = 0;
};

// SplitMix64 output function.
uint64_t Mix64(uint64_t x);

// Uniformly random keep-subset of {0, ..., n-1}, returned sorted ascending.
// Partial Fisher-Yates; each index is retained with probability keep / n.
std::vector<size_t> UniformSubset(Rng& rng, size_t n, size_t keep);

}  // namespace deletion_lab

#endif  // DELETION_LAB_RNG_H_
