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
#include "deletion_lab/rng.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "deletion_lab/error.h"

namespace deletion_lab {
namespace {

constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
constexpr uint64_t kSplitSalt = 0xD1B54A32D192ED03ULL;

}  // namespace

uint64_t Mix64(uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(uint64_t seed) : key_(Mix64(seed ^ kSplitSalt)), counter_(0) {}

Rng Rng::FromState(uint64_t key, uint64_t counter) {
  return Rng(key, counter, true);
}

uint64_t Rng::NextU64() {
  const uint64_t i = counter_++;
  return Mix64(key_ + (i + 1) * kGamma);
}

double Rng::Uniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

double Rng::Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

uint64_t Rng::UniformInt(uint64_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "UniformInt(0)");
  // Rejection on the top of the range keeps the draw exactly uniform.
  const uint64_t limit = max() - max() % n;
  uint64_t x;
  do {
    x = NextU64();
  } while (x >= limit);
  return x % n;
}

double Rng::Normal() {
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::Split(uint64_t stream) const {
  return Rng(Mix64(key_ ^ Mix64(stream + kSplitSalt)), 0, true);
}

std::vector<size_t> UniformSubset(Rng& rng, size_t n, size_t keep) {
  if (keep > n) {
    throw Error(ErrorCode::kInvalidArgument, "UniformSubset: keep > n");
  }
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t i = 0; i < keep; ++i) {
    const size_t j = i + static_cast<size_t>(rng.UniformInt(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace deletion_lab
