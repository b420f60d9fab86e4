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
#include "deletion_lab/ridge_theory.h"

#include <gtest/gtest.h>

#include <cmath>

#include "deletion_lab/error.h"
#include "oracles.h"

namespace deletion_lab {
namespace {

RidgeInstance Build(int d, int n, double r, const Vec& w_star, double sigma2,
                    double lambda, uint64_t seed) {
  Rng rng(seed);
  Mat x = oracle::SpherePoints(d, n, r, rng);
  Vec y = x.transpose() * w_star;
  for (int i = 0; i < n; ++i) y(i) += std::sqrt(sigma2) * rng.Normal();
  return MakeRidgeInstance(x, y, w_star, sigma2, lambda);
}

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::kInvalidArgument;
}

TEST(RidgeInstanceTest, SphereConstraint) {
  Mat x = Mat::Identity(2, 2);
  x(0, 1) = 0.1;
  EXPECT_EQ(CodeOf([&] { MakeRidgeInstance(x, Vec::Zero(2), Vec::Zero(2), 1.0, 1.0); }),
            ErrorCode::kInvalidArgument);
  RidgeInstance ok = Build(4, 30, 1.7, Vec::Ones(4), 1.0, 2.0, 1);
  EXPECT_NEAR(ok.m.trace(), 30 * 1.7 * 1.7, 1e-8);
  EXPECT_NEAR(ok.mu.sum(), ok.m.trace(), 1e-8);
  for (int i = 0; i < ok.n(); ++i) EXPECT_NEAR(ok.x.col(i).norm(), 1.7, 1e-12);
  EXPECT_LE((ok.u * ok.w_tilde - ok.w_star).norm(), 1e-12);
}

TEST(ClosedFormDTest, SignCases) {
  Vec w(3);
  w << 0.5, -1.0, 0.2;
  RidgeInstance noiseless = Build(3, 12, 1.0, w, 0.0, 0.8, 2);
  EXPECT_LT(ClosedFormD(noiseless), 0.0);
  RidgeInstance pure_noise = Build(3, 12, 1.0, Vec::Zero(3), 0.5, 0.8, 3);
  EXPECT_GT(ClosedFormD(pure_noise), 0.0);
}

TEST(ClosedFormDTest, MatchesNoiseAveragedGenericD) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    RidgeInstance inst = oracle::RandomRidgeInstance(rng);
    const double closed = ClosedFormD(inst);
    const double generic = oracle::NoiseAveragedGenericD(inst);
    EXPECT_LE(std::abs(closed - generic), 1e-8 * std::abs(generic) + 1e-300);
  }
}

TEST(ClosedFormCTest, NoiselessFormula) {
  Vec w(2);
  w << 0.3, 0.4;
  RidgeInstance inst = Build(2, 5, 1.5, w, 0.0, 2.0, 5);
  const double expect = 6.0 * std::pow(1.5, 4) * 0.25 / 4.0;
  EXPECT_NEAR(ClosedFormC(inst), expect, 1e-14);
  RidgeInstance doubled = MakeRidgeInstance(inst.x, inst.y, inst.w_star, 0.0, 4.0);
  EXPECT_NEAR(ClosedFormC(doubled), expect / 4.0, 1e-14);
}

TEST(ClosedFormCTest, FullFormula) {
  Vec w(2);
  w << 1.0, 0.0;
  RidgeInstance inst = Build(2, 5, 2.0, w, 0.5, 3.0, 6);
  const double r2 = 4.0, l = 3.0, s = 0.5;
  const double expect =
      2.0 * (3.0 * r2 * r2 * 1.0 / (l * l) +
             s * (r2 / (l * l) + 4.75 * r2 * r2 / std::pow(l, 3) + 0.75 * std::pow(r2, 3) / std::pow(l, 4)));
  EXPECT_NEAR(ClosedFormC(inst), expect, 1e-12 * expect);
}

TEST(ClosedFormCTest, BoundsNoiseAveragedPathCurvature) {
  Rng rng(7);
  for (int trial = 0; trial < 15; ++trial) {
    RidgeInstance inst = oracle::RandomRidgeInstance(rng);
    const double c = ClosedFormC(inst);
    for (int i = 0; i < inst.n(); i += 5) {
      const double worst = oracle::MaxSecondDifference(
          [&](double t) { return oracle::NoiseAveragedPathLoss(inst, i, t); }, 0.05);
      EXPECT_LE(worst, c);
    }
  }
}

TEST(SnrTest, Examples) {
  Vec w = Vec::Zero(3);
  w(1) = 1.0;
  EXPECT_NEAR(Snr(Build(3, 4, 1.0, w, 1.0, 1.0, 8)), 1.0, 1e-15);
  EXPECT_NEAR(Snr(Build(3, 4, 1.0, w, 4.0, 1.0, 8)), 0.25, 1e-15);
  EXPECT_EQ(CodeOf([&] { Snr(Build(3, 4, 1.0, w, 0.0, 1.0, 8)); }), ErrorCode::kZeroNoise);
}

TEST(CorollaryTest, ParamsMarginAndThreshold) {
  CorollaryParams p;
  EXPECT_NEAR(ParamsMargin(p), 0.44, 0.005);
  EXPECT_NEAR(ParamsMargin(p), 2.0 * 0.95 / std::pow(1.05, 3) - 1.2, 1e-15);
  Rng rng(9);
  RidgeInstance inst = GenerateInstance(5, 50, 1.0, 5e-5, 0.5, p, rng);
  EXPECT_NEAR(CorollaryCheck(inst, p).snr_threshold, ParamsMargin(p) / 3.0, 1e-15);
  EXPECT_NEAR(ParamsMargin(p) / 3.0, 0.1467, 5e-4);
  CorollaryParams bad{0.5, 0.5, 0.5};
  EXPECT_LE(ParamsMargin(bad), 0.0);
  EXPECT_THROW(ValidateParams(bad), Error);
}

TEST(CorollaryTest, HighSnrWindowIsEmpty) {
  Rng rng(10);
  EXPECT_EQ(CodeOf([&] { GenerateInstance(5, 50, 1.0, 0.1, 0.5, CorollaryParams{}, rng); }),
            ErrorCode::kEmptyWindow);
  LambdaWindow w = CorollaryWindow(10.0, 1.0, 0.1, CorollaryParams{});
  EXPECT_TRUE(w.empty());
  EXPECT_GE(w.lower, 10.0 / 0.05);
  EXPECT_NEAR(w.upper, 0.05 / 0.1, 1e-15);
}

TEST(CorollaryTest, GeneratedInstancePassesAndLossDrops) {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    RidgeInstance inst = GenerateInstance(5, 50, 1.0, 5e-5, 0.5, CorollaryParams{}, rng);
    EXPECT_NEAR(Snr(inst), 5e-5, 1e-12 * 5e-5 + 1e-17);
    EXPECT_EQ(inst.sigma2, 1.0);
    for (int i = 0; i < inst.n(); ++i) EXPECT_NEAR(inst.x.col(i).norm(), 1.0, 1e-12);
    EXPECT_NEAR(inst.m.trace(), 50.0, 1e-8);
    CorollaryVerdict v = CorollaryCheck(inst, CorollaryParams{});
    EXPECT_TRUE(v.pass);
    EXPECT_TRUE(v.lambda_in_window && v.snr_below_threshold && !v.empty_window);
    RidgeReport rep = RidgeTheoremCheck(inst, CorollaryParams{});
    EXPECT_TRUE(rep.verdict);
    EXPECT_LT(rep.expected.delta, 0.0);
    EXPECT_FALSE(rep.counterexample);
  }
}

TEST(CorollaryTest, PlacementSpansWindow) {
  for (double placement : {0.0, 0.25, 1.0}) {
    Rng rng(12);
    RidgeInstance inst = GenerateInstance(3, 40, 2.0, 1e-4, placement, CorollaryParams{}, rng);
    CorollaryVerdict v = CorollaryCheck(inst, CorollaryParams{});
    EXPECT_GE(inst.lambda, v.window.lower * (1 - 1e-12));
    EXPECT_LE(inst.lambda, v.window.upper * (1 + 1e-12));
  }
}

TEST(CorollaryTest, AggregateBoundBinds) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    RidgeInstance inst = oracle::RandomRidgeInstance(rng);
    CorollaryVerdict v = CorollaryCheck(inst, CorollaryParams{});
    EXPECT_LE(v.aggregate_upper, v.per_coordinate_upper * (1 + 1e-12));
    EXPECT_FALSE(v.binding.empty());
    if (v.pass) {
      EXPECT_TRUE(v.lambda_in_window);
      EXPECT_TRUE(v.snr_below_threshold);
    }
  }
}

TEST(BoundChainTest, ChainHoldsOnPassingInstances) {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    RidgeInstance inst = GenerateInstance(1 + trial % 6, 20 + trial, 1.0 + 0.1 * trial, 3e-5,
                                          rng.Uniform(), CorollaryParams{}, rng);
    ASSERT_TRUE(CorollaryCheck(inst, CorollaryParams{}).pass);
    BoundChain c = CheckBoundChain(inst, CorollaryParams{});
    EXPECT_TRUE(c.d_above_d_prime);
    EXPECT_TRUE(c.c_below_c_prime);
    EXPECT_TRUE(c.prime_condition);
    EXPECT_NEAR(c.d_value, ClosedFormD(inst), 1e-15 * std::abs(c.d_value));
  }
}

TEST(LooTest, NoiseAveragedLooMatchesSigmaPoints) {
  Rng rng(15);
  RidgeInstance inst = oracle::RandomRidgeInstance(rng);
  LooSummary s = NoiseAveragedLoo(inst);
  const double full = oracle::GaussianMean(inst.n(), inst.sigma2, [&](const Vec& n) {
    ErmInstance e = oracle::WithNoise(inst, n);
    return TestLoss(e, Fit(e));
  });
  EXPECT_NEAR(s.full, full, 1e-9 * (1 + full));
  EXPECT_NEAR(s.delta, s.loo_mean - s.full, 1e-15 * (1 + s.full));
  const double direct = NoiseAveragedTestLoss(inst, Vec::Ones(inst.n()));
  EXPECT_NEAR(direct, s.full, 1e-9 * (1 + full));
}

TEST(LooTest, RealizedLooMatchesRetraining) {
  Rng rng(16);
  RidgeInstance inst = oracle::RandomRidgeInstance(rng);
  LooSummary s = RealizedLoo(inst);
  ErmInstance e = ToErm(inst);
  double sum = 0.0;
  for (int i = 0; i < e.n(); ++i) sum += TestLoss(e, FitDeleted(e, i));
  EXPECT_NEAR(s.loo_mean, sum / e.n(), 1e-9 * (1 + s.loo_mean));
}

}  // namespace
}  // namespace deletion_lab
