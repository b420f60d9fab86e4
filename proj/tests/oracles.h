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
// Independent reference computations shared by the unit and acceptance tests.

#ifndef DELETION_LAB_TESTS_ORACLES_H_
#define DELETION_LAB_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <vector>

#include "deletion_lab/erm.h"
#include "deletion_lab/numerics.h"
#include "deletion_lab/ridge_theory.h"
#include "deletion_lab/rng.h"

namespace deletion_lab::oracle {

inline Mat SpherePoints(int d, int n, double r, Rng& rng) {
  Mat x(d, n);
  for (int i = 0; i < n; ++i) {
    Vec g(d);
    for (int k = 0; k < d; ++k) g(k) = rng.Normal();
    x.col(i) = r * g / g.norm();
  }
  return x;
}

inline double LogUniform(Rng& rng, double lo, double hi) {
  return std::exp(rng.Uniform(std::log(lo), std::log(hi)));
}

// Ridge instance without any Corollary constraint.
inline RidgeInstance RandomRidgeInstance(Rng& rng) {
  const int d = 1 + static_cast<int>(rng.UniformInt(6));
  const int n = d + static_cast<int>(rng.UniformInt(25));
  const double r = rng.Uniform(0.5, 2.0);
  const double sigma2 = rng.Uniform(0.2, 2.0);
  const double lambda = LogUniform(rng, 0.1, 100.0);
  Mat x = SpherePoints(d, n, r, rng);
  Vec w(d);
  for (int k = 0; k < d; ++k) w(k) = rng.Normal() * rng.Uniform(0.1, 1.5);
  Vec y = x.transpose() * w;
  for (int i = 0; i < n; ++i) y(i) += std::sqrt(sigma2) * rng.Normal();
  return MakeRidgeInstance(std::move(x), std::move(y), std::move(w), sigma2, lambda);
}

// L2 logistic regression with a shifted finite test set.
inline ErmInstance RandomLogisticInstance(Rng& rng) {
  const int d = 2 + static_cast<int>(rng.UniformInt(3));
  const int n = 8 + static_cast<int>(rng.UniformInt(18));
  ErmInstance e;
  e.family = LossFamily::kLogistic;
  e.lambda = LogUniform(rng, 0.3, 5.0);
  Vec w(d);
  for (int k = 0; k < d; ++k) w(k) = rng.Normal();
  auto draw = [&](int m, double shift, Mat* x, Vec* y) {
    x->resize(d, m);
    y->resize(m);
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < d; ++k) (*x)(k, i) = rng.Normal() + (k == 0 ? shift : 0.0);
      const double p = 1.0 / (1.0 + std::exp(-w.dot(x->col(i))));
      (*y)(i) = rng.Uniform() < p ? 1.0 : -1.0;
    }
  };
  draw(n, 0.0, &e.x, &e.y);
  FiniteTestSet test;
  draw(40, 0.7, &test.x, &test.y);
  e.test = test;
  return e;
}

// E over n ~ N(0, s2 I_m) of q(n), exact when q is a polynomial of degree
// <= 3 in n (symmetric sigma points along each axis).
template <typename F>
double GaussianMean(int m, double s2, F q) {
  const double s = std::sqrt(s2);
  Vec zero = Vec::Zero(m);
  const double q0 = q(zero);
  double total = q0;
  for (int k = 0; k < m; ++k) {
    Vec e = Vec::Zero(m);
    e(k) = s;
    total += 0.5 * (q(e) + q(Vec(-e))) - q0;
  }
  return total;
}

inline ErmInstance WithNoise(const RidgeInstance& inst, const Vec& noise) {
  ErmInstance e = ToErm(inst);
  e.y = inst.x.transpose() * inst.w_star + noise;
  return e;
}

// Generic D averaged over the label noise.
inline double NoiseAveragedGenericD(const RidgeInstance& inst) {
  return GaussianMean(inst.n(), inst.sigma2, [&](const Vec& noise) {
    const ErmInstance e = WithNoise(inst, noise);
    return ExpectedFirstDerivative(e, Fit(e)).d;
  });
}

// E_noise L(w_i(t)).
inline double NoiseAveragedPathLoss(const RidgeInstance& inst, int i, double t) {
  return GaussianMean(inst.n(), inst.sigma2, [&](const Vec& noise) {
    const ErmInstance e = WithNoise(inst, noise);
    return TestLoss(e, DeletionPath(e, i, t));
  });
}

// Second-order one-sided difference for w_i'(0).
inline Vec PathDerivativeFd(const ErmInstance& inst, int i, double h) {
  return (-3.0 * DeletionPath(inst, i, 0.0) + 4.0 * DeletionPath(inst, i, h) -
          DeletionPath(inst, i, 2.0 * h)) /
         (2.0 * h);
}

// f_i'(0) for f_i(t) = L(w_i(t)), same stencil.
inline double PathLossSlopeFd(const ErmInstance& inst, int i, double h) {
  auto f = [&](double t) { return TestLoss(inst, DeletionPath(inst, i, t)); };
  return (-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h);
}

// max over an interior grid of |f''(t)| by second central differences.
template <typename F>
double MaxSecondDifference(F f, double h) {
  double worst = 0.0;
  const int steps = static_cast<int>(std::lround(1.0 / h));
  std::vector<double> v(steps + 1);
  for (int j = 0; j <= steps; ++j) v[j] = f(j * h);
  for (int j = 1; j < steps; ++j) {
    worst = std::max(worst, std::abs(v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h));
  }
  return worst;
}

}  // namespace deletion_lab::oracle

#endif  // DELETION_LAB_TESTS_ORACLES_H_
