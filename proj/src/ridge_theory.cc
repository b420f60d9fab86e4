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

#include <algorithm>
#include <cmath>
#include <limits>

#include "deletion_lab/error.h"
#include "deletion_lab/tolerances.h"

namespace deletion_lab {

using nlohmann::json;

RidgeInstance MakeRidgeInstance(Mat x, Vec y, Vec w_star, double sigma2,
                                double lambda) {
  RidgeInstance inst;
  if (x.cols() < 1 || x.rows() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "ridge instance needs d, N >= 1");
  }
  if (y.size() != x.cols() || w_star.size() != x.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "ridge instance shapes");
  }
  if (!(lambda > 0.0) || sigma2 < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "ridge needs lambda > 0, sigma2 >= 0");
  }
  const double r = x.col(0).norm();
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    if (std::abs(x.col(i).norm() - r) > tol::kSphereRadius) {
      throw Error(ErrorCode::kInvalidArgument,
                  "training features are not on a common sphere (sample " +
                      std::to_string(i) + ")");
    }
  }
  inst.x = std::move(x);
  inst.y = std::move(y);
  inst.w_star = std::move(w_star);
  inst.sigma2 = sigma2;
  inst.lambda = lambda;
  inst.r = r;
  inst.m = inst.x * inst.x.transpose();
  const double n_r2 = inst.n() * r * r;
  if (std::abs(inst.m.trace() - n_r2) > tol::kSphereTrace * std::max(1.0, n_r2)) {
    throw Error(ErrorCode::kInvalidArgument, "Tr(M) != N R^2");
  }
  SymmetricEigen eig = SymEig(inst.m);
  inst.mu = eig.values.cwiseMax(0.0);
  inst.u = eig.vectors;
  inst.w_tilde = inst.u.transpose() * inst.w_star;
  return inst;
}

double ClosedFormD(const RidgeInstance& inst) {
  double d = 0.0;
  for (int j = 0; j < inst.d(); ++j) {
    const double mu = inst.mu(j);
    const double den = mu + inst.lambda;
    d += mu / (den * den * den) *
         (inst.sigma2 - inst.lambda * inst.w_tilde(j) * inst.w_tilde(j));
  }
  return 2.0 * d;
}

double ClosedFormC(const RidgeInstance& inst) {
  const double r2 = inst.r * inst.r;
  const double r4 = r2 * r2;
  const double r6 = r4 * r2;
  const double l = inst.lambda;
  return 2.0 * (3.0 * r4 * inst.w_star.squaredNorm() / (l * l) +
                inst.sigma2 * (r2 / (l * l) + 19.0 * r4 / (4.0 * l * l * l) +
                               3.0 * r6 / (4.0 * l * l * l * l)));
}

double Snr(const RidgeInstance& inst) {
  if (!(inst.sigma2 > 0.0)) throw Error(ErrorCode::kZeroNoise, "SNR undefined for sigma2 = 0");
  return inst.r * inst.r * inst.w_star.squaredNorm() / inst.sigma2;
}

double ParamsMargin(const CorollaryParams& p) {
  return 2.0 * (1.0 - p.k3) / std::pow(1.0 + p.k1, 3) - (1.0 + 2.0 * p.k2);
}

void ValidateParams(const CorollaryParams& p) {
  if (!(p.k1 > 0.0 && p.k2 > 0.0 && p.k3 > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "k1, k2, k3 must be positive");
  }
  if (!(ParamsMargin(p) > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "k1, k2, k3 must satisfy 2(1-k3)/(1+k1)^3 - (1+2k2) > 0");
  }
}

LambdaWindow CorollaryWindow(double mu_max, double r, double snr,
                             const CorollaryParams& p) {
  const double r2 = r * r;
  LambdaWindow w;
  w.lower = r2 * std::max({mu_max / (p.k1 * r2), 19.0 / (4.0 * p.k2),
                           std::sqrt(3.0 / (4.0 * p.k2))});
  w.upper = snr > 0.0 ? r2 * p.k3 / snr : std::numeric_limits<double>::infinity();
  return w;
}

CorollaryVerdict CorollaryCheck(const RidgeInstance& inst, const CorollaryParams& p) {
  ValidateParams(p);
  CorollaryVerdict v;
  v.snr = Snr(inst);
  v.snr_threshold = ParamsMargin(p) / 3.0;
  v.window = CorollaryWindow(inst.mu(0), inst.r, v.snr, p);
  v.aggregate_upper = v.window.upper;
  v.per_coordinate_upper = std::numeric_limits<double>::infinity();
  for (int j = 0; j < inst.d(); ++j) {
    const double wt2 = inst.w_tilde(j) * inst.w_tilde(j);
    if (wt2 > 0.0) {
      v.per_coordinate_upper = std::min(v.per_coordinate_upper, p.k3 * inst.sigma2 / wt2);
    }
  }
  v.binding = v.aggregate_upper <= v.per_coordinate_upper ? "aggregate" : "per-coordinate";
  const double r2 = inst.r * inst.r;
  const double t1 = inst.mu(0) / (p.k1 * r2);
  const double t2 = 19.0 / (4.0 * p.k2);
  const double t3 = std::sqrt(3.0 / (4.0 * p.k2));
  v.lower_binding = t1 >= t2 && t1 >= t3 ? "mu_max/(k1 R^2)" : (t2 >= t3 ? "19/(4 k2)" : "sqrt(3/(4 k2))");
  v.empty_window = v.window.empty();
  v.lambda_in_window = v.window.lower < inst.lambda && inst.lambda < v.aggregate_upper &&
                       inst.lambda < v.per_coordinate_upper;
  v.snr_below_threshold = v.snr < v.snr_threshold;
  v.pass = v.lambda_in_window && v.snr_below_threshold;
  return v;
}

RidgeInstance GenerateInstance(int d, int n, double r, double target_snr,
                               double placement, const CorollaryParams& p, Rng& rng) {
  ValidateParams(p);
  if (d < 1 || n < 1 || !(r > 0.0) || !(target_snr > 0.0) ||
      !(placement >= 0.0 && placement <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "GenerateInstance: bad arguments");
  }
  Mat x(d, n);
  for (int i = 0; i < n; ++i) {
    Vec g(d);
    for (int k = 0; k < d; ++k) g(k) = rng.Normal();
    x.col(i) = r * g / g.norm();
  }
  Vec dir(d);
  for (int k = 0; k < d; ++k) dir(k) = rng.Normal();
  const double sigma2 = 1.0;
  Vec w_star = dir / dir.norm() * (std::sqrt(target_snr * sigma2) / r);
  Vec y = x.transpose() * w_star;
  for (int i = 0; i < n; ++i) y(i) += std::sqrt(sigma2) * rng.Normal();

  const double mu_max = SymEig(x * x.transpose()).values(0);
  LambdaWindow w = CorollaryWindow(mu_max, r, target_snr, p);
  if (w.empty()) {
    throw Error(ErrorCode::kEmptyWindow,
                "lambda window empty: lower " + std::to_string(w.lower) + " >= upper " +
                    std::to_string(w.upper));
  }
  const double lambda =
      std::exp(std::log(w.lower) + placement * (std::log(w.upper) - std::log(w.lower)));
  return MakeRidgeInstance(std::move(x), std::move(y), std::move(w_star), sigma2, lambda);
}

BoundChain CheckBoundChain(const RidgeInstance& inst, const CorollaryParams& p) {
  BoundChain c;
  const double l = inst.lambda;
  const double r2 = inst.r * inst.r;
  c.d_value = ClosedFormD(inst);
  c.c_value = ClosedFormC(inst);
  c.d_prime = 2.0 * inst.sigma2 * inst.m.trace() * (1.0 - p.k3) /
              (std::pow(1.0 + p.k1, 3) * l * l * l);
  c.c_prime = 2.0 * r2 / (l * l) *
              (3.0 * r2 * inst.w_star.squaredNorm() + inst.sigma2 * (1.0 + 2.0 * p.k2));
  c.d_above_d_prime = c.d_value > c.d_prime;
  c.c_below_c_prime = c.c_value < c.c_prime;
  c.prime_condition = l * c.d_prime > c.c_prime * inst.n() / 2.0;
  return c;
}

double NoiseAveragedTestLoss(const RidgeInstance& inst, const Vec& weights) {
  Mat a = inst.x * weights.asDiagonal() * inst.x.transpose();
  a.diagonal().array() += inst.lambda;
  const Mat b = SolveSpd(a, Mat(inst.x * weights.asDiagonal()));
  const Vec bias = b * (inst.x.transpose() * inst.w_star) - inst.w_star;
  return bias.squaredNorm() + inst.sigma2 * b.squaredNorm();
}

LooSummary NoiseAveragedLoo(const RidgeInstance& inst) {
  LooSummary s;
  Vec w = Vec::Ones(inst.n());
  s.full = NoiseAveragedTestLoss(inst, w);
  double total = 0.0;
  for (int i = 0; i < inst.n(); ++i) {
    w(i) = 0.0;
    total += NoiseAveragedTestLoss(inst, w);
    w(i) = 1.0;
  }
  s.loo_mean = total / inst.n();
  s.delta = s.loo_mean - s.full;
  return s;
}

LooSummary RealizedLoo(const RidgeInstance& inst) {
  const ErmInstance erm = ToErm(inst);
  LooSummary s;
  s.full = TestLoss(erm, Fit(erm));
  const Mat loo = LeaveOneOutSolutions(erm);
  double total = 0.0;
  for (int i = 0; i < inst.n(); ++i) total += TestLoss(erm, loo.col(i));
  s.loo_mean = total / inst.n();
  s.delta = s.loo_mean - s.full;
  return s;
}

ErmInstance ToErm(const RidgeInstance& inst) {
  ErmInstance e;
  e.family = LossFamily::kRidge;
  e.x = inst.x;
  e.y = inst.y;
  e.lambda = inst.lambda;
  e.test = IsotropicLinearTest{inst.w_star, 1.0, 0.0};
  return e;
}

RidgeReport RidgeTheoremCheck(const RidgeInstance& inst, const CorollaryParams& p) {
  RidgeReport r;
  r.d = inst.d();
  r.n = inst.n();
  r.r = inst.r;
  r.snr = Snr(inst);
  r.lambda = inst.lambda;
  r.d_value = ClosedFormD(inst);
  r.c_value = ClosedFormC(inst);
  r.condition = inst.lambda * r.d_value - r.c_value * inst.n() / 2.0;
  r.verdict = r.condition > 0.0;
  r.corollary = CorollaryCheck(inst, p);
  r.expected = NoiseAveragedLoo(inst);
  r.realized = RealizedLoo(inst);
  r.counterexample = r.verdict && !(r.expected.delta < 0.0);
  return r;
}

json ToJson(const CorollaryVerdict& v) {
  return {{"snr", v.snr},
          {"snr_threshold", v.snr_threshold},
          {"lambda_lower", v.window.lower},
          {"lambda_upper", v.window.upper},
          {"aggregate_upper", v.aggregate_upper},
          {"per_coordinate_upper", v.per_coordinate_upper},
          {"binding_upper", v.binding},
          {"binding_lower", v.lower_binding},
          {"empty_window", v.empty_window},
          {"lambda_in_window", v.lambda_in_window},
          {"snr_below_threshold", v.snr_below_threshold},
          {"pass", v.pass}};
}

json ToJson(const RidgeReport& r) {
  return {{"d", r.d},
          {"n", r.n},
          {"R", r.r},
          {"snr", r.snr},
          {"lambda", r.lambda},
          {"D", r.d_value},
          {"C", r.c_value},
          {"condition", r.condition},
          {"verdict", r.verdict ? "theorem-guaranteed" : "not-guaranteed"},
          {"corollary", ToJson(r.corollary)},
          {"expected_delta", r.expected.delta},
          {"expected_full_loss", r.expected.full},
          {"realized_delta", r.realized.delta},
          {"realized_full_loss", r.realized.full},
          {"counterexample", r.counterexample}};
}

}  // namespace deletion_lab
