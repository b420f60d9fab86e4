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
#ifndef DELETION_LAB_ERM_H_
#define DELETION_LAB_ERM_H_

#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "deletion_lab/numerics.h"
#include "json.hpp"

namespace deletion_lab {

// Ridge: l(w; x, y) = (w^T x - y)^2. Logistic: l = log(1 + exp(-y w^T x)),
// y in {-1, +1}. Both with regulariser R(w) = ||w||^2.
enum class LossFamily { kRidge, kLogistic };

std::string_view FamilyName(LossFamily f);
LossFamily ParseFamily(std::string_view name);

// E[x x^T] = scale * I, y = w_star^T x + noise: L(w) = scale ||w - w_star||^2
// + noise_var. Ridge only.
struct IsotropicLinearTest {
  Vec w_star;
  double scale = 1.0;
  double noise_var = 0.0;
};

// L(w) = mean of l(w; z) over the test points (columns of x).
struct FiniteTestSet {
  Mat x;
  Vec y;
};

using TestDistribution = std::variant<IsotropicLinearTest, FiniteTestSet>;

struct ErmInstance {
  LossFamily family = LossFamily::kRidge;
  Mat x;  // d x N, one sample per column
  Vec y;
  double lambda = 1.0;
  TestDistribution test;

  int d() const { return static_cast<int>(x.rows()); }
  int n() const { return static_cast<int>(x.cols()); }
};

void ValidateInstance(const ErmInstance& inst);

double SampleLoss(LossFamily f, const Vec& w, const Vec& x, double y);
Vec SampleLossGrad(LossFamily f, const Vec& w, const Vec& x, double y);
Mat SampleLossHessian(LossFamily f, const Vec& w, const Vec& x, double y);

// sum_i weights_i l(w; z_i) + lambda ||w||^2.
double Objective(const ErmInstance& inst, const Vec& weights, const Vec& w);

// Minimiser of the weighted objective. Weights may leave [0, 1] slightly
// (finite differences) as long as the objective stays strongly convex.
Vec FitWeighted(const ErmInstance& inst, const Vec& weights);
Vec Fit(const ErmInstance& inst);
// i is 0-based.
Vec FitDeleted(const ErmInstance& inst, int i);
// Minimiser of F_S - t l(.; z_i), t in [0, 1].
Vec DeletionPath(const ErmInstance& inst, int i, double t);

// All leave-one-out solutions (d x N). Ridge uses Sherman-Morrison
// downdates of (XX^T + lambda I)^-1; logistic retrains from w_hat.
Mat LeaveOneOutSolutions(const ErmInstance& inst);

double TestLoss(const ErmInstance& inst, const Vec& w);
Vec TestLossGrad(const ErmInstance& inst, const Vec& w);
Mat TestLossHessian(const ErmInstance& inst, const Vec& w);

// H_0 = Hessian of F_S at w.
Mat ObjectiveHessian(const ErmInstance& inst, const Vec& w);

struct FirstDerivative {
  double d = 0.0;
  // E_i[f_i'(0)] = -lambda D / N.
  double expected = 0.0;
};

FirstDerivative ExpectedFirstDerivative(const ErmInstance& inst, const Vec& w_hat);
// w_i'(0) = H_0^-1 grad l(w_hat; z_i).
Vec PathDerivativeAtZero(const ErmInstance& inst, const Vec& w_hat, int i);

struct SmoothnessCertificate {
  double g = 0.0;
  double h = 0.0;
  double beta = 0.0;
  double g_r = 0.0;
  double h_r = 2.0;
  double beta_r = 0.0;
  double alpha = 0.0;
  // Every path iterate w_i(t) lies in ||w|| <= radius.
  double radius = 0.0;
  std::string domain;
};

SmoothnessCertificate Certify(const ErmInstance& inst);
double CurvatureBound(const SmoothnessCertificate& cert, int n, double lambda);

struct DeletionReport {
  LossFamily family = LossFamily::kRidge;
  int d = 0;
  int n = 0;
  double lambda = 0.0;
  double test_loss = 0.0;
  double expected_loo_loss = 0.0;
  double delta = 0.0;  // expected_loo_loss - test_loss
  double d_value = 0.0;
  double c_value = 0.0;
  double condition = 0.0;  // lambda D - C N / 2
  bool verdict = false;
  bool loss_decreased = false;
  // verdict true but the exact expected test loss did not drop.
  bool counterexample = false;
};

DeletionReport TheoremCheck(const ErmInstance& inst,
                            const SmoothnessCertificate& cert);

nlohmann::json ToJson(const DeletionReport& r);
nlohmann::json ToJson(const ErmInstance& inst);
ErmInstance ErmInstanceFromJson(const nlohmann::json& j);

// One instance JSON per input line (blank lines skipped); one report JSON per
// output line. Returns the number of instances evaluated.
int EvaluateInstanceLines(std::istream& in, std::ostream& out);

}  // namespace deletion_lab

#endif  // DELETION_LAB_ERM_H_
