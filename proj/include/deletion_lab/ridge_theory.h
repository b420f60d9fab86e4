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
#ifndef DELETION_LAB_RIDGE_THEORY_H_
#define DELETION_LAB_RIDGE_THEORY_H_

#include <string>

#include "deletion_lab/erm.h"
#include "deletion_lab/numerics.h"
#include "deletion_lab/rng.h"
#include "json.hpp"

namespace deletion_lab {

// Ridge regression with every training feature on the sphere ||x_i|| = R,
// labels y = w_star^T x + n, n ~ N(0, sigma2), and isotropic test law
// L(w) = ||w - w_star||^2.
struct RidgeInstance {
  Mat x;  // d x N
  Vec y;
  Vec w_star;
  double sigma2 = 1.0;
  double lambda = 1.0;
  double r = 1.0;
  // Derived.
  Mat m;          // X X^T
  Vec mu;         // eigenvalues of M, descending
  Mat u;          // eigenvectors
  Vec w_tilde;    // U^T w_star

  int d() const { return static_cast<int>(x.rows()); }
  int n() const { return static_cast<int>(x.cols()); }
};

// Validates the sphere constraint (|‖x_i‖ - R| <= 1e-10, Tr M = N R^2) and
// fills the derived fields.
RidgeInstance MakeRidgeInstance(Mat x, Vec y, Vec w_star, double sigma2,
                                double lambda);

double ClosedFormD(const RidgeInstance& inst);
double ClosedFormC(const RidgeInstance& inst);
// R^2 ||w_star||^2 / sigma2. Throws ZeroNoise when sigma2 == 0.
double Snr(const RidgeInstance& inst);

struct CorollaryParams {
  double k1 = 0.05;
  double k2 = 0.1;
  double k3 = 0.05;
};

// 2 (1 - k3) / (1 + k1)^3 - (1 + 2 k2); must be positive.
double ParamsMargin(const CorollaryParams& p);
void ValidateParams(const CorollaryParams& p);

struct LambdaWindow {
  double lower = 0.0;  // in lambda units
  double upper = 0.0;
  bool empty() const { return !(lower < upper); }
};

LambdaWindow CorollaryWindow(double mu_max, double r, double snr,
                             const CorollaryParams& p);

struct CorollaryVerdict {
  double snr = 0.0;
  double snr_threshold = 0.0;
  LambdaWindow window;
  // Upper bounds on lambda: aggregate k3 R^2 / SNR and min_j k3 sigma2 / w~_j^2.
  double aggregate_upper = 0.0;
  double per_coordinate_upper = 0.0;
  std::string binding;
  std::string lower_binding;
  bool empty_window = false;
  bool lambda_in_window = false;
  bool snr_below_threshold = false;
  bool pass = false;
};

CorollaryVerdict CorollaryCheck(const RidgeInstance& inst, const CorollaryParams& p);

// Features uniform on the R-sphere, sigma2 = 1, ||w_star|| set from the target
// SNR, lambda placed at log-relative position placement in the window.
// Throws EmptyWindow when the window is empty for the drawn features.
RidgeInstance GenerateInstance(int d, int n, double r, double target_snr,
                               double placement, const CorollaryParams& p, Rng& rng);

struct BoundChain {
  double d_value = 0.0;
  double d_prime = 0.0;
  double c_value = 0.0;
  double c_prime = 0.0;
  bool d_above_d_prime = false;
  bool c_below_c_prime = false;
  bool prime_condition = false;  // lambda D' > C' N / 2
};

BoundChain CheckBoundChain(const RidgeInstance& inst, const CorollaryParams& p);

// E_noise of the test loss of the weighted ridge solution,
// ||B X^T w_star - w_star||^2 + sigma2 ||B||_F^2 with B = (X W X^T + lambda I)^-1 X W.
double NoiseAveragedTestLoss(const RidgeInstance& inst, const Vec& weights);

struct LooSummary {
  double full = 0.0;
  double loo_mean = 0.0;
  double delta = 0.0;  // loo_mean - full
};

// Noise-averaged exact leave-one-out: retrains without each i.
LooSummary NoiseAveragedLoo(const RidgeInstance& inst);
// Realized labels, exact leave-one-out.
LooSummary RealizedLoo(const RidgeInstance& inst);

ErmInstance ToErm(const RidgeInstance& inst);

struct RidgeReport {
  int d = 0;
  int n = 0;
  double r = 0.0;
  double snr = 0.0;
  double lambda = 0.0;
  double d_value = 0.0;
  double c_value = 0.0;
  double condition = 0.0;  // lambda D - C N / 2
  bool verdict = false;
  CorollaryVerdict corollary;
  LooSummary expected;
  LooSummary realized;
  bool counterexample = false;  // verdict true, expected loss did not drop
};

RidgeReport RidgeTheoremCheck(const RidgeInstance& inst, const CorollaryParams& p);

nlohmann::json ToJson(const CorollaryVerdict& v);
nlohmann::json ToJson(const RidgeReport& r);

}  // namespace deletion_lab

#endif  // DELETION_LAB_RIDGE_THEORY_H_
