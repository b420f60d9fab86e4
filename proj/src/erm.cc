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
#include "deletion_lab/erm.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "deletion_lab/error.h"
#include "deletion_lab/parallel.h"
#include "deletion_lab/tolerances.h"

namespace deletion_lab {

using nlohmann::json;

namespace {

double Sigmoid(double m) {
  return m >= 0.0 ? 1.0 / (1.0 + std::exp(-m)) : std::exp(m) / (1.0 + std::exp(m));
}

// log(1 + exp(-m)) without overflow.
double Softplus(double m) {
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

Vec Gradient(const ErmInstance& inst, const Vec& weights, const Vec& w) {
  Vec g = 2.0 * inst.lambda * w;
  for (int i = 0; i < inst.n(); ++i) {
    if (weights(i) != 0.0) {
      g += weights(i) * SampleLossGrad(inst.family, w, inst.x.col(i), inst.y(i));
    }
  }
  return g;
}

Mat Hessian(const ErmInstance& inst, const Vec& weights, const Vec& w) {
  const int d = inst.d();
  Mat h = 2.0 * inst.lambda * Mat::Identity(d, d);
  if (inst.family == LossFamily::kRidge) {
    h += 2.0 * inst.x * weights.asDiagonal() * inst.x.transpose();
    return h;
  }
  Vec curv(inst.n());
  for (int i = 0; i < inst.n(); ++i) {
    const double p = Sigmoid(inst.y(i) * inst.x.col(i).dot(w));
    curv(i) = weights(i) * p * (1.0 - p);
  }
  h += inst.x * curv.asDiagonal() * inst.x.transpose();
  return h;
}

template <typename Rhs>
Rhs SolveOrFail(const Mat& a, const Rhs& b) {
  try {
    return SolveSpd(a, b);
  } catch (const Error& e) {
    throw Error(ErrorCode::kSolverFailure,
                std::string("objective not strongly convex: ") + e.what());
  }
}

Vec NewtonSolve(const ErmInstance& inst, const Vec& weights, Vec w) {
  double f = Objective(inst, weights, w);
  for (int it = 0; it < tol::kNewtonMaxIterations; ++it) {
    Vec g = Gradient(inst, weights, w);
    if (g.norm() <= tol::kNewtonGradient) return w;
    Vec step = SolveOrFail(Hessian(inst, weights, w), g);
    double t = 1.0;
    const double slope = g.dot(step);
    if (slope <= 1e-13 * std::max(1.0, std::abs(f))) {
      // Decrease below double resolution: plain Newton step.
      w -= step;
      f = Objective(inst, weights, w);
      continue;
    }
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      Vec cand = w - t * step;
      double fc = Objective(inst, weights, cand);
      if (fc <= f - 1e-4 * t * slope) {
        w = cand;
        f = fc;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No decrease representable in double precision; a full Newton step
      // from here is already at the floating-point floor.
      w -= step;
      Vec g2 = Gradient(inst, weights, w);
      if (g2.norm() <= tol::kNewtonGradient) return w;
      throw Error(ErrorCode::kSolverFailure,
                  "Newton line search stalled at gradient norm " +
                      std::to_string(g2.norm()));
    }
  }
  Vec g = Gradient(inst, weights, w);
  if (g.norm() <= tol::kNewtonGradient) return w;
  throw Error(ErrorCode::kSolverFailure,
              "Newton did not converge, gradient norm " + std::to_string(g.norm()));
}

}  // namespace

std::string_view FamilyName(LossFamily f) {
  return f == LossFamily::kRidge ? "ridge" : "logistic";
}

LossFamily ParseFamily(std::string_view name) {
  if (name == "ridge") return LossFamily::kRidge;
  if (name == "logistic") return LossFamily::kLogistic;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown loss family '" + std::string(name) + "'");
}

void ValidateInstance(const ErmInstance& inst) {
  if (inst.n() < 1 || inst.d() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "ERM instance needs N >= 1 and d >= 1");
  }
  if (inst.y.size() != inst.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "labels do not match samples");
  }
  if (!(inst.lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be > 0");
  if (!inst.x.allFinite() || !inst.y.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "non-finite features or labels");
  }
  if (inst.family == LossFamily::kLogistic) {
    for (int i = 0; i < inst.n(); ++i) {
      if (inst.y(i) != 1.0 && inst.y(i) != -1.0) {
        throw Error(ErrorCode::kInvalidArgument, "logistic labels must be +-1");
      }
    }
  }
  if (const auto* iso = std::get_if<IsotropicLinearTest>(&inst.test)) {
    if (inst.family != LossFamily::kRidge) {
      throw Error(ErrorCode::kInvalidArgument, "isotropic test law is for ridge");
    }
    if (iso->w_star.size() != inst.d() || !(iso->scale > 0.0) || iso->noise_var < 0.0) {
      throw Error(ErrorCode::kDimensionMismatch, "isotropic test law mismatch");
    }
  } else {
    const auto& set = std::get<FiniteTestSet>(inst.test);
    if (set.x.rows() != inst.d() || set.x.cols() < 1 || set.y.size() != set.x.cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "test set shape");
    }
  }
}

double SampleLoss(LossFamily f, const Vec& w, const Vec& x, double y) {
  const double m = w.dot(x);
  if (f == LossFamily::kRidge) return (m - y) * (m - y);
  return Softplus(y * m);
}

Vec SampleLossGrad(LossFamily f, const Vec& w, const Vec& x, double y) {
  const double m = w.dot(x);
  if (f == LossFamily::kRidge) return 2.0 * (m - y) * x;
  return -y * Sigmoid(-y * m) * x;
}

Mat SampleLossHessian(LossFamily f, const Vec& w, const Vec& x, double y) {
  if (f == LossFamily::kRidge) return 2.0 * x * x.transpose();
  const double p = Sigmoid(y * w.dot(x));
  return p * (1.0 - p) * x * x.transpose();
}

double Objective(const ErmInstance& inst, const Vec& weights, const Vec& w) {
  double f = inst.lambda * w.squaredNorm();
  for (int i = 0; i < inst.n(); ++i) {
    if (weights(i) != 0.0) f += weights(i) * SampleLoss(inst.family, w, inst.x.col(i), inst.y(i));
  }
  return f;
}

Vec FitWeighted(const ErmInstance& inst, const Vec& weights) {
  if (weights.size() != inst.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "one weight per sample");
  }
  if (inst.family == LossFamily::kRidge) {
    Mat a = inst.x * weights.asDiagonal() * inst.x.transpose();
    a.diagonal().array() += inst.lambda;
    return SolveOrFail(a, Vec(inst.x * weights.cwiseProduct(inst.y)));
  }
  return NewtonSolve(inst, weights, Vec::Zero(inst.d()));
}

Vec Fit(const ErmInstance& inst) {
  ValidateInstance(inst);
  return FitWeighted(inst, Vec::Ones(inst.n()));
}

Vec FitDeleted(const ErmInstance& inst, int i) {
  ValidateInstance(inst);
  if (i < 0 || i >= inst.n()) throw Error(ErrorCode::kInvalidArgument, "sample index out of range");
  Vec weights = Vec::Ones(inst.n());
  weights(i) = 0.0;
  return FitWeighted(inst, weights);
}

Vec DeletionPath(const ErmInstance& inst, int i, double t) {
  ValidateInstance(inst);
  if (i < 0 || i >= inst.n()) throw Error(ErrorCode::kInvalidArgument, "sample index out of range");
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "t must be in [0, 1]");
  Vec weights = Vec::Ones(inst.n());
  weights(i) = 1.0 - t;
  return FitWeighted(inst, weights);
}

Mat LeaveOneOutSolutions(const ErmInstance& inst) {
  ValidateInstance(inst);
  const int n = inst.n();
  Mat out(inst.d(), n);
  if (inst.family == LossFamily::kRidge) {
    Mat a = inst.x * inst.x.transpose();
    a.diagonal().array() += inst.lambda;
    const Mat a_inv = SolveOrFail(a, Mat(Mat::Identity(inst.d(), inst.d())));
    const Vec b = inst.x * inst.y;
    const Vec w_hat = a_inv * b;
    for (int i = 0; i < n; ++i) {
      const Vec xi = inst.x.col(i);
      const Vec u = a_inv * xi;
      const double denom = 1.0 - xi.dot(u);
      if (!(denom > 0.0)) throw Error(ErrorCode::kSolverFailure, "downdate lost definiteness");
      // (A - x x^T)^-1 (b - x y) with A^-1 b = w_hat.
      const Vec base = w_hat - inst.y(i) * u;
      out.col(i) = base + u * (xi.dot(base)) / denom;
    }
    return out;
  }
  const Vec w_hat = Fit(inst);
  ParallelFor(n, [&](size_t i) {
    Vec weights = Vec::Ones(n);
    weights(i) = 0.0;
    out.col(i) = NewtonSolve(inst, weights, w_hat);
  });
  return out;
}

double TestLoss(const ErmInstance& inst, const Vec& w) {
  if (const auto* iso = std::get_if<IsotropicLinearTest>(&inst.test)) {
    return iso->scale * (w - iso->w_star).squaredNorm() + iso->noise_var;
  }
  const auto& set = std::get<FiniteTestSet>(inst.test);
  double total = 0.0;
  for (Eigen::Index j = 0; j < set.x.cols(); ++j) {
    total += SampleLoss(inst.family, w, set.x.col(j), set.y(j));
  }
  return total / static_cast<double>(set.x.cols());
}

Vec TestLossGrad(const ErmInstance& inst, const Vec& w) {
  if (const auto* iso = std::get_if<IsotropicLinearTest>(&inst.test)) {
    return 2.0 * iso->scale * (w - iso->w_star);
  }
  const auto& set = std::get<FiniteTestSet>(inst.test);
  Vec g = Vec::Zero(inst.d());
  for (Eigen::Index j = 0; j < set.x.cols(); ++j) {
    g += SampleLossGrad(inst.family, w, set.x.col(j), set.y(j));
  }
  return g / static_cast<double>(set.x.cols());
}

Mat TestLossHessian(const ErmInstance& inst, const Vec& w) {
  if (const auto* iso = std::get_if<IsotropicLinearTest>(&inst.test)) {
    return 2.0 * iso->scale * Mat::Identity(inst.d(), inst.d());
  }
  const auto& set = std::get<FiniteTestSet>(inst.test);
  Mat h = Mat::Zero(inst.d(), inst.d());
  for (Eigen::Index j = 0; j < set.x.cols(); ++j) {
    h += SampleLossHessian(inst.family, w, set.x.col(j), set.y(j));
  }
  return h / static_cast<double>(set.x.cols());
}

Mat ObjectiveHessian(const ErmInstance& inst, const Vec& w) {
  return Hessian(inst, Vec::Ones(inst.n()), w);
}

FirstDerivative ExpectedFirstDerivative(const ErmInstance& inst, const Vec& w_hat) {
  ValidateInstance(inst);
  Vec g_sum = Vec::Zero(inst.d());
  for (int i = 0; i < inst.n(); ++i) {
    g_sum += SampleLossGrad(inst.family, w_hat, inst.x.col(i), inst.y(i));
  }
  const Vec v = SolveOrFail(ObjectiveHessian(inst, w_hat), Vec(-g_sum / inst.lambda));
  FirstDerivative out;
  out.d = TestLossGrad(inst, w_hat).dot(v);
  out.expected = -inst.lambda * out.d / inst.n();
  return out;
}

Vec PathDerivativeAtZero(const ErmInstance& inst, const Vec& w_hat, int i) {
  if (i < 0 || i >= inst.n()) throw Error(ErrorCode::kInvalidArgument, "sample index out of range");
  return SolveOrFail<Vec>(ObjectiveHessian(inst, w_hat),
                     SampleLossGrad(inst.family, w_hat, inst.x.col(i), inst.y(i)));
}

SmoothnessCertificate Certify(const ErmInstance& inst) {
  ValidateInstance(inst);
  SmoothnessCertificate c;
  c.alpha = 2.0 * inst.lambda;
  c.h_r = 2.0;
  c.beta_r = 0.0;
  double max_x = 0.0;
  for (int i = 0; i < inst.n(); ++i) max_x = std::max(max_x, inst.x.col(i).norm());
  const FiniteTestSet* set = std::get_if<FiniteTestSet>(&inst.test);
  double max_test_x = 0.0;
  if (set) {
    for (Eigen::Index j = 0; j < set->x.cols(); ++j) {
      max_test_x = std::max(max_test_x, set->x.col(j).norm());
    }
  }
  if (inst.family == LossFamily::kRidge) {
    // F_{S,t,i}(w) >= lambda ||w||^2 and F_{S,t,i}(w_i(t)) <= F_{S,t,i}(0)
    // <= sum y^2.
    c.radius = std::sqrt(inst.y.squaredNorm() / inst.lambda);
    const double rho = c.radius;
    double g = 0.0;
    for (int i = 0; i < inst.n(); ++i) {
      const double r = inst.x.col(i).norm();
      g = std::max(g, 2.0 * r * (r * rho + std::abs(inst.y(i))));
    }
    double h = 2.0 * max_x * max_x;
    if (const auto* iso = std::get_if<IsotropicLinearTest>(&inst.test)) {
      g = std::max(g, 2.0 * iso->scale * (rho + iso->w_star.norm()));
      h = std::max(h, 2.0 * iso->scale);
    } else {
      for (Eigen::Index j = 0; j < set->x.cols(); ++j) {
        const double r = set->x.col(j).norm();
        g = std::max(g, 2.0 * r * (r * rho + std::abs(set->y(j))));
      }
      h = std::max(h, 2.0 * max_test_x * max_test_x);
    }
    c.g = g;
    c.h = h;
    c.beta = 0.0;
    c.g_r = 2.0 * rho;
    c.domain = "ball ||w|| <= sqrt(sum y^2 / lambda)";
  } else {
    const double r = std::max(max_x, max_test_x);
    c.radius = std::sqrt(inst.n() * std::log(2.0) / inst.lambda);
    c.g = r;
    c.h = r * r / 4.0;
    c.beta = r * r * r / 10.0;
    c.g_r = 2.0 * c.radius;
    c.domain = "global (logistic derivatives are bounded)";
  }
  return c;
}

double CurvatureBound(const SmoothnessCertificate& cert, int n, double lambda) {
  const double a = cert.alpha;
  const double beta_bar = n * cert.beta + lambda * cert.beta_r;
  return 3.0 * cert.h * cert.g * cert.g / (a * a) +
         beta_bar * cert.g * cert.g * cert.g / (a * a * a);
}

DeletionReport TheoremCheck(const ErmInstance& inst, const SmoothnessCertificate& cert) {
  ValidateInstance(inst);
  DeletionReport r;
  r.family = inst.family;
  r.d = inst.d();
  r.n = inst.n();
  r.lambda = inst.lambda;
  const Vec w_hat = Fit(inst);
  r.test_loss = TestLoss(inst, w_hat);
  const Mat loo = LeaveOneOutSolutions(inst);
  double total = 0.0;
  for (int i = 0; i < inst.n(); ++i) total += TestLoss(inst, loo.col(i));
  r.expected_loo_loss = total / inst.n();
  r.delta = r.expected_loo_loss - r.test_loss;
  r.d_value = ExpectedFirstDerivative(inst, w_hat).d;
  r.c_value = CurvatureBound(cert, inst.n(), inst.lambda);
  r.condition = inst.lambda * r.d_value - r.c_value * inst.n() / 2.0;
  r.verdict = r.condition > 0.0;
  r.loss_decreased = r.expected_loo_loss < r.test_loss;
  r.counterexample = r.verdict && !r.loss_decreased;
  return r;
}

json ToJson(const DeletionReport& r) {
  return {{"family", std::string(FamilyName(r.family))},
          {"d", r.d},
          {"n", r.n},
          {"lambda", r.lambda},
          {"test_loss", r.test_loss},
          {"expected_loo_loss", r.expected_loo_loss},
          {"delta", r.delta},
          {"D", r.d_value},
          {"C", r.c_value},
          {"condition", r.condition},
          {"verdict", r.verdict ? "theorem-guaranteed" : "not-guaranteed"},
          {"loss_decreased", r.loss_decreased},
          {"counterexample", r.counterexample}};
}

namespace {

json MatToJson(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

Mat MatFromJson(const json& j) {
  const size_t rows = j.size();
  const size_t cols = rows ? j[0].size() : 0;
  Mat m(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw Error(ErrorCode::kConfigError, "ragged matrix");
    for (size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

Vec VecFromJson(const json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json ToJson(const ErmInstance& inst) {
  json j = {{"family", std::string(FamilyName(inst.family))},
            {"x", MatToJson(inst.x)},
            {"y", std::vector<double>(inst.y.data(), inst.y.data() + inst.y.size())},
            {"lambda", inst.lambda}};
  if (const auto* iso = std::get_if<IsotropicLinearTest>(&inst.test)) {
    j["test"] = {{"kind", "isotropic"},
                 {"w_star", std::vector<double>(iso->w_star.data(),
                                                iso->w_star.data() + iso->w_star.size())},
                 {"scale", iso->scale},
                 {"noise_var", iso->noise_var}};
  } else {
    const auto& set = std::get<FiniteTestSet>(inst.test);
    j["test"] = {{"kind", "finite"},
                 {"x", MatToJson(set.x)},
                 {"y", std::vector<double>(set.y.data(), set.y.data() + set.y.size())}};
  }
  return j;
}

ErmInstance ErmInstanceFromJson(const json& j) {
  try {
    ErmInstance inst;
    inst.family = ParseFamily(j.at("family").get<std::string>());
    inst.x = MatFromJson(j.at("x"));
    inst.y = VecFromJson(j.at("y"));
    inst.lambda = j.at("lambda").get<double>();
    const json& t = j.at("test");
    const std::string kind = t.at("kind").get<std::string>();
    if (kind == "isotropic") {
      inst.test = IsotropicLinearTest{VecFromJson(t.at("w_star")), t.value("scale", 1.0),
                                      t.value("noise_var", 0.0)};
    } else if (kind == "finite") {
      inst.test = FiniteTestSet{MatFromJson(t.at("x")), VecFromJson(t.at("y"))};
    } else {
      throw Error(ErrorCode::kConfigError, "unknown test kind '" + kind + "'");
    }
    ValidateInstance(inst);
    return inst;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("instance: ") + e.what());
  }
}

int EvaluateInstanceLines(std::istream& in, std::ostream& out) {
  std::string line;
  int count = 0;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ErmInstance inst;
    try {
      inst = ErmInstanceFromJson(nlohmann::json::parse(line));
      ValidateInstance(inst);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kConfigError,
                  "instance line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError,
                  "instance line " + std::to_string(lineno) + ": " + e.what());
    }
    out << ToJson(TheoremCheck(inst, Certify(inst))).dump() << '\n';
    ++count;
  }
  return count;
}

}  // namespace deletion_lab
