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

#include "deletion_lab/numerics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "deletion_lab/error.h"
#include "deletion_lab/tolerances.h"

namespace deletion_lab {
namespace {

void CheckSymmetric(const Mat& a, const char* who) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(who) + ": not square");
  }
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol::kSymmetry * scale) {
    throw Error(ErrorCode::kNotSpd, std::string(who) + ": matrix not symmetric");
  }
}

Eigen::LLT<Mat> Factor(const Mat& a) {
  CheckSymmetric(a, "SolveSpd");
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotSpd, "SolveSpd: non-positive Cholesky pivot");
  }
  return llt;
}

}  // namespace

Vec SolveSpd(const Mat& a, const Vec& b) {
  if (b.size() != a.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "SolveSpd: rhs size");
  }
  return Factor(a).solve(b);
}

Mat SolveSpd(const Mat& a, const Mat& b) {
  if (b.rows() != a.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "SolveSpd: rhs rows");
  }
  return Factor(a).solve(b);
}

SymmetricEigen SymEig(const Mat& input) {
  CheckSymmetric(input, "SymEig");
  const Eigen::Index n = input.rows();
  Mat a = 0.5 * (input + input.transpose());
  Mat v = Mat::Identity(n, n);
  const double total = a.norm();

  auto off_diagonal = [&]() {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i != j) s += a(i, j) * a(i, j);
      }
    }
    return std::sqrt(s);
  };

  int sweep = 0;
  while (total > 0.0 && off_diagonal() > tol::kJacobiOffDiagonal * total) {
    if (++sweep > tol::kJacobiMaxSweeps) {
      throw Error(ErrorCode::kNoConvergence, "SymEig: Jacobi sweep cap hit");
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle zeroing a(p, q) (Golub & Van Loan, Alg. 8.4.1).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r) {
    return a(l, l) > a(r, r);
  });
  SymmetricEigen out{Vec(n), Mat(n, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    out.values(j) = a(order[j], order[j]);
    out.vectors.col(j) = v.col(order[j]);
  }
  return out;
}

bool AllFinite(const Vec& v) { return v.allFinite(); }
bool AllFinite(const Mat& m) { return m.allFinite(); }

}  // namespace deletion_lab
