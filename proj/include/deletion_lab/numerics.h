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

#ifndef DELETION_LAB_NUMERICS_H_
#define DELETION_LAB_NUMERICS_H_

#include "Eigen/Dense"

namespace deletion_lab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Solves A x = b for symmetric positive definite A by Cholesky.
// Throws Error(kNotSpd) when A is asymmetric beyond tol::kSymmetry or a
// pivot is not positive.
Vec SolveSpd(const Mat& a, const Vec& b);
Mat SolveSpd(const Mat& a, const Mat& b);

struct SymmetricEigen {
  Vec values;   // descending
  Mat vectors;  // column j pairs with values(j)
};

// Cyclic Jacobi rotations. Intended for d <= 64.
// Throws Error(kNoConvergence) after tol::kJacobiMaxSweeps sweeps.
SymmetricEigen SymEig(const Mat& a);

bool AllFinite(const Vec& v);
bool AllFinite(const Mat& m);

}  // namespace deletion_lab

#endif  // DELETION_LAB_NUMERICS_H_
