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

#ifndef DELETION_LAB_TOLERANCES_H_
#define DELETION_LAB_TOLERANCES_H_

// All numerical tolerances used by the library live here.
namespace deletion_lab::tol {

// Relative asymmetry max|A - A^T| / max|A| accepted by SolveSpd.
inline constexpr double kSymmetry = 1e-10;
// Relative residual |Ax - b| / |b| promised by SolveSpd.
inline constexpr double kSolveResidual = 1e-8;

// Jacobi stops once the off-diagonal Frobenius norm drops below this
// fraction of |A|_F.
inline constexpr double kJacobiOffDiagonal = 1e-15;
inline constexpr int kJacobiMaxSweeps = 100;

// Newton solver for strongly convex objectives.
inline constexpr double kNewtonGradient = 1e-10;
inline constexpr int kNewtonMaxIterations = 200;

// Denominator guard for the relative robustness gap.
inline constexpr double kGapBaseline = 1e-6;

// Training points must lie on the R-sphere to this precision.
inline constexpr double kSphereRadius = 1e-10;
inline constexpr double kSphereTrace = 1e-8;

}  // namespace deletion_lab::tol

#endif  // DELETION_LAB_TOLERANCES_H_
