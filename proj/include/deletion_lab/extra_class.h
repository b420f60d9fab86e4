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
#ifndef DELETION_LAB_EXTRA_CLASS_H_
#define DELETION_LAB_EXTRA_CLASS_H_

#include <cstdint>
#include <vector>

#include "deletion_lab/numerics.h"
#include "deletion_lab/rng.h"

namespace deletion_lab {

// Gaussian blobs: classes 0 and 1 appear in train and test, class 2 only in
// train.
struct ExtraClassConfig {
  std::vector<int> train_sizes = {120, 100, 60};
  int test_per_class = 500;
  int d = 2;
  // Row k is the centre of class k.
  Mat centers = (Mat(3, 2) << -1.0, 0.0, 1.0, 0.0, 0.0, 0.5).finished();
  double blob_std = 1.0;
  double delete_fraction = 0.05;
  std::vector<double> lambdas = {1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0,
                                 3.0,  10.0, 30.0, 100.0, 300.0, 1000.0};
  int seeds = 20;
  uint64_t seed = 0;
};

void ValidateExtraClassConfig(const ExtraClassConfig& cfg);

// Multinomial logistic regression, L2 on the weights only, class-0 bias
// pinned at zero. Rows of x are samples.
struct SoftmaxModel {
  Mat w;  // classes x d
  Vec b;  // classes, b(0) == 0
};

SoftmaxModel FitSoftmax(const Mat& x, const std::vector<int>& labels, int classes,
                        double lambda);
std::vector<int> PredictSoftmax(const SoftmaxModel& m, const Mat& x);

struct ExtraClassRow {
  double lambda = 0.0;
  double acc_full = 0.0;
  double acc_deleted = 0.0;
  double std_full = 0.0;
  double std_deleted = 0.0;
  int seeds = 0;
};

std::vector<ExtraClassRow> RunExtraClassExperiment(const ExtraClassConfig& cfg);

}  // namespace deletion_lab

#endif  // DELETION_LAB_EXTRA_CLASS_H_
