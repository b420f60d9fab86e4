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
#include "deletion_lab/extra_class.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "deletion_lab/error.h"
#include "deletion_lab/parallel.h"
#include "deletion_lab/tolerances.h"

namespace deletion_lab {

namespace {

struct Dataset {
  Mat x;
  std::vector<int> labels;
};

Dataset SampleBlobs(const ExtraClassConfig& cfg, const std::vector<int>& sizes, Rng& rng) {
  int total = 0;
  for (int s : sizes) total += s;
  Dataset data;
  data.x.resize(total, cfg.d);
  int row = 0;
  for (size_t k = 0; k < sizes.size(); ++k) {
    for (int i = 0; i < sizes[k]; ++i, ++row) {
      for (int j = 0; j < cfg.d; ++j) {
        data.x(row, j) = cfg.centers(k, j) + cfg.blob_std * rng.Normal();
      }
      data.labels.push_back(static_cast<int>(k));
    }
  }
  return data;
}

// Parameters: W (row-major by class) then b_1..b_{K-1}.
double SoftmaxObjective(const Mat& x, const std::vector<int>& labels, int k,
                        double lambda, const Vec& theta, Vec* grad, Mat* hess) {
  const int d = static_cast<int>(x.cols());
  const int p = k * d + k - 1;
  auto weights = [&](int c) { return theta.segment(c * d, d); };
  auto bias = [&](int c) { return c == 0 ? 0.0 : theta(k * d + c - 1); };
  double f = 0.0;
  if (grad) grad->setZero(p);
  if (hess) hess->setZero(p, p);
  Vec logits(k), prob(k);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vec xi = x.row(i).transpose();
    for (int c = 0; c < k; ++c) logits(c) = weights(c).dot(xi) + bias(c);
    const double mx = logits.maxCoeff();
    prob = (logits.array() - mx).exp();
    const double z = prob.sum();
    prob /= z;
    f += mx + std::log(z) - logits(labels[i]);
    if (!grad) continue;
    // Feature vector per class block: [x; 1] with the class-0 bias absent.
    for (int c = 0; c < k; ++c) {
      const double r = prob(c) - (labels[i] == c ? 1.0 : 0.0);
      grad->segment(c * d, d) += r * xi;
      if (c > 0) (*grad)(k * d + c - 1) += r;
    }
    if (!hess) continue;
    for (int c = 0; c < k; ++c) {
      for (int e = 0; e < k; ++e) {
        const double s = prob(c) * ((c == e ? 1.0 : 0.0) - prob(e));
        hess->block(c * d, e * d, d, d) += s * xi * xi.transpose();
        if (e > 0) hess->block(c * d, k * d + e - 1, d, 1) += s * xi;
        if (c > 0) hess->block(k * d + c - 1, e * d, 1, d) += s * xi.transpose();
        if (c > 0 && e > 0) (*hess)(k * d + c - 1, k * d + e - 1) += s;
      }
    }
  }
  f += lambda * theta.head(k * d).squaredNorm();
  if (grad) grad->head(k * d) += 2.0 * lambda * theta.head(k * d);
  if (hess) hess->topLeftCorner(k * d, k * d).diagonal().array() += 2.0 * lambda;
  return f;
}

}  // namespace

void ValidateExtraClassConfig(const ExtraClassConfig& cfg) {
  if (cfg.train_sizes.size() != 3 || cfg.centers.rows() != 3 || cfg.centers.cols() != cfg.d) {
    throw Error(ErrorCode::kConfigError, "extra-class needs 3 train classes with d-dim centres");
  }
  for (int s : cfg.train_sizes) {
    if (s < 1) throw Error(ErrorCode::kConfigError, "every train class needs samples");
  }
  if (cfg.test_per_class < 1 || cfg.seeds < 1 || !(cfg.blob_std > 0.0) ||
      !(cfg.delete_fraction >= 0.0 && cfg.delete_fraction < 1.0) || cfg.lambdas.empty()) {
    throw Error(ErrorCode::kConfigError, "bad extra-class configuration");
  }
  for (double l : cfg.lambdas) {
    if (!(l > 0.0)) throw Error(ErrorCode::kConfigError, "regularisation grid must be > 0");
  }
}

SoftmaxModel FitSoftmax(const Mat& x, const std::vector<int>& labels, int classes,
                        double lambda) {
  const int d = static_cast<int>(x.cols());
  const int p = classes * d + classes - 1;
  Vec theta = Vec::Zero(p);
  Vec grad;
  Mat hess;
  double f = SoftmaxObjective(x, labels, classes, lambda, theta, &grad, &hess);
  bool converged = false;
  for (int it = 0; it < tol::kNewtonMaxIterations; ++it) {
    if (grad.norm() <= 1e-9 * std::max<double>(1.0, static_cast<double>(x.rows()))) {
      converged = true;
      break;
    }
    Vec step;
    try {
      step = SolveSpd(hess, grad);
    } catch (const Error& e) {
      throw Error(ErrorCode::kSolverFailure, std::string("softmax Newton: ") + e.what());
    }
    double t = 1.0;
    bool accepted = false;
    const double resolution = 1e-13 * std::max(1.0, std::abs(f));
    for (int ls = 0; ls < 60 && t * grad.dot(step) > resolution; ++ls) {
      Vec cand = theta - t * step;
      const double fc = SoftmaxObjective(x, labels, classes, lambda, cand, nullptr, nullptr);
      if (fc <= f - 1e-4 * t * grad.dot(step)) {
        theta = cand;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Objective decrease is below double resolution; fall back to the full
      // Newton step while it still shrinks the gradient.
      Vec cand = theta - step;
      Vec cand_grad;
      Mat cand_hess;
      const double fc = SoftmaxObjective(x, labels, classes, lambda, cand, &cand_grad, &cand_hess);
      if (!(cand_grad.norm() < grad.norm())) break;
      theta = cand;
      grad = cand_grad;
      hess = cand_hess;
      f = fc;
      continue;
    }
    f = SoftmaxObjective(x, labels, classes, lambda, theta, &grad, &hess);
  }
  if (!converged) {
    throw Error(ErrorCode::kSolverFailure,
                "softmax Newton did not converge, gradient norm " + std::to_string(grad.norm()));
  }
  SoftmaxModel m;
  m.w.resize(classes, d);
  for (int c = 0; c < classes; ++c) m.w.row(c) = theta.segment(c * d, d).transpose();
  m.b = Vec::Zero(classes);
  for (int c = 1; c < classes; ++c) m.b(c) = theta(classes * d + c - 1);
  return m;
}

std::vector<int> PredictSoftmax(const SoftmaxModel& m, const Mat& x) {
  Mat logits = x * m.w.transpose();
  logits.rowwise() += m.b.transpose();
  std::vector<int> out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index arg;
    logits.row(i).maxCoeff(&arg);
    out[i] = static_cast<int>(arg);
  }
  return out;
}

std::vector<ExtraClassRow> RunExtraClassExperiment(const ExtraClassConfig& cfg) {
  ValidateExtraClassConfig(cfg);
  const size_t n_lambda = cfg.lambdas.size();
  std::vector<std::vector<double>> full(cfg.seeds, std::vector<double>(n_lambda));
  std::vector<std::vector<double>> deleted(cfg.seeds, std::vector<double>(n_lambda));
  Rng root(cfg.seed);
  ParallelFor(cfg.seeds, [&](size_t s) {
    Rng rng = root.Split(s);
    Dataset train = SampleBlobs(cfg, cfg.train_sizes, rng);
    Dataset test = SampleBlobs(cfg, {cfg.test_per_class, cfg.test_per_class}, rng);
    const size_t n = train.labels.size();
    const size_t keep = n - static_cast<size_t>(std::llround(cfg.delete_fraction * n));
    std::vector<size_t> kept = UniformSubset(rng, n, keep);
    Dataset reduced;
    reduced.x.resize(keep, cfg.d);
    for (size_t i = 0; i < keep; ++i) {
      reduced.x.row(i) = train.x.row(kept[i]);
      reduced.labels.push_back(train.labels[kept[i]]);
    }
    auto accuracy = [&](const SoftmaxModel& m) {
      std::vector<int> pred = PredictSoftmax(m, test.x);
      int hit = 0;
      for (size_t i = 0; i < pred.size(); ++i) hit += pred[i] == test.labels[i];
      return static_cast<double>(hit) / pred.size();
    };
    for (size_t l = 0; l < n_lambda; ++l) {
      full[s][l] = accuracy(FitSoftmax(train.x, train.labels, 3, cfg.lambdas[l]));
      deleted[s][l] = keep == n ? full[s][l]
                                : accuracy(FitSoftmax(reduced.x, reduced.labels, 3, cfg.lambdas[l]));
    }
  });
  std::vector<ExtraClassRow> rows;
  for (size_t l = 0; l < n_lambda; ++l) {
    ExtraClassRow row;
    row.lambda = cfg.lambdas[l];
    row.seeds = cfg.seeds;
    double sf = 0, sd = 0;
    for (int s = 0; s < cfg.seeds; ++s) {
      sf += full[s][l];
      sd += deleted[s][l];
    }
    row.acc_full = sf / cfg.seeds;
    row.acc_deleted = sd / cfg.seeds;
    double vf = 0, vd = 0;
    for (int s = 0; s < cfg.seeds; ++s) {
      vf += std::pow(full[s][l] - row.acc_full, 2);
      vd += std::pow(deleted[s][l] - row.acc_deleted, 2);
    }
    row.std_full = cfg.seeds > 1 ? std::sqrt(vf / (cfg.seeds - 1)) : 0.0;
    row.std_deleted = cfg.seeds > 1 ? std::sqrt(vd / (cfg.seeds - 1)) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace deletion_lab
