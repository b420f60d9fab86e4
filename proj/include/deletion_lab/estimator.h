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
#ifndef DELETION_LAB_ESTIMATOR_H_
#define DELETION_LAB_ESTIMATOR_H_

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "deletion_lab/numerics.h"
#include "deletion_lab/policy.h"
#include "deletion_lab/replay_buffer.h"
#include "deletion_lab/rng.h"
#include "json.hpp"

namespace deletion_lab {

enum class EstimatorArch { kMlp, kGru };

std::string_view ArchName(EstimatorArch arch);
EstimatorArch ParseArch(std::string_view name);

struct EstimatorShape {
  int s_dim = 0;
  int a_dim = 0;
  int c_dim = 0;
  int k = 4;

  // (k + 1) * s_dim + k * a_dim.
  int window_size() const { return (k + 1) * s_dim + k * a_dim; }
  // Per-step GRU input [s_t, a_{t-1}].
  int step_size() const { return s_dim + a_dim; }
};

// Raw window ending at step t: [s_t, ..., s_{t-k}, a_{t-1}, ..., a_{t-k}],
// zero below index 0.
Vec MakeWindow(const Trajectory& traj, Eigen::Index t, int k);
// Rows 0..t of [s_i, a_{i-1}] with a_{-1} = 0.
Mat MakeStepInputs(const Trajectory& traj, Eigen::Index t);

// Per raw feature affine normalisation: x -> (x - mean) / std.
struct FeatureNormalizer {
  Vec state_mean, state_std, action_mean, action_std;

  static FeatureNormalizer Identity(int s_dim, int a_dim);
  static FeatureNormalizer Fit(const std::vector<TrajectoryPtr>& data);
};

struct EstimatorExample {
  // MLP: one row holding a raw window. GRU: one row per step of raw step
  // inputs; the loss covers every step.
  Mat inputs;
  Vec context;
};

EstimatorExample WindowExample(const Trajectory& traj, Eigen::Index t, int k);
EstimatorExample SequenceExample(const Trajectory& traj, Eigen::Index t_end);

struct TrainConfig {
  double learning_rate = 3e-3;
  double momentum = 0.9;
  int batch_size = 64;
  // Whole trajectories per GRU minibatch.
  int sequence_batch = 4;
  int steps = 500;
  // Global gradient-norm clip; <= 0 disables.
  double clip_norm = 10.0;
  uint64_t seed = 0;
};

struct TrainLog {
  std::vector<double> loss;
};

class Estimator : public ContextPredictor {
 public:
  static Estimator Mlp(const EstimatorShape& shape, std::vector<int> widths,
                       Rng& rng);
  static Estimator Gru(const EstimatorShape& shape, int hidden, Rng& rng);

  EstimatorArch arch() const { return arch_; }
  const EstimatorShape& shape() const { return shape_; }
  const std::vector<int>& widths() const { return widths_; }
  int hidden() const { return hidden_; }
  int num_params() const { return static_cast<int>(params_.size()); }
  const Vec& params() const { return params_; }
  void set_params(const Vec& p);
  // Sets the output bias to the given context (e.g. the data mean).
  void set_output_bias(const Vec& c);

  const FeatureNormalizer& normalizer() const { return norm_; }
  void set_normalizer(FeatureNormalizer norm);
  bool normalizer_frozen() const { return frozen_; }
  void FreezeNormalizer() { frozen_ = true; }

  // MLP: prediction for one raw window. GRU: prediction after the last row.
  Vec Predict(const Mat& inputs) const;
  // GRU: one prediction per step (rows). MLP: windows per row.
  Mat PredictAll(const Mat& inputs) const;
  // Prediction at step t of a stored trajectory (window or prefix).
  Vec PredictAt(const Trajectory& traj, Eigen::Index t) const;

  // Mean squared distance over the batch (over all steps for GRU).
  double LossAndGrad(const std::vector<EstimatorExample>& batch,
                     Vec* grad) const;
  double Loss(const std::vector<EstimatorExample>& batch) const {
    return LossAndGrad(batch, nullptr);
  }
  // Loss of the per-step predictions over every step of the trajectories.
  double EvaluateLoss(const std::vector<TrajectoryPtr>& data) const;

  std::unique_ptr<ContextStream> StartStream() const override;
  int output_dim() const override { return shape_.c_dim; }

  nlohmann::json ToJson() const;
  static Estimator FromJson(const nlohmann::json& j);

 private:
  Estimator(EstimatorArch arch, EstimatorShape shape);

  Mat Normalize(const Mat& inputs) const;
  double MlpLossAndGrad(const std::vector<EstimatorExample>& batch,
                        Vec* grad) const;
  double GruLossAndGrad(const std::vector<EstimatorExample>& batch,
                        Vec* grad) const;

  EstimatorArch arch_;
  EstimatorShape shape_;
  std::vector<int> widths_;
  int hidden_ = 0;
  Vec params_;
  FeatureNormalizer norm_;
  bool frozen_ = false;
  // Normalisation over a window or step row, expanded from norm_.
  Vec row_mean_, row_inv_std_;

  friend class GruStream;
  friend class MlpStream;
};

// Minibatch SGD with momentum. MLP batches sample windows uniformly over
// (trajectory, step); GRU batches sample whole trajectories. Fits and
// freezes the normaliser on the first call if it is not frozen yet.
Estimator TrainRound(Estimator phi, const std::vector<TrajectoryPtr>& view,
                     const TrainConfig& cfg, TrainLog* log = nullptr);

}  // namespace deletion_lab

#endif  // DELETION_LAB_ESTIMATOR_H_
