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
#ifndef DELETION_LAB_ADAPT_TRAIN_H_
#define DELETION_LAB_ADAPT_TRAIN_H_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "deletion_lab/cmdp.h"
#include "deletion_lab/estimator.h"
#include "deletion_lab/policy.h"
#include "deletion_lab/replay_buffer.h"
#include "deletion_lab/rng.h"
#include "json.hpp"

namespace deletion_lab {

struct EstimatorSpec {
  EstimatorArch arch = EstimatorArch::kMlp;
  std::vector<int> widths = {128, 32, 32};
  int gru_hidden = 32;
  int k = 4;
};

struct RoundPlan {
  int rounds = 6;
  int episodes_per_round = 50;
  DeletionStrategy strategy = DeletionStrategy::kRandom;
  double alpha = 1.0;
  EstimatorSpec estimator;
  TrainConfig train;
  int validation_episodes = 10;
  int refresh_every = 1;
};

void ValidatePlan(const RoundPlan& plan);

struct RoundLog {
  int round = 0;
  size_t buffer_size = 0;
  size_t view_size = 0;
  double mean_episode_return = 0.0;
  double final_train_loss = 0.0;
  double validation_loss = 0.0;
  std::vector<double> loss;
};

struct TrainingResult {
  std::shared_ptr<const Estimator> estimator;
  std::shared_ptr<TrajectoryBuffer> buffer;
  std::vector<RoundLog> rounds;
  // Round-1 buffer contents by insertion order, for invariance checks.
  std::vector<TrajectoryPtr> round1;
};

TrainingResult RunTraining(const CmdpSpec& spec, const ContextSet& train,
                           UniversalPolicyPtr k, const RoundPlan& plan,
                           const Rng& rng);

using PolicyForContext =
    std::function<std::shared_ptr<ControllerFactory>(const Vec& context)>;

struct RobustnessReport {
  std::vector<Vec> contexts;
  std::vector<double> j_star;
  std::vector<double> j_pi;
  std::vector<double> j_pi_std;
  std::vector<double> gap;
  double max_gap = 0.0;
  double mean_gap = 0.0;
  int n_episodes = 0;
  uint64_t rng_key = 0;
};

// J*(c) for every evaluation context: UP-true run with the true context.
// Context j uses rng.Split(j); episode e of it uses .Split(e).
std::vector<ValueEstimate> OracleReturns(const CmdpSpec& spec,
                                         const ContextSet& eval,
                                         UniversalPolicyPtr k_true,
                                         int n_episodes, const Rng& rng);

// Per-context relative shortfall (J* - J_pi) / |J*|. Uses the same streams
// as OracleReturns (common random numbers).
RobustnessReport RobustnessGap(const CmdpSpec& spec, const ContextSet& eval,
                               const PolicyForContext& pi,
                               const std::vector<double>& j_star,
                               int n_episodes, const Rng& rng);

RobustnessReport GapFromReturns(const std::vector<double>& j_star,
                                const std::vector<double>& j_pi);

struct CellSpec {
  EstimatorArch arch = EstimatorArch::kMlp;
  DeletionStrategy strategy = DeletionStrategy::kRandom;
  double alpha = 1.0;
  uint64_t seed = 0;
};

struct CellResult {
  CellSpec cell;
  bool ok = false;
  std::string error;
  double max_gap = 0.0;
  double mean_gap = 0.0;
  double final_validation_loss = 0.0;
  std::vector<RoundLog> rounds;
  RobustnessReport report;
};

struct ExperimentSetup {
  CmdpSpec spec;
  ContextSet train;
  ContextSet eval;
  UniversalPolicyPtr k;
  UniversalPolicyPtr k_true;
  RoundPlan plan;
  int eval_episodes = 10;
};

// Trains and evaluates every cell on the worker pool. A failing cell is
// marked and the remaining cells still run.
std::vector<CellResult> RunCells(const ExperimentSetup& setup,
                                 const std::vector<CellSpec>& cells);

struct SummaryRow {
  std::string key;
  double alpha = 0.0;
  std::string strategy;
  std::string arch;
  int n = 0;
  double mean_gap = 0.0;
  double std_gap = 0.0;
};

std::vector<CellResult> SweepAlpha(const ExperimentSetup& setup,
                                   const std::vector<double>& alphas,
                                   const std::vector<uint64_t>& seeds);
std::vector<CellResult> AblateStrategies(
    const ExperimentSetup& setup, const std::vector<DeletionStrategy>& strategies,
    const std::vector<EstimatorArch>& archs, const std::vector<uint64_t>& seeds);

// Mean and sample std of max_gap grouped by (arch, strategy, alpha).
std::vector<SummaryRow> Summarize(const std::vector<CellResult>& cells);

nlohmann::json ToJson(const RobustnessReport& r);
nlohmann::json ToJson(const RoundLog& r);
nlohmann::json ToJson(const CellResult& r);

}  // namespace deletion_lab

#endif  // DELETION_LAB_ADAPT_TRAIN_H_
