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
#ifndef DELETION_LAB_EXPERIMENTS_H_
#define DELETION_LAB_EXPERIMENTS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deletion_lab/adapt_train.h"
#include "deletion_lab/config.h"
#include "deletion_lab/error.h"
#include "deletion_lab/ridge_theory.h"
#include "json.hpp"

namespace deletion_lab {

inline constexpr char kToolVersion[] = "0.3.0";
inline constexpr int kSchemaVersion = 1;

std::vector<std::string> ExperimentKinds();
bool IsExperimentKind(const std::string& kind);

// 2 for bad input, 3 for numerical failure.
int ExitCodeFor(ErrorCode code);

// Pendulum-style setup from config keys: env, policy, eval_episodes, arch,
// strategy, alpha, rounds, episodes, refresh_every, validation_episodes,
// contexts.{seed,train,eval}, spec.*, train.*, estimator.*, cem.*.
ExperimentSetup SetupFromConfig(ConfigReader& r);

struct VerifyTheoremConfig {
  int instances = 500;
  uint64_t seed = 0;
  int d = 5;
  int n = 50;
  double r = 1.0;
  double snr = 5e-5;
  CorollaryParams params;
  // Lambda placed log-uniformly in this sub-range of the window.
  double placement_lo = 0.05;
  double placement_hi = 0.95;
};

struct VerifyTheoremResult {
  std::vector<RidgeReport> reports;
  int corollary_pass = 0;
  int verdict_true = 0;
  int expected_drop = 0;   // among corollary-passing
  int realized_drop = 0;   // among corollary-passing
  int counterexamples = 0;
  double seconds = 0.0;
};

VerifyTheoremResult RunVerifyTheorem(const VerifyTheoremConfig& cfg);

struct CorollarySweepConfig {
  std::vector<int> dims = {5};
  std::vector<int> ns = {50};
  std::vector<double> snrs = {1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 1e-2, 1e-1};
  int instances = 50;
  double r = 1.0;
  uint64_t seed = 0;
  double placement = 0.5;
  CorollaryParams params;
};

// One generated instance; report is meaningless when empty_window.
struct CorollaryInstanceRow {
  int d = 0;
  int n = 0;
  double target_snr = 0.0;
  bool empty_window = false;
  RidgeReport report;
  BoundChain chain;
};

struct CorollarySweepRow {
  int d = 0;
  int n = 0;
  double snr = 0.0;
  double snr_threshold = 0.0;
  int attempted = 0;
  int empty_window = 0;
  int corollary_pass = 0;
  int verdict_true = 0;
  int expected_drop = 0;
  int chain_holds = 0;
  double mean_lambda_lo = 0.0;
  double mean_lambda_hi = 0.0;
};

struct CorollarySweepResult {
  std::vector<CorollarySweepRow> rows;
  std::vector<CorollaryInstanceRow> instances;
};

CorollarySweepResult RunCorollarySweep(const CorollarySweepConfig& cfg);

struct SurvivalConfig {
  double alpha = 0.8;
  int rounds = 5;
  int replays = 10000;
  int per_round = 50;
  uint64_t seed = 0;
};

struct SurvivalRow {
  int round = 0;
  double analytic = 0.0;
  double empirical = 0.0;
};

// Fraction of round-1 trajectories still stored at the start of each round,
// replayed through real random-deletion buffers.
std::vector<SurvivalRow> RunSurvivalReplay(const SurvivalConfig& cfg);

struct ExperimentOutput {
  RunManifest manifest;
  nlohmann::json summary;
};

// Runs one experiment and writes its artifacts plus manifest.json into out.
ExperimentOutput RunExperiment(const std::string& kind, const ConfigTree& cfg,
                               const std::filesystem::path& out);

}  // namespace deletion_lab

#endif  // DELETION_LAB_EXPERIMENTS_H_
