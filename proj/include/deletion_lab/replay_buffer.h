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
#ifndef DELETION_LAB_REPLAY_BUFFER_H_
#define DELETION_LAB_REPLAY_BUFFER_H_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string_view>
#include <vector>

#include "deletion_lab/numerics.h"
#include "deletion_lab/rng.h"

namespace deletion_lab {

// One episode. Row t of states/actions holds (s_t, a_t).
struct Trajectory {
  Mat states;
  Mat actions;
  Vec context;
  int round = 1;

  Eigen::Index length() const { return states.rows(); }
};

using TrajectoryPtr = std::shared_ptr<const Trajectory>;

// Throws kShapeMismatch / kInvalidArgument on empty or ragged trajectories,
// non-finite contexts, or round < 1.
void ValidateTrajectory(const Trajectory& t);

enum class DeletionStrategy { kRandom, kStale, kUniform };

std::string_view StrategyName(DeletionStrategy s);
DeletionStrategy ParseStrategy(std::string_view name);

// ceil(alpha * n), guarded against representation error in alpha.
size_t RetainedCount(double alpha, size_t n);

// Survival probability of a round-1 trajectory at the start of rounds
// 1..rounds under random deletion: alpha^(r-1).
struct SurvivalStats {
  std::vector<double> by_round;
};
SurvivalStats SurvivalTable(double alpha, int rounds);

// Round-tagged trajectory store with one of three deletion strategies.
//
//   kRandom  - EndOfRound permanently keeps a uniformly random
//              ceil(alpha * n)-subset.
//   kStale   - EndOfRound permanently keeps the ceil(alpha * n) newest
//              trajectories (highest round, then latest insertion).
//   kUniform - nothing is ever deleted. The buffer tracks the retained count
//              the other two strategies would have, and every training view
//              is a fresh uniform subset of that size.
//
// Deletion works on whole trajectories only.
class TrajectoryBuffer {
 public:
  TrajectoryBuffer(DeletionStrategy strategy, double alpha, Rng rng);

  void Add(Trajectory trajectory);
  void EndOfRound();
  std::vector<TrajectoryPtr> SampleTrainingView();

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  // Expected training-view size: equals size() except for kUniform.
  size_t budget() const { return budget_; }
  DeletionStrategy strategy() const { return strategy_; }
  double alpha() const { return alpha_; }
  int rounds_completed() const { return rounds_completed_; }

  std::vector<TrajectoryPtr> items() const;
  // Insertion sequence numbers of the stored items, in storage order.
  std::vector<uint64_t> sequence_numbers() const;

  // Line-delimited JSON: one header record, then one record per trajectory.
  void WriteSnapshot(std::ostream& out) const;
  static TrajectoryBuffer ReadSnapshot(std::istream& in);

 private:
  struct Entry {
    TrajectoryPtr trajectory;
    uint64_t sequence;
  };

  DeletionStrategy strategy_;
  double alpha_;
  Rng rng_;
  std::vector<Entry> entries_;
  uint64_t next_sequence_ = 0;
  size_t budget_ = 0;
  int rounds_completed_ = 0;
};

}  // namespace deletion_lab

#endif  // DELETION_LAB_REPLAY_BUFFER_H_
