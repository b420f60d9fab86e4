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
#include "deletion_lab/replay_buffer.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "deletion_lab/error.h"
#include "json.hpp"

namespace deletion_lab {

using nlohmann::json;

void ValidateTrajectory(const Trajectory& t) {
  if (t.states.rows() < 1) {
    throw Error(ErrorCode::kShapeMismatch, "trajectory has no steps");
  }
  if (t.actions.rows() != t.states.rows()) {
    throw Error(ErrorCode::kShapeMismatch,
                "trajectory states/actions length differ");
  }
  if (!t.context.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "trajectory context not finite");
  }
  if (t.round < 1) {
    throw Error(ErrorCode::kInvalidArgument, "trajectory round must be >= 1");
  }
}

std::string_view StrategyName(DeletionStrategy s) {
  switch (s) {
    case DeletionStrategy::kRandom: return "random";
    case DeletionStrategy::kStale: return "stale";
    case DeletionStrategy::kUniform: return "uniform";
  }
  return "?";
}

DeletionStrategy ParseStrategy(std::string_view name) {
  if (name == "random") return DeletionStrategy::kRandom;
  if (name == "stale") return DeletionStrategy::kStale;
  if (name == "uniform") return DeletionStrategy::kUniform;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown deletion strategy '" + std::string(name) +
                  "' (expected random, stale or uniform)");
}

size_t RetainedCount(double alpha, size_t n) {
  const double x = alpha * static_cast<double>(n);
  return std::min(n, static_cast<size_t>(std::ceil(x - 1e-9)));
}

SurvivalStats SurvivalTable(double alpha, int rounds) {
  if (!(alpha > 0.0 && alpha <= 1.0) || rounds < 1) {
    throw Error(ErrorCode::kInvalidArgument, "SurvivalTable: bad alpha/rounds");
  }
  SurvivalStats s;
  double p = 1.0;
  for (int r = 1; r <= rounds; ++r) {
    s.by_round.push_back(p);
    p *= alpha;
  }
  return s;
}

TrajectoryBuffer::TrajectoryBuffer(DeletionStrategy strategy, double alpha,
                                   Rng rng)
    : strategy_(strategy), alpha_(alpha), rng_(rng) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1]");
  }
}

void TrajectoryBuffer::Add(Trajectory trajectory) {
  ValidateTrajectory(trajectory);
  if (!entries_.empty() &&
      trajectory.round < entries_.back().trajectory->round) {
    throw Error(ErrorCode::kInvalidArgument,
                "round tags must be non-decreasing in insertion order");
  }
  entries_.push_back(
      {std::make_shared<const Trajectory>(std::move(trajectory)),
       next_sequence_++});
  ++budget_;
}

void TrajectoryBuffer::EndOfRound() {
  if (entries_.empty()) {
    throw Error(ErrorCode::kEmptyBuffer, "EndOfRound on empty buffer");
  }
  ++rounds_completed_;
  switch (strategy_) {
    case DeletionStrategy::kRandom: {
      const auto keep = UniformSubset(rng_, entries_.size(),
                                      RetainedCount(alpha_, entries_.size()));
      std::vector<Entry> kept;
      kept.reserve(keep.size());
      for (size_t i : keep) kept.push_back(entries_[i]);
      entries_ = std::move(kept);
      budget_ = entries_.size();
      break;
    }
    case DeletionStrategy::kStale: {
      const size_t keep = RetainedCount(alpha_, entries_.size());
      std::vector<Entry> order = entries_;
      std::stable_sort(order.begin(), order.end(),
                       [](const Entry& a, const Entry& b) {
                         if (a.trajectory->round != b.trajectory->round) {
                           return a.trajectory->round > b.trajectory->round;
                         }
                         return a.sequence > b.sequence;
                       });
      order.resize(keep);
      std::sort(order.begin(), order.end(),
                [](const Entry& a, const Entry& b) {
                  return a.sequence < b.sequence;
                });
      entries_ = std::move(order);
      budget_ = entries_.size();
      break;
    }
    case DeletionStrategy::kUniform:
      budget_ = RetainedCount(alpha_, budget_);
      break;
  }
}

std::vector<TrajectoryPtr> TrajectoryBuffer::SampleTrainingView() {
  if (entries_.empty()) {
    throw Error(ErrorCode::kEmptyBuffer, "SampleTrainingView on empty buffer");
  }
  if (strategy_ != DeletionStrategy::kUniform || budget_ >= entries_.size()) {
    return items();
  }
  std::vector<TrajectoryPtr> view;
  view.reserve(budget_);
  for (size_t i : UniformSubset(rng_, entries_.size(), budget_)) {
    view.push_back(entries_[i].trajectory);
  }
  return view;
}

std::vector<TrajectoryPtr> TrajectoryBuffer::items() const {
  std::vector<TrajectoryPtr> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.trajectory);
  return out;
}

std::vector<uint64_t> TrajectoryBuffer::sequence_numbers() const {
  std::vector<uint64_t> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.sequence);
  return out;
}

namespace {

json MatrixRows(const Mat& m) {
  json flat = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return flat;
}

Mat ReadRows(const json& flat, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw Error(ErrorCode::kIoError, "snapshot: flattened size mismatch");
  }
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = flat[static_cast<size_t>(r * cols + c)].get<double>();
    }
  }
  return m;
}

}  // namespace

void TrajectoryBuffer::WriteSnapshot(std::ostream& out) const {
  json header = {{"record", "buffer"},
                 {"version", 1},
                 {"strategy", std::string(StrategyName(strategy_))},
                 {"alpha", alpha_},
                 {"budget", budget_},
                 {"rounds_completed", rounds_completed_},
                 {"next_sequence", next_sequence_},
                 {"rng_key", rng_.key()},
                 {"rng_counter", rng_.counter()}};
  out << header.dump() << '\n';
  for (const auto& e : entries_) {
    const Trajectory& t = *e.trajectory;
    json rec = {{"record", "trajectory"},
                {"sequence", e.sequence},
                {"round", t.round},
                {"context", std::vector<double>(t.context.data(),
                                                t.context.data() + t.context.size())},
                {"T", t.length()},
                {"s_dim", t.states.cols()},
                {"a_dim", t.actions.cols()},
                {"states", MatrixRows(t.states)},
                {"actions", MatrixRows(t.actions)}};
    out << rec.dump() << '\n';
  }
}

TrajectoryBuffer TrajectoryBuffer::ReadSnapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kIoError, "snapshot: missing header");
  }
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("snapshot header: ") + e.what());
  }
  if (header.value("record", "") != "buffer" || header.value("version", 0) != 1) {
    throw Error(ErrorCode::kIoError, "snapshot: unsupported header");
  }
  TrajectoryBuffer buf(
      ParseStrategy(header.at("strategy").get<std::string>()),
      header.at("alpha").get<double>(),
      Rng::FromState(header.at("rng_key").get<uint64_t>(),
                     header.at("rng_counter").get<uint64_t>()));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      Trajectory t;
      const auto steps = rec.at("T").get<Eigen::Index>();
      t.round = rec.at("round").get<int>();
      const auto ctx = rec.at("context").get<std::vector<double>>();
      t.context = Eigen::Map<const Vec>(ctx.data(), static_cast<Eigen::Index>(ctx.size()));
      t.states = ReadRows(rec.at("states"), steps, rec.at("s_dim").get<Eigen::Index>());
      t.actions = ReadRows(rec.at("actions"), steps, rec.at("a_dim").get<Eigen::Index>());
      ValidateTrajectory(t);
      buf.entries_.push_back({std::make_shared<const Trajectory>(std::move(t)),
                              rec.at("sequence").get<uint64_t>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kIoError, std::string("snapshot record: ") + e.what());
    }
  }
  buf.budget_ = header.at("budget").get<size_t>();
  buf.rounds_completed_ = header.at("rounds_completed").get<int>();
  buf.next_sequence_ = header.at("next_sequence").get<uint64_t>();
  return buf;
}

}  // namespace deletion_lab
