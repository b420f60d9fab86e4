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
#include "deletion_lab/adapt_train.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "deletion_lab/error.h"
#include "deletion_lab/parallel.h"
#include "deletion_lab/tolerances.h"

namespace deletion_lab {

using nlohmann::json;

namespace {

constexpr uint64_t kInitStream = 0;
constexpr uint64_t kBufferStream = 1;
constexpr uint64_t kCollectStream = 2;
constexpr uint64_t kTrainStream = 3;
constexpr uint64_t kValidationStream = 4;
constexpr uint64_t kEvalStream = 7;

std::string Where(int round, const std::string& what) {
  return "round " + std::to_string(round) + ": " + what;
}

}  // namespace

void ValidatePlan(const RoundPlan& plan) {
  if (plan.rounds < 1) throw Error(ErrorCode::kInvalidArgument, "plan.rounds must be >= 1");
  if (plan.episodes_per_round < 1) {
    throw Error(ErrorCode::kInvalidArgument, "plan.episodes_per_round must be >= 1");
  }
  if (!(plan.alpha > 0.0 && plan.alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "plan.alpha must be in (0, 1]");
  }
  if (plan.validation_episodes < 0 || plan.refresh_every < 1 || plan.estimator.k < 0) {
    throw Error(ErrorCode::kInvalidArgument, "bad validation/refresh/k setting");
  }
}

TrainingResult RunTraining(const CmdpSpec& spec, const ContextSet& train,
                           UniversalPolicyPtr k, const RoundPlan& plan,
                           const Rng& rng) {
  ValidatePlan(plan);
  if (train.contexts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "RunTraining: empty C_tr");
  }
  ValidateContexts(spec, train);
  EstimatorShape shape{spec.s_dim, spec.a_dim, spec.c_dim, plan.estimator.k};
  Rng init = rng.Split(kInitStream);
  auto phi = std::make_shared<Estimator>(
      plan.estimator.arch == EstimatorArch::kMlp
          ? Estimator::Mlp(shape, plan.estimator.widths, init)
          : Estimator::Gru(shape, plan.estimator.gru_hidden, init));

  TrainingResult result;
  result.buffer = std::make_shared<TrajectoryBuffer>(plan.strategy, plan.alpha,
                                                     rng.Split(kBufferStream));
  for (int round = 1; round <= plan.rounds; ++round) {
    RoundLog log;
    log.round = round;
    std::shared_ptr<ControllerFactory> adaptive;
    if (round > 1) adaptive = WithEstimator(k, phi, spec, plan.refresh_every);

    Rng collect = rng.Split(kCollectStream).Split(static_cast<uint64_t>(round));
    Rng picker = collect.Split(0);
    double ret = 0.0;
    for (int e = 0; e < plan.episodes_per_round; ++e) {
      const Vec& c = train.contexts[picker.UniformInt(train.contexts.size())];
      Episode ep;
      try {
        if (round == 1) {
          ep = Rollout(spec, c, *WithContext(k, c, spec),
                       collect.Split(1 + static_cast<uint64_t>(e)));
        } else {
          ep = Rollout(spec, c, *adaptive, collect.Split(1 + static_cast<uint64_t>(e)));
        }
      } catch (const Error& err) {
        throw Error(err.code(), Where(round, err.what()));
      }
      ret += ep.undiscounted_return;
      ep.trajectory.round = round;
      auto stored = std::make_shared<Trajectory>(std::move(ep.trajectory));
      if (round == 1) result.round1.push_back(stored);
      result.buffer->Add(*stored);
    }
    log.mean_episode_return = ret / plan.episodes_per_round;

    std::vector<TrajectoryPtr> view = result.buffer->SampleTrainingView();
    log.buffer_size = result.buffer->size();
    log.view_size = view.size();
    TrainConfig cfg = plan.train;
    cfg.seed = rng.Split(kTrainStream).Split(static_cast<uint64_t>(round)).NextU64();
    TrainLog tlog;
    try {
      phi = std::make_shared<Estimator>(TrainRound(*phi, view, cfg, &tlog));
    } catch (const Error& err) {
      throw Error(err.code(), Where(round, err.what()));
    }
    log.loss = std::move(tlog.loss);
    log.final_train_loss = log.loss.empty() ? 0.0 : log.loss.back();

    if (plan.validation_episodes > 0) {
      auto pi = WithEstimator(k, phi, spec, plan.refresh_every);
      Rng val = rng.Split(kValidationStream).Split(static_cast<uint64_t>(round));
      Rng vpick = val.Split(0);
      std::vector<TrajectoryPtr> held_out;
      for (int e = 0; e < plan.validation_episodes; ++e) {
        const Vec& c = train.contexts[vpick.UniformInt(train.contexts.size())];
        try {
          held_out.push_back(std::make_shared<Trajectory>(
              Rollout(spec, c, *pi, val.Split(1 + static_cast<uint64_t>(e))).trajectory));
        } catch (const Error& err) {
          throw Error(err.code(), Where(round, err.what()));
        }
      }
      log.validation_loss = phi->EvaluateLoss(held_out);
    }
    if (round < plan.rounds) result.buffer->EndOfRound();
    result.rounds.push_back(std::move(log));
  }
  result.estimator = phi;
  return result;
}

std::vector<ValueEstimate> OracleReturns(const CmdpSpec& spec,
                                         const ContextSet& eval,
                                         UniversalPolicyPtr k_true,
                                         int n_episodes, const Rng& rng) {
  std::vector<ValueEstimate> out(eval.contexts.size());
  ParallelFor(eval.contexts.size(), [&](size_t j) {
    const Vec& c = eval.contexts[j];
    out[j] = EstimateValue(spec, c, *WithContext(k_true, c, spec), n_episodes,
                           rng.Split(j));
  });
  return out;
}

RobustnessReport GapFromReturns(const std::vector<double>& j_star,
                                const std::vector<double>& j_pi) {
  if (j_star.size() != j_pi.size() || j_star.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "gap: J* and J_pi sizes differ or empty");
  }
  RobustnessReport r;
  r.j_star = j_star;
  r.j_pi = j_pi;
  double sum = 0.0;
  r.max_gap = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < j_star.size(); ++i) {
    if (!(std::abs(j_star[i]) > tol::kGapBaseline)) {
      throw Error(ErrorCode::kDegenerateBaseline,
                  "|J*(c)| <= 1e-6 for evaluation context " + std::to_string(i));
    }
    const double g = (j_star[i] - j_pi[i]) / std::abs(j_star[i]);
    if (!std::isfinite(g)) throw Error(ErrorCode::kNonFiniteState, "gap not finite");
    r.gap.push_back(g);
    sum += g;
    r.max_gap = std::max(r.max_gap, g);
  }
  r.mean_gap = sum / static_cast<double>(j_star.size());
  return r;
}

RobustnessReport RobustnessGap(const CmdpSpec& spec, const ContextSet& eval,
                               const PolicyForContext& pi,
                               const std::vector<double>& j_star,
                               int n_episodes, const Rng& rng) {
  if (j_star.size() != eval.contexts.size()) {
    throw Error(ErrorCode::kInvalidArgument, "gap: one J* per evaluation context");
  }
  for (size_t i = 0; i < j_star.size(); ++i) {
    if (!(std::abs(j_star[i]) > tol::kGapBaseline)) {
      throw Error(ErrorCode::kDegenerateBaseline,
                  "|J*(c)| <= 1e-6 for evaluation context " + std::to_string(i));
    }
  }
  std::vector<ValueEstimate> values(eval.contexts.size());
  ParallelFor(eval.contexts.size(), [&](size_t j) {
    const Vec& c = eval.contexts[j];
    values[j] = EstimateValue(spec, c, *pi(c), n_episodes, rng.Split(j));
  });
  std::vector<double> j_pi;
  for (const auto& v : values) j_pi.push_back(v.mean);
  RobustnessReport r = GapFromReturns(j_star, j_pi);
  for (const auto& v : values) r.j_pi_std.push_back(v.std);
  r.contexts = eval.contexts;
  r.n_episodes = n_episodes;
  r.rng_key = rng.key();
  return r;
}

std::vector<CellResult> RunCells(const ExperimentSetup& setup,
                                 const std::vector<CellSpec>& cells) {
  std::map<uint64_t, std::vector<double>> j_star;
  for (const auto& cell : cells) {
    if (j_star.count(cell.seed)) continue;
    auto values = OracleReturns(setup.spec, setup.eval, setup.k_true,
                                setup.eval_episodes, Rng(cell.seed).Split(kEvalStream));
    std::vector<double> means;
    for (const auto& v : values) means.push_back(v.mean);
    j_star[cell.seed] = std::move(means);
  }
  std::vector<CellResult> out(cells.size());
  ParallelFor(cells.size(), [&](size_t i) {
    CellResult& res = out[i];
    res.cell = cells[i];
    try {
      RoundPlan plan = setup.plan;
      plan.alpha = cells[i].alpha;
      plan.strategy = cells[i].strategy;
      plan.estimator.arch = cells[i].arch;
      Rng rng(cells[i].seed);
      TrainingResult tr = RunTraining(setup.spec, setup.train, setup.k, plan, rng);
      auto phi = tr.estimator;
      const CmdpSpec& spec = setup.spec;
      UniversalPolicyPtr k = setup.k;
      const int refresh = plan.refresh_every;
      PolicyForContext pi = [&, phi, k, refresh](const Vec&) {
        return WithEstimator(k, phi, spec, refresh);
      };
      res.report = RobustnessGap(spec, setup.eval, pi, j_star.at(cells[i].seed),
                                 setup.eval_episodes, rng.Split(kEvalStream));
      res.max_gap = res.report.max_gap;
      res.mean_gap = res.report.mean_gap;
      res.final_validation_loss = tr.rounds.back().validation_loss;
      res.rounds = std::move(tr.rounds);
      res.ok = true;
    } catch (const std::exception& e) {
      res.ok = false;
      res.error = e.what();
    }
  });
  return out;
}

std::vector<CellResult> SweepAlpha(const ExperimentSetup& setup,
                                   const std::vector<double>& alphas,
                                   const std::vector<uint64_t>& seeds) {
  if (alphas.empty() || seeds.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "sweep: empty alpha grid or seeds");
  }
  std::vector<CellSpec> cells;
  for (double a : alphas) {
    for (uint64_t s : seeds) {
      cells.push_back({setup.plan.estimator.arch, setup.plan.strategy, a, s});
    }
  }
  return RunCells(setup, cells);
}

std::vector<CellResult> AblateStrategies(
    const ExperimentSetup& setup, const std::vector<DeletionStrategy>& strategies,
    const std::vector<EstimatorArch>& archs, const std::vector<uint64_t>& seeds) {
  if (strategies.empty() || archs.empty() || seeds.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "ablation: empty strategy/arch/seed list");
  }
  std::vector<CellSpec> cells;
  for (EstimatorArch arch : archs) {
    for (DeletionStrategy s : strategies) {
      for (uint64_t seed : seeds) cells.push_back({arch, s, setup.plan.alpha, seed});
    }
  }
  return RunCells(setup, cells);
}

std::vector<SummaryRow> Summarize(const std::vector<CellResult>& cells) {
  std::vector<SummaryRow> rows;
  std::map<std::tuple<int, int, double>, size_t> index;
  std::vector<std::vector<double>> values;
  for (const auto& c : cells) {
    auto key = std::make_tuple(static_cast<int>(c.cell.arch),
                               static_cast<int>(c.cell.strategy), c.cell.alpha);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      SummaryRow row;
      row.alpha = c.cell.alpha;
      row.strategy = std::string(StrategyName(c.cell.strategy));
      row.arch = std::string(ArchName(c.cell.arch));
      row.key = row.arch + "/" + row.strategy + "/" + std::to_string(row.alpha);
      rows.push_back(row);
      values.emplace_back();
    }
    if (c.ok) values[it->second].push_back(c.max_gap);
  }
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& v = values[i];
    rows[i].n = static_cast<int>(v.size());
    if (v.empty()) {
      rows[i].mean_gap = std::numeric_limits<double>::quiet_NaN();
      rows[i].std_gap = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    rows[i].mean_gap = sum / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - rows[i].mean_gap) * (x - rows[i].mean_gap);
    rows[i].std_gap = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  }
  return rows;
}

json ToJson(const RobustnessReport& r) {
  json contexts = json::array();
  for (const Vec& c : r.contexts) {
    contexts.push_back(std::vector<double>(c.data(), c.data() + c.size()));
  }
  return {{"contexts", contexts}, {"j_star", r.j_star},   {"j_pi", r.j_pi},
          {"j_pi_std", r.j_pi_std}, {"gap", r.gap},       {"max_gap", r.max_gap},
          {"mean_gap", r.mean_gap}, {"n_episodes", r.n_episodes},
          {"rng_key", r.rng_key}};
}

json ToJson(const RoundLog& r) {
  return {{"round", r.round},
          {"buffer_size", r.buffer_size},
          {"view_size", r.view_size},
          {"mean_episode_return", r.mean_episode_return},
          {"final_train_loss", r.final_train_loss},
          {"validation_loss", r.validation_loss},
          {"loss", r.loss}};
}

json ToJson(const CellResult& r) {
  json rounds = json::array();
  for (const auto& l : r.rounds) rounds.push_back(ToJson(l));
  json j = {{"arch", std::string(ArchName(r.cell.arch))},
            {"strategy", std::string(StrategyName(r.cell.strategy))},
            {"alpha", r.cell.alpha},
            {"seed", r.cell.seed},
            {"ok", r.ok},
            {"rounds", rounds}};
  if (r.ok) {
    j["max_gap"] = r.max_gap;
    j["mean_gap"] = r.mean_gap;
    j["final_validation_loss"] = r.final_validation_loss;
    j["report"] = ToJson(r.report);
  } else {
    j["error"] = r.error;
  }
  return j;
}

}  // namespace deletion_lab
