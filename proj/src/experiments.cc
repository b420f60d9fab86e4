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
#include "deletion_lab/experiments.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

#include "deletion_lab/cmdp.h"
#include "deletion_lab/erm.h"
#include "deletion_lab/extra_class.h"
#include "deletion_lab/parallel.h"
#include "deletion_lab/policy.h"
#include "deletion_lab/replay_buffer.h"

namespace deletion_lab {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

const std::vector<std::string>& Kinds() {
  static const std::vector<std::string> kinds = {
      "train-adaptive", "sweep-alpha",  "ablate-strategies", "verify-theorem",
      "corollary-sweep", "extra-class", "survival-table"};
  return kinds;
}

double Seconds(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string Num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

// Minimal CSV builder; fields never contain commas except error text,
// which is quoted.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : width_(header.size()) { Row(header); }
  void Row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw Error(ErrorCode::kShapeMismatch, "csv row width");
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      const std::string& f = fields[i];
      if (f.find_first_of(",\"\n") != std::string::npos) {
        out_ << '"';
        for (char c : f) {
          if (c == '"') out_ << '"';
          out_ << (c == '\n' ? ' ' : c);
        }
        out_ << '"';
      } else {
        out_ << f;
      }
    }
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  size_t width_;
  std::ostringstream out_;
};

class Artifacts {
 public:
  Artifacts(std::filesystem::path dir, RunManifest* manifest)
      : dir_(std::move(dir)), manifest_(manifest) {}
  void Write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    WriteFileAtomic(path, content);
    manifest_->artifacts[name] = path.string();
  }
  void WriteJson(const std::string& name, const json& j) { Write(name, j.dump(2) + "\n"); }

 private:
  std::filesystem::path dir_;
  RunManifest* manifest_;
};

CorollaryParams ReadParams(ConfigReader& r) {
  CorollaryParams p;
  p.k1 = r.Double("k1", p.k1);
  p.k2 = r.Double("k2", p.k2);
  p.k3 = r.Double("k3", p.k3);
  ValidateParams(p);
  return p;
}

void Require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::kConfigError, msg);
}

std::vector<CellResult> OkOnly(const std::vector<CellResult>& cells) {
  std::vector<CellResult> ok;
  for (const auto& c : cells) {
    if (c.ok) ok.push_back(c);
  }
  return ok;
}

// Fails the run if every cell failed; partial failures stay in the CSV.
void CheckCells(const std::vector<CellResult>& cells) {
  if (cells.empty() || !OkOnly(cells).empty()) return;
  throw Error(ErrorCode::kSolverFailure, "all cells failed; first error: " + cells[0].error);
}

std::string SummaryCsv(const std::vector<CellResult>& cells) {
  Csv csv({"arch", "strategy", "alpha", "n", "mean_max_gap", "std_max_gap"});
  for (const auto& row : Summarize(OkOnly(cells))) {
    csv.Row({row.arch, row.strategy, Num(row.alpha), std::to_string(row.n),
             Num(row.mean_gap), Num(row.std_gap)});
  }
  return csv.str();
}

json SummaryJson(const std::vector<CellResult>& cells) {
  json rows = json::array();
  for (const auto& row : Summarize(OkOnly(cells))) {
    rows.push_back({{"arch", row.arch},
                    {"strategy", row.strategy},
                    {"alpha", row.alpha},
                    {"n", row.n},
                    {"mean_max_gap", row.mean_gap},
                    {"std_max_gap", row.std_gap}});
  }
  int failed = 0;
  for (const auto& c : cells) failed += c.ok ? 0 : 1;
  return {{"cells", cells.size()}, {"failed", failed}, {"summary", rows}};
}

json RunTrainAdaptive(ConfigReader& r, Artifacts& out, RunManifest& m) {
  const uint64_t seed = r.U64("seed", 1);
  ExperimentSetup setup = SetupFromConfig(r);
  r.Finish();
  m.seeds = {seed};

  Rng rng(seed);
  TrainingResult tr = RunTraining(setup.spec, setup.train, setup.k, setup.plan, rng);
  auto values = OracleReturns(setup.spec, setup.eval, setup.k_true, setup.eval_episodes,
                              Rng(seed).Split(7));
  std::vector<double> j_star;
  for (const auto& v : values) j_star.push_back(v.mean);
  auto phi = tr.estimator;
  UniversalPolicyPtr k = setup.k;
  const int refresh = setup.plan.refresh_every;
  const CmdpSpec& spec = setup.spec;
  PolicyForContext pi = [&spec, phi, k, refresh](const Vec&) {
    return WithEstimator(k, phi, spec, refresh);
  };
  RobustnessReport report =
      RobustnessGap(spec, setup.eval, pi, j_star, setup.eval_episodes, rng.Split(7));

  Csv rounds({"round", "buffer_size", "view_size", "mean_episode_return", "final_train_loss",
              "validation_loss"});
  json round_json = json::array();
  for (const auto& l : tr.rounds) {
    rounds.Row({std::to_string(l.round), std::to_string(l.buffer_size),
                std::to_string(l.view_size), Num(l.mean_episode_return),
                Num(l.final_train_loss), Num(l.validation_loss)});
    round_json.push_back(ToJson(l));
  }
  out.Write("rounds.csv", rounds.str());

  Csv gap({"context_index", "context", "j_star", "j_pi", "j_pi_std", "gap"});
  for (size_t i = 0; i < report.contexts.size(); ++i) {
    std::string c;
    for (Eigen::Index q = 0; q < report.contexts[i].size(); ++q) {
      c += (q ? ";" : "") + Num(report.contexts[i](q));
    }
    gap.Row({std::to_string(i), c, Num(report.j_star[i]), Num(report.j_pi[i]),
             Num(report.j_pi_std[i]), Num(report.gap[i])});
  }
  out.Write("gap.csv", gap.str());
  out.WriteJson("estimator.json", phi->ToJson());
  out.WriteJson("universal_policy.json", setup.k->ToJson());
  json summary = {{"seed", seed},
                  {"arch", std::string(ArchName(setup.plan.estimator.arch))},
                  {"strategy", std::string(StrategyName(setup.plan.strategy))},
                  {"alpha", setup.plan.alpha},
                  {"max_gap", report.max_gap},
                  {"mean_gap", report.mean_gap},
                  {"rounds", round_json},
                  {"report", ToJson(report)}};
  out.WriteJson("result.json", summary);
  return {{"max_gap", report.max_gap}, {"mean_gap", report.mean_gap}};
}

json RunSweepAlpha(ConfigReader& r, Artifacts& out, RunManifest& m) {
  const auto seeds = r.Seeds("seeds", {1, 2, 3, 4, 5});
  const auto alphas = r.Doubles("alphas", {0.5, 0.8, 0.9, 1.0});
  ExperimentSetup setup = SetupFromConfig(r);
  r.Finish();
  for (double a : alphas) Require(a > 0.0 && a <= 1.0, "alphas must lie in (0, 1]");
  m.seeds = seeds;

  auto cells = SweepAlpha(setup, alphas, seeds);
  CheckCells(cells);
  Csv csv({"alpha", "seed", "max_gap", "mean_gap", "final_validation_loss", "status"});
  json cell_json = json::array();
  for (const auto& c : cells) {
    csv.Row({Num(c.cell.alpha), std::to_string(c.cell.seed), c.ok ? Num(c.max_gap) : "",
             c.ok ? Num(c.mean_gap) : "", c.ok ? Num(c.final_validation_loss) : "",
             c.ok ? "ok" : c.error});
    cell_json.push_back(ToJson(c));
  }
  out.Write("sweep_alpha.csv", csv.str());
  out.Write("summary.csv", SummaryCsv(cells));
  json summary = SummaryJson(cells);
  out.WriteJson("cells.json", cell_json);
  out.WriteJson("summary.json", summary);
  return summary;
}

json RunAblate(ConfigReader& r, Artifacts& out, RunManifest& m) {
  const auto seeds = r.Seeds("seeds", {1, 2, 3, 4, 5});
  const auto strategy_names = r.Strings("strategies", {"random", "stale", "uniform"});
  const auto arch_names = r.Strings("archs", {"mlp", "gru"});
  ExperimentSetup setup = SetupFromConfig(r);
  r.Finish();
  if (!r.Has("alpha")) setup.plan.alpha = 0.8;
  std::vector<DeletionStrategy> strategies;
  for (const auto& s : strategy_names) strategies.push_back(ParseStrategy(s));
  std::vector<EstimatorArch> archs;
  for (const auto& a : arch_names) archs.push_back(ParseArch(a));
  m.seeds = seeds;

  auto cells = AblateStrategies(setup, strategies, archs, seeds);
  CheckCells(cells);
  Csv csv({"strategy", "arch", "alpha", "seed", "max_gap", "mean_gap", "round1_validation_loss",
           "status"});
  json cell_json = json::array();
  for (const auto& c : cells) {
    const bool has_r1 = c.ok && !c.rounds.empty();
    csv.Row({std::string(StrategyName(c.cell.strategy)), std::string(ArchName(c.cell.arch)),
             Num(c.cell.alpha), std::to_string(c.cell.seed), c.ok ? Num(c.max_gap) : "",
             c.ok ? Num(c.mean_gap) : "", has_r1 ? Num(c.rounds.front().validation_loss) : "",
             c.ok ? "ok" : c.error});
    cell_json.push_back(ToJson(c));
  }
  out.Write("ablation.csv", csv.str());
  out.Write("summary.csv", SummaryCsv(cells));
  json summary = SummaryJson(cells);
  out.WriteJson("cells.json", cell_json);
  out.WriteJson("summary.json", summary);
  return summary;
}

json RunInstanceFile(const std::string& path, Artifacts& out) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open instances_file '" + path + "'");
  std::ostringstream lines;
  const int count = EvaluateInstanceLines(in, lines);
  int verdict = 0;
  int drop = 0;
  int counterexamples = 0;
  std::istringstream back(lines.str());
  std::string line;
  while (std::getline(back, line)) {
    const json j = json::parse(line);
    verdict += j.at("verdict").get<std::string>() == "theorem-guaranteed" ? 1 : 0;
    drop += j.at("loss_decreased").get<bool>() ? 1 : 0;
    counterexamples += j.at("counterexample").get<bool>() ? 1 : 0;
  }
  out.Write("reports.jsonl", lines.str());
  return {{"instances", count},
          {"verdict_true", verdict},
          {"loss_decreased", drop},
          {"counterexamples", counterexamples}};
}

json RunVerifyTheoremKind(ConfigReader& r, Artifacts& out, RunManifest& m) {
  const std::string file = r.String("instances_file", "");
  if (!file.empty()) {
    r.Finish();
    json summary = RunInstanceFile(file, out);
    out.WriteJson("report.json", {{"summary", summary}});
    return summary;
  }
  VerifyTheoremConfig cfg;
  cfg.instances = r.Int("instances", cfg.instances);
  cfg.seed = r.U64("seed", cfg.seed);
  cfg.d = r.Int("d", cfg.d);
  cfg.n = r.Int("n", cfg.n);
  cfg.r = r.Double("R", cfg.r);
  cfg.snr = r.Double("snr", cfg.snr);
  cfg.params = ReadParams(r);
  cfg.placement_lo = r.Double("placement_lo", cfg.placement_lo);
  cfg.placement_hi = r.Double("placement_hi", cfg.placement_hi);
  r.Finish();
  m.seeds = {cfg.seed};

  VerifyTheoremResult res = RunVerifyTheorem(cfg);
  Csv csv({"instance", "d", "N", "R", "lambda", "snr", "D", "C", "condition", "verdict", "corollary_pass",
           "expected_delta", "realized_delta", "counterexample"});
  json reports = json::array();
  for (size_t i = 0; i < res.reports.size(); ++i) {
    const auto& rep = res.reports[i];
    csv.Row({std::to_string(i), std::to_string(rep.d), std::to_string(rep.n), Num(rep.r),
             Num(rep.lambda), Num(rep.snr), Num(rep.d_value),
             Num(rep.c_value), Num(rep.condition), rep.verdict ? "1" : "0",
             rep.corollary.pass ? "1" : "0", Num(rep.expected.delta), Num(rep.realized.delta),
             rep.counterexample ? "1" : "0"});
    reports.push_back(ToJson(rep));
  }
  const int passing = res.corollary_pass;
  json summary = {
      {"instances", res.reports.size()},
      {"corollary_pass", passing},
      {"verdict_true", res.verdict_true},
      {"expected_loo_decrease", res.expected_drop},
      {"soundness", passing ? static_cast<double>(res.expected_drop) / passing : 0.0},
      {"realized_loo_decrease", res.realized_drop},
      {"realized_rate", passing ? static_cast<double>(res.realized_drop) / passing : 0.0},
      {"counterexamples", res.counterexamples},
      {"params_margin", ParamsMargin(cfg.params)},
      {"seconds", res.seconds}};
  out.Write("instances.csv", csv.str());
  out.WriteJson("report.json", {{"summary", summary}, {"instances", reports}});
  return summary;
}

json RunCorollarySweepKind(ConfigReader& r, Artifacts& out, RunManifest& m) {
  CorollarySweepConfig cfg;
  const auto dims = r.Doubles("dims", {5});
  const auto ns = r.Doubles("ns", {50});
  cfg.dims.clear();
  cfg.ns.clear();
  for (double d : dims) cfg.dims.push_back(static_cast<int>(d));
  for (double n : ns) cfg.ns.push_back(static_cast<int>(n));
  cfg.snrs = r.Doubles("snrs", cfg.snrs);
  cfg.instances = r.Int("instances", cfg.instances);
  cfg.r = r.Double("R", cfg.r);
  cfg.seed = r.U64("seed", cfg.seed);
  cfg.placement = r.Double("placement", cfg.placement);
  cfg.params = ReadParams(r);
  r.Finish();
  m.seeds = {cfg.seed};

  const CorollarySweepResult res = RunCorollarySweep(cfg);
  const auto& rows = res.rows;
  Csv per({"d", "N", "R", "SNR", "lambda", "D", "C", "condition", "exact_delta_loss", "pass",
           "verdict", "empty_window"});
  for (const auto& o : res.instances) {
    if (o.empty_window) {
      per.Row({std::to_string(o.d), std::to_string(o.n), Num(cfg.r), Num(o.target_snr), "", "",
               "", "", "", "0", "0", "1"});
      continue;
    }
    const auto& rep = o.report;
    per.Row({std::to_string(o.d), std::to_string(o.n), Num(rep.r), Num(rep.snr), Num(rep.lambda),
             Num(rep.d_value), Num(rep.c_value), Num(rep.condition), Num(rep.expected.delta),
             rep.corollary.pass ? "1" : "0", rep.verdict ? "1" : "0", "0"});
  }
  out.Write("corollary_instances.csv", per.str());
  Csv csv({"d", "n", "snr", "snr_threshold", "attempted", "empty_window", "corollary_pass",
           "verdict_true", "expected_loo_decrease", "chain_holds", "mean_lambda_lo",
           "mean_lambda_hi"});
  json arr = json::array();
  for (const auto& row : rows) {
    csv.Row({std::to_string(row.d), std::to_string(row.n), Num(row.snr),
             Num(row.snr_threshold), std::to_string(row.attempted),
             std::to_string(row.empty_window), std::to_string(row.corollary_pass),
             std::to_string(row.verdict_true), std::to_string(row.expected_drop),
             std::to_string(row.chain_holds), Num(row.mean_lambda_lo),
             Num(row.mean_lambda_hi)});
    arr.push_back({{"d", row.d},
                   {"n", row.n},
                   {"snr", row.snr},
                   {"snr_threshold", row.snr_threshold},
                   {"attempted", row.attempted},
                   {"empty_window", row.empty_window},
                   {"corollary_pass", row.corollary_pass},
                   {"verdict_true", row.verdict_true},
                   {"expected_loo_decrease", row.expected_drop},
                   {"chain_holds", row.chain_holds}});
  }
  out.Write("corollary_summary.csv", csv.str());
  out.WriteJson("corollary_sweep.json", arr);
  return {{"rows", rows.size()}, {"params_margin", ParamsMargin(cfg.params)}};
}

json RunExtraClassKind(ConfigReader& r, Artifacts& out, RunManifest& m) {
  ExtraClassConfig cfg;
  cfg.seeds = r.Int("seeds", cfg.seeds);
  cfg.seed = r.U64("seed", cfg.seed);
  cfg.delete_fraction = r.Double("delete_fraction", cfg.delete_fraction);
  cfg.test_per_class = r.Int("test_per_class", cfg.test_per_class);
  cfg.blob_std = r.Double("blob_std", cfg.blob_std);
  cfg.lambdas = r.Doubles("lambdas", cfg.lambdas);
  const auto sizes = r.Doubles("train_sizes", {120, 100, 60});
  r.Finish();
  cfg.train_sizes.clear();
  for (double s : sizes) cfg.train_sizes.push_back(static_cast<int>(s));
  ValidateExtraClassConfig(cfg);
  m.seeds = {cfg.seed};

  auto rows = RunExtraClassExperiment(cfg);
  Csv csv({"lambda", "acc_full", "acc_deleted", "std_full", "std_deleted", "diff", "seeds"});
  int better = 0;
  json arr = json::array();
  for (const auto& row : rows) {
    csv.Row({Num(row.lambda), Num(row.acc_full), Num(row.acc_deleted), Num(row.std_full),
             Num(row.std_deleted), Num(row.acc_deleted - row.acc_full),
             std::to_string(row.seeds)});
    if (row.acc_deleted > row.acc_full) ++better;
    arr.push_back({{"lambda", row.lambda},
                   {"acc_full", row.acc_full},
                   {"acc_deleted", row.acc_deleted},
                   {"std_full", row.std_full},
                   {"std_deleted", row.std_deleted}});
  }
  out.Write("extra_class.csv", csv.str());
  json summary = {{"lambdas_where_deletion_helps", better}, {"rows", arr}};
  out.WriteJson("extra_class.json", summary);
  return {{"lambdas_where_deletion_helps", better}};
}

json RunSurvivalKind(ConfigReader& r, Artifacts& out, RunManifest& m) {
  SurvivalConfig cfg;
  cfg.alpha = r.Double("alpha", cfg.alpha);
  cfg.rounds = r.Int("rounds", cfg.rounds);
  cfg.replays = r.Int("replays", cfg.replays);
  cfg.per_round = r.Int("per_round", cfg.per_round);
  cfg.seed = r.U64("seed", cfg.seed);
  r.Finish();
  m.seeds = {cfg.seed};
  auto rows = RunSurvivalReplay(cfg);
  Csv csv({"round", "analytic", "empirical"});
  json arr = json::array();
  for (const auto& row : rows) {
    csv.Row({std::to_string(row.round), Num(row.analytic), Num(row.empirical)});
    arr.push_back({{"round", row.round}, {"analytic", row.analytic}, {"empirical", row.empirical}});
  }
  out.Write("survival.csv", csv.str());
  out.WriteJson("survival.json", arr);
  return {{"rows", arr}};
}

}  // namespace

std::vector<std::string> ExperimentKinds() { return Kinds(); }

bool IsExperimentKind(const std::string& kind) {
  const auto& k = Kinds();
  return std::find(k.begin(), k.end(), kind) != k.end();
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotSpd:
    case ErrorCode::kNoConvergence:
    case ErrorCode::kNonFiniteState:
    case ErrorCode::kSearchDiverged:
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kDegenerateBaseline:
    case ErrorCode::kSolverFailure:
      return 3;
    default:
      return 2;
  }
}

ExperimentSetup SetupFromConfig(ConfigReader& r) {
  ExperimentSetup s;
  const std::string env = r.String("env", "pendulum");
  s.spec = MakeSpec(env, r.Section("spec"));

  Rng ctx_rng(r.U64("contexts.seed", 11));
  const int n_train = r.Int("contexts.train", 40);
  const int n_eval = r.Int("contexts.eval", 15);
  Require(n_train > 0 && n_eval > 0, "contexts.train and contexts.eval must be positive");
  s.train = SampleContexts(s.spec, static_cast<size_t>(n_train), ContextRole::kTrain, ctx_rng);
  s.eval = SampleContexts(s.spec, static_cast<size_t>(n_eval), ContextRole::kEval, ctx_rng);

  const std::string policy = r.String("policy", env == "pendulum" ? "analytic" : "cem");
  PolicySearchConfig cem;
  cem.population = r.Int("cem.population", cem.population);
  cem.elites = r.Int("cem.elites", cem.elites);
  cem.iterations = r.Int("cem.iterations", cem.iterations);
  cem.init_std = r.Double("cem.init_std", cem.init_std);
  cem.extra_std = r.Double("cem.extra_std", cem.extra_std);
  cem.carry_elites = r.Int("cem.carry_elites", cem.carry_elites);
  cem.episodes = r.Int("cem.episodes", cem.episodes);
  cem.hidden = r.Int("cem.hidden", cem.hidden);
  cem.seed = r.U64("cem.seed", cem.seed);
  if (policy == "analytic") {
    Require(env == "pendulum", "policy 'analytic' is only defined for env 'pendulum'");
    s.k = std::make_shared<AnalyticPendulumController>();
  } else if (policy == "cem") {
    s.k = TrainUniversal(s.spec, s.train, cem).policy;
  } else {
    std::ifstream f(policy);
    Require(static_cast<bool>(f), "policy must be 'analytic', 'cem' or a policy JSON path; cannot open '" + policy + "'");
    json j;
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfigError, "policy file " + policy + ": " + e.what());
    }
    s.k = PolicyFromJson(j);
  }
  Require(s.k->s_dim() == s.spec.s_dim && s.k->c_dim() == s.spec.c_dim &&
              s.k->a_dim() == s.spec.a_dim,
          "universal policy dimensions do not match env '" + env + "'");
  s.k_true = s.k;
  s.eval_episodes = r.Int("eval_episodes", s.eval_episodes);
  Require(s.eval_episodes >= 1, "eval_episodes must be >= 1");

  RoundPlan& p = s.plan;
  p.rounds = r.Int("rounds", p.rounds);
  p.episodes_per_round = r.Int("episodes", p.episodes_per_round);
  p.strategy = ParseStrategy(r.String("strategy", "random"));
  p.alpha = r.Double("alpha", p.alpha);
  p.validation_episodes = r.Int("validation_episodes", p.validation_episodes);
  p.refresh_every = r.Int("refresh_every", p.refresh_every);
  p.estimator.arch = ParseArch(r.String("arch", "mlp"));
  std::vector<int> widths;
  for (double w : r.Doubles("estimator.widths", {128, 32, 32})) widths.push_back(static_cast<int>(w));
  p.estimator.widths = widths;
  p.estimator.gru_hidden = r.Int("estimator.gru_hidden", p.estimator.gru_hidden);
  p.estimator.k = r.Int("estimator.k", p.estimator.k);
  p.train.learning_rate = r.Double("train.lr", p.train.learning_rate);
  p.train.momentum = r.Double("train.momentum", p.train.momentum);
  p.train.batch_size = r.Int("train.batch", p.train.batch_size);
  p.train.sequence_batch = r.Int("train.sequence_batch", p.train.sequence_batch);
  p.train.steps = r.Int("train.steps", p.train.steps);
  p.train.clip_norm = r.Double("train.clip_norm", p.train.clip_norm);
  ValidatePlan(p);
  return s;
}

VerifyTheoremResult RunVerifyTheorem(const VerifyTheoremConfig& cfg) {
  if (cfg.instances < 1 || cfg.d < 1 || cfg.n < 1 || !(cfg.r > 0.0) || !(cfg.snr > 0.0) ||
      !(cfg.placement_lo >= 0.0 && cfg.placement_lo <= cfg.placement_hi &&
        cfg.placement_hi <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "verify-theorem: invalid configuration");
  }
  ValidateParams(cfg.params);
  const auto t0 = Clock::now();
  VerifyTheoremResult res;
  res.reports.resize(static_cast<size_t>(cfg.instances));
  const Rng root(cfg.seed);
  ParallelFor(res.reports.size(), [&](size_t i) {
    Rng rng = root.Split(i);
    const double placement = rng.Uniform(cfg.placement_lo, cfg.placement_hi);
    RidgeInstance inst = GenerateInstance(cfg.d, cfg.n, cfg.r, cfg.snr, placement, cfg.params, rng);
    res.reports[i] = RidgeTheoremCheck(inst, cfg.params);
  });
  for (const auto& rep : res.reports) {
    res.verdict_true += rep.verdict ? 1 : 0;
    res.counterexamples += rep.counterexample ? 1 : 0;
    if (!rep.corollary.pass) continue;
    ++res.corollary_pass;
    res.expected_drop += rep.expected.delta < 0.0 ? 1 : 0;
    res.realized_drop += rep.realized.delta < 0.0 ? 1 : 0;
  }
  res.seconds = Seconds(t0);
  return res;
}

CorollarySweepResult RunCorollarySweep(const CorollarySweepConfig& cfg) {
  if (cfg.instances < 1 || cfg.dims.empty() || cfg.ns.empty() || cfg.snrs.empty() ||
      !(cfg.r > 0.0) || !(cfg.placement >= 0.0 && cfg.placement <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "corollary-sweep: invalid configuration");
  }
  for (int d : cfg.dims) Require(d >= 1, "dims must be positive");
  for (int n : cfg.ns) Require(n >= 1, "ns must be positive");
  for (double s : cfg.snrs) Require(s > 0.0, "snrs must be positive");
  ValidateParams(cfg.params);
  const double threshold = ParamsMargin(cfg.params) / 3.0;
  CorollarySweepResult result;
  uint64_t cell = 0;
  for (int d : cfg.dims) {
    for (int n : cfg.ns) {
      for (double snr : cfg.snrs) {
        const Rng root = Rng(cfg.seed).Split(cell++);
        std::vector<CorollaryInstanceRow> batch(static_cast<size_t>(cfg.instances));
        ParallelFor(batch.size(), [&](size_t i) {
          Rng rng = root.Split(i);
          CorollaryInstanceRow& o = batch[i];
          o.d = d;
          o.n = n;
          o.target_snr = snr;
          try {
            RidgeInstance inst = GenerateInstance(d, n, cfg.r, snr, cfg.placement, cfg.params, rng);
            o.report = RidgeTheoremCheck(inst, cfg.params);
            o.chain = CheckBoundChain(inst, cfg.params);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::kEmptyWindow) throw;
            o.empty_window = true;
          }
        });
        CorollarySweepRow row;
        row.d = d;
        row.n = n;
        row.snr = snr;
        row.snr_threshold = threshold;
        row.attempted = cfg.instances;
        int windows = 0;
        for (const auto& o : batch) {
          if (o.empty_window) {
            ++row.empty_window;
            continue;
          }
          const auto& rep = o.report;
          row.mean_lambda_lo += rep.corollary.window.lower;
          row.mean_lambda_hi += rep.corollary.window.upper;
          ++windows;
          row.verdict_true += rep.verdict ? 1 : 0;
          row.chain_holds +=
              (o.chain.d_above_d_prime && o.chain.c_below_c_prime && o.chain.prime_condition) ? 1 : 0;
          if (rep.corollary.pass) {
            ++row.corollary_pass;
            row.expected_drop += rep.expected.delta < 0.0 ? 1 : 0;
          }
        }
        if (windows > 0) {
          row.mean_lambda_lo /= windows;
          row.mean_lambda_hi /= windows;
        }
        result.rows.push_back(row);
        for (auto& o : batch) result.instances.push_back(std::move(o));
      }
    }
  }
  return result;
}

std::vector<SurvivalRow> RunSurvivalReplay(const SurvivalConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0) || cfg.rounds < 1 || cfg.replays < 1 ||
      cfg.per_round < 1) {
    throw Error(ErrorCode::kConfigError, "survival-table: invalid configuration");
  }
  const SurvivalStats analytic = SurvivalTable(cfg.alpha, cfg.rounds);
  std::vector<double> survived(static_cast<size_t>(cfg.rounds), 0.0);
  const Rng root(cfg.seed);
  Trajectory proto;
  proto.states = Mat::Zero(1, 1);
  proto.actions = Mat::Zero(1, 1);
  proto.context = Vec::Zero(1);
  for (int rep = 0; rep < cfg.replays; ++rep) {
    TrajectoryBuffer buf(DeletionStrategy::kRandom, cfg.alpha, root.Split(static_cast<uint64_t>(rep)));
    for (int round = 1; round <= cfg.rounds; ++round) {
      if (round > 1) buf.EndOfRound();
      size_t alive = 0;
      for (const auto& t : buf.items()) alive += t->round == 1 ? 1 : 0;
      survived[static_cast<size_t>(round - 1)] += static_cast<double>(alive);
      Trajectory t = proto;
      t.round = round;
      for (int e = 0; e < cfg.per_round; ++e) buf.Add(t);
      if (round == 1) survived[0] += cfg.per_round;
    }
  }
  std::vector<SurvivalRow> rows;
  const double total = static_cast<double>(cfg.replays) * cfg.per_round;
  for (int round = 1; round <= cfg.rounds; ++round) {
    rows.push_back({round, analytic.by_round[static_cast<size_t>(round - 1)],
                    survived[static_cast<size_t>(round - 1)] / total});
  }
  return rows;
}

ExperimentOutput RunExperiment(const std::string& kind, const ConfigTree& cfg,
                               const std::filesystem::path& out_dir) {
  if (!IsExperimentKind(kind)) {
    std::string valid;
    for (const auto& k : Kinds()) valid += (valid.empty() ? "" : ", ") + k;
    throw Error(ErrorCode::kConfigError,
                "unknown experiment kind '" + kind + "'; valid kinds: " + valid);
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + out_dir.string() + ": " + ec.message());

  ExperimentOutput result;
  RunManifest& m = result.manifest;
  m.kind = kind;
  m.tool_version = kToolVersion;
  m.schema_version = kSchemaVersion;
  m.config_hash = HashHex(cfg.Hash());
  m.config = cfg.ToJson();
  m.threads = WorkerCount();
  Artifacts out(out_dir, &m);
  ConfigReader r(cfg);
  const auto t0 = Clock::now();
  static const std::map<std::string, std::function<json(ConfigReader&, Artifacts&, RunManifest&)>>
      runners = {{"train-adaptive", RunTrainAdaptive},
                 {"sweep-alpha", RunSweepAlpha},
                 {"ablate-strategies", RunAblate},
                 {"verify-theorem", RunVerifyTheoremKind},
                 {"corollary-sweep", RunCorollarySweepKind},
                 {"extra-class", RunExtraClassKind},
                 {"survival-table", RunSurvivalKind}};
  result.summary = runners.at(kind)(r, out, m);
  m.seconds = Seconds(t0);
  WriteFileAtomic(out_dir / "manifest.json", ToJson(m).dump(2) + "\n");
  return result;
}

}  // namespace deletion_lab
