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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace deletion_lab {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult RunCli(const std::string& args, bool with_stderr = true) {
  const std::string cmd = std::string(DELETION_LAB_CLI) + " " + args +
                          (with_stderr ? " 2>&1" : " 2>/dev/null");
  CliResult res;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return res;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), p)) > 0) res.out.append(buf, n);
  const int status = pclose(p);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string FirstLine(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

fs::path TempDir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("deletion_lab_" + name);
  fs::remove_all(d);
  return d;
}

TEST(ExitCodeTest, Mapping) {
  EXPECT_EQ(ExitCodeFor(ErrorCode::kConfigError), 2);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kInvalidArgument), 2);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kEmptyWindow), 2);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kNotSpd), 3);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kNonFiniteLoss), 3);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kSolverFailure), 3);
  EXPECT_EQ(ExperimentKinds().size(), 7u);
  EXPECT_TRUE(IsExperimentKind("corollary-sweep"));
  EXPECT_FALSE(IsExperimentKind("train"));
}

TEST(RunExperimentTest, SurvivalTable) {
  ConfigTree t = ConfigTree::Parse("replays = 2000\nseed = 3\n");
  fs::path dir = TempDir("survival");
  ExperimentOutput o = RunExperiment("survival-table", t, dir);
  EXPECT_TRUE(fs::exists(dir / "survival.csv"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  auto rows = RunSurvivalReplay({0.8, 5, 2000, 50, 3});
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].empirical, 1.0);
  EXPECT_NEAR(rows[4].analytic, 0.4096, 1e-12);
  EXPECT_NEAR(rows[4].empirical, 0.4096, 0.02);
  EXPECT_EQ(o.manifest.kind, "survival-table");
  fs::remove_all(dir);
}

TEST(RunExperimentTest, ManifestReproducesRun) {
  ConfigTree t = ConfigTree::Parse("instances = 12\nseed = 4\n");
  fs::path a = TempDir("repro_a"), b = TempDir("repro_b");
  ExperimentOutput oa = RunExperiment("verify-theorem", t, a);
  auto manifest = nlohmann::json::parse(Slurp(a / "manifest.json"));
  EXPECT_EQ(manifest["config_hash"], HashHex(t.Hash()));
  EXPECT_EQ(manifest["schema_version"], kSchemaVersion);
  ConfigTree replay;
  for (const auto& [k, v] : manifest["config"].items()) replay.Set(k, v.get<std::string>());
  EXPECT_EQ(replay.Hash(), t.Hash());
  RunExperiment("verify-theorem", replay, b);
  EXPECT_EQ(Slurp(a / "instances.csv"), Slurp(b / "instances.csv"));
  EXPECT_EQ(oa.summary["soundness"], 1.0);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(RunExperimentTest, UnknownFieldIsConfigError) {
  ConfigTree t = ConfigTree::Parse("instancez = 12\n");
  try {
    RunExperiment("verify-theorem", t, TempDir("unknown"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError);
    EXPECT_NE(std::string(e.what()).find("instancez"), std::string::npos);
  }
}

TEST(CliTest, UnknownKindListsValidKinds) {
  CliResult r = RunCli("frobnicate");
  EXPECT_EQ(r.code, 2);
  for (const auto& k : ExperimentKinds()) EXPECT_NE(r.out.find(k), std::string::npos) << k;
}

TEST(CliTest, VerifyTheoremHundredInstances) {
  fs::path dir = TempDir("cli_verify");
  CliResult r = RunCli("verify-theorem --instances 100 --seed 7 --out " + dir.string(), false);
  ASSERT_EQ(r.code, 0) << r.out;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["corollary_pass"], 100);
  EXPECT_EQ(j["expected_loo_decrease"], 100);
  EXPECT_EQ(j["counterexamples"], 0);
  EXPECT_EQ(FirstLine(dir / "instances.csv"),
            "instance,d,N,R,lambda,snr,D,C,condition,verdict,corollary_pass,expected_delta,"
            "realized_delta,counterexample");
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  fs::remove_all(dir);
}

TEST(CliTest, ValidationErrorsExitTwo) {
  fs::path dir = TempDir("cli_bad");
  EXPECT_EQ(RunCli("verify-theorem --instancez 3 --out " + dir.string()).code, 2);
  EXPECT_EQ(RunCli("verify-theorem --instances abc --out " + dir.string()).code, 2);
  EXPECT_EQ(RunCli("sweep-alpha --alphas 0,1 --seeds 1 --out " + dir.string()).code, 2);
  EXPECT_EQ(RunCli("verify-theorem --config /nonexistent.cfg --out " + dir.string()).code, 2);
  fs::remove_all(dir);
}

TEST(CliTest, ConfigFileWithOverrides) {
  fs::path dir = TempDir("cli_cfg");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# survival\nalpha = 0.5\nreplays = 500\n";
  }
  CliResult r = RunCli("survival-table --config " + (dir / "run.cfg").string() +
                       " --set rounds=3 --out " + (dir / "o").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(FirstLine(dir / "o" / "survival.csv").rfind("round,", 0), 0u);
  auto m = nlohmann::json::parse(Slurp(dir / "o" / "manifest.json"));
  EXPECT_EQ(m["config"]["rounds"], "3");
  EXPECT_EQ(m["config"]["alpha"], "0.5");
  fs::remove_all(dir);
}

TEST(CliTest, SweepAlphaTinyPipeline) {
  fs::path dir = TempDir("cli_sweep");
  CliResult r = RunCli(
      "sweep-alpha --env pendulum --seeds 1..2 --alphas 0.8,1.0 --rounds 2 --episodes 4 "
      "--train.steps 5 --validation_episodes 1 --eval_episodes 1 --contexts.train 4 "
      "--contexts.eval 3 --spec.horizon 30 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(FirstLine(dir / "sweep_alpha.csv").rfind("alpha,seed,max_gap,mean_gap", 0), 0u);
  std::ifstream in(dir / "sweep_alpha.csv");
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace deletion_lab
