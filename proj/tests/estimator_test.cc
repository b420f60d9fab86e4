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
#include "deletion_lab/estimator.h"

#include <gtest/gtest.h>

#include <cmath>

#include "deletion_lab/error.h"

namespace deletion_lab {
namespace {

double Sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Trajectory RandomTraj(int t_len, int s_dim, int a_dim, int c_dim, Rng& rng) {
  Trajectory t;
  t.states.resize(t_len, s_dim);
  t.actions.resize(t_len, a_dim);
  t.context.resize(c_dim);
  for (int i = 0; i < t_len; ++i) {
    for (int j = 0; j < s_dim; ++j) t.states(i, j) = rng.Normal();
    for (int j = 0; j < a_dim; ++j) t.actions(i, j) = rng.Normal();
  }
  for (int j = 0; j < c_dim; ++j) t.context(j) = rng.Normal();
  return t;
}

double MaxRelativeGradError(Estimator& e, const std::vector<EstimatorExample>& batch) {
  Vec g;
  e.LossAndGrad(batch, &g);
  const Vec p = e.params();
  double worst = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    Vec q = p;
    q(i) += 1e-5;
    e.set_params(q);
    const double lp = e.Loss(batch);
    q(i) -= 2e-5;
    e.set_params(q);
    const double lm = e.Loss(batch);
    const double fd = (lp - lm) / 2e-5;
    worst = std::max(worst, std::abs(fd - g(i)) / std::max({std::abs(fd), std::abs(g(i)), 1e-6}));
  }
  e.set_params(p);
  return worst;
}

TEST(WindowTest, LayoutAndZeroPadding) {
  Trajectory t;
  t.states.resize(3, 1);
  t.states << 1, 2, 3;
  t.actions.resize(3, 1);
  t.actions << 10, 20, 30;
  t.context = Vec::Zero(1);
  Vec w = MakeWindow(t, 1, 2);
  // [s1, s0, s_-1, a0, a_-1]
  Vec expect(5);
  expect << 2, 1, 0, 10, 0;
  EXPECT_EQ(w, expect);
  EstimatorShape sh{1, 1, 1, 2};
  EXPECT_EQ(w.size(), sh.window_size());
  Mat steps = MakeStepInputs(t, 2);
  Mat expect_steps(3, 2);
  expect_steps << 1, 0, 2, 10, 3, 20;
  EXPECT_EQ(steps, expect_steps);
}

TEST(EstimatorTest, ZeroWeightsMlpPredictsZero) {
  Rng rng(1);
  Estimator e = Estimator::Mlp({3, 1, 2, 4}, {16, 8}, rng);
  e.set_params(Vec::Zero(e.num_params()));
  Vec window = Vec::Random(EstimatorShape{3, 1, 2, 4}.window_size());
  EXPECT_EQ(e.Predict(window.transpose()), Vec::Zero(2));
}

TEST(EstimatorTest, GruZeroInputHandEvaluated) {
  // Zero input, zero recurrent weights: h_t = n (1 - z^t), output W_o h + b_o.
  const int hidden = 3;
  EstimatorShape sh{2, 1, 1, 4};
  Rng rng(2);
  Estimator e = Estimator::Gru(sh, hidden, rng);
  Vec p = e.params();
  const int in = sh.step_size();
  const int off_whh = 3 * hidden * in;
  const int off_bih = off_whh + 3 * hidden * hidden;
  const int off_bhh = off_bih + 3 * hidden;
  const int off_wo = off_bhh + 3 * hidden;
  p.segment(off_whh, 3 * hidden * hidden).setZero();
  const Vec b_ih = p.segment(off_bih, 3 * hidden);
  const Vec b_hh = p.segment(off_bhh, 3 * hidden);
  e.set_params(p);
  for (int len : {1, 2, 5, 9}) {
    Vec h(hidden);
    for (int j = 0; j < hidden; ++j) {
      const double r = Sig(b_ih(j) + b_hh(j));
      const double z = Sig(b_ih(hidden + j) + b_hh(hidden + j));
      const double n = std::tanh(b_ih(2 * hidden + j) + r * b_hh(2 * hidden + j));
      h(j) = n * (1.0 - std::pow(z, len));
    }
    const double expected = p.segment(off_wo, hidden).dot(h) + p(off_wo + hidden);
    EXPECT_NEAR(e.Predict(Mat::Zero(len, in))(0), expected, 1e-12) << len;
  }
}

TEST(EstimatorTest, IdenticalWindowsIdenticalPredictions) {
  Rng rng(3);
  Estimator e = Estimator::Mlp({3, 1, 2, 4}, {16, 8}, rng);
  Trajectory t = RandomTraj(12, 3, 1, 2, rng);
  EXPECT_EQ(e.PredictAt(t, 7), e.PredictAt(t, 7));
  EXPECT_EQ(e.PredictAt(t, 7), e.Predict(MakeWindow(t, 7, 4).transpose()));
}

TEST(EstimatorTest, ShapeMismatch) {
  Rng rng(3);
  Estimator e = Estimator::Mlp({3, 1, 2, 4}, {4}, rng);
  try {
    e.Predict(Mat::Zero(1, 5));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kShapeMismatch);
  }
  Estimator g = Estimator::Gru({3, 1, 2, 4}, 4, rng);
  EXPECT_THROW(g.Predict(Mat::Zero(3, 5)), Error);
  EXPECT_THROW(e.set_params(Vec::Zero(3)), Error);
}

TEST(LossTest, PerfectPredictionZeroLossAndGrad) {
  Rng rng(4);
  Estimator e = Estimator::Mlp({2, 1, 2, 2}, {5}, rng);
  Vec c(2);
  c << 0.3, -1.2;
  e.set_params(Vec::Zero(e.num_params()));
  e.set_output_bias(c);
  std::vector<EstimatorExample> batch;
  for (int i = 0; i < 4; ++i) {
    Trajectory t = RandomTraj(6, 2, 1, 2, rng);
    t.context = c;
    batch.push_back(WindowExample(t, i + 1, 2));
  }
  Vec g;
  EXPECT_EQ(e.LossAndGrad(batch, &g), 0.0);
  EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LossTest, SingleLinearUnitByHand) {
  Rng rng(5);
  Estimator e = Estimator::Mlp({1, 0, 1, 0}, {}, rng);
  ASSERT_EQ(e.num_params(), 2);
  e.set_params(Vec((Vec(2) << 1.0, 0.0).finished()));
  EstimatorExample ex{Mat::Constant(1, 1, 2.0), Vec::Constant(1, 1.0)};
  Vec g;
  EXPECT_DOUBLE_EQ(e.LossAndGrad({ex}, &g), 1.0);
  EXPECT_DOUBLE_EQ(g(0), 4.0);
  EXPECT_DOUBLE_EQ(g(1), 2.0);
}

TEST(LossTest, NonFiniteLoss) {
  Rng rng(5);
  Estimator e = Estimator::Mlp({1, 0, 1, 0}, {}, rng);
  EstimatorExample ex{Mat::Constant(1, 1, 2.0), Vec::Constant(1, std::nan(""))};
  try {
    e.Loss({ex});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kNonFiniteLoss);
  }
}

TEST(GradientTest, MlpAndGruMatchFiniteDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    EstimatorShape sh{1 + static_cast<int>(rng.UniformInt(3)), static_cast<int>(rng.UniformInt(2)),
                      1 + static_cast<int>(rng.UniformInt(2)), 1 + static_cast<int>(rng.UniformInt(4))};
    FeatureNormalizer f = FeatureNormalizer::Identity(sh.s_dim, sh.a_dim);
    for (int j = 0; j < sh.s_dim; ++j) {
      f.state_mean(j) = rng.Normal();
      f.state_std(j) = rng.Uniform(0.5, 2.0);
    }
    for (int arch = 0; arch < 2; ++arch) {
      Estimator e = arch == 0 ? Estimator::Mlp(sh, {7, 4}, rng) : Estimator::Gru(sh, 5, rng);
      e.set_normalizer(f);
      std::vector<EstimatorExample> batch;
      for (int b = 0; b < 3; ++b) {
        Trajectory t = RandomTraj(4 + b, sh.s_dim, sh.a_dim, sh.c_dim, rng);
        batch.push_back(arch == 0 ? WindowExample(t, b + 1, sh.k) : SequenceExample(t, 3 + b));
      }
      EXPECT_LE(MaxRelativeGradError(e, batch), 1e-4) << "trial " << trial << " arch " << arch;
    }
  }
}

TEST(GradientTest, GruLossCoversEveryStep) {
  Rng rng(7);
  EstimatorShape sh{2, 1, 1, 4};
  Estimator e = Estimator::Gru(sh, 4, rng);
  Trajectory t = RandomTraj(6, 2, 1, 1, rng);
  EstimatorExample ex = SequenceExample(t, 5);
  Mat preds = e.PredictAll(ex.inputs);
  double manual = 0.0;
  for (int i = 0; i < preds.rows(); ++i) manual += (preds.row(i).transpose() - t.context).squaredNorm();
  EXPECT_NEAR(e.Loss({ex}), manual / preds.rows(), 1e-12);
}

TEST(GruTest, Causality) {
  Rng rng(8);
  EstimatorShape sh{2, 1, 2, 4};
  Estimator e = Estimator::Gru(sh, 6, rng);
  Trajectory t = RandomTraj(10, 2, 1, 2, rng);
  Mat in = MakeStepInputs(t, 9);
  Mat base = e.PredictAll(in);
  Mat perturbed = in;
  perturbed.bottomRows(4).array() += 3.0;
  Mat after = e.PredictAll(perturbed);
  EXPECT_EQ(base.topRows(6), after.topRows(6));
  EXPECT_NE(base.bottomRows(4), after.bottomRows(4));
}

TEST(NormalizerTest, AffineRescalingInvariance) {
  Rng rng(9);
  EstimatorShape sh{2, 1, 1, 3};
  Trajectory t = RandomTraj(8, 2, 1, 1, rng);
  std::vector<TrajectoryPtr> data = {std::make_shared<Trajectory>(t)};
  for (int arch = 0; arch < 2; ++arch) {
    Estimator e = arch == 0 ? Estimator::Mlp(sh, {6}, rng) : Estimator::Gru(sh, 4, rng);
    FeatureNormalizer f = FeatureNormalizer::Fit(data);
    e.set_normalizer(f);
    const Vec before = e.PredictAt(t, 6);
    Trajectory scaled = t;
    FeatureNormalizer g = f;
    const Vec a = (Vec(2) << 3.0, 0.25).finished();
    const Vec b = (Vec(2) << -1.0, 4.0).finished();
    for (int j = 0; j < 2; ++j) {
      scaled.states.col(j) = scaled.states.col(j) * a(j) + Vec::Constant(t.length(), b(j));
      g.state_mean(j) = f.state_mean(j) * a(j) + b(j);
      g.state_std(j) = f.state_std(j) * a(j);
    }
    scaled.actions *= 5.0;
    g.action_mean *= 5.0;
    g.action_std *= 5.0;
    e.set_normalizer(g);
    // Zero padding is in raw space, so compare from step k on.
    EXPECT_LE((e.PredictAt(scaled, 6) - before).cwiseAbs().maxCoeff(), 1e-12) << arch;
  }
}

TEST(TrainRoundTest, ZeroStepsUnchanged) {
  Rng rng(10);
  Estimator e = Estimator::Mlp({2, 1, 1, 4}, {8}, rng);
  std::vector<TrajectoryPtr> view = {std::make_shared<Trajectory>(RandomTraj(10, 2, 1, 1, rng))};
  TrainConfig cfg;
  cfg.steps = 0;
  Estimator out = TrainRound(e, view, cfg);
  EXPECT_EQ(out.params(), e.params());
}

TEST(TrainRoundTest, Deterministic) {
  Rng rng(11);
  std::vector<TrajectoryPtr> view;
  for (int i = 0; i < 5; ++i) view.push_back(std::make_shared<Trajectory>(RandomTraj(12, 2, 1, 1, rng)));
  TrainConfig cfg;
  cfg.steps = 40;
  cfg.seed = 3;
  for (int arch = 0; arch < 2; ++arch) {
    Rng r1(1), r2(1);
    Estimator a = arch == 0 ? Estimator::Mlp({2, 1, 1, 4}, {8}, r1) : Estimator::Gru({2, 1, 1, 4}, 5, r1);
    Estimator b = arch == 0 ? Estimator::Mlp({2, 1, 1, 4}, {8}, r2) : Estimator::Gru({2, 1, 1, 4}, 5, r2);
    EXPECT_EQ(TrainRound(a, view, cfg).params(), TrainRound(b, view, cfg).params());
  }
}

TEST(TrainRoundTest, EmptyViewRejected) {
  Rng rng(1);
  Estimator e = Estimator::Mlp({2, 1, 1, 4}, {8}, rng);
  EXPECT_THROW(TrainRound(e, {}, TrainConfig{}), Error);
}

TEST(TrainRoundTest, LinearSyntheticReachesLeastSquaresFloor) {
  // First state coordinate = context + noise; the window mean identifies c.
  Rng rng(12);
  const int k = 4;
  const double noise = 0.3;
  std::vector<TrajectoryPtr> view;
  for (int i = 0; i < 60; ++i) {
    Trajectory t;
    const int len = 20;
    t.context = Vec::Constant(1, rng.Uniform(0.0, 1.0));
    t.states.resize(len, 2);
    t.actions.resize(len, 1);
    for (int s = 0; s < len; ++s) {
      t.states(s, 0) = t.context(0) + noise * rng.Normal();
      t.states(s, 1) = rng.Normal();
      t.actions(s, 0) = rng.Normal();
    }
    view.push_back(std::make_shared<Trajectory>(t));
  }
  // Least-squares oracle on the same windows (with intercept).
  std::vector<EstimatorExample> all;
  for (const auto& t : view)
    for (Eigen::Index s = k; s < t->length(); ++s) all.push_back(WindowExample(*t, s, k));
  const int n = static_cast<int>(all.size());
  const int p = static_cast<int>(all[0].inputs.cols());
  Mat a(n, p + 1);
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    a.row(i).head(p) = all[i].inputs.row(0);
    a(i, p) = 1.0;
    y(i) = all[i].context(0);
  }
  const Vec beta = a.colPivHouseholderQr().solve(y);
  const double floor = (a * beta - y).squaredNorm() / n;

  Rng init(2);
  Estimator e = Estimator::Mlp({2, 1, 1, k}, {32}, init);
  TrainConfig cfg;
  cfg.steps = 3000;
  cfg.seed = 1;
  Estimator trained = TrainRound(e, view, cfg);
  const double loss = trained.Loss(all);
  EXPECT_LE(loss, 1.5 * floor) << "loss " << loss << " floor " << floor;
}

TEST(StreamTest, StreamingMatchesStoredPredictions) {
  Rng rng(13);
  EstimatorShape sh{3, 1, 2, 4};
  Trajectory t = RandomTraj(15, 3, 1, 2, rng);
  for (int arch = 0; arch < 2; ++arch) {
    Estimator e = arch == 0 ? Estimator::Mlp(sh, {8, 4}, rng) : Estimator::Gru(sh, 5, rng);
    auto stream = e.StartStream();
    for (Eigen::Index s = 0; s < t.length(); ++s) {
      const Vec est = stream->Estimate(t.states.row(s).transpose());
      EXPECT_LE((est - e.PredictAt(t, s)).cwiseAbs().maxCoeff(), 1e-12) << arch << " step " << s;
      stream->Observe(t.actions.row(s).transpose());
    }
  }
}

TEST(CheckpointTest, JsonRoundTrip) {
  Rng rng(14);
  EstimatorShape sh{3, 1, 2, 4};
  Trajectory t = RandomTraj(9, 3, 1, 2, rng);
  for (int arch = 0; arch < 2; ++arch) {
    Estimator e = arch == 0 ? Estimator::Mlp(sh, {8, 4}, rng) : Estimator::Gru(sh, 5, rng);
    e.set_normalizer(FeatureNormalizer::Fit({std::make_shared<Trajectory>(t)}));
    e.FreezeNormalizer();
    Estimator back = Estimator::FromJson(nlohmann::json::parse(e.ToJson().dump()));
    EXPECT_EQ(back.params(), e.params());
    EXPECT_TRUE(back.normalizer_frozen());
    EXPECT_EQ(back.PredictAt(t, 8), e.PredictAt(t, 8));
  }
}

TEST(ArchTest, Names) {
  EXPECT_EQ(ParseArch("mlp"), EstimatorArch::kMlp);
  EXPECT_EQ(ParseArch("gru"), EstimatorArch::kGru);
  EXPECT_THROW(ParseArch("lstm"), Error);
}

}  // namespace
}  // namespace deletion_lab
