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
#include "deletion_lab/cmdp.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "deletion_lab/error.h"
#include "deletion_lab/policy.h"

namespace deletion_lab {
namespace {

constexpr double kPi = std::numbers::pi;

Vec V(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Vec PendulumState(double th, double thdot) { return V({std::cos(th), std::sin(th), thdot}); }

// Replays a fixed open-loop action sequence.
class OpenLoop : public ControllerFactory {
 public:
  explicit OpenLoop(std::vector<double> u) : u_(std::move(u)) {}
  std::unique_ptr<EpisodeController> StartEpisode() const override {
    struct C : EpisodeController {
      const std::vector<double>* u;
      size_t t = 0;
      Vec Act(const Vec&) override { return Vec::Constant(1, (*u)[t++ % u->size()]); }
    };
    auto c = std::make_unique<C>();
    c->u = &u_;
    return c;
  }
  int action_dim() const override { return 1; }

 private:
  std::vector<double> u_;
};

TEST(CmdpTest, BuiltinSpecsAndRanges) {
  auto names = BuiltinSpecNames();
  ASSERT_GE(names.size(), 3u);
  const CmdpSpec p = MakeSpec("pendulum");
  EXPECT_EQ(p.context_box[0].lo, 5.0);
  EXPECT_EQ(p.context_box[0].hi, 15.0);
  EXPECT_EQ(p.context_box[1].lo, 0.5);
  EXPECT_EQ(p.context_box[1].hi, 2.0);
  EXPECT_EQ(p.horizon, 200);
  EXPECT_DOUBLE_EQ(p.dt, 0.05);
  const CmdpSpec h = MakeSpec("hillclimb");
  EXPECT_EQ(h.context_box[0].lo, 0.0005);
  EXPECT_EQ(h.context_box[0].hi, 0.002);
  EXPECT_EQ(h.context_box[1].lo, 0.001);
  EXPECT_EQ(h.context_box[1].hi, 0.004);
  EXPECT_EQ(MakeSpec("pointmass").c_dim, 1);
  EXPECT_THROW(MakeSpec("cartpole"), Error);
}

TEST(CmdpTest, OverridesAndUnknownKeys) {
  CmdpSpec s = MakeSpec("pendulum", {{"horizon", 50}, {"ctx.g.hi", 12.0}});
  EXPECT_EQ(s.horizon, 50);
  EXPECT_EQ(s.context_box[0].hi, 12.0);
  try {
    MakeSpec("pendulum", {{"gravity", 3}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError);
  }
}

TEST(CmdpTest, PendulumReward) {
  const CmdpSpec s = MakeSpec("pendulum");
  EXPECT_NEAR(s.reward(PendulumState(0.3, 2.0), V({1.5})), -(0.09 + 0.4 + 0.001 * 2.25), 1e-12);
  // Angle normalised into [-pi, pi).
  EXPECT_NEAR(s.reward(PendulumState(2 * kPi - 0.1, 0.0), V({0.0})), -0.01, 1e-12);
}

TEST(CmdpTest, PendulumHangingRestIsEquilibrium) {
  const CmdpSpec s = MakeSpec("pendulum");
  Vec st = PendulumState(kPi, 0.0);
  for (int t = 0; t < 200; ++t) st = s.dynamics(st, V({0.0}), V({10.0, 1.0}));
  EXPECT_NEAR(st(0), -1.0, 1e-9);
  EXPECT_NEAR(st(2), 0.0, 1e-9);
}

TEST(CmdpTest, PendulumDoubledGravityLargerAcceleration) {
  const CmdpSpec s = MakeSpec("pendulum");
  const Vec st = PendulumState(2.0, 0.0);
  const Vec a1 = s.dynamics(st, V({0.5}), V({6.0, 1.0}));
  const Vec a2 = s.dynamics(st, V({0.5}), V({12.0, 1.0}));
  // Hand evaluation of the semi-implicit step.
  const double acc1 = 3 * 6.0 / 2.0 * std::sin(2.0) + 3.0 * 0.5;
  EXPECT_NEAR(a1(2), acc1 * 0.05, 1e-12);
  EXPECT_GT(std::abs(a2(2)), std::abs(a1(2)));
  const double next = 2.0 + a1(2) * 0.05;
  EXPECT_NEAR(a1(0), std::cos(next), 1e-12);
}

TEST(CmdpTest, HillclimbZeroForceNeverCrests) {
  CmdpSpec s = MakeSpec("hillclimb", {{"ctx.force.lo", 0.0}});
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    Vec st = s.initial_state(rng);
    for (int t = 0; t < 1000; ++t) {
      st = s.dynamics(st, V({rng.Uniform(-1, 1)}), V({0.0, 0.0025}));
      ASSERT_LT(st(0), 0.45);
    }
  }
}

TEST(CmdpTest, HillclimbGoalAbsorbing) {
  const CmdpSpec s = MakeSpec("hillclimb");
  const Vec at_goal = V({0.5, 0.01});
  EXPECT_EQ(s.dynamics(at_goal, V({-1.0}), V({0.001, 0.002})), at_goal);
  EXPECT_EQ(s.reward(at_goal, V({1.0})), 0.0);
}

TEST(RolloutTest, HorizonOne) {
  CmdpSpec s = MakeSpec("pendulum", {{"horizon", 1}});
  auto k = std::make_shared<AnalyticPendulumController>();
  Episode ep = Rollout(s, V({10, 1}), *WithContext(k, V({10, 1}), s), Rng(4));
  ASSERT_EQ(ep.trajectory.length(), 1);
  const double r0 = s.reward(ep.trajectory.states.row(0).transpose(),
                             ep.trajectory.actions.row(0).transpose());
  EXPECT_DOUBLE_EQ(ep.discounted_return, r0);
  EXPECT_DOUBLE_EQ(ep.undiscounted_return, r0);
}

TEST(RolloutTest, DeterministicAndRecomputable) {
  for (const auto& name : BuiltinSpecNames()) {
    CmdpSpec s = MakeSpec(name, {{"action_noise", 0.1}});
    Rng cr(1);
    Vec c = SampleContexts(s, 1, ContextRole::kEval, cr).contexts[0];
    RandomPolicy pi(s.action_low, s.action_high, 5);
    Episode a = Rollout(s, c, pi, Rng(9));
    Episode b = Rollout(s, c, pi, Rng(9));
    EXPECT_EQ(a.trajectory.states, b.trajectory.states);
    EXPECT_EQ(a.trajectory.actions, b.trajectory.actions);
    EXPECT_EQ(a.discounted_return, b.discounted_return);
    EXPECT_EQ(a.trajectory.length(), s.horizon);
    EXPECT_NEAR(RecomputeReturn(s, a.trajectory, true), a.discounted_return, 1e-10);
    EXPECT_NEAR(RecomputeReturn(s, a.trajectory, false), a.undiscounted_return, 1e-10);
    for (Eigen::Index t = 0; t < a.trajectory.length(); ++t) {
      const Vec u = a.trajectory.actions.row(t).transpose();
      EXPECT_TRUE(((u - s.ClipAction(u)).array() == 0).all());
    }
  }
}

TEST(RolloutTest, RejectsOutOfBoxContextAndWrongActionDim) {
  const CmdpSpec s = MakeSpec("pendulum");
  ZeroPolicy z(1);
  EXPECT_THROW(Rollout(s, V({30, 1}), z, Rng(1)), Error);
  ZeroPolicy z2(2);
  EXPECT_THROW(Rollout(s, V({10, 1}), z2, Rng(1)), Error);
}

TEST(RolloutTest, NonFiniteStateFlagged) {
  CmdpSpec s = MakeSpec("pointmass");
  s.dynamics = [](const Vec& st, const Vec&, const Vec&) { return Vec(st * 1e200); };
  try {
    Rollout(s, V({1.0}), ZeroPolicy(1), Rng(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteState);
  }
}

TEST(RolloutTest, ContinuityInContext) {
  const CmdpSpec s = MakeSpec("pendulum");
  const Vec st = PendulumState(1.0, 0.5);
  const Vec c = V({9.0, 1.3});
  const Vec base = s.dynamics(st, V({0.7}), c);
  for (int j = 0; j < 2; ++j) {
    Vec cp = c;
    cp(j) += 1e-6;
    EXPECT_LE((s.dynamics(st, V({0.7}), cp) - base).norm(), 1e-5);
  }
}

TEST(RolloutTest, ContextsIdentifiableOnGrid) {
  std::vector<double> seq;
  for (int t = 0; t < 300; ++t) seq.push_back(std::sin(0.3 * t) + (t % 7 < 3 ? 0.5 : -0.5));
  OpenLoop pi(seq);
  for (const auto& name : BuiltinSpecNames()) {
    CmdpSpec s = MakeSpec(name);
    s.initial_state = [p = s.probe_state](Rng&) { return p; };
    std::vector<Vec> grid;
    const int per = 4;
    for (int i = 0; i < (s.c_dim == 1 ? per : per * per); ++i) {
      Vec c(s.c_dim);
      int rem = i;
      for (int j = 0; j < s.c_dim; ++j) {
        const double f = (rem % per) / double(per - 1);
        rem /= per;
        c(j) = s.context_box[j].lo + f * (s.context_box[j].hi - s.context_box[j].lo);
      }
      grid.push_back(c);
    }
    std::vector<Mat> runs;
    for (const auto& c : grid) runs.push_back(Rollout(s, c, pi, Rng(0)).trajectory.states);
    for (size_t a = 0; a < grid.size(); ++a) {
      for (size_t b = a + 1; b < grid.size(); ++b) {
        EXPECT_GT((runs[a] - runs[b]).cwiseAbs().maxCoeff(), 0.0) << name << " " << a << " " << b;
      }
    }
  }
}

TEST(EstimateValueTest, SingleEpisode) {
  const CmdpSpec s = MakeSpec("pointmass");
  ZeroPolicy z(1);
  ValueEstimate v = EstimateValue(s, V({1.0}), z, 1, Rng(2));
  EXPECT_EQ(v.std, 0.0);
  ASSERT_EQ(v.returns.size(), 1u);
  EXPECT_EQ(v.mean, v.returns[0]);
  EXPECT_THROW(EstimateValue(s, V({1.0}), z, 0, Rng(2)), Error);
}

TEST(EstimateValueTest, DeterministicStartZeroStd) {
  CmdpSpec s = MakeSpec("pendulum");
  s.initial_state = [](Rng&) { return PendulumState(2.0, 0.0); };
  auto k = std::make_shared<AnalyticPendulumController>();
  ValueEstimate v = EstimateValue(s, V({10, 1}), *WithContext(k, V({10, 1}), s), 7, Rng(2));
  for (double r : v.returns) EXPECT_EQ(r, v.returns[0]);
  EXPECT_LE(v.std, 1e-12 * std::abs(v.mean));
}

TEST(EstimateValueTest, AnalyticBeatsZeroTorque) {
  const CmdpSpec s = MakeSpec("pendulum");
  auto k = std::make_shared<AnalyticPendulumController>();
  const Vec c = V({10, 1});
  ValueEstimate ctrl = EstimateValue(s, c, *WithContext(k, c, s), 50, Rng(5));
  ValueEstimate zero = EstimateValue(s, c, ZeroPolicy(1), 50, Rng(5));
  EXPECT_GT(ctrl.mean, zero.mean);
  ValueEstimate ctrl20 = EstimateValue(s, c, *WithContext(k, c, s), 20, Rng(6));
  ValueEstimate zero20 = EstimateValue(s, c, ZeroPolicy(1), 20, Rng(6));
  EXPECT_GT(ctrl20.mean, zero20.mean);
}

TEST(ContextSetTest, SampledInsideBox) {
  for (const auto& name : BuiltinSpecNames()) {
    const CmdpSpec s = MakeSpec(name);
    Rng r(1);
    ContextSet set = SampleContexts(s, 200, ContextRole::kTrain, r);
    EXPECT_NO_THROW(ValidateContexts(s, set));
    for (const auto& c : set.contexts) EXPECT_TRUE(s.ContainsContext(c));
  }
  const CmdpSpec p = MakeSpec("pendulum");
  ContextSet bad;
  bad.contexts = {V({100, 1})};
  EXPECT_THROW(ValidateContexts(p, bad), Error);
}

}  // namespace
}  // namespace deletion_lab
