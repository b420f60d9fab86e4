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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "deletion_lab/error.h"

namespace deletion_lab {
namespace {

using std::numbers::pi;

double AngleNormalize(double th) {
  return std::remainder(th, 2.0 * pi);
}

// Reads overrides, remembering which keys were consumed so leftovers can be
// reported as configuration errors.
class OverrideReader {
 public:
  explicit OverrideReader(const SpecOverrides& o) : o_(o) {}

  double Get(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = o_.find(key);
    return it == o_.end() ? fallback : it->second;
  }

  void CheckAllUsed(std::string_view spec) const {
    for (const auto& [k, v] : o_) {
      if (!used_.count(k)) {
        throw Error(ErrorCode::kConfigError,
                    "unknown override '" + k + "' for env " + std::string(spec));
      }
    }
  }

 private:
  const SpecOverrides& o_;
  std::set<std::string> used_;
};

void ReadCommon(OverrideReader& r, CmdpSpec& spec) {
  spec.horizon = static_cast<int>(r.Get("horizon", spec.horizon));
  spec.dt = r.Get("dt", spec.dt);
  spec.discount = r.Get("discount", spec.discount);
  spec.action_noise = r.Get("action_noise", spec.action_noise);
  for (size_t i = 0; i < spec.context_box.size(); ++i) {
    const std::string base = "ctx." + spec.context_names[i];
    spec.context_box[i].lo = r.Get(base + ".lo", spec.context_box[i].lo);
    spec.context_box[i].hi = r.Get(base + ".hi", spec.context_box[i].hi);
  }
  if (spec.horizon < 1 || !(spec.dt > 0.0) || !(spec.discount > 0.0) ||
      spec.discount > 1.0 || spec.action_noise < 0.0) {
    throw Error(ErrorCode::kConfigError, "invalid horizon/dt/discount/noise for " + spec.name);
  }
  for (const Range& b : spec.context_box) {
    if (!(b.lo <= b.hi)) {
      throw Error(ErrorCode::kConfigError, "empty context range for " + spec.name);
    }
  }
}

CmdpSpec MakePendulum(OverrideReader& r) {
  CmdpSpec spec;
  spec.name = "pendulum";
  spec.s_dim = 3;
  spec.a_dim = 1;
  spec.c_dim = 2;
  spec.context_names = {"g", "l"};
  spec.context_box = {{5.0, 15.0}, {0.5, 2.0}};
  spec.horizon = 200;
  spec.dt = 0.05;
  ReadCommon(r, spec);
  const double max_torque = r.Get("max_torque", 2.0);
  const double max_speed = r.Get("max_speed", 8.0);
  const double mass = r.Get("mass", 1.0);
  const double dt = spec.dt;
  spec.action_low = Vec::Constant(1, -max_torque);
  spec.action_high = Vec::Constant(1, max_torque);
  spec.probe_state = Vec(3);
  spec.probe_state << std::cos(pi / 2), std::sin(pi / 2), 0.0;
  spec.state_scale = Vec(3);
  spec.state_scale << 1.0, 1.0, 1.0;

  spec.dynamics = [=](const Vec& s, const Vec& a, const Vec& c) {
    const double th = std::atan2(s(1), s(0));
    const double g = c(0);
    const double l = c(1);
    const double u = std::clamp(a(0), -max_torque, max_torque);
    double thdot = s(2) + (3.0 * g / (2.0 * l) * std::sin(th) +
                           3.0 / (mass * l * l) * u) * dt;
    thdot = std::clamp(thdot, -max_speed, max_speed);
    const double next = th + thdot * dt;
    Vec out(3);
    out << std::cos(next), std::sin(next), thdot;
    return out;
  };
  spec.reward = [=](const Vec& s, const Vec& a) {
    const double th = AngleNormalize(std::atan2(s(1), s(0)));
    const double u = std::clamp(a(0), -max_torque, max_torque);
    return -(th * th + 0.1 * s(2) * s(2) + 0.001 * u * u);
  };
  spec.initial_state = [](Rng& rng) {
    const double th = rng.Uniform(-pi, pi);
    const double thdot = rng.Uniform(-1.0, 1.0);
    Vec s(3);
    s << std::cos(th), std::sin(th), thdot;
    return s;
  };
  return spec;
}

CmdpSpec MakeHillClimb(OverrideReader& r) {
  CmdpSpec spec;
  spec.name = "hillclimb";
  spec.s_dim = 2;
  spec.a_dim = 1;
  spec.c_dim = 2;
  spec.context_names = {"force", "gravity"};
  spec.context_box = {{0.0005, 0.002}, {0.001, 0.004}};
  spec.horizon = 300;
  spec.dt = 1.0;
  ReadCommon(r, spec);
  const double goal = r.Get("goal", 0.45);
  const double max_speed = r.Get("max_speed", 0.07);
  spec.action_low = Vec::Constant(1, -1.0);
  spec.action_high = Vec::Constant(1, 1.0);
  spec.probe_state = Vec(2);
  spec.probe_state << -0.5, 0.0;
  spec.state_scale = Vec(2);
  spec.state_scale << 1.0 / 1.2, 1.0 / max_speed;

  spec.dynamics = [=](const Vec& s, const Vec& a, const Vec& c) {
    if (s(0) >= goal) return Vec(s);
    const double u = std::clamp(a(0), -1.0, 1.0);
    double v = s(1) + c(0) * u - c(1) * std::cos(3.0 * s(0));
    v = std::clamp(v, -max_speed, max_speed);
    double x = std::clamp(s(0) + v, -1.2, 0.6);
    if (x <= -1.2 && v < 0.0) v = 0.0;
    Vec out(2);
    out << x, v;
    return out;
  };
  spec.reward = [=](const Vec& s, const Vec& a) {
    if (s(0) >= goal) return 0.0;
    const double u = std::clamp(a(0), -1.0, 1.0);
    return -(1.0 + 0.1 * u * u);
  };
  spec.initial_state = [](Rng& rng) {
    Vec s(2);
    s << rng.Uniform(-0.6, -0.4), 0.0;
    return s;
  };
  return spec;
}

CmdpSpec MakePointMass(OverrideReader& r) {
  CmdpSpec spec;
  spec.name = "pointmass";
  spec.s_dim = 2;
  spec.a_dim = 1;
  spec.c_dim = 1;
  spec.context_names = {"drag"};
  spec.context_box = {{0.1, 2.0}};
  spec.horizon = 100;
  spec.dt = 0.1;
  ReadCommon(r, spec);
  const double max_force = r.Get("max_force", 1.0);
  const double dt = spec.dt;
  spec.action_low = Vec::Constant(1, -1.0);
  spec.action_high = Vec::Constant(1, 1.0);
  spec.probe_state = Vec(2);
  spec.probe_state << 1.0, 1.0;
  spec.state_scale = Vec(2);
  spec.state_scale << 0.5, 1.0;

  spec.dynamics = [=](const Vec& s, const Vec& a, const Vec& c) {
    const double u = std::clamp(a(0), -1.0, 1.0);
    const double v = s(1) + dt * (max_force * u - c(0) * s(1));
    Vec out(2);
    out << s(0) + dt * v, v;
    return out;
  };
  spec.reward = [](const Vec& s, const Vec& a) {
    const double u = std::clamp(a(0), -1.0, 1.0);
    return -(s(0) * s(0) + 0.1 * s(1) * s(1) + 0.01 * u * u);
  };
  spec.initial_state = [](Rng& rng) {
    Vec s(2);
    s << rng.Uniform(-2.0, 2.0), rng.Uniform(-0.5, 0.5);
    return s;
  };
  return spec;
}

}  // namespace

bool CmdpSpec::ContainsContext(const Vec& c) const {
  if (c.size() != c_dim) return false;
  for (int i = 0; i < c_dim; ++i) {
    if (!(c(i) >= context_box[i].lo && c(i) <= context_box[i].hi)) return false;
  }
  return true;
}

Vec CmdpSpec::ClampContext(const Vec& c) const {
  Vec out = c;
  for (int i = 0; i < c_dim; ++i) {
    double v = std::isfinite(out(i)) ? out(i) : 0.5 * (context_box[i].lo + context_box[i].hi);
    out(i) = std::clamp(v, context_box[i].lo, context_box[i].hi);
  }
  return out;
}

Vec CmdpSpec::ClipAction(const Vec& a) const {
  return a.cwiseMax(action_low).cwiseMin(action_high);
}

Vec CmdpSpec::ContextLow() const {
  Vec v(c_dim);
  for (int i = 0; i < c_dim; ++i) v(i) = context_box[i].lo;
  return v;
}

Vec CmdpSpec::ContextHigh() const {
  Vec v(c_dim);
  for (int i = 0; i < c_dim; ++i) v(i) = context_box[i].hi;
  return v;
}

CmdpSpec MakeSpec(std::string_view name, const SpecOverrides& overrides) {
  OverrideReader reader(overrides);
  CmdpSpec spec;
  if (name == "pendulum") {
    spec = MakePendulum(reader);
  } else if (name == "hillclimb") {
    spec = MakeHillClimb(reader);
  } else if (name == "pointmass") {
    spec = MakePointMass(reader);
  } else {
    throw Error(ErrorCode::kConfigError,
                "unknown env '" + std::string(name) +
                    "' (expected pendulum, hillclimb or pointmass)");
  }
  reader.CheckAllUsed(name);
  return spec;
}

std::vector<std::string> BuiltinSpecNames() {
  return {"pendulum", "hillclimb", "pointmass"};
}

std::vector<CmdpSpec> BuiltinSpecs() {
  std::vector<CmdpSpec> out;
  for (const auto& n : BuiltinSpecNames()) out.push_back(MakeSpec(n));
  return out;
}

ContextSet SampleContexts(const CmdpSpec& spec, size_t n, ContextRole role,
                          Rng& rng) {
  ContextSet set;
  set.role = role;
  for (size_t i = 0; i < n; ++i) {
    Vec c(spec.c_dim);
    for (int j = 0; j < spec.c_dim; ++j) {
      c(j) = rng.Uniform(spec.context_box[j].lo, spec.context_box[j].hi);
    }
    set.contexts.push_back(c);
  }
  return set;
}

void ValidateContexts(const CmdpSpec& spec, const ContextSet& set) {
  for (const Vec& c : set.contexts) {
    if (!spec.ContainsContext(c)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "context outside the " + spec.name + " context box");
    }
  }
}

Episode Rollout(const CmdpSpec& spec, const Vec& context,
                const ControllerFactory& policy, Rng rng) {
  if (context.size() != spec.c_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "rollout: context dimension");
  }
  if (!spec.ContainsContext(context)) {
    throw Error(ErrorCode::kInvalidArgument, "rollout: context outside the spec's box");
  }
  if (policy.action_dim() != spec.a_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "rollout: action dimension");
  }
  const int steps = spec.horizon;
  Episode ep;
  ep.trajectory.states.resize(steps, spec.s_dim);
  ep.trajectory.actions.resize(steps, spec.a_dim);
  ep.trajectory.context = context;
  ep.trajectory.round = 1;

  auto controller = policy.StartEpisode();
  Vec s = spec.initial_state(rng);
  double discount = 1.0;
  for (int t = 0; t < steps; ++t) {
    Vec a = controller->Act(s);
    if (spec.action_noise > 0.0) {
      for (Eigen::Index j = 0; j < a.size(); ++j) {
        a(j) += spec.action_noise * rng.Normal();
      }
    }
    a = spec.ClipAction(a);
    controller->Observe(a);
    ep.trajectory.states.row(t) = s.transpose();
    ep.trajectory.actions.row(t) = a.transpose();
    const double r = spec.reward(s, a);
    ep.discounted_return += discount * r;
    ep.undiscounted_return += r;
    discount *= spec.discount;
    s = spec.dynamics(s, a, context);
    if (!s.allFinite() || !std::isfinite(r)) {
      throw Error(ErrorCode::kNonFiniteState,
                  spec.name + " diverged at step " + std::to_string(t));
    }
  }
  return ep;
}

double RecomputeReturn(const CmdpSpec& spec, const Trajectory& trajectory,
                       bool discounted) {
  double total = 0.0;
  double discount = 1.0;
  for (Eigen::Index t = 0; t < trajectory.length(); ++t) {
    const double r = spec.reward(trajectory.states.row(t).transpose(),
                                 trajectory.actions.row(t).transpose());
    total += (discounted ? discount : 1.0) * r;
    discount *= spec.discount;
  }
  return total;
}

ValueEstimate EstimateValue(const CmdpSpec& spec, const Vec& context,
                            const ControllerFactory& policy, int n_episodes,
                            const Rng& rng) {
  if (n_episodes < 1) {
    throw Error(ErrorCode::kInvalidArgument, "EstimateValue: n_episodes < 1");
  }
  ValueEstimate v;
  for (int e = 0; e < n_episodes; ++e) {
    v.returns.push_back(
        Rollout(spec, context, policy, rng.Split(static_cast<uint64_t>(e)))
            .undiscounted_return);
  }
  double sum = 0.0;
  for (double r : v.returns) sum += r;
  v.mean = sum / n_episodes;
  if (n_episodes > 1) {
    double ss = 0.0;
    for (double r : v.returns) ss += (r - v.mean) * (r - v.mean);
    v.std = std::sqrt(ss / (n_episodes - 1));
  }
  return v;
}

}  // namespace deletion_lab
