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
#ifndef DELETION_LAB_CMDP_H_
#define DELETION_LAB_CMDP_H_

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "deletion_lab/numerics.h"
#include "deletion_lab/replay_buffer.h"
#include "deletion_lab/rng.h"

namespace deletion_lab {

struct Range {
  double lo;
  double hi;
};

// A family of MDPs indexed by a context vector. Only the transition depends
// on the context; reward and initial-state law are shared by the family.
struct CmdpSpec {
  std::string name;
  int s_dim = 0;
  int a_dim = 0;
  int c_dim = 0;
  std::vector<std::string> context_names;
  std::vector<Range> context_box;
  Vec action_low;
  Vec action_high;
  int horizon = 200;
  double discount = 0.99;
  double dt = 0.05;
  // Std of Gaussian noise added to every action before clipping.
  double action_noise = 0.0;
  // A state away from equilibrium, used for identifiability probes.
  Vec probe_state;
  // Typical inverse magnitude per state coordinate, for input scaling.
  Vec state_scale;

  std::function<Vec(const Vec& s, const Vec& a, const Vec& c)> dynamics;
  std::function<double(const Vec& s, const Vec& a)> reward;
  std::function<Vec(Rng& rng)> initial_state;

  bool ContainsContext(const Vec& c) const;
  Vec ClampContext(const Vec& c) const;
  Vec ClipAction(const Vec& a) const;
  Vec ContextLow() const;
  Vec ContextHigh() const;
};

// Numeric overrides, e.g. {"horizon", 100}, {"ctx.g.lo", 8}. Unknown keys are
// a kConfigError.
using SpecOverrides = std::map<std::string, double>;

// pendulum:  s = (cos th, sin th, thdot), th = 0 upright, a = torque,
//            c = (g, l). Semi-implicit Euler.
// hillclimb: s = (x, v), a = push in [-1, 1], c = (force, gravity). The goal
//            x >= 0.45 is absorbing.
// pointmass: s = (x, v), a = force in [-1, 1], c = (drag).
CmdpSpec MakeSpec(std::string_view name, const SpecOverrides& overrides = {});
std::vector<CmdpSpec> BuiltinSpecs();
std::vector<std::string> BuiltinSpecNames();

enum class ContextRole { kTrain, kEval };

struct ContextSet {
  std::vector<Vec> contexts;
  ContextRole role = ContextRole::kTrain;
};

// Uniform draws from the spec's context box.
ContextSet SampleContexts(const CmdpSpec& spec, size_t n, ContextRole role,
                          Rng& rng);
// Throws kInvalidArgument if a context lies outside the box.
void ValidateContexts(const CmdpSpec& spec, const ContextSet& set);

// Per-episode, possibly stateful, decision maker.
class EpisodeController {
 public:
  virtual ~EpisodeController() = default;
  virtual Vec Act(const Vec& state) = 0;
  // Called with the action actually applied (after noise and clipping).
  virtual void Observe(const Vec& applied_action) { (void)applied_action; }
};

class ControllerFactory {
 public:
  virtual ~ControllerFactory() = default;
  virtual std::unique_ptr<EpisodeController> StartEpisode() const = 0;
  virtual int action_dim() const = 0;
};

struct Episode {
  Trajectory trajectory;
  double discounted_return = 0.0;
  double undiscounted_return = 0.0;
};

// Runs exactly spec.horizon steps on M(c). The trajectory is tagged round 1.
// Throws kNonFiniteState (with the step index) if the state diverges.
Episode Rollout(const CmdpSpec& spec, const Vec& context,
                const ControllerFactory& policy, Rng rng);

double RecomputeReturn(const CmdpSpec& spec, const Trajectory& trajectory,
                       bool discounted);

struct ValueEstimate {
  double mean = 0.0;
  double std = 0.0;  // sample std, 0 when n == 1
  std::vector<double> returns;
};

// Episode e is rolled out on rng.Split(e), so two calls with the same rng see
// the same initial states.
ValueEstimate EstimateValue(const CmdpSpec& spec, const Vec& context,
                            const ControllerFactory& policy, int n_episodes,
                            const Rng& rng);

}  // namespace deletion_lab

#endif  // DELETION_LAB_CMDP_H_
