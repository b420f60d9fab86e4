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
#ifndef DELETION_LAB_POLICY_H_
#define DELETION_LAB_POLICY_H_

#include <memory>
#include <string>
#include <vector>

#include "deletion_lab/cmdp.h"
#include "deletion_lab/numerics.h"
#include "deletion_lab/rng.h"
#include "json.hpp"

namespace deletion_lab {

// A universal policy K: maps (state, context) to an action.
class UniversalPolicy {
 public:
  virtual ~UniversalPolicy() = default;
  virtual Vec Act(const Vec& state, const Vec& context) const = 0;
  virtual int s_dim() const = 0;
  virtual int c_dim() const = 0;
  virtual int a_dim() const = 0;
  virtual nlohmann::json ToJson() const = 0;
};

using UniversalPolicyPtr = std::shared_ptr<const UniversalPolicy>;

// Energy-shaping swing-up with a feedback-linearised PD balance near the
// upright, for the pendulum spec (theta = 0 upright).
class AnalyticPendulumController : public UniversalPolicy {
 public:
  struct Gains {
    double energy = 5.0;
    double kp = 40.0;
    double kd = 10.0;
    double max_torque = 2.0;
    // Balance mode when cos(theta) exceeds this.
    double capture_cos = 0.7;
  };

  AnalyticPendulumController() : AnalyticPendulumController(Gains{}) {}
  explicit AnalyticPendulumController(Gains gains);

  Vec Act(const Vec& state, const Vec& context) const override;
  int s_dim() const override { return 3; }
  int c_dim() const override { return 2; }
  int a_dim() const override { return 1; }
  nlohmann::json ToJson() const override;

  const Gains& gains() const { return gains_; }

 private:
  Gains gains_;
};

// One tanh hidden layer on z = [s, normalised c]; output tanh scaled to the
// action bounds.
class MlpPolicy : public UniversalPolicy {
 public:
  MlpPolicy(int s_dim, int c_dim, int a_dim, int hidden, Vec state_scale,
            Vec context_low, Vec context_high, Vec action_low,
            Vec action_high);
  static MlpPolicy ForSpec(const CmdpSpec& spec, int hidden = 32);

  Vec Act(const Vec& state, const Vec& context) const override;
  int s_dim() const override { return s_dim_; }
  int c_dim() const override { return c_dim_; }
  int a_dim() const override { return a_dim_; }
  int hidden() const { return hidden_; }
  nlohmann::json ToJson() const override;

  int num_params() const;
  const Vec& params() const { return params_; }
  void set_params(const Vec& p);

 private:
  int s_dim_, c_dim_, a_dim_, hidden_;
  Vec state_scale_, context_low_, context_high_, action_low_, action_high_;
  Vec params_;
};

UniversalPolicyPtr PolicyFromJson(const nlohmann::json& j);

struct PolicySearchConfig {
  int population = 64;
  int elites = 8;
  int iterations = 100;
  double init_std = 0.5;
  // Extra std added to the refitted distribution, decayed linearly to 0.
  double extra_std = 0.3;
  // Top candidates re-entered (and re-evaluated) in the next population.
  int carry_elites = 2;
  // Episodes per candidate evaluation; contexts resampled from C_tr.
  int episodes = 8;
  int hidden = 32;
  uint64_t seed = 0;
};

struct PolicySearchResult {
  std::shared_ptr<const MlpPolicy> policy;
  std::vector<double> elite_mean_return;
  std::vector<double> mean_return;
};

PolicySearchResult TrainUniversal(const CmdpSpec& spec, const ContextSet& train,
                                  const PolicySearchConfig& cfg);

// Streaming context estimate for one episode.
class ContextStream {
 public:
  virtual ~ContextStream() = default;
  // Estimate after observing the current state.
  virtual Vec Estimate(const Vec& state) = 0;
  virtual void Observe(const Vec& applied_action) = 0;
};

class ContextPredictor {
 public:
  virtual ~ContextPredictor() = default;
  virtual std::unique_ptr<ContextStream> StartStream() const = 0;
  virtual int output_dim() const = 0;
};

using ContextPredictorPtr = std::shared_ptr<const ContextPredictor>;

class ConstantPredictor : public ContextPredictor {
 public:
  explicit ConstantPredictor(Vec c) : c_(std::move(c)) {}
  std::unique_ptr<ContextStream> StartStream() const override;
  int output_dim() const override { return static_cast<int>(c_.size()); }

 private:
  Vec c_;
};

// K(FixedContext(c)).
class FixedContextPolicy : public ControllerFactory {
 public:
  FixedContextPolicy(UniversalPolicyPtr k, Vec context, Vec action_low,
                     Vec action_high);
  std::unique_ptr<EpisodeController> StartEpisode() const override;
  int action_dim() const override { return k_->a_dim(); }

 private:
  UniversalPolicyPtr k_;
  Vec context_, action_low_, action_high_;
};

// K(phi): feeds the streaming estimate, clamped to the context box, into K.
class AdaptivePolicy : public ControllerFactory {
 public:
  AdaptivePolicy(UniversalPolicyPtr k, ContextPredictorPtr phi,
                 const CmdpSpec& spec, int refresh_every = 1);
  std::unique_ptr<EpisodeController> StartEpisode() const override;
  int action_dim() const override { return k_->a_dim(); }

 private:
  UniversalPolicyPtr k_;
  ContextPredictorPtr phi_;
  Vec context_low_, context_high_, action_low_, action_high_;
  int refresh_every_;
};

class ZeroPolicy : public ControllerFactory {
 public:
  explicit ZeroPolicy(int a_dim) : a_dim_(a_dim) {}
  std::unique_ptr<EpisodeController> StartEpisode() const override;
  int action_dim() const override { return a_dim_; }

 private:
  int a_dim_;
};

// Uniform random actions in the bounds, drawn from a stream keyed by the seed
// and the bits of the current state.
class RandomPolicy : public ControllerFactory {
 public:
  RandomPolicy(Vec action_low, Vec action_high, uint64_t seed);
  std::unique_ptr<EpisodeController> StartEpisode() const override;
  int action_dim() const override { return static_cast<int>(low_.size()); }

 private:
  Vec low_, high_;
  uint64_t seed_;
};

std::shared_ptr<ControllerFactory> WithContext(UniversalPolicyPtr k,
                                               const Vec& context,
                                               const CmdpSpec& spec);
std::shared_ptr<ControllerFactory> WithEstimator(UniversalPolicyPtr k,
                                                 ContextPredictorPtr phi,
                                                 const CmdpSpec& spec,
                                                 int refresh_every = 1);

}  // namespace deletion_lab

#endif  // DELETION_LAB_POLICY_H_
