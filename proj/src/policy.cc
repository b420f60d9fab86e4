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
#include "deletion_lab/policy.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "deletion_lab/error.h"
#include "deletion_lab/parallel.h"

namespace deletion_lab {

using nlohmann::json;

namespace {

Vec Clip(const Vec& a, const Vec& lo, const Vec& hi) {
  return a.cwiseMax(lo).cwiseMin(hi);
}

Vec JsonToVec(const json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json VecToJson(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

class FixedController : public EpisodeController {
 public:
  FixedController(const UniversalPolicy& k, const Vec& c, const Vec& lo,
                  const Vec& hi)
      : k_(k), c_(c), lo_(lo), hi_(hi) {}
  Vec Act(const Vec& s) override { return Clip(k_.Act(s, c_), lo_, hi_); }

 private:
  const UniversalPolicy& k_;
  const Vec& c_;
  const Vec& lo_;
  const Vec& hi_;
};

class AdaptiveController : public EpisodeController {
 public:
  AdaptiveController(const UniversalPolicy& k,
                     std::unique_ptr<ContextStream> stream, const Vec& c_lo,
                     const Vec& c_hi, const Vec& a_lo, const Vec& a_hi,
                     int refresh_every)
      : k_(k), stream_(std::move(stream)), c_lo_(c_lo), c_hi_(c_hi),
        a_lo_(a_lo), a_hi_(a_hi), refresh_every_(refresh_every) {}

  Vec Act(const Vec& s) override {
    Vec estimate = stream_->Estimate(s);
    if (step_ % refresh_every_ == 0) {
      for (Eigen::Index i = 0; i < estimate.size(); ++i) {
        if (!std::isfinite(estimate(i))) estimate(i) = 0.5 * (c_lo_(i) + c_hi_(i));
      }
      current_ = estimate.cwiseMax(c_lo_).cwiseMin(c_hi_);
    }
    ++step_;
    return Clip(k_.Act(s, current_), a_lo_, a_hi_);
  }
  void Observe(const Vec& a) override { stream_->Observe(a); }

 private:
  const UniversalPolicy& k_;
  std::unique_ptr<ContextStream> stream_;
  const Vec& c_lo_;
  const Vec& c_hi_;
  const Vec& a_lo_;
  const Vec& a_hi_;
  int refresh_every_;
  int step_ = 0;
  Vec current_;
};

class ConstantStream : public ContextStream {
 public:
  explicit ConstantStream(const Vec& c) : c_(c) {}
  Vec Estimate(const Vec&) override { return c_; }
  void Observe(const Vec&) override {}

 private:
  const Vec& c_;
};

class ZeroController : public EpisodeController {
 public:
  explicit ZeroController(int a_dim) : a_dim_(a_dim) {}
  Vec Act(const Vec&) override { return Vec::Zero(a_dim_); }

 private:
  int a_dim_;
};

class RandomController : public EpisodeController {
 public:
  RandomController(const Vec& lo, const Vec& hi, uint64_t seed)
      : lo_(lo), hi_(hi), seed_(seed) {}
  Vec Act(const Vec& s) override {
    uint64_t h = seed_;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      uint64_t bits;
      double v = s(i);
      std::memcpy(&bits, &v, sizeof bits);
      h = Mix64(h ^ bits);
    }
    Rng rng(h);
    Vec a(lo_.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.Uniform(lo_(i), hi_(i));
    return a;
  }

 private:
  const Vec& lo_;
  const Vec& hi_;
  uint64_t seed_;
};

}  // namespace

AnalyticPendulumController::AnalyticPendulumController(Gains gains)
    : gains_(gains) {}

Vec AnalyticPendulumController::Act(const Vec& state, const Vec& context) const {
  if (state.size() != 3 || context.size() != 2) {
    throw Error(ErrorCode::kDimensionMismatch, "pendulum controller dims");
  }
  const double g = context(0);
  const double l = context(1);
  if (!(g > 0.0) || !(l > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "pendulum controller needs g, l > 0");
  }
  const double th = std::atan2(state(1), state(0));
  const double thdot = state(2);
  const double a = 3.0 * g / (2.0 * l);
  const double b = 3.0 / (l * l);
  double u;
  if (state(0) > gains_.capture_cos) {
    u = (-a * std::sin(th) - gains_.kp * th - gains_.kd * thdot) / b;
  } else {
    const double energy = 0.5 * thdot * thdot + a * (std::cos(th) - 1.0);
    const double pump = thdot == 0.0 ? 1.0 : thdot;
    u = gains_.energy * (-energy / a) * pump * gains_.max_torque;
  }
  Vec out(1);
  out(0) = std::clamp(u, -gains_.max_torque, gains_.max_torque);
  return out;
}

json AnalyticPendulumController::ToJson() const {
  return {{"version", 1},
          {"kind", "analytic_pendulum"},
          {"energy", gains_.energy},
          {"kp", gains_.kp},
          {"kd", gains_.kd},
          {"max_torque", gains_.max_torque},
          {"capture_cos", gains_.capture_cos}};
}

MlpPolicy::MlpPolicy(int s_dim, int c_dim, int a_dim, int hidden,
                     Vec state_scale, Vec context_low, Vec context_high, Vec action_low,
                     Vec action_high)
    : s_dim_(s_dim), c_dim_(c_dim), a_dim_(a_dim), hidden_(hidden),
      state_scale_(std::move(state_scale)),
      context_low_(std::move(context_low)),
      context_high_(std::move(context_high)),
      action_low_(std::move(action_low)),
      action_high_(std::move(action_high)) {
  if (s_dim < 1 || c_dim < 0 || a_dim < 1 || hidden < 1 ||
      state_scale_.size() != s_dim ||
      context_low_.size() != c_dim || context_high_.size() != c_dim ||
      action_low_.size() != a_dim || action_high_.size() != a_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "MlpPolicy dimensions");
  }
  params_ = Vec::Zero(num_params());
}

MlpPolicy MlpPolicy::ForSpec(const CmdpSpec& spec, int hidden) {
  Vec scale = spec.state_scale.size() == spec.s_dim
                  ? spec.state_scale
                  : Vec(Vec::Ones(spec.s_dim));
  return MlpPolicy(spec.s_dim, spec.c_dim, spec.a_dim, hidden, scale,
                   spec.ContextLow(), spec.ContextHigh(), spec.action_low,
                   spec.action_high);
}

int MlpPolicy::num_params() const {
  const int in = s_dim_ + c_dim_;
  return hidden_ * in + hidden_ + a_dim_ * hidden_ + a_dim_;
}

void MlpPolicy::set_params(const Vec& p) {
  if (p.size() != num_params()) {
    throw Error(ErrorCode::kDimensionMismatch, "MlpPolicy parameter count");
  }
  params_ = p;
}

Vec MlpPolicy::Act(const Vec& state, const Vec& context) const {
  if (state.size() != s_dim_ || context.size() != c_dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "MlpPolicy input dims");
  }
  const int in = s_dim_ + c_dim_;
  Vec z(in);
  z.head(s_dim_) = state.cwiseProduct(state_scale_);
  for (int i = 0; i < c_dim_; ++i) {
    const double span = context_high_(i) - context_low_(i);
    z(s_dim_ + i) = span > 0.0 ? 2.0 * (context(i) - context_low_(i)) / span - 1.0 : 0.0;
  }
  const double* p = params_.data();
  Eigen::Map<const Mat> w1(p, hidden_, in);
  p += hidden_ * in;
  Eigen::Map<const Vec> b1(p, hidden_);
  p += hidden_;
  Eigen::Map<const Mat> w2(p, a_dim_, hidden_);
  p += a_dim_ * hidden_;
  Eigen::Map<const Vec> b2(p, a_dim_);
  Vec h = (w1 * z + b1).array().tanh();
  Vec out = (w2 * h + b2).array().tanh();
  Vec mid = 0.5 * (action_low_ + action_high_);
  Vec half = 0.5 * (action_high_ - action_low_);
  return mid + half.cwiseProduct(out);
}

json MlpPolicy::ToJson() const {
  return {{"version", 1},
          {"kind", "mlp"},
          {"s_dim", s_dim_},
          {"c_dim", c_dim_},
          {"a_dim", a_dim_},
          {"hidden", hidden_},
          {"state_scale", VecToJson(state_scale_)},
          {"context_low", VecToJson(context_low_)},
          {"context_high", VecToJson(context_high_)},
          {"action_low", VecToJson(action_low_)},
          {"action_high", VecToJson(action_high_)},
          {"params", VecToJson(params_)}};
}

UniversalPolicyPtr PolicyFromJson(const json& j) {
  try {
    if (j.at("version").get<int>() != 1) {
      throw Error(ErrorCode::kConfigError, "unsupported policy checkpoint version");
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "analytic_pendulum") {
      AnalyticPendulumController::Gains g;
      g.energy = j.at("energy").get<double>();
      g.kp = j.at("kp").get<double>();
      g.kd = j.at("kd").get<double>();
      g.max_torque = j.at("max_torque").get<double>();
      g.capture_cos = j.at("capture_cos").get<double>();
      return std::make_shared<AnalyticPendulumController>(g);
    }
    if (kind == "mlp") {
      auto p = std::make_shared<MlpPolicy>(
          j.at("s_dim").get<int>(), j.at("c_dim").get<int>(),
          j.at("a_dim").get<int>(), j.at("hidden").get<int>(),
          JsonToVec(j.at("state_scale")), JsonToVec(j.at("context_low")), JsonToVec(j.at("context_high")),
          JsonToVec(j.at("action_low")), JsonToVec(j.at("action_high")));
      p->set_params(JsonToVec(j.at("params")));
      return p;
    }
    throw Error(ErrorCode::kConfigError, "unknown policy kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("policy checkpoint: ") + e.what());
  }
}

PolicySearchResult TrainUniversal(const CmdpSpec& spec, const ContextSet& train,
                                  const PolicySearchConfig& cfg) {
  if (train.contexts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "TrainUniversal: empty C_tr");
  }
  if (cfg.population < 1 || cfg.elites < 1 || cfg.elites > cfg.population ||
      cfg.iterations < 0 || cfg.episodes < 1 || !(cfg.init_std > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "TrainUniversal: bad config");
  }
  ValidateContexts(spec, train);
  Rng root(cfg.seed);
  MlpPolicy base = MlpPolicy::ForSpec(spec, cfg.hidden);
  const int n_params = base.num_params();
  const int in = spec.s_dim + spec.c_dim;

  Vec mean = Vec::Zero(n_params);
  {
    Rng init = root.Split(0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < cfg.hidden * in; ++i) mean(i) = scale * init.Normal();
  }
  Vec std_dev = Vec::Constant(n_params, cfg.init_std);

  PolicySearchResult result;
  std::vector<Vec> carry;
  for (int it = 0; it < cfg.iterations; ++it) {
    Rng iter_rng = root.Split(1 + static_cast<uint64_t>(it));
    Rng sample_rng = iter_rng.Split(0);
    Rng episode_rng = iter_rng.Split(1);
    std::vector<Vec> contexts;
    std::vector<Rng> starts;
    for (int e = 0; e < cfg.episodes; ++e) {
      contexts.push_back(train.contexts[episode_rng.UniformInt(train.contexts.size())]);
      starts.push_back(episode_rng.Split(static_cast<uint64_t>(e)));
    }
    std::vector<Vec> candidates(cfg.population);
    const int carried = std::min<int>(static_cast<int>(carry.size()), cfg.population);
    for (int k = 0; k < carried; ++k) candidates[k] = carry[k];
    for (int k = carried; k < cfg.population; ++k) {
      Vec eps(n_params);
      for (int i = 0; i < n_params; ++i) eps(i) = sample_rng.Normal();
      candidates[k] = mean + std_dev.cwiseProduct(eps);
    }
    std::vector<double> scores(cfg.population);
    ParallelFor(cfg.population, [&](size_t k) {
      auto policy = std::make_shared<MlpPolicy>(base);
      policy->set_params(candidates[k]);
      double total = 0.0;
      try {
        for (int e = 0; e < cfg.episodes; ++e) {
          FixedContextPolicy pi(policy, contexts[e], spec.action_low,
                                spec.action_high);
          total += Rollout(spec, contexts[e], pi, starts[e]).undiscounted_return;
        }
        scores[k] = total / cfg.episodes;
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kNonFiniteState) throw;
        scores[k] = -std::numeric_limits<double>::infinity();
      }
    });
    std::vector<int> order(cfg.population);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    double elite_sum = 0.0;
    Vec elite_mean = Vec::Zero(n_params);
    for (int r = 0; r < cfg.elites; ++r) {
      const double s = scores[order[r]];
      if (!std::isfinite(s)) {
        throw Error(ErrorCode::kSearchDiverged,
                    "elite return not finite at iteration " + std::to_string(it));
      }
      elite_sum += s;
      elite_mean += candidates[order[r]];
    }
    elite_mean /= cfg.elites;
    carry.clear();
    for (int r = 0; r < std::min(cfg.carry_elites, cfg.elites); ++r) {
      carry.push_back(candidates[order[r]]);
    }
    Vec var = Vec::Zero(n_params);
    for (int r = 0; r < cfg.elites; ++r) {
      var += (candidates[order[r]] - elite_mean).array().square().matrix();
    }
    var /= cfg.elites;
    const double decay = 1.0 - static_cast<double>(it) / cfg.iterations;
    const double extra = cfg.extra_std * decay;
    mean = elite_mean;
    std_dev = (var.array() + extra * extra).sqrt();

    double pop_sum = 0.0;
    int finite = 0;
    for (double s : scores) {
      if (std::isfinite(s)) {
        pop_sum += s;
        ++finite;
      }
    }
    result.elite_mean_return.push_back(elite_sum / cfg.elites);
    result.mean_return.push_back(finite ? pop_sum / finite : -std::numeric_limits<double>::infinity());
  }
  auto policy = std::make_shared<MlpPolicy>(base);
  policy->set_params(mean);
  result.policy = policy;
  return result;
}

std::unique_ptr<ContextStream> ConstantPredictor::StartStream() const {
  return std::make_unique<ConstantStream>(c_);
}

FixedContextPolicy::FixedContextPolicy(UniversalPolicyPtr k, Vec context,
                                       Vec action_low, Vec action_high)
    : k_(std::move(k)), context_(std::move(context)),
      action_low_(std::move(action_low)), action_high_(std::move(action_high)) {
  if (context_.size() != k_->c_dim() || action_low_.size() != k_->a_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "FixedContextPolicy dims");
  }
}

std::unique_ptr<EpisodeController> FixedContextPolicy::StartEpisode() const {
  return std::make_unique<FixedController>(*k_, context_, action_low_, action_high_);
}

AdaptivePolicy::AdaptivePolicy(UniversalPolicyPtr k, ContextPredictorPtr phi,
                               const CmdpSpec& spec, int refresh_every)
    : k_(std::move(k)), phi_(std::move(phi)),
      context_low_(spec.ContextLow()), context_high_(spec.ContextHigh()),
      action_low_(spec.action_low), action_high_(spec.action_high),
      refresh_every_(refresh_every) {
  if (phi_->output_dim() != k_->c_dim() || phi_->output_dim() != spec.c_dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "estimator output dim " + std::to_string(phi_->output_dim()) +
                    " != context dim " + std::to_string(spec.c_dim));
  }
  if (refresh_every_ < 1) {
    throw Error(ErrorCode::kInvalidArgument, "refresh_every must be >= 1");
  }
}

std::unique_ptr<EpisodeController> AdaptivePolicy::StartEpisode() const {
  return std::make_unique<AdaptiveController>(*k_, phi_->StartStream(),
                                              context_low_, context_high_,
                                              action_low_, action_high_,
                                              refresh_every_);
}

std::unique_ptr<EpisodeController> ZeroPolicy::StartEpisode() const {
  return std::make_unique<ZeroController>(a_dim_);
}

RandomPolicy::RandomPolicy(Vec action_low, Vec action_high, uint64_t seed)
    : low_(std::move(action_low)), high_(std::move(action_high)), seed_(seed) {}

std::unique_ptr<EpisodeController> RandomPolicy::StartEpisode() const {
  return std::make_unique<RandomController>(low_, high_, seed_);
}

std::shared_ptr<ControllerFactory> WithContext(UniversalPolicyPtr k,
                                               const Vec& context,
                                               const CmdpSpec& spec) {
  return std::make_shared<FixedContextPolicy>(std::move(k), context,
                                              spec.action_low, spec.action_high);
}

std::shared_ptr<ControllerFactory> WithEstimator(UniversalPolicyPtr k,
                                                 ContextPredictorPtr phi,
                                                 const CmdpSpec& spec,
                                                 int refresh_every) {
  return std::make_shared<AdaptivePolicy>(std::move(k), std::move(phi), spec,
                                          refresh_every);
}

}  // namespace deletion_lab
