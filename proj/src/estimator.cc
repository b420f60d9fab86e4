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

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "deletion_lab/error.h"

namespace deletion_lab {

using nlohmann::json;

namespace {

Vec JsonToVec(const json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json VecToJson(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Mat Sigmoid(const Mat& x) {
  return (1.0 + (-x.array()).exp()).inverse().matrix();
}

void ValidateShape(const EstimatorShape& s) {
  if (s.s_dim < 1 || s.a_dim < 0 || s.c_dim < 1 || s.k < 0) {
    throw Error(ErrorCode::kInvalidArgument, "bad estimator shape");
  }
}

// Views into a flat GRU parameter vector.
struct GruView {
  Eigen::Map<const Mat> w_ih, w_hh;
  Eigen::Map<const Vec> b_ih, b_hh;
  Eigen::Map<const Mat> w_o;
  Eigen::Map<const Vec> b_o;

  GruView(const double* p, int in, int h, int c)
      : w_ih(p, 3 * h, in),
        w_hh(p + 3 * h * in, 3 * h, h),
        b_ih(p + 3 * h * in + 3 * h * h, 3 * h),
        b_hh(p + 3 * h * in + 3 * h * h + 3 * h, 3 * h),
        w_o(p + 3 * h * in + 3 * h * h + 6 * h, c, h),
        b_o(p + 3 * h * in + 3 * h * h + 6 * h + c * h, c) {}
};

int GruParamCount(int in, int h, int c) {
  return 3 * h * in + 3 * h * h + 6 * h + c * h + c;
}

struct GruStep {
  Mat r, z, n, h;
};

// One GRU cell on a batch (columns). ghn receives W_hn h + b_hn.
GruStep GruCell(const GruView& g, int hs, const Mat& x, const Mat& h_prev,
                Mat* ghn_out) {
  Mat gi = g.w_ih * x;
  gi.colwise() += g.b_ih;
  Mat gh = g.w_hh * h_prev;
  gh.colwise() += g.b_hh;
  GruStep s;
  s.r = Sigmoid(gi.topRows(hs) + gh.topRows(hs));
  s.z = Sigmoid(gi.middleRows(hs, hs) + gh.middleRows(hs, hs));
  Mat ghn = gh.bottomRows(hs);
  s.n = (gi.bottomRows(hs) + s.r.cwiseProduct(ghn)).array().tanh().matrix();
  s.h = (1.0 - s.z.array()).matrix().cwiseProduct(s.n) + s.z.cwiseProduct(h_prev);
  if (ghn_out) *ghn_out = std::move(ghn);
  return s;
}

}  // namespace

std::string_view ArchName(EstimatorArch arch) {
  return arch == EstimatorArch::kMlp ? "mlp" : "gru";
}

EstimatorArch ParseArch(std::string_view name) {
  if (name == "mlp") return EstimatorArch::kMlp;
  if (name == "gru") return EstimatorArch::kGru;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown estimator arch '" + std::string(name) + "' (expected mlp or gru)");
}

Vec MakeWindow(const Trajectory& traj, Eigen::Index t, int k) {
  const Eigen::Index s_dim = traj.states.cols();
  const Eigen::Index a_dim = traj.actions.cols();
  if (t < 0 || t >= traj.length()) {
    throw Error(ErrorCode::kShapeMismatch, "window index out of range");
  }
  Vec w = Vec::Zero((k + 1) * s_dim + k * a_dim);
  for (int j = 0; j <= k; ++j) {
    if (t - j >= 0) w.segment(j * s_dim, s_dim) = traj.states.row(t - j).transpose();
  }
  const Eigen::Index off = (k + 1) * s_dim;
  for (int j = 1; j <= k; ++j) {
    if (t - j >= 0) {
      w.segment(off + (j - 1) * a_dim, a_dim) = traj.actions.row(t - j).transpose();
    }
  }
  return w;
}

Mat MakeStepInputs(const Trajectory& traj, Eigen::Index t) {
  const Eigen::Index s_dim = traj.states.cols();
  const Eigen::Index a_dim = traj.actions.cols();
  if (t < 0 || t >= traj.length()) {
    throw Error(ErrorCode::kShapeMismatch, "prefix index out of range");
  }
  Mat x = Mat::Zero(t + 1, s_dim + a_dim);
  x.leftCols(s_dim) = traj.states.topRows(t + 1);
  if (t >= 1) x.block(1, s_dim, t, a_dim) = traj.actions.topRows(t);
  return x;
}

FeatureNormalizer FeatureNormalizer::Identity(int s_dim, int a_dim) {
  return {Vec::Zero(s_dim), Vec::Ones(s_dim), Vec::Zero(a_dim), Vec::Ones(a_dim)};
}

FeatureNormalizer FeatureNormalizer::Fit(const std::vector<TrajectoryPtr>& data) {
  if (data.empty()) throw Error(ErrorCode::kEmptyBuffer, "normaliser: no data");
  const Eigen::Index s_dim = data[0]->states.cols();
  const Eigen::Index a_dim = data[0]->actions.cols();
  auto stats = [&](bool states, Eigen::Index dim, Vec* mean, Vec* sd) {
    Vec sum = Vec::Zero(dim), sq = Vec::Zero(dim);
    double n = 0.0;
    for (const auto& t : data) {
      const Mat& m = states ? t->states : t->actions;
      sum += m.colwise().sum().transpose();
      n += static_cast<double>(m.rows());
    }
    *mean = sum / n;
    for (const auto& t : data) {
      const Mat& m = states ? t->states : t->actions;
      sq += (m.rowwise() - mean->transpose()).array().square().colwise().sum().matrix().transpose();
    }
    *sd = (sq / n).array().sqrt();
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (!((*sd)(i) > 1e-12)) (*sd)(i) = 1.0;
    }
  };
  FeatureNormalizer f;
  stats(true, s_dim, &f.state_mean, &f.state_std);
  stats(false, a_dim, &f.action_mean, &f.action_std);
  return f;
}

EstimatorExample WindowExample(const Trajectory& traj, Eigen::Index t, int k) {
  return {MakeWindow(traj, t, k).transpose(), traj.context};
}

EstimatorExample SequenceExample(const Trajectory& traj, Eigen::Index t_end) {
  return {MakeStepInputs(traj, t_end), traj.context};
}

Estimator::Estimator(EstimatorArch arch, EstimatorShape shape)
    : arch_(arch), shape_(shape) {
  ValidateShape(shape_);
  set_normalizer(FeatureNormalizer::Identity(shape_.s_dim, shape_.a_dim));
}

Estimator Estimator::Mlp(const EstimatorShape& shape, std::vector<int> widths,
                         Rng& rng) {
  Estimator e(EstimatorArch::kMlp, shape);
  for (int w : widths) {
    if (w < 1) throw Error(ErrorCode::kInvalidArgument, "MLP width must be >= 1");
  }
  e.widths_ = std::move(widths);
  int in = shape.window_size();
  std::vector<double> p;
  std::vector<int> dims = e.widths_;
  dims.push_back(shape.c_dim);
  for (int out : dims) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(std::max(in, 1)));
    for (int i = 0; i < out * in; ++i) p.push_back(scale * rng.Normal());
    for (int i = 0; i < out; ++i) p.push_back(0.0);
    in = out;
  }
  e.params_ = Eigen::Map<Vec>(p.data(), static_cast<Eigen::Index>(p.size()));
  return e;
}

Estimator Estimator::Gru(const EstimatorShape& shape, int hidden, Rng& rng) {
  if (hidden < 1) throw Error(ErrorCode::kInvalidArgument, "GRU hidden must be >= 1");
  Estimator e(EstimatorArch::kGru, shape);
  e.hidden_ = hidden;
  const int n = GruParamCount(shape.step_size(), hidden, shape.c_dim);
  e.params_ = Vec(n);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int i = 0; i < n; ++i) e.params_(i) = rng.Uniform(-bound, bound);
  e.params_.tail(shape.c_dim).setZero();
  return e;
}

void Estimator::set_params(const Vec& p) {
  if (p.size() != params_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "estimator parameter count");
  }
  params_ = p;
}

void Estimator::set_output_bias(const Vec& c) {
  if (c.size() != shape_.c_dim) {
    throw Error(ErrorCode::kShapeMismatch, "output bias dimension");
  }
  params_.tail(shape_.c_dim) = c;
}

void Estimator::set_normalizer(FeatureNormalizer norm) {
  if (norm.state_mean.size() != shape_.s_dim || norm.state_std.size() != shape_.s_dim ||
      norm.action_mean.size() != shape_.a_dim || norm.action_std.size() != shape_.a_dim) {
    throw Error(ErrorCode::kShapeMismatch, "normaliser dimension");
  }
  norm_ = std::move(norm);
  const int s = shape_.s_dim, a = shape_.a_dim, k = shape_.k;
  if (arch_ == EstimatorArch::kMlp) {
    row_mean_.resize(shape_.window_size());
    row_inv_std_.resize(shape_.window_size());
    for (int j = 0; j <= k; ++j) {
      row_mean_.segment(j * s, s) = norm_.state_mean;
      row_inv_std_.segment(j * s, s) = norm_.state_std.cwiseInverse();
    }
    for (int j = 0; j < k; ++j) {
      row_mean_.segment((k + 1) * s + j * a, a) = norm_.action_mean;
      row_inv_std_.segment((k + 1) * s + j * a, a) = norm_.action_std.cwiseInverse();
    }
  } else {
    row_mean_.resize(s + a);
    row_inv_std_.resize(s + a);
    row_mean_ << norm_.state_mean, norm_.action_mean;
    row_inv_std_ << norm_.state_std.cwiseInverse(), norm_.action_std.cwiseInverse();
  }
}

Mat Estimator::Normalize(const Mat& inputs) const {
  const Eigen::Index want = arch_ == EstimatorArch::kMlp ? shape_.window_size()
                                                         : shape_.step_size();
  if (inputs.cols() != want || inputs.rows() < 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "estimator input has " + std::to_string(inputs.cols()) +
                    " columns, expected " + std::to_string(want));
  }
  return ((inputs.rowwise() - row_mean_.transpose()).array().rowwise() *
          row_inv_std_.transpose().array())
      .matrix();
}

Mat Estimator::PredictAll(const Mat& inputs) const {
  Mat x = Normalize(inputs).transpose();  // features x rows
  if (arch_ == EstimatorArch::kMlp) {
    const double* p = params_.data();
    int in = shape_.window_size();
    std::vector<int> dims = widths_;
    dims.push_back(shape_.c_dim);
    Mat a = x;
    for (size_t l = 0; l < dims.size(); ++l) {
      const int out = dims[l];
      Eigen::Map<const Mat> w(p, out, in);
      Eigen::Map<const Vec> b(p + out * in, out);
      p += out * in + out;
      Mat zl = w * a;
      zl.colwise() += b;
      a = l + 1 < dims.size() ? Mat(zl.array().tanh()) : zl;
      in = out;
    }
    return a.transpose();
  }
  const int hs = hidden_;
  GruView g(params_.data(), shape_.step_size(), hs, shape_.c_dim);
  Mat out(x.cols(), shape_.c_dim);
  Mat h = Mat::Zero(hs, 1);
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    h = GruCell(g, hs, x.col(t), h, nullptr).h;
    out.row(t) = (g.w_o * h + g.b_o).transpose();
  }
  return out;
}

Vec Estimator::Predict(const Mat& inputs) const {
  if (arch_ == EstimatorArch::kMlp && inputs.rows() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "MLP predicts one window at a time");
  }
  Mat all = PredictAll(inputs);
  return all.row(all.rows() - 1).transpose();
}

Vec Estimator::PredictAt(const Trajectory& traj, Eigen::Index t) const {
  if (arch_ == EstimatorArch::kMlp) {
    return Predict(MakeWindow(traj, t, shape_.k).transpose());
  }
  return Predict(MakeStepInputs(traj, t));
}

double Estimator::LossAndGrad(const std::vector<EstimatorExample>& batch,
                              Vec* grad) const {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  for (const auto& ex : batch) {
    if (ex.context.size() != shape_.c_dim) {
      throw Error(ErrorCode::kShapeMismatch, "example context dimension");
    }
  }
  const double loss = arch_ == EstimatorArch::kMlp ? MlpLossAndGrad(batch, grad)
                                                   : GruLossAndGrad(batch, grad);
  if (!std::isfinite(loss) || (grad && !grad->allFinite())) {
    throw Error(ErrorCode::kNonFiniteLoss, "estimator loss or gradient not finite");
  }
  return loss;
}

double Estimator::MlpLossAndGrad(const std::vector<EstimatorExample>& batch,
                                 Vec* grad) const {
  const Eigen::Index bsz = static_cast<Eigen::Index>(batch.size());
  Mat raw(bsz, shape_.window_size());
  Mat target(shape_.c_dim, bsz);
  for (Eigen::Index b = 0; b < bsz; ++b) {
    if (batch[b].inputs.rows() != 1 || batch[b].inputs.cols() != shape_.window_size()) {
      throw Error(ErrorCode::kShapeMismatch, "MLP example must be one window row");
    }
    raw.row(b) = batch[b].inputs.row(0);
    target.col(b) = batch[b].context;
  }
  std::vector<int> dims = widths_;
  dims.push_back(shape_.c_dim);
  const size_t layers = dims.size();
  std::vector<Mat> acts(layers + 1);
  acts[0] = Normalize(raw).transpose();
  std::vector<const double*> wptr(layers);
  std::vector<int> ins(layers);
  const double* p = params_.data();
  int in = shape_.window_size();
  for (size_t l = 0; l < layers; ++l) {
    const int out = dims[l];
    wptr[l] = p;
    ins[l] = in;
    Eigen::Map<const Mat> w(p, out, in);
    Eigen::Map<const Vec> bias(p + out * in, out);
    p += out * in + out;
    Mat zl = w * acts[l];
    zl.colwise() += bias;
    acts[l + 1] = l + 1 < layers ? Mat(zl.array().tanh()) : zl;
    in = out;
  }
  Mat diff = acts[layers] - target;
  const double loss = diff.squaredNorm() / static_cast<double>(bsz);
  if (!grad) return loss;

  grad->setZero(params_.size());
  Mat dz = 2.0 * diff / static_cast<double>(bsz);
  for (size_t l = layers; l-- > 0;) {
    const int out = dims[l];
    const Eigen::Index off = wptr[l] - params_.data();
    Eigen::Map<Mat> dw(grad->data() + off, out, ins[l]);
    Eigen::Map<Vec> db(grad->data() + off + out * ins[l], out);
    dw.noalias() = dz * acts[l].transpose();
    db = dz.rowwise().sum();
    if (l > 0) {
      Eigen::Map<const Mat> w(wptr[l], out, ins[l]);
      Mat da = w.transpose() * dz;
      dz = da.cwiseProduct((1.0 - acts[l].array().square()).matrix());
    }
  }
  return loss;
}

double Estimator::GruLossAndGrad(const std::vector<EstimatorExample>& batch,
                                 Vec* grad) const {
  const int hs = hidden_;
  const int in = shape_.step_size();
  const int c = shape_.c_dim;
  const Eigen::Index bsz = static_cast<Eigen::Index>(batch.size());
  Eigen::Index t_max = 0;
  double count = 0.0;
  std::vector<Mat> norm(bsz);
  for (Eigen::Index b = 0; b < bsz; ++b) {
    norm[b] = Normalize(batch[b].inputs);
    t_max = std::max(t_max, norm[b].rows());
    count += static_cast<double>(norm[b].rows());
  }
  Mat target(c, bsz);
  for (Eigen::Index b = 0; b < bsz; ++b) target.col(b) = batch[b].context;

  GruView g(params_.data(), in, hs, c);
  std::vector<Mat> xs(t_max), hprev(t_max), rs(t_max), zs(t_max), ns(t_max),
      ghns(t_max), dys(t_max);
  Mat h = Mat::Zero(hs, bsz);
  double loss = 0.0;
  for (Eigen::Index t = 0; t < t_max; ++t) {
    Mat x = Mat::Zero(in, bsz);
    Mat mask = Mat::Zero(1, bsz);
    for (Eigen::Index b = 0; b < bsz; ++b) {
      if (t < norm[b].rows()) {
        x.col(b) = norm[b].row(t).transpose();
        mask(0, b) = 1.0;
      }
    }
    GruStep s = GruCell(g, hs, x, h, &ghns[t]);
    Mat y = g.w_o * s.h;
    y.colwise() += g.b_o;
    Mat diff = (y - target).array().rowwise() * mask.row(0).array();
    loss += diff.squaredNorm();
    dys[t] = 2.0 * diff / count;
    xs[t] = std::move(x);
    hprev[t] = h;
    h = s.h;
    rs[t] = std::move(s.r);
    zs[t] = std::move(s.z);
    ns[t] = std::move(s.n);
  }
  loss /= count;
  if (!grad) return loss;

  grad->setZero(params_.size());
  double* base = grad->data();
  Eigen::Map<Mat> dw_ih(base, 3 * hs, in);
  Eigen::Map<Mat> dw_hh(base + 3 * hs * in, 3 * hs, hs);
  Eigen::Map<Vec> db_ih(base + 3 * hs * in + 3 * hs * hs, 3 * hs);
  Eigen::Map<Vec> db_hh(base + 3 * hs * in + 3 * hs * hs + 3 * hs, 3 * hs);
  Eigen::Map<Mat> dw_o(base + 3 * hs * in + 3 * hs * hs + 6 * hs, c, hs);
  Eigen::Map<Vec> db_o(base + 3 * hs * in + 3 * hs * hs + 6 * hs + c * hs, c);

  Mat dh_next = Mat::Zero(hs, bsz);
  Mat dgi(3 * hs, bsz), dgh(3 * hs, bsz);
  for (Eigen::Index t = t_max; t-- > 0;) {
    const Mat h_t = (1.0 - zs[t].array()).matrix().cwiseProduct(ns[t]) +
                    zs[t].cwiseProduct(hprev[t]);
    dw_o.noalias() += dys[t] * h_t.transpose();
    db_o += dys[t].rowwise().sum();
    Mat dh = g.w_o.transpose() * dys[t] + dh_next;

    Mat dn = dh.cwiseProduct((1.0 - zs[t].array()).matrix());
    Mat dz = dh.cwiseProduct(hprev[t] - ns[t]);
    Mat dn_pre = dn.cwiseProduct((1.0 - ns[t].array().square()).matrix());
    Mat dr = dn_pre.cwiseProduct(ghns[t]);
    Mat dz_pre = dz.cwiseProduct((zs[t].array() * (1.0 - zs[t].array())).matrix());
    Mat dr_pre = dr.cwiseProduct((rs[t].array() * (1.0 - rs[t].array())).matrix());

    dgi.topRows(hs) = dr_pre;
    dgi.middleRows(hs, hs) = dz_pre;
    dgi.bottomRows(hs) = dn_pre;
    dgh.topRows(hs) = dr_pre;
    dgh.middleRows(hs, hs) = dz_pre;
    dgh.bottomRows(hs) = dn_pre.cwiseProduct(rs[t]);

    dw_ih.noalias() += dgi * xs[t].transpose();
    db_ih += dgi.rowwise().sum();
    dw_hh.noalias() += dgh * hprev[t].transpose();
    db_hh += dgh.rowwise().sum();
    dh_next = dh.cwiseProduct(zs[t]);
    dh_next.noalias() += g.w_hh.transpose() * dgh;
  }
  return loss;
}

double Estimator::EvaluateLoss(const std::vector<TrajectoryPtr>& data) const {
  if (data.empty()) throw Error(ErrorCode::kEmptyBuffer, "EvaluateLoss: no data");
  double total = 0.0;
  double count = 0.0;
  for (const auto& traj : data) {
    Mat inputs;
    if (arch_ == EstimatorArch::kMlp) {
      inputs.resize(traj->length(), shape_.window_size());
      for (Eigen::Index t = 0; t < traj->length(); ++t) {
        inputs.row(t) = MakeWindow(*traj, t, shape_.k).transpose();
      }
    } else {
      inputs = MakeStepInputs(*traj, traj->length() - 1);
    }
    Mat pred = PredictAll(inputs);
    total += (pred.rowwise() - traj->context.transpose()).squaredNorm();
    count += static_cast<double>(traj->length());
  }
  return total / count;
}

class MlpStream : public ContextStream {
 public:
  explicit MlpStream(const Estimator& e) : e_(e) {}

  Vec Estimate(const Vec& state) override {
    states_.push_front(state);
    const int k = e_.shape_.k;
    while (static_cast<int>(states_.size()) > k + 1) states_.pop_back();
    const int s = e_.shape_.s_dim, a = e_.shape_.a_dim;
    Vec w = Vec::Zero(e_.shape_.window_size());
    for (size_t j = 0; j < states_.size(); ++j) w.segment(j * s, s) = states_[j];
    for (size_t j = 0; j < actions_.size(); ++j) {
      w.segment((k + 1) * s + j * a, a) = actions_[j];
    }
    return e_.Predict(w.transpose());
  }

  void Observe(const Vec& action) override {
    actions_.push_front(action);
    while (static_cast<int>(actions_.size()) > e_.shape_.k) actions_.pop_back();
  }

 private:
  const Estimator& e_;
  std::deque<Vec> states_, actions_;
};

class GruStream : public ContextStream {
 public:
  explicit GruStream(const Estimator& e)
      : e_(e), h_(Mat::Zero(e.hidden_, 1)), prev_action_(Vec::Zero(e.shape_.a_dim)) {}

  Vec Estimate(const Vec& state) override {
    Mat row(1, e_.shape_.step_size());
    row << state.transpose(), prev_action_.transpose();
    Mat x = e_.Normalize(row).transpose();
    GruView g(e_.params_.data(), e_.shape_.step_size(), e_.hidden_, e_.shape_.c_dim);
    h_ = GruCell(g, e_.hidden_, x, h_, nullptr).h;
    return g.w_o * h_ + g.b_o;
  }

  void Observe(const Vec& action) override { prev_action_ = action; }

 private:
  const Estimator& e_;
  Mat h_;
  Vec prev_action_;
};

std::unique_ptr<ContextStream> Estimator::StartStream() const {
  if (arch_ == EstimatorArch::kMlp) return std::make_unique<MlpStream>(*this);
  return std::make_unique<GruStream>(*this);
}

json Estimator::ToJson() const {
  return {{"version", 1},
          {"arch", std::string(ArchName(arch_))},
          {"s_dim", shape_.s_dim},
          {"a_dim", shape_.a_dim},
          {"c_dim", shape_.c_dim},
          {"k", shape_.k},
          {"widths", widths_},
          {"hidden", hidden_},
          {"frozen", frozen_},
          {"state_mean", VecToJson(norm_.state_mean)},
          {"state_std", VecToJson(norm_.state_std)},
          {"action_mean", VecToJson(norm_.action_mean)},
          {"action_std", VecToJson(norm_.action_std)},
          {"params", VecToJson(params_)}};
}

Estimator Estimator::FromJson(const json& j) {
  try {
    if (j.at("version").get<int>() != 1) {
      throw Error(ErrorCode::kConfigError, "unsupported estimator checkpoint version");
    }
    EstimatorShape shape{j.at("s_dim").get<int>(), j.at("a_dim").get<int>(),
                         j.at("c_dim").get<int>(), j.at("k").get<int>()};
    Rng rng(0);
    Estimator e = ParseArch(j.at("arch").get<std::string>()) == EstimatorArch::kMlp
                      ? Mlp(shape, j.at("widths").get<std::vector<int>>(), rng)
                      : Gru(shape, j.at("hidden").get<int>(), rng);
    e.set_params(JsonToVec(j.at("params")));
    e.set_normalizer({JsonToVec(j.at("state_mean")), JsonToVec(j.at("state_std")),
                      JsonToVec(j.at("action_mean")), JsonToVec(j.at("action_std"))});
    e.frozen_ = j.at("frozen").get<bool>();
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kConfigError, std::string("estimator checkpoint: ") + ex.what());
  }
}

Estimator TrainRound(Estimator phi, const std::vector<TrajectoryPtr>& view,
                     const TrainConfig& cfg, TrainLog* log) {
  if (view.empty()) throw Error(ErrorCode::kEmptyBuffer, "TrainRound: empty view");
  if (!(cfg.learning_rate > 0.0) || cfg.batch_size < 1 || cfg.sequence_batch < 1 ||
      cfg.steps < 0 || cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "TrainRound: bad config");
  }
  if (cfg.steps == 0) return phi;
  if (!phi.normalizer_frozen()) {
    phi.set_normalizer(FeatureNormalizer::Fit(view));
    phi.FreezeNormalizer();
    Vec mean = Vec::Zero(phi.shape().c_dim);
    for (const auto& t : view) mean += t->context;
    phi.set_output_bias(mean / static_cast<double>(view.size()));
  }
  Rng rng(cfg.seed);
  Vec velocity = Vec::Zero(phi.num_params());
  Vec grad;
  Vec params = phi.params();
  const int k = phi.shape().k;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<EstimatorExample> batch;
    if (phi.arch() == EstimatorArch::kMlp) {
      batch.reserve(cfg.batch_size);
      for (int b = 0; b < cfg.batch_size; ++b) {
        const Trajectory& traj = *view[rng.UniformInt(view.size())];
        const auto t = static_cast<Eigen::Index>(rng.UniformInt(traj.length()));
        batch.push_back(WindowExample(traj, t, k));
      }
    } else {
      for (int b = 0; b < cfg.sequence_batch; ++b) {
        const Trajectory& traj = *view[rng.UniformInt(view.size())];
        batch.push_back(SequenceExample(traj, traj.length() - 1));
      }
    }
    double loss;
    try {
      loss = phi.LossAndGrad(batch, &grad);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFiniteLoss) throw;
      throw Error(ErrorCode::kNonFiniteLoss,
                  std::string(e.what()) + " at step " + std::to_string(step));
    }
    if (log) log->loss.push_back(loss);
    if (cfg.clip_norm > 0.0) {
      const double norm = grad.norm();
      if (norm > cfg.clip_norm) grad *= cfg.clip_norm / norm;
    }
    velocity = cfg.momentum * velocity + grad;
    params -= cfg.learning_rate * velocity;
    phi.set_params(params);
  }
  return phi;
}

}  // namespace deletion_lab
