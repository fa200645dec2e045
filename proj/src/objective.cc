// Copyright (c) 2026 The FillerSpot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fillerspot/objective.h"

#include <algorithm>
#include <cmath>

#include "fillerspot/error.h"

namespace fillerspot {
namespace {

double Clamp(double p) {
  if (std::isnan(p)) throw NumericError("NaN probability in loss input");
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

// x^a with the convention 0^0 = 1, and its derivative a x^(a-1).
double Pow(double x, double a) { return a == 0.0 ? 1.0 : std::pow(x, a); }
double DPow(double x, double a) {
  return a == 0.0 ? 0.0 : a * std::pow(x, a - 1.0);
}

void CheckShapes(const Eigen::MatrixXd& pred, const BoolMatrix& mask) {
  if (pred.rows() != mask.rows() || pred.cols() != mask.cols()) {
    throw InputError("prediction and keypoint mask shapes differ");
  }
}

}  // namespace

void LossFactors::Validate() const {
  for (double v : {alpha, beta, gamma, mu_fn, omega_fn, mu_nf, omega_nf,
                   lambda_len, lambda_off}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError("loss factors must be finite and non-negative");
    }
  }
}

LossGradients LossGradients::Zero(int frames, int categories) {
  return {Eigen::MatrixXd::Zero(frames, categories),
          Eigen::VectorXd::Zero(frames), Eigen::VectorXd::Zero(frames)};
}

double FocalMain(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                 const BoolMatrix& keypoint_mask, int num_keypoints,
                 double alpha, double beta, Eigen::MatrixXd* grad) {
  CheckShapes(pred, keypoint_mask);
  if (target.rows() != pred.rows() || target.cols() != pred.cols()) {
    throw InputError("prediction and target shapes differ");
  }
  const double scale = -1.0 / std::max(num_keypoints, 1);
  double sum = 0.0;
  for (Eigen::Index c = 0; c < pred.cols(); ++c) {
    for (Eigen::Index t = 0; t < pred.rows(); ++t) {
      const double p = Clamp(pred(t, c));
      if (std::isnan(target(t, c))) throw NumericError("NaN in target");
      double term, dterm;
      if (keypoint_mask(t, c)) {
        const double lp = std::log(p);
        term = Pow(1.0 - p, alpha) * lp;
        dterm = -DPow(1.0 - p, alpha) * lp + Pow(1.0 - p, alpha) / p;
      } else {
        const double w = Pow(1.0 - target(t, c), beta);
        const double l1p = std::log1p(-p);
        term = w * Pow(p, alpha) * l1p;
        dterm = w * (DPow(p, alpha) * l1p - Pow(p, alpha) / (1.0 - p));
      }
      sum += term;
      if (grad) (*grad)(t, c) += scale * dterm;
    }
  }
  return scale * sum;
}

double InterCategoryFocal(const Eigen::MatrixXd& pred,
                          const BoolMatrix& keypoint_mask, int channel_a,
                          int channel_b, const PairFactors& f,
                          int num_keypoints, Eigen::MatrixXd* grad) {
  CheckShapes(pred, keypoint_mask);
  if (channel_a == channel_b) {
    throw ConfigError("inter-category loss needs two distinct channels");
  }
  if (channel_a < 0 || channel_b < 0 || channel_a >= pred.cols() ||
      channel_b >= pred.cols()) {
    throw ConfigError("inter-category channel out of range");
  }
  const double scale = -1.0 / std::max(num_keypoints, 1);
  double sum = 0.0;
  for (Eigen::Index t = 0; t < pred.rows(); ++t) {
    const double pa = Clamp(pred(t, channel_a));
    // pB only enters as a weight, never under a log, so it is not floored.
    const double raw_b = pred(t, channel_b);
    if (std::isnan(raw_b)) throw NumericError("NaN probability in loss input");
    const double pb = std::clamp(raw_b, 0.0, 1.0);
    const double weight = Pow(pb, f.gamma);
    double inner, dinner;
    if (keypoint_mask(t, channel_a)) {
      const double lp = std::log(pa);
      inner = f.mu * Pow(1.0 - pa, f.alpha) * lp;
      dinner = f.mu * (-DPow(1.0 - pa, f.alpha) * lp +
                       Pow(1.0 - pa, f.alpha) / pa);
    } else {
      const double l1p = std::log1p(-pa);
      inner = f.omega * Pow(pa, f.alpha) * l1p;
      dinner = f.omega * (DPow(pa, f.alpha) * l1p -
                          Pow(pa, f.alpha) / (1.0 - pa));
    }
    sum += weight * inner;
    if (grad) {
      (*grad)(t, channel_a) += scale * weight * dinner;
      const double dweight =
          pb > 0.0 ? DPow(pb, f.gamma) : (f.gamma == 1.0 ? 1.0 : 0.0);
      (*grad)(t, channel_b) += scale * dweight * inner;
    }
  }
  return scale * sum;
}

std::pair<double, double> RegressionLosses(const Eigen::VectorXd& length,
                                           const Eigen::VectorXd& offset,
                                           const TargetTensor& target,
                                           LossGradients* grad) {
  const Eigen::Index T = target.NumFrames();
  if (length.size() != T || offset.size() != T) {
    throw InputError("regression head length does not match target");
  }
  const Eigen::Array<bool, Eigen::Dynamic, 1> keyframe =
      target.keypoint_mask.rowwise().any();
  const int count = int(keyframe.count());
  if (count == 0) return {0.0, 0.0};
  double len = 0.0, off = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (!keyframe(t)) continue;
    const double dl = length(t) - target.length(t);
    const double d_off = offset(t) - target.offset(t);
    len += std::abs(dl);
    off += std::abs(d_off);
    if (grad) {
      grad->length(t) += double((dl > 0) - (dl < 0)) / count;
      grad->offset(t) += double((d_off > 0) - (d_off < 0)) / count;
    }
  }
  return {len / count, off / count};
}

LossBreakdown TotalLoss(const Eigen::MatrixXd& heatmap,
                        const Eigen::VectorXd& length,
                        const Eigen::VectorXd& offset,
                        const TargetTensor& target, const LossFactors& factors,
                        LossGradients* grad) {
  if (heatmap.rows() != target.heatmap.rows() ||
      heatmap.cols() != target.heatmap.cols()) {
    throw InputError("prediction has " + std::to_string(heatmap.cols()) +
                     " channels x " + std::to_string(heatmap.rows()) +
                     " frames; target has " +
                     std::to_string(target.heatmap.cols()) + " x " +
                     std::to_string(target.heatmap.rows()));
  }
  LossBreakdown out;
  Eigen::MatrixXd* hg = grad ? &grad->heatmap : nullptr;
  out.main = FocalMain(heatmap, target.heatmap, target.keypoint_mask,
                       target.num_keypoints, factors.alpha, factors.beta, hg);

  const int n_filler = int(target.keypoint_mask.col(kFillerCategory).count());
  const int n_nonfiller =
      int(target.keypoint_mask.col(kNonFillerCategory).count());
  out.fn = InterCategoryFocal(
      heatmap, target.keypoint_mask, kFillerCategory, kNonFillerCategory,
      {factors.gamma, factors.alpha, factors.mu_fn, factors.omega_fn},
      n_filler, hg);
  out.nf = InterCategoryFocal(
      heatmap, target.keypoint_mask, kNonFillerCategory, kFillerCategory,
      {factors.gamma, factors.alpha, factors.mu_nf, factors.omega_nf},
      n_nonfiller, hg);

  LossGradients* rg = grad;
  LossGradients unit;
  if (grad) {
    unit = LossGradients::Zero(int(length.size()), 0);
    rg = &unit;
  }
  std::tie(out.len, out.off) = RegressionLosses(length, offset, target, rg);
  if (grad) {
    grad->length += factors.lambda_len * unit.length;
    grad->offset += factors.lambda_off * unit.offset;
  }
  out.total = out.main + out.fn + out.nf + factors.lambda_len * out.len +
              factors.lambda_off * out.off;
  return out;
}

LossBreakdown ActiveTotalLoss(const Eigen::MatrixXd& heatmap,
                              const Eigen::VectorXd& length,
                              const Eigen::VectorXd& offset,
                              const TargetTensor& target,
                              const LossFactors& factors, int active_channels,
                              LossGradients* grad) {
  const int C = target.NumCategories();
  if (active_channels < kFirstAuxCategory || active_channels > C) {
    throw InputError("active channel count " +
                     std::to_string(active_channels) + " outside [" +
                     std::to_string(kFirstAuxCategory) + ", " +
                     std::to_string(C) + "]");
  }
  if (active_channels == C) {
    return TotalLoss(heatmap, length, offset, target, factors, grad);
  }
  const int inactive = C - active_channels;
  if (target.keypoint_mask.rightCols(inactive).any()) {
    throw InputError("keypoint on an unassigned auxiliary channel");
  }
  TargetTensor active;
  active.heatmap = target.heatmap.leftCols(active_channels);
  active.keypoint_mask = target.keypoint_mask.leftCols(active_channels);
  active.length = target.length;
  active.offset = target.offset;
  active.num_keypoints = target.num_keypoints;
  if (!grad) {
    return TotalLoss(heatmap.leftCols(active_channels), length, offset,
                     active, factors);
  }
  LossGradients g = LossGradients::Zero(int(length.size()), active_channels);
  const LossBreakdown out = TotalLoss(heatmap.leftCols(active_channels),
                                      length, offset, active, factors, &g);
  grad->heatmap.leftCols(active_channels) += g.heatmap;
  grad->length += g.length;
  grad->offset += g.offset;
  return out;
}

void to_json(nlohmann::json& j, const LossFactors& f) {
  j = {{"alpha", f.alpha},       {"beta", f.beta},
       {"gamma", f.gamma},       {"mu_fn", f.mu_fn},
       {"omega_fn", f.omega_fn}, {"mu_nf", f.mu_nf},
       {"omega_nf", f.omega_nf}, {"lambda_len", f.lambda_len},
       {"lambda_off", f.lambda_off}};
}

void from_json(const nlohmann::json& j, LossFactors& f) {
  LossFactors d;
  f.alpha = j.value("alpha", d.alpha);
  f.beta = j.value("beta", d.beta);
  f.gamma = j.value("gamma", d.gamma);
  f.mu_fn = j.value("mu_fn", d.mu_fn);
  f.omega_fn = j.value("omega_fn", d.omega_fn);
  f.mu_nf = j.value("mu_nf", d.mu_nf);
  f.omega_nf = j.value("omega_nf", d.omega_nf);
  f.lambda_len = j.value("lambda_len", d.lambda_len);
  f.lambda_off = j.value("lambda_off", d.lambda_off);
}

void to_json(nlohmann::json& j, const LossBreakdown& b) {
  j = {{"main", b.main}, {"fn", b.fn},   {"nf", b.nf},
       {"len", b.len},   {"off", b.off}, {"total", b.total}};
}

}  // namespace fillerspot
