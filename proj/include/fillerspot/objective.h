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

#ifndef FILLERSPOT_OBJECTIVE_H_
#define FILLERSPOT_OBJECTIVE_H_

#include <utility>

#include <Eigen/Dense>

#include "fillerspot/targets.h"
#include "json.hpp"

namespace fillerspot {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kProbEpsilon = 1e-7;

struct LossFactors {
  double alpha = 2.0;
  double beta = 4.0;
  double gamma = 1.0;
  double mu_fn = 2.0;
  double omega_fn = 2.0;
  double mu_nf = 0.5;
  double omega_nf = 0.5;
  double lambda_len = 0.1;
  double lambda_off = 1.0;

  // Throws ConfigError if any factor is negative or non-finite.
  void Validate() const;
  bool operator==(const LossFactors&) const = default;
};

struct LossBreakdown {
  double main = 0.0;
  double fn = 0.0;   // filler mistaken for non-filler
  double nf = 0.0;   // non-filler mistaken for filler
  double len = 0.0;
  double off = 0.0;
  double total = 0.0;
};

// Gradients with respect to the (clamped) head outputs. All three are
// accumulated into, so callers must size and zero them first, or use
// LossGradients::Zero.
struct LossGradients {
  Eigen::MatrixXd heatmap;
  Eigen::VectorXd length;
  Eigen::VectorXd offset;

  static LossGradients Zero(int frames, int categories);
};

// Penalty-reduced focal loss over every channel:
//   -1/max(N,1) * [ sum_{mask} (1-p)^a log p
//                 + sum_{!mask} (1-y)^b p^a log(1-p) ]
// Probabilities are clamped to [eps, 1-eps]; grad (optional) receives
// dL/dp at the clamped values. Throws NumericError on NaN input.
double FocalMain(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                 const BoolMatrix& keypoint_mask, int num_keypoints,
                 double alpha, double beta, Eigen::MatrixXd* grad = nullptr);

struct PairFactors {
  double gamma = 1.0;
  double alpha = 2.0;
  double mu = 1.0;     // weight of the positive (keypoint) term
  double omega = 1.0;  // weight of the negative term
};

// Focal loss on channel A weighted by the probability assigned to channel B:
//   -1/max(N,1) * sum_t pB^g * [ mu * mask_t (1-pA)^a log pA
//                              + omega * !mask_t pA^a log(1-pA) ]
// where mask_t is keypoint_mask(t, A). Throws ConfigError if A == B or
// either channel is out of range.
double InterCategoryFocal(const Eigen::MatrixXd& pred,
                          const BoolMatrix& keypoint_mask, int channel_a,
                          int channel_b, const PairFactors& factors,
                          int num_keypoints, Eigen::MatrixXd* grad = nullptr);

// Mean absolute error of length and offset over keypoint frames (frames
// with a keypoint on any channel). (0, 0) when there are none.
std::pair<double, double> RegressionLosses(const Eigen::VectorXd& length,
                                           const Eigen::VectorXd& offset,
                                           const TargetTensor& target,
                                           LossGradients* grad = nullptr);

// main + fn + nf + lambda_len * len + lambda_off * off, with fn on
// (A = filler, B = non-filler) and nf on the reverse pair. N for main is the
// clip's keypoint count; N for each pair term is the channel-A keypoint
// count.
LossBreakdown TotalLoss(const Eigen::MatrixXd& heatmap,
                        const Eigen::VectorXd& length,
                        const Eigen::VectorXd& offset,
                        const TargetTensor& target, const LossFactors& factors,
                        LossGradients* grad = nullptr);

// TotalLoss restricted to the first active_channels channels (filler,
// non-filler and the assigned auxiliary slots). Unassigned placeholder
// channels contribute nothing and receive no gradient, as if their heads did
// not exist yet. Throws InputError when a keypoint lies on an inactive
// channel.
LossBreakdown ActiveTotalLoss(const Eigen::MatrixXd& heatmap,
                              const Eigen::VectorXd& length,
                              const Eigen::VectorXd& offset,
                              const TargetTensor& target,
                              const LossFactors& factors, int active_channels,
                              LossGradients* grad = nullptr);

void to_json(nlohmann::json& j, const LossFactors& f);
void from_json(const nlohmann::json& j, LossFactors& f);
void to_json(nlohmann::json& j, const LossBreakdown& b);

}  // namespace fillerspot

#endif  // FILLERSPOT_OBJECTIVE_H_
