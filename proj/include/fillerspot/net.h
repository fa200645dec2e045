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

#ifndef FILLERSPOT_NET_H_
#define FILLERSPOT_NET_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fillerspot/features.h"
#include "fillerspot/objective.h"
#include "json.hpp"

namespace fillerspot {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Architecture hyperparameters. The 2-D stage convolves the (time, freq)
// plane and strides over frequency only; its output is flattened over
// (channel, freq) into the 1-D trunk, which downsamples time by
// downsample_factor with stride-2 convolutions and ends in dilated residual
// blocks. Heads are 1x1 convolutions over the trunk output.
struct ModelConfig {
  int num_bins = 257;
  int stem_channels = 8;
  int stem_freq_stride = 4;
  int freq_stride = 2;
  int blocks2d = 1;
  int trunk_width = 64;
  int blocks = 3;
  int downsample_factor = 4;
  int num_aux = 0;  // auxiliary placeholder categories (h)

  int NumCategories() const { return 2 + num_aux; }
  // Throws ConfigError.
  void Validate() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Per-frame network outputs at T' = ceil(T / downsample_factor) frames.
struct Prediction {
  Eigen::MatrixXd heatmap;     // T' x C, in [eps, 1 - eps]
  Eigen::VectorXd length;      // seconds, >= 0
  Eigen::VectorXd offset;      // [0, 1)
  Eigen::MatrixXd embeddings;  // T' x D, trunk features before the heads
  int downsample_factor = 1;

  int NumFrames() const { return int(heatmap.rows()); }
  int NumCategories() const { return int(heatmap.cols()); }
};

// Treats an exact target as a prediction (heatmap clamped to the open
// interval).
Prediction PredictionFromTarget(const TargetTensor& target,
                                int downsample_factor);

// A (C, T, F) activation stored as C rows of T*F contiguous values.
struct Activation {
  int channels = 0;
  int time = 0;
  int freq = 1;
  RowMatrix data;
};

// Convolution over (time, freq) with stride, time dilation and zero padding.
// Weights are an out x (in * kt * kf) row-major block inside the model's
// flat parameter vector, followed by out biases.
struct ConvLayer {
  int in = 0, out = 0;
  int kt = 1, kf = 1;
  int st = 1, sf = 1;
  int dt = 1;
  int pt = 0, pf = 0;
  size_t offset = 0;

  size_t NumParams() const { return size_t(out) * (in * kt * kf + 1); }
  int OutTime(int t) const { return (t + 2 * pt - dt * (kt - 1) - 1) / st + 1; }
  int OutFreq(int f) const { return (f + 2 * pf - (kf - 1) - 1) / sf + 1; }

  // cols receives the im2col matrix needed by Backward.
  Activation Forward(const double* params, const Activation& x,
                     RowMatrix* cols) const;
  // Accumulates weight/bias gradients into grads (same layout as params)
  // and returns the input gradient (skipped when input_grad is false).
  RowMatrix Backward(const double* params, const RowMatrix& cols,
                     const Activation& input_shape, const RowMatrix& dout,
                     double* grads, bool input_grad = true) const;
};

struct ParamTensor {
  std::string name;
  size_t offset;
  size_t size;
};

struct ResidualCache {
  RowMatrix cols1, hidden, cols2;
  Activation input, output;
};

// Intermediate state kept by Forward for Backward.
struct ForwardCache {
  Activation input;
  RowMatrix stem_cols;
  Activation stem_out;
  RowMatrix down2d_cols;
  Activation down2d_out;
  std::vector<ResidualCache> res2d;
  Activation flat;
  RowMatrix collapse_cols;
  Activation collapse_out;
  std::vector<RowMatrix> down1d_cols;
  std::vector<Activation> down1d_out;
  std::vector<ResidualCache> res1d;
  Activation trunk;
  RowMatrix head_cols;
  Eigen::VectorXd length_logit;
  Prediction prediction;
};

class Model {
 public:
  Model() = default;

  // He-initialized model. Heatmap biases start at prior 0.1 for the filler
  // and non-filler channels and 0.01 for auxiliary placeholders.
  static Model Build(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  size_t NumParams() const { return size_t(params_.size()); }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  std::vector<ParamTensor> ParamTensors() const;

  // Per-bin input normalization (x - mean) / stddev, fixed after training
  // starts.
  void SetNormalization(Eigen::VectorXd mean, Eigen::VectorXd stddev);
  const Eigen::VectorXd& norm_mean() const { return norm_mean_; }
  const Eigen::VectorXd& norm_std() const { return norm_std_; }

  int OutputFrames(int input_frames) const;

  // Inclusive range of input frames that can influence output frame j
  // (may extend past the input edges, which are zero padded).
  std::pair<int, int> InputSpan(int output_frame) const;

  // Deterministic and reentrant. Throws InputError on a bin-count mismatch,
  // an empty input, or non-finite values.
  Prediction Forward(const Spectrogram& spec) const;
  Prediction Forward(const Eigen::MatrixXd& frames, ForwardCache* cache) const;

  // Accumulates dLoss/dparams into grad given dLoss/d(head outputs).
  void Backward(const ForwardCache& cache, const LossGradients& loss_grad,
                Eigen::VectorXd* grad) const;

 private:
  struct Residual {
    ConvLayer conv1, conv2;
  };

  void Layout();
  Activation ResidualForward(const Residual& block, const Activation& x,
                             ResidualCache* cache) const;
  RowMatrix ResidualBackward(const Residual& block, const ResidualCache& cache,
                             const RowMatrix& dout, double* grads) const;

  ModelConfig config_;
  Eigen::VectorXd params_;
  Eigen::VectorXd norm_mean_;
  Eigen::VectorXd norm_std_;

  ConvLayer stem_, down2d_;
  std::vector<Residual> res2d_;
  ConvLayer collapse_;
  std::vector<ConvLayer> down1d_;
  std::vector<Residual> res1d_;
  ConvLayer head_heatmap_, head_length_, head_offset_;
};

}  // namespace fillerspot

#endif  // FILLERSPOT_NET_H_
