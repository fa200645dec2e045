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

#include "fillerspot/net.h"

#include <algorithm>
#include <cmath>

#include "fillerspot/error.h"
#include "fillerspot/random.h"

namespace fillerspot {
namespace {

using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

double Sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double Softplus(double z) {
  return z > 30.0 ? z : std::log1p(std::exp(z));
}

void Relu(RowMatrix* m) { *m = m->cwiseMax(0.0); }

void ReluGrad(const RowMatrix& activated, RowMatrix* grad) {
  *grad = (activated.array() > 0.0).select(grad->array(), 0.0);
}

bool IsPowerOfTwo(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

// ---------------------------------------------------------------------------

void ModelConfig::Validate() const {
  if (num_bins < 1 || stem_channels < 1 || stem_freq_stride < 1 ||
      freq_stride < 1 || blocks2d < 0 || trunk_width < 1 || blocks < 0 ||
      num_aux < 0) {
    throw ConfigError("invalid model architecture");
  }
  if (!IsPowerOfTwo(downsample_factor)) {
    throw ConfigError("downsample_factor must be a power of two");
  }
  const int f1 = (num_bins - 1) / stem_freq_stride + 1;
  const int f2 = (f1 - 1) / freq_stride + 1;
  if (f1 < 1 || f2 < 1) throw ConfigError("frequency axis collapses to zero");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"num_bins", c.num_bins},
       {"stem_channels", c.stem_channels},
       {"stem_freq_stride", c.stem_freq_stride},
       {"freq_stride", c.freq_stride},
       {"blocks2d", c.blocks2d},
       {"trunk_width", c.trunk_width},
       {"blocks", c.blocks},
       {"downsample_factor", c.downsample_factor},
       {"num_aux", c.num_aux}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.num_bins = j.value("num_bins", d.num_bins);
  c.stem_channels = j.value("stem_channels", d.stem_channels);
  c.stem_freq_stride = j.value("stem_freq_stride", d.stem_freq_stride);
  c.freq_stride = j.value("freq_stride", d.freq_stride);
  c.blocks2d = j.value("blocks2d", d.blocks2d);
  c.trunk_width = j.value("trunk_width", d.trunk_width);
  c.blocks = j.value("blocks", d.blocks);
  c.downsample_factor = j.value("downsample_factor", d.downsample_factor);
  c.num_aux = j.value("num_aux", d.num_aux);
}

Prediction PredictionFromTarget(const TargetTensor& target,
                                int downsample_factor) {
  Prediction p;
  p.heatmap = target.heatmap.cwiseMax(kProbEpsilon).cwiseMin(1.0 - kProbEpsilon);
  p.length = target.length;
  p.offset = target.offset;
  p.embeddings.resize(target.NumFrames(), 0);
  p.downsample_factor = downsample_factor;
  return p;
}

// ---------------------------------------------------------------------------

Activation ConvLayer::Forward(const double* params, const Activation& x,
                              RowMatrix* cols) const {
  if (x.channels != in) throw InputError("convolution input channel mismatch");
  const int T = x.time, F = x.freq;
  const int To = OutTime(T), Fo = OutFreq(F);
  if (To < 1 || Fo < 1) throw InputError("input too short for convolution");
  const int K = in * kt * kf;
  const long P = long(To) * Fo;

  cols->resize(K, P);
  for (int ci = 0; ci < in; ++ci) {
    const double* src = x.data.row(ci).data();
    for (int a = 0; a < kt; ++a) {
      for (int b = 0; b < kf; ++b) {
        double* dst = cols->row((ci * kt + a) * kf + b).data();
        for (int to = 0; to < To; ++to) {
          const int ti = to * st - pt + a * dt;
          double* out_row = dst + long(to) * Fo;
          if (ti < 0 || ti >= T) {
            std::fill(out_row, out_row + Fo, 0.0);
            continue;
          }
          const double* in_row = src + long(ti) * F;
          for (int fo = 0; fo < Fo; ++fo) {
            const int fi = fo * sf - pf + b;
            out_row[fo] = (fi >= 0 && fi < F) ? in_row[fi] : 0.0;
          }
        }
      }
    }
  }

  ConstRowMap weight(params + offset, out, K);
  Eigen::Map<const Eigen::VectorXd> bias(params + offset + size_t(out) * K,
                                         out);
  Activation y;
  y.channels = out;
  y.time = To;
  y.freq = Fo;
  y.data.noalias() = weight * (*cols);
  y.data.colwise() += bias;
  return y;
}

RowMatrix ConvLayer::Backward(const double* params, const RowMatrix& cols,
                              const Activation& input_shape,
                              const RowMatrix& dout, double* grads,
                              bool input_grad) const {
  const int K = in * kt * kf;
  RowMap dweight(grads + offset, out, K);
  Eigen::Map<Eigen::VectorXd> dbias(grads + offset + size_t(out) * K, out);
  dweight.noalias() += dout * cols.transpose();
  dbias += dout.rowwise().sum();
  if (!input_grad) return {};

  ConstRowMap weight(params + offset, out, K);
  const RowMatrix dcols = weight.transpose() * dout;
  const int T = input_shape.time, F = input_shape.freq;
  const int To = OutTime(T), Fo = OutFreq(F);
  RowMatrix dx = RowMatrix::Zero(in, long(T) * F);
  for (int ci = 0; ci < in; ++ci) {
    double* dst = dx.row(ci).data();
    for (int a = 0; a < kt; ++a) {
      for (int b = 0; b < kf; ++b) {
        const double* src = dcols.row((ci * kt + a) * kf + b).data();
        for (int to = 0; to < To; ++to) {
          const int ti = to * st - pt + a * dt;
          if (ti < 0 || ti >= T) continue;
          const double* g_row = src + long(to) * Fo;
          double* in_row = dst + long(ti) * F;
          for (int fo = 0; fo < Fo; ++fo) {
            const int fi = fo * sf - pf + b;
            if (fi >= 0 && fi < F) in_row[fi] += g_row[fo];
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------

void Model::Layout() {
  const ModelConfig& c = config_;
  size_t next = 0;
  auto place = [&next](ConvLayer layer) {
    layer.offset = next;
    next += layer.NumParams();
    return layer;
  };
  const int stem_kf = c.stem_freq_stride + 1;
  stem_ = place({1, c.stem_channels, 3, stem_kf, 1, c.stem_freq_stride, 1, 1,
                 stem_kf / 2});
  const int f1 = stem_.OutFreq(c.num_bins);
  down2d_ = place({c.stem_channels, c.stem_channels, 3, 3, 1, c.freq_stride, 1,
                   1, 1});
  const int f2 = down2d_.OutFreq(f1);
  res2d_.clear();
  for (int i = 0; i < c.blocks2d; ++i) {
    Residual r;
    r.conv1 = place({c.stem_channels, c.stem_channels, 3, 3, 1, 1, 1, 1, 1});
    r.conv2 = place({c.stem_channels, c.stem_channels, 3, 3, 1, 1, 1, 1, 1});
    res2d_.push_back(r);
  }
  collapse_ = place({c.stem_channels * f2, c.trunk_width});
  down1d_.clear();
  for (int s = c.downsample_factor; s > 1; s /= 2) {
    down1d_.push_back(place({c.trunk_width, c.trunk_width, 3, 1, 2, 1, 1, 1}));
  }
  res1d_.clear();
  for (int i = 0; i < c.blocks; ++i) {
    const int d = 1 << (i % 3);
    Residual r;
    r.conv1 = place({c.trunk_width, c.trunk_width, 3, 1, 1, 1, d, d});
    r.conv2 = place({c.trunk_width, c.trunk_width, 3, 1, 1, 1, d, d});
    res1d_.push_back(r);
  }
  head_heatmap_ = place({c.trunk_width, c.NumCategories()});
  head_length_ = place({c.trunk_width, 1});
  head_offset_ = place({c.trunk_width, 1});
  params_ = Eigen::VectorXd::Zero(Eigen::Index(next));
}

Model Model::Build(const ModelConfig& config, uint64_t seed) {
  config.Validate();
  Model m;
  m.config_ = config;
  m.Layout();
  m.norm_mean_ = Eigen::VectorXd::Zero(config.num_bins);
  m.norm_std_ = Eigen::VectorXd::Ones(config.num_bins);

  Rng rng(seed);
  auto init = [&](const ConvLayer& l, double gain, double bias) {
    const int fan_in = l.in * l.kt * l.kf;
    const double std_dev = gain * std::sqrt(2.0 / fan_in);
    const size_t nw = size_t(l.out) * fan_in;
    for (size_t i = 0; i < nw; ++i) {
      m.params_(Eigen::Index(l.offset + i)) = std_dev * rng.Normal();
    }
    for (int o = 0; o < l.out; ++o) {
      m.params_(Eigen::Index(l.offset + nw + size_t(o))) = bias;
    }
  };
  init(m.stem_, 1.0, 0.0);
  init(m.down2d_, 1.0, 0.0);
  for (const auto& r : m.res2d_) {
    init(r.conv1, 1.0, 0.0);
    init(r.conv2, 0.25, 0.0);
  }
  init(m.collapse_, 1.0, 0.0);
  for (const auto& l : m.down1d_) init(l, 1.0, 0.0);
  for (const auto& r : m.res1d_) {
    init(r.conv1, 1.0, 0.0);
    init(r.conv2, 0.25, 0.0);
  }
  init(m.head_heatmap_, 0.05, 0.0);
  const size_t bias_at =
      m.head_heatmap_.offset + size_t(m.head_heatmap_.out) * config.trunk_width;
  for (int c = 0; c < config.NumCategories(); ++c) {
    const double prior = c < kFirstAuxCategory ? 0.1 : 0.01;
    m.params_(Eigen::Index(bias_at + size_t(c))) =
        std::log(prior / (1.0 - prior));
  }
  // Length head starts near 0.3 s, offset head at 0.5.
  init(m.head_length_, 0.05, std::log(std::expm1(0.3)));
  init(m.head_offset_, 0.05, 0.0);
  return m;
}

std::vector<ParamTensor> Model::ParamTensors() const {
  std::vector<ParamTensor> out;
  auto add = [&out](const std::string& name, const ConvLayer& l) {
    const size_t nw = size_t(l.out) * l.in * l.kt * l.kf;
    out.push_back({name + ".weight", l.offset, nw});
    out.push_back({name + ".bias", l.offset + nw, size_t(l.out)});
  };
  add("stem", stem_);
  add("down2d", down2d_);
  for (size_t i = 0; i < res2d_.size(); ++i) {
    add("res2d." + std::to_string(i) + ".conv1", res2d_[i].conv1);
    add("res2d." + std::to_string(i) + ".conv2", res2d_[i].conv2);
  }
  add("collapse", collapse_);
  for (size_t i = 0; i < down1d_.size(); ++i) {
    add("down1d." + std::to_string(i), down1d_[i]);
  }
  for (size_t i = 0; i < res1d_.size(); ++i) {
    add("res1d." + std::to_string(i) + ".conv1", res1d_[i].conv1);
    add("res1d." + std::to_string(i) + ".conv2", res1d_[i].conv2);
  }
  add("head.heatmap", head_heatmap_);
  add("head.length", head_length_);
  add("head.offset", head_offset_);
  return out;
}

void Model::SetNormalization(Eigen::VectorXd mean, Eigen::VectorXd stddev) {
  if (mean.size() != config_.num_bins || stddev.size() != config_.num_bins ||
      (stddev.array() <= 0.0).any()) {
    throw InputError("normalization statistics do not match the model");
  }
  norm_mean_ = std::move(mean);
  norm_std_ = std::move(stddev);
}

int Model::OutputFrames(int input_frames) const {
  int t = input_frames;
  for (const auto& l : down1d_) t = l.OutTime(t);
  return t;
}

std::pair<int, int> Model::InputSpan(int output_frame) const {
  std::vector<const ConvLayer*> chain = {&stem_, &down2d_};
  for (const auto& r : res2d_) {
    chain.push_back(&r.conv1);
    chain.push_back(&r.conv2);
  }
  chain.push_back(&collapse_);
  for (const auto& l : down1d_) chain.push_back(&l);
  for (const auto& r : res1d_) {
    chain.push_back(&r.conv1);
    chain.push_back(&r.conv2);
  }
  chain.push_back(&head_heatmap_);
  int lo = output_frame, hi = output_frame;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const ConvLayer& l = **it;
    lo = lo * l.st - l.pt;
    hi = hi * l.st - l.pt + (l.kt - 1) * l.dt;
  }
  return {lo, hi};
}

Activation Model::ResidualForward(const Residual& block, const Activation& x,
                                  ResidualCache* cache) const {
  const double* p = params_.data();
  Activation h = block.conv1.Forward(p, x, &cache->cols1);
  Relu(&h.data);
  Activation r = block.conv2.Forward(p, h, &cache->cols2);
  r.data += x.data;
  Relu(&r.data);
  cache->input = x;
  cache->hidden = std::move(h.data);
  cache->output = r;
  return r;
}

RowMatrix Model::ResidualBackward(const Residual& block,
                                  const ResidualCache& cache,
                                  const RowMatrix& dout, double* grads) const {
  const double* p = params_.data();
  RowMatrix ds = dout;
  ReluGrad(cache.output.data, &ds);
  Activation hidden_shape{block.conv1.out, cache.output.time,
                          cache.output.freq, {}};
  RowMatrix dh = block.conv2.Backward(p, cache.cols2, hidden_shape, ds, grads);
  ReluGrad(cache.hidden, &dh);
  RowMatrix dx = block.conv1.Backward(p, cache.cols1, cache.input, dh, grads);
  dx += ds;
  return dx;
}

Prediction Model::Forward(const Spectrogram& spec) const {
  ForwardCache cache;
  return Forward(spec.frames, &cache);
}

Prediction Model::Forward(const Eigen::MatrixXd& frames,
                          ForwardCache* cache) const {
  if (frames.cols() != config_.num_bins) {
    throw InputError("spectrogram has " + std::to_string(frames.cols()) +
                     " bins; model expects " +
                     std::to_string(config_.num_bins));
  }
  if (frames.rows() < 1) throw InputError("empty spectrogram");
  if (!frames.allFinite()) throw InputError("non-finite spectrogram values");

  const int T = int(frames.rows());
  const int F = config_.num_bins;
  const double* p = params_.data();
  ForwardCache& c = *cache;

  c.input = {1, T, F, RowMatrix(1, long(T) * F)};
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      c.input.data(0, long(t) * F + f) =
          (frames(t, f) - norm_mean_(f)) / norm_std_(f);
    }
  }

  c.stem_out = stem_.Forward(p, c.input, &c.stem_cols);
  Relu(&c.stem_out.data);
  c.down2d_out = down2d_.Forward(p, c.stem_out, &c.down2d_cols);
  Relu(&c.down2d_out.data);
  Activation x = c.down2d_out;
  c.res2d.resize(res2d_.size());
  for (size_t i = 0; i < res2d_.size(); ++i) {
    x = ResidualForward(res2d_[i], x, &c.res2d[i]);
  }

  // (C, T, F) -> (C * F, T, 1)
  c.flat = {x.channels * x.freq, x.time, 1,
            RowMatrix(long(x.channels) * x.freq, x.time)};
  for (int ch = 0; ch < x.channels; ++ch) {
    for (int t = 0; t < x.time; ++t) {
      for (int f = 0; f < x.freq; ++f) {
        c.flat.data(long(ch) * x.freq + f, t) = x.data(ch, long(t) * x.freq + f);
      }
    }
  }
  c.collapse_out = collapse_.Forward(p, c.flat, &c.collapse_cols);
  Relu(&c.collapse_out.data);
  x = c.collapse_out;
  c.down1d_cols.resize(down1d_.size());
  c.down1d_out.resize(down1d_.size());
  for (size_t i = 0; i < down1d_.size(); ++i) {
    c.down1d_out[i] = down1d_[i].Forward(p, x, &c.down1d_cols[i]);
    Relu(&c.down1d_out[i].data);
    x = c.down1d_out[i];
  }
  c.res1d.resize(res1d_.size());
  for (size_t i = 0; i < res1d_.size(); ++i) {
    x = ResidualForward(res1d_[i], x, &c.res1d[i]);
  }
  c.trunk = x;

  const Activation zh = head_heatmap_.Forward(p, c.trunk, &c.head_cols);
  RowMatrix unused;
  const Activation zl = head_length_.Forward(p, c.trunk, &unused);
  const Activation zo = head_offset_.Forward(p, c.trunk, &unused);

  const int To = c.trunk.time;
  const double below_one = std::nextafter(1.0, 0.0);
  Prediction& pred = c.prediction;
  pred.downsample_factor = config_.downsample_factor;
  pred.heatmap.resize(To, config_.NumCategories());
  pred.length.resize(To);
  pred.offset.resize(To);
  c.length_logit.resize(To);
  for (int t = 0; t < To; ++t) {
    for (int k = 0; k < config_.NumCategories(); ++k) {
      pred.heatmap(t, k) = std::clamp(Sigmoid(zh.data(k, t)), kProbEpsilon,
                                      1.0 - kProbEpsilon);
    }
    c.length_logit(t) = zl.data(0, t);
    pred.length(t) = Softplus(zl.data(0, t));
    pred.offset(t) = std::min(Sigmoid(zo.data(0, t)), below_one);
  }
  pred.embeddings = c.trunk.data.transpose();
  return pred;
}

void Model::Backward(const ForwardCache& c, const LossGradients& g,
                     Eigen::VectorXd* grad) const {
  if (grad->size() != params_.size()) {
    *grad = Eigen::VectorXd::Zero(params_.size());
  }
  const double* p = params_.data();
  double* gp = grad->data();
  const Prediction& pred = c.prediction;
  const int To = pred.NumFrames();
  const int C = pred.NumCategories();
  if (g.heatmap.rows() != To || g.heatmap.cols() != C ||
      g.length.size() != To || g.offset.size() != To) {
    throw InputError("loss gradient shape does not match prediction");
  }

  // Sigmoid/softplus derivatives, straight through the probability clamp.
  RowMatrix dzh(C, To), dzl(1, To), dzo(1, To);
  for (int t = 0; t < To; ++t) {
    for (int k = 0; k < C; ++k) {
      const double q = pred.heatmap(t, k);
      dzh(k, t) = g.heatmap(t, k) * q * (1.0 - q);
    }
    dzl(0, t) = g.length(t) * Sigmoid(c.length_logit(t));
    const double o = pred.offset(t);
    dzo(0, t) = g.offset(t) * o * (1.0 - o);
  }
  RowMatrix d = head_heatmap_.Backward(p, c.head_cols, c.trunk, dzh, gp);
  d += head_length_.Backward(p, c.head_cols, c.trunk, dzl, gp);
  d += head_offset_.Backward(p, c.head_cols, c.trunk, dzo, gp);

  for (size_t i = res1d_.size(); i-- > 0;) {
    d = ResidualBackward(res1d_[i], c.res1d[i], d, gp);
  }
  for (size_t i = down1d_.size(); i-- > 0;) {
    ReluGrad(c.down1d_out[i].data, &d);
    const Activation& in = i == 0 ? c.collapse_out : c.down1d_out[i - 1];
    d = down1d_[i].Backward(p, c.down1d_cols[i], in, d, gp);
  }
  ReluGrad(c.collapse_out.data, &d);
  const RowMatrix dflat =
      collapse_.Backward(p, c.collapse_cols, c.flat, d, gp);

  const Activation& x2 =
      res2d_.empty() ? c.down2d_out : c.res2d.back().output;
  d.resize(x2.channels, long(x2.time) * x2.freq);
  for (int ch = 0; ch < x2.channels; ++ch) {
    for (int t = 0; t < x2.time; ++t) {
      for (int f = 0; f < x2.freq; ++f) {
        d(ch, long(t) * x2.freq + f) = dflat(long(ch) * x2.freq + f, t);
      }
    }
  }
  for (size_t i = res2d_.size(); i-- > 0;) {
    d = ResidualBackward(res2d_[i], c.res2d[i], d, gp);
  }
  ReluGrad(c.down2d_out.data, &d);
  d = down2d_.Backward(p, c.down2d_cols, c.stem_out, d, gp);
  ReluGrad(c.stem_out.data, &d);
  stem_.Backward(p, c.stem_cols, c.input, d, gp, /*input_grad=*/false);
}

}  // namespace fillerspot
