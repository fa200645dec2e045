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

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "fillerspot/error.h"
#include "fillerspot/net.h"
#include "fillerspot/objective.h"
#include "fillerspot/random.h"
#include "support/fixtures.h"

namespace fillerspot {
namespace {

ModelConfig Tiny(int aux = 1) {
  ModelConfig c;
  c.num_bins = 17;
  c.stem_channels = 2;
  c.blocks2d = 1;
  c.trunk_width = 6;
  c.blocks = 2;
  c.downsample_factor = 2;
  c.num_aux = aux;
  return c;
}

Eigen::MatrixXd RandomInput(Rng& rng, int frames, int bins) {
  Eigen::MatrixXd x(frames, bins);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.Normal();
  return x;
}

Spectrogram AsSpec(Eigen::MatrixXd frames) {
  return Spectrogram{std::move(frames), 0.01, 16000};
}

TEST(ModelTest, HeadWidthFollowsAuxCount) {
  ModelConfig c;
  c.num_aux = 8;
  EXPECT_EQ(Model::Build(c, 1).Forward(AsSpec(Eigen::MatrixXd::Zero(40, 257)))
                .NumCategories(),
            10);
  c.num_aux = 0;
  EXPECT_EQ(Model::Build(c, 1).Forward(AsSpec(Eigen::MatrixXd::Zero(40, 257)))
                .NumCategories(),
            2);
}

TEST(ModelTest, OutputFramesIsCeiling) {
  ModelConfig c;
  const Model m = Model::Build(c, 1);
  EXPECT_EQ(m.OutputFrames(100), 25);
  EXPECT_EQ(m.OutputFrames(101), 26);
  EXPECT_EQ(m.Forward(AsSpec(Eigen::MatrixXd::Zero(101, 257))).NumFrames(), 26);
}

TEST(ModelTest, InvalidConfigsRejected) {
  ModelConfig c;
  c.downsample_factor = 3;
  EXPECT_THROW(Model::Build(c, 1), ConfigError);
  c = ModelConfig{};
  c.num_aux = -1;
  EXPECT_THROW(Model::Build(c, 1), ConfigError);
}

TEST(ModelTest, OutputRangesAndDeterminism) {
  Rng rng(2);
  const Model m = Model::Build(Tiny(3), 7);
  const Spectrogram s = AsSpec(RandomInput(rng, 33, 17) * 5.0);
  const Prediction a = m.Forward(s);
  const Prediction b = m.Forward(s);
  EXPECT_GT(a.heatmap.minCoeff(), 0.0);
  EXPECT_LT(a.heatmap.maxCoeff(), 1.0);
  EXPECT_GE(a.length.minCoeff(), 0.0);
  EXPECT_GE(a.offset.minCoeff(), 0.0);
  EXPECT_LT(a.offset.maxCoeff(), 1.0);
  EXPECT_EQ(a.heatmap, b.heatmap);
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_EQ(a.embeddings.cols(), 6);
}

TEST(ModelTest, InitialPriors) {
  const Model m = Model::Build(Tiny(2), 3);
  const Prediction p = m.Forward(AsSpec(Eigen::MatrixXd::Zero(20, 17)));
  EXPECT_NEAR(p.heatmap.col(0).mean(), 0.1, 0.05);
  EXPECT_NEAR(p.heatmap.col(2).mean(), 0.01, 0.01);
}

TEST(ModelTest, BinMismatchIsInputError) {
  const Model m = Model::Build(Tiny(), 3);
  EXPECT_THROW(m.Forward(AsSpec(Eigen::MatrixXd::Zero(20, 16))), InputError);
}

// Receptive field from the layer recipe: 3-tap convs with unit padding in
// the 2-D stage, stride-2 3-tap downsampling, and residual blocks of two
// 3-tap convs with dilation 1, 2, 4, ...
std::pair<int, int> ExpectedSpan(const ModelConfig& c, int j) {
  int lo = j, hi = j;
  for (int i = 0; i < c.blocks; ++i) {
    const int d = 1 << (i % 3);
    lo -= 2 * d;
    hi += 2 * d;
  }
  for (int s = c.downsample_factor; s > 1; s /= 2) {
    lo = 2 * lo - 1;
    hi = 2 * hi + 1;
  }
  const int r2d = 2 + 2 * c.blocks2d;
  return {lo - r2d, hi + r2d};
}

TEST(ModelTest, PerturbationStaysInsideReceptiveField) {
  Rng rng(5);
  ModelConfig c = Tiny();
  c.blocks = 3;
  c.downsample_factor = 4;
  const Model m = Model::Build(c, 11);
  Eigen::MatrixXd x = RandomInput(rng, 120, 17);
  const Prediction base = m.Forward(AsSpec(x));
  for (int k : {0, 37, 60, 119}) {
    Eigen::MatrixXd y = x;
    y.row(k).array() += 3.0;
    const Prediction p = m.Forward(AsSpec(y));
    int changed = 0;
    for (int j = 0; j < p.NumFrames(); ++j) {
      const auto span = ExpectedSpan(c, j);
      EXPECT_EQ(m.InputSpan(j), span);
      const bool diff = (p.heatmap.row(j) - base.heatmap.row(j))
                            .cwiseAbs()
                            .maxCoeff() > 0.0;
      if (diff) {
        ++changed;
        EXPECT_TRUE(k >= span.first && k <= span.second)
            << "frame " << k << " moved output " << j;
      }
    }
    EXPECT_GT(changed, 0);
  }
}

TEST(ModelTest, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(13);
  Model m = Model::Build(Tiny(1), 17);
  m.SetNormalization(Eigen::VectorXd::Constant(17, 0.1),
                     Eigen::VectorXd::Constant(17, 1.5));
  const Eigen::MatrixXd x = RandomInput(rng, 12, 17);
  const int To = m.OutputFrames(12);
  const TargetTensor target = testing::RandomTarget(rng, To, 3, 0.3);
  LossFactors factors;
  auto loss = [&](const Model& model) {
    ForwardCache cache;
    const Prediction p = model.Forward(x, &cache);
    return TotalLoss(p.heatmap, p.length, p.offset, target, factors).total;
  };
  ForwardCache cache;
  const Prediction p = m.Forward(x, &cache);
  LossGradients lg = LossGradients::Zero(To, 3);
  TotalLoss(p.heatmap, p.length, p.offset, target, factors, &lg);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(m.params().size());
  m.Backward(cache, lg, &grad);

  Model probe = m;
  const double h = 1e-6;
  Eigen::VectorXd numeric(m.params().size());
  for (Eigen::Index i = 0; i < numeric.size(); ++i) {
    const double orig = probe.params()(i);
    probe.params()(i) = orig + h;
    const double up = loss(probe);
    probe.params()(i) = orig - h;
    const double down = loss(probe);
    probe.params()(i) = orig;
    numeric(i) = (up - down) / (2 * h);
  }
  // Per tensor, so a small layer's gradients are not hidden by a large one.
  for (const auto& t : m.ParamTensors()) {
    const auto a = grad.segment(Eigen::Index(t.offset), Eigen::Index(t.size));
    const auto n =
        numeric.segment(Eigen::Index(t.offset), Eigen::Index(t.size));
    const double scale = std::max(1e-6, n.cwiseAbs().maxCoeff());
    EXPECT_LT((a - n).cwiseAbs().maxCoeff() / scale, 1e-4) << t.name;
  }
}

TEST(ModelTest, EveryTensorReceivesGradient) {
  Rng rng(23);
  const Model m = Model::Build(Tiny(2), 29);
  const Eigen::MatrixXd x = RandomInput(rng, 24, 17);
  const int To = m.OutputFrames(24);
  TargetTensor target = testing::RandomTarget(rng, To, 4, 0.0);
  for (int c : {0, 1}) {
    target.heatmap(3 + 4 * c, c) = 1.0;
    target.keypoint_mask(3 + 4 * c, c) = true;
    target.length(3 + 4 * c) = 0.3;
    target.offset(3 + 4 * c) = 0.4;
  }
  target.num_keypoints = 2;
  ForwardCache cache;
  const Prediction p = m.Forward(x, &cache);
  LossGradients lg = LossGradients::Zero(To, 4);
  TotalLoss(p.heatmap, p.length, p.offset, target, LossFactors{}, &lg);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(m.params().size());
  m.Backward(cache, lg, &grad);
  for (const auto& t : m.ParamTensors()) {
    EXPECT_GT(grad.segment(Eigen::Index(t.offset), Eigen::Index(t.size))
                  .cwiseAbs()
                  .maxCoeff(),
              0.0)
        << t.name;
  }
}

TEST(PredictionFromTargetTest, ClampsIntoOpenInterval) {
  Rng rng(1);
  const TargetTensor t = testing::RandomTarget(rng, 10, 3);
  const Prediction p = PredictionFromTarget(t, 4);
  EXPECT_GT(p.heatmap.minCoeff(), 0.0);
  EXPECT_LT(p.heatmap.maxCoeff(), 1.0);
  EXPECT_EQ(p.downsample_factor, 4);
}

}  // namespace
}  // namespace fillerspot
