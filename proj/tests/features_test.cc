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
#include <numbers>

#include <gtest/gtest.h>

#include "fillerspot/error.h"
#include "fillerspot/features.h"
#include "fillerspot/random.h"

namespace fillerspot {
namespace {

TEST(StftTest, FrameCountFormula) {
  FrontendConfig cfg;  // 16 kHz, 25 ms window, 10 ms hop
  EXPECT_EQ(cfg.NumFrames(16000), 98);
  const Spectrogram s = StftFeatures(std::vector<float>(16000, 0.0f), cfg);
  EXPECT_EQ(s.NumFrames(), 98);
  EXPECT_EQ(s.NumBins(), 257);
  EXPECT_DOUBLE_EQ(s.hop_s, 0.01);
}

TEST(StftTest, ZeroInputGivesLogFloor) {
  FrontendConfig cfg;
  const Spectrogram s = StftFeatures(std::vector<float>(4000, 0.0f), cfg);
  EXPECT_TRUE((s.frames.array() == std::log(cfg.log_floor)).all());
}

TEST(StftTest, BinCenteredSinePeaksAtItsBin) {
  FrontendConfig cfg;
  const int bin = 40;
  const double freq = bin * double(cfg.sample_rate) / cfg.n_fft;
  std::vector<float> x(8000);
  for (size_t n = 0; n < x.size(); ++n) {
    x[n] = float(std::sin(2 * std::numbers::pi * freq * double(n) /
                          cfg.sample_rate));
  }
  const Spectrogram s = StftFeatures(x, cfg);
  for (int t = 0; t < s.NumFrames(); ++t) {
    Eigen::Index arg;
    s.frames.row(t).maxCoeff(&arg);
    EXPECT_EQ(arg, bin) << "frame " << t;
  }
}

TEST(StftTest, ShortInputThrows) {
  FrontendConfig cfg;
  EXPECT_THROW(StftFeatures(std::vector<float>(100, 0.0f), cfg), InputError);
}

TEST(StftTest, DeterministicAndFinite) {
  FrontendConfig cfg;
  Rng rng(4);
  std::vector<float> x(6000);
  for (auto& v : x) v = float(rng.Normal() * 1e3);
  const Spectrogram a = StftFeatures(x, cfg);
  const Spectrogram b = StftFeatures(x, cfg);
  EXPECT_TRUE(a.frames.allFinite());
  EXPECT_EQ(a.frames, b.frames);
}

TEST(FrameTimeTest, RoundTripWithinOneHop) {
  const double hop = 0.01;
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.Uniform(0.0, 30.0);
    const double back = TimeOfFrame(FrameOfTime(x, hop), hop);
    EXPECT_LE(back, x + 1e-12);
    EXPECT_GE(back, x - hop - 1e-12);
  }
}

Spectrogram RandomSpec(Rng& rng, int t, int f) {
  Spectrogram s;
  s.frames.resize(t, f);
  for (Eigen::Index i = 0; i < s.frames.size(); ++i) {
    s.frames.data()[i] = rng.Normal();
  }
  s.hop_s = 0.01;
  s.sample_rate = 16000;
  return s;
}

TEST(AugmentTest, DisabledOrZeroWidthIsIdentity) {
  Rng rng(1);
  const Spectrogram s = RandomSpec(rng, 50, 20);
  AugmentConfig off;
  off.num_time_masks = 3;
  off.time_mask_frames = 4;
  EXPECT_EQ(Augment(s, off, rng).frames, s.frames);
  AugmentConfig zero;
  zero.enabled = true;
  zero.num_time_masks = 2;
  zero.num_freq_masks = 2;
  EXPECT_EQ(Augment(s, zero, rng).frames, s.frames);
}

TEST(AugmentTest, TimeMaskReplacesExactlyWidthFramesWithBinMean) {
  Rng rng(6);
  const Spectrogram s = RandomSpec(rng, 60, 12);
  AugmentConfig cfg;
  cfg.enabled = true;
  cfg.num_time_masks = 1;
  cfg.time_mask_frames = 5;
  const Spectrogram out = Augment(s, cfg, rng);
  const Eigen::RowVectorXd mean = s.frames.colwise().mean();
  std::vector<int> changed;
  for (int t = 0; t < 60; ++t) {
    if (out.frames.row(t) != s.frames.row(t)) {
      changed.push_back(t);
      EXPECT_LT((out.frames.row(t) - mean).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
  ASSERT_EQ(changed.size(), 5u);
  EXPECT_EQ(changed.back() - changed.front(), 4);
}

TEST(AugmentTest, DeterministicGivenRngState) {
  Rng seed_rng(3);
  const Spectrogram s = RandomSpec(seed_rng, 40, 16);
  AugmentConfig cfg;
  cfg.enabled = true;
  cfg.num_time_masks = 2;
  cfg.time_mask_frames = 3;
  cfg.num_freq_masks = 1;
  cfg.freq_mask_bins = 4;
  Rng a(99), b(99);
  EXPECT_EQ(Augment(s, cfg, a).frames, Augment(s, cfg, b).frames);
  cfg.time_mask_frames = 41;
  EXPECT_THROW(Augment(s, cfg, a), InputError);
}

TEST(AddNoiseTest, HitsTargetSnr) {
  std::vector<float> x(20000);
  for (size_t n = 0; n < x.size(); ++n) x[n] = float(std::sin(0.05 * n));
  std::vector<float> y = x;
  Rng rng(7);
  AddNoise(y, 10.0, rng);
  double ps = 0, pn = 0;
  for (size_t n = 0; n < x.size(); ++n) {
    ps += double(x[n]) * x[n];
    pn += double(y[n] - x[n]) * (y[n] - x[n]);
  }
  EXPECT_NEAR(10 * std::log10(ps / pn), 10.0, 0.3);
}

}  // namespace
}  // namespace fillerspot
