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

#include <gtest/gtest.h>

#include "fillerspot/error.h"
#include "fillerspot/targets.h"

namespace fillerspot {
namespace {

WordEvent Event(const std::string& text, double onset, double duration,
                int category) {
  WordEvent e{text, onset, duration};
  e.category_id = category;
  return e;
}

TEST(CategoryRegistryTest, CategoryOfFollowsLexiconAndSlots) {
  CategoryRegistry reg(8, {"um", "uh"});
  EXPECT_EQ(reg.NumCategories(), 10);
  EXPECT_EQ(reg.CategoryOf("um"), kFillerCategory);
  EXPECT_EQ(reg.CategoryOf("zebra"), kNonFillerCategory);
  EXPECT_EQ(reg.Promote("and"), 2);
  EXPECT_EQ(reg.CategoryOf("and"), 2);
  EXPECT_EQ(reg.CategoryName(2), "and");
  EXPECT_EQ(reg.CategoryName(3), "");
}

TEST(CategoryRegistryTest, PromotionErrors) {
  CategoryRegistry reg(2, {"um", "uh"});
  EXPECT_THROW(reg.Promote("um"), PromotionError);
  reg.Promote("and");
  EXPECT_THROW(reg.Promote("and"), PromotionError);
  reg.Promote("a");
  EXPECT_FALSE(reg.HasEmptySlot());
  EXPECT_THROW(reg.Promote("the"), PromotionError);
}

TEST(CategoryRegistryTest, NinthPromotionFailsWithEightSlots) {
  CategoryRegistry reg(8, {"um", "uh"});
  for (int i = 0; i < 8; ++i) reg.Promote("w" + std::to_string(i));
  EXPECT_THROW(reg.Promote("w8"), PromotionError);
}

TEST(CategoryRegistryTest, EarlierSlotsAreStable) {
  CategoryRegistry reg(4, {"um", "uh"});
  reg.Promote("and");
  const int a = reg.CategoryOf("and");
  reg.Promote("a");
  reg.Promote("the");
  EXPECT_EQ(reg.CategoryOf("and"), a);
  EXPECT_EQ(reg.NumAssigned(), 3);
}

TEST(CategoryRegistryTest, JsonRoundTrip) {
  CategoryRegistry reg(3, {"um", "uh"});
  reg.Promote("and");
  const auto back = nlohmann::json(reg).get<CategoryRegistry>();
  EXPECT_EQ(back, reg);
}

TEST(EncodeTargetsTest, NoEvents) {
  const TargetTensor t = EncodeTargets({}, 20, 2, 0.04);
  EXPECT_EQ(t.num_keypoints, 0);
  EXPECT_EQ(t.heatmap.maxCoeff(), 0.0);
}

TEST(EncodeTargetsTest, SingleEventAtFrameCenter) {
  const double hop = 0.04;
  // Center = 50 * hop exactly.
  const TargetTensor t =
      EncodeTargets({Event("um", 50 * hop - 0.15, 0.30, 0)}, 100, 2, hop);
  EXPECT_EQ(t.heatmap(50, 0), 1.0);
  EXPECT_TRUE(t.keypoint_mask(50, 0));
  EXPECT_DOUBLE_EQ(t.length(50), 0.30);
  EXPECT_NEAR(t.offset(50), 0.0, 1e-9);
  EXPECT_EQ(t.num_keypoints, 1);
}

TEST(EncodeTargetsTest, InvariantsHold) {
  const double hop = 0.04;
  const TargetTensor t = EncodeTargets(
      {Event("um", 0.2, 0.3, 0), Event("and", 1.0, 0.25, 1),
       Event("uh", 2.1, 0.4, 0)},
      80, 3, hop);
  EXPECT_EQ(t.num_keypoints, int(t.keypoint_mask.count()));
  for (int f = 0; f < t.NumFrames(); ++f) {
    bool any = false;
    for (int c = 0; c < t.NumCategories(); ++c) {
      EXPECT_EQ(t.heatmap(f, c) == 1.0, bool(t.keypoint_mask(f, c)));
      any = any || t.keypoint_mask(f, c);
    }
    if (!any) {
      EXPECT_EQ(t.length(f), 0.0);
      EXPECT_EQ(t.offset(f), 0.0);
    }
    EXPECT_GE(t.offset(f), 0.0);
    EXPECT_LT(t.offset(f), 1.0);
  }
}

TEST(EncodeTargetsTest, OverlappingGaussiansCombineByMax) {
  const double hop = 0.04, frac = 0.5;
  const WordEvent a = Event("um", 0.40, 0.40, 0);
  const WordEvent b = Event("uh", 0.56, 0.36, 0);
  const TargetTensor both = EncodeTargets({a, b}, 40, 2, hop, frac);
  // Render each event independently with the closed form and take the max.
  auto render = [&](const WordEvent& e, int t) {
    const int k = int(std::floor(e.Center() / hop + 1e-9));
    const double sigma = std::max(1.0, frac * e.duration / hop);
    return t == k ? 1.0
                  : std::exp(-double((t - k) * (t - k)) / (2 * sigma * sigma));
  };
  for (int t = 0; t < 40; ++t) {
    EXPECT_NEAR(both.heatmap(t, 0), std::max(render(a, t), render(b, t)),
                1e-12)
        << "frame " << t;
  }
}

TEST(EncodeTargetsTest, OutOfRangeEventThrows) {
  EXPECT_THROW(EncodeTargets({Event("um", 1.9, 0.3, 0)}, 50, 2, 0.04),
               EncodingError);
  EXPECT_THROW(EncodeTargets({Event("um", -0.1, 0.3, 0)}, 50, 2, 0.04),
               EncodingError);
  EXPECT_THROW(EncodeTargets({Event("um", 0.5, 0.3, 5)}, 50, 2, 0.04),
               EncodingError);
}

TEST(KeypointTest, FrameAndOffset) {
  const Keypoint kp = KeypointOf(0.41, 0.04);
  EXPECT_EQ(kp.frame, 10);
  EXPECT_NEAR(kp.offset, 0.25, 1e-9);
  EXPECT_EQ(KeypointSigma(3.0, 1.0 / 6.0), 1.0);
  EXPECT_DOUBLE_EQ(KeypointSigma(12.0, 0.25), 3.0);
}

}  // namespace
}  // namespace fillerspot
