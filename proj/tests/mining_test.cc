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

#include <gtest/gtest.h>

#include "fillerspot/error.h"
#include "fillerspot/mining.h"

namespace fillerspot {
namespace {

AnnotatedClip Clip(std::vector<WordEvent> events) {
  AnnotatedClip c;
  c.clip_id = "c";
  c.sample_rate = 1000;
  c.audio.assign(10000, 0.0f);
  c.events = std::move(events);
  return c;
}

DetectionEvent Det(double onset, double duration, int category = 0) {
  return {category, onset, duration, 0.9, 0};
}

const CategoryRegistry kFresh(4, {"um", "uh"});

TEST(FpReportTest, PerfectDetectionsHaveNoFalsePositives) {
  const auto clip = Clip({{"um", 1.0, 0.3}, {"and", 2.0, 0.2}, {"uh", 3.0, 0.4}});
  const FpReport r =
      BuildFpReport({{Det(1.0, 0.3), Det(3.0, 0.4)}}, {clip}, 0.2, kFresh);
  EXPECT_EQ(r.total_fp, 0);
  EXPECT_TRUE(r.counts.empty());
}

TEST(FpReportTest, DetectionInsideWordIsAttributedToIt) {
  const auto clip = Clip({{"and", 2.0, 0.4}});
  const FpReport r = BuildFpReport({{Det(2.1, 0.2)}}, {clip}, 0.2, kFresh);
  EXPECT_EQ(r.counts.at("and"), 1);
  EXPECT_EQ(r.total_fp, 1);
  EXPECT_EQ(r.silence_fp, 0);
}

TEST(FpReportTest, LargestOverlapWinsTiesGoEarlier) {
  // Overlaps "a" for 0.1 s and "the" for 0.2 s.
  const auto clip = Clip({{"a", 1.0, 0.3}, {"the", 1.4, 0.4}});
  FpReport r = BuildFpReport({{Det(1.2, 0.4)}}, {clip}, 0.05, kFresh);
  EXPECT_EQ(r.counts.count("a"), 0u);
  EXPECT_EQ(r.counts.at("the"), 1);
  // Equal 0.1 s overlaps.
  r = BuildFpReport({{Det(1.2, 0.3)}}, {clip}, 0.05, kFresh);
  EXPECT_EQ(r.counts.at("a"), 1);
}

TEST(FpReportTest, SilenceAndConservation) {
  const auto clip = Clip({{"um", 1.0, 0.3}, {"and", 3.0, 0.3}});
  const FpReport r = BuildFpReport(
      {{Det(1.0, 0.3), Det(5.0, 0.2), Det(3.05, 0.2), Det(3.1, 0.1, 1)}},
      {clip}, 0.2, kFresh);
  EXPECT_EQ(r.silence_fp, 1);
  EXPECT_EQ(r.counts.at("and"), 1);
  int sum = 0;
  for (const auto& [w, n] : r.counts) sum += n;
  EXPECT_EQ(r.total_fp, r.silence_fp + sum);
  EXPECT_EQ(r.counts.count("um"), 0u);
}

TEST(FpReportTest, PromotedWordsStillCountedButFlagged) {
  CategoryRegistry reg = kFresh;
  reg.Promote("and");
  const auto clip = Clip({{"and", 2.0, 0.4}});
  const FpReport r = BuildFpReport({{Det(2.1, 0.2)}}, {clip}, 0.2, reg, 7);
  EXPECT_EQ(r.counts.at("and"), 1);
  EXPECT_TRUE(r.promoted.count("and"));
  EXPECT_EQ(r.epoch, 7);
  EXPECT_NE(FormatFpTable(r, 5).find("and"), std::string::npos);
}

TEST(SelectHardCategoryTest, Examples) {
  FpReport r;
  r.counts = {{"and", 40}, {"a", 31}};
  EXPECT_EQ(SelectHardCategory(r, kFresh, 3), "and");
  r.counts = {{"a", 10}, {"and", 10}};
  EXPECT_EQ(SelectHardCategory(r, kFresh, 3), "a");
  r.counts = {{"a", 2}, {"and", 1}};
  EXPECT_EQ(SelectHardCategory(r, kFresh, 3), std::nullopt);
  CategoryRegistry reg = kFresh;
  reg.Promote("and");
  r.counts = {{"and", 40}, {"a", 31}};
  EXPECT_EQ(SelectHardCategory(r, reg, 3), "a");
  CategoryRegistry full(1, {"um", "uh"});
  full.Promote("x");
  EXPECT_EQ(SelectHardCategory(r, full, 3), std::nullopt);
}

TEST(MiningStepTest, ScheduleAndCapacity) {
  MiningSchedule s;  // 120, 10, 8, 3
  CategoryRegistry reg(1, {"um", "uh"});
  int calls = 0;
  auto pass = [&](const CategoryRegistry&) {
    ++calls;
    FpReport r;
    r.counts = {{"and", 5}};
    return r;
  };
  EXPECT_FALSE(MiningStep(119, s, &reg, pass).report);
  EXPECT_EQ(calls, 0);
  const MiningOutcome out = MiningStep(120, s, &reg, pass);
  EXPECT_EQ(out.promoted, "and");
  EXPECT_EQ(out.category_id, 2);
  EXPECT_EQ(calls, 1);
  EXPECT_FALSE(MiningStep(130, s, &reg, pass).report);
  EXPECT_EQ(calls, 1);
}

TEST(MiningScheduleTest, ValidationAndEpochs) {
  MiningSchedule s{12, 1, 4, 3};
  EXPECT_FALSE(s.IsMiningEpoch(11));
  EXPECT_TRUE(s.IsMiningEpoch(12));
  EXPECT_TRUE(s.IsMiningEpoch(13));
  s.period_epochs = 0;
  EXPECT_THROW(s.Validate(), ConfigError);
  s = MiningSchedule{};
  s.h = -1;
  EXPECT_THROW(s.Validate(), ConfigError);
}

TEST(FpReportTest, JsonRoundTripAndTop) {
  FpReport r;
  r.counts = {{"b", 3}, {"a", 3}, {"c", 9}};
  r.silence_fp = 2;
  r.total_fp = 17;
  r.epoch = 4;
  const auto top = r.Top(2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].first, "c");
  EXPECT_EQ(top[1].first, "a");
  const FpReport back = nlohmann::json(r).get<FpReport>();
  EXPECT_EQ(back.counts, r.counts);
  EXPECT_EQ(back.total_fp, 17);
}

}  // namespace
}  // namespace fillerspot
