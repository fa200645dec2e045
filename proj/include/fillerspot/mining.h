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

#ifndef FILLERSPOT_MINING_H_
#define FILLERSPOT_MINING_H_

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fillerspot/corpus.h"
#include "fillerspot/decode.h"
#include "fillerspot/targets.h"
#include "json.hpp"

namespace fillerspot {

// Filler false positives attributed to the ground-truth words they overlap.
// Invariant: total_fp == silence_fp + sum(counts).
struct FpReport {
  std::map<std::string, int> counts;
  int silence_fp = 0;
  int total_fp = 0;
  int epoch = 0;
  std::set<std::string> promoted;  // counted words that already own a slot

  // Words by descending count, ties lexicographic.
  std::vector<std::pair<std::string, int>> Top(size_t n) const;
};

void to_json(nlohmann::json& j, const FpReport& r);
void from_json(const nlohmann::json& j, FpReport& r);

// detections[i] are decoded events for clips[i]; only filler-channel events
// are considered. An unmatched filler detection is attributed to the
// non-filler word with the largest temporal overlap (ties: earlier word),
// or to silence_fp when it overlaps no such word.
FpReport BuildFpReport(
    const std::vector<std::vector<DetectionEvent>>& detections,
    const std::vector<AnnotatedClip>& clips, double collar_s,
    const CategoryRegistry& registry, int epoch = 0);

// The unpromoted non-filler word with the highest count >= min_fp_count
// (ties lexicographic); nullopt when nothing qualifies or no slot is empty.
std::optional<std::string> SelectHardCategory(const FpReport& report,
                                              const CategoryRegistry& registry,
                                              int min_fp_count);

struct MiningSchedule {
  int start_epoch = 120;
  int period_epochs = 10;
  int h = 8;
  int min_fp_count = 3;

  void Validate() const;  // throws ConfigError
  bool IsMiningEpoch(int epoch) const {
    return epoch >= start_epoch && (epoch - start_epoch) % period_epochs == 0;
  }
  bool operator==(const MiningSchedule&) const = default;
};

void to_json(nlohmann::json& j, const MiningSchedule& s);
void from_json(const nlohmann::json& j, MiningSchedule& s);

struct MiningOutcome {
  std::optional<FpReport> report;
  std::optional<std::string> promoted;
  int category_id = -1;
};

using ValidationPass = std::function<FpReport(const CategoryRegistry&)>;

// Runs once per epoch. On scheduled epochs with a free slot, calls the
// validation pass and promotes at most one word; otherwise a no-op.
MiningOutcome MiningStep(int epoch, const MiningSchedule& schedule,
                         CategoryRegistry* registry,
                         const ValidationPass& validation_pass);

// Top-N table: rank, word, fp count, promoted flag; silence/total footer.
std::string FormatFpTable(const FpReport& report, size_t top_n);

}  // namespace fillerspot

#endif  // FILLERSPOT_MINING_H_
