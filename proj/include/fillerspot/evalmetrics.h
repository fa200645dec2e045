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

#ifndef FILLERSPOT_EVALMETRICS_H_
#define FILLERSPOT_EVALMETRICS_H_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fillerspot/corpus.h"
#include "fillerspot/decode.h"
#include "json.hpp"

namespace fillerspot {

inline constexpr double kDefaultCollarSeconds = 0.2;

struct TimedEvent {
  double onset = 0.0;
  double duration = 0.0;
  int category_id = 0;
};

TimedEvent ToTimed(const WordEvent& e);
TimedEvent ToTimed(const DetectionEvent& e);
template <typename T>
std::vector<TimedEvent> ToTimed(const std::vector<T>& events) {
  std::vector<TimedEvent> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(ToTimed(e));
  return out;
}

struct EventScore {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  int tp = 0;
  int fp = 0;
  int fn = 0;

  // Empty-vs-empty scores 1; an empty side against a non-empty one scores 0.
  static EventScore FromCounts(int tp, int fp, int fn);
};

// One-to-one matching of detections to references where a pair is
// admissible iff |onset_det - onset_ref| <= collar_s. Pairs are first taken
// greedily by ascending onset distance (ties: earlier reference onset, then
// earlier detection onset); unmatched detections are then extended along
// augmenting paths so the result has maximum cardinality. Returns
// (detection index, reference index) pairs sorted by detection index.
std::vector<std::pair<size_t, size_t>> MatchEvents(
    const std::vector<TimedEvent>& detections,
    const std::vector<TimedEvent>& references, double collar_s);

// Precision/recall/F1 over events of category_filter (all events when
// nullopt).
EventScore EventPrf(const std::vector<TimedEvent>& detections,
                    const std::vector<TimedEvent>& references,
                    double collar_s = kDefaultCollarSeconds,
                    std::optional<int> category_filter = 0);

// Sums tp/fp/fn over clips (matching is per clip) and scores the totals.
EventScore EventPrfOverClips(
    const std::vector<std::vector<TimedEvent>>& detections,
    const std::vector<std::vector<TimedEvent>>& references,
    double collar_s = kDefaultCollarSeconds,
    std::optional<int> category_filter = 0);

void to_json(nlohmann::json& j, const EventScore& s);
void from_json(const nlohmann::json& j, EventScore& s);

// "category  P  R  F1  tp  fp  fn" table, 6 decimals.
std::string FormatScoreTable(
    const std::vector<std::pair<std::string, EventScore>>& rows);

}  // namespace fillerspot

#endif  // FILLERSPOT_EVALMETRICS_H_
