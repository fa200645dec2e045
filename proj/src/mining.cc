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

#include "fillerspot/mining.h"

#include <algorithm>
#include <cstdio>

#include "fillerspot/error.h"
#include "fillerspot/evalmetrics.h"

namespace fillerspot {

std::vector<std::pair<std::string, int>> FpReport::Top(size_t n) const {
  std::vector<std::pair<std::string, int>> rows(counts.begin(), counts.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  if (rows.size() > n) rows.resize(n);
  return rows;
}

void to_json(nlohmann::json& j, const FpReport& r) {
  j = {{"epoch", r.epoch},
       {"total_fp", r.total_fp},
       {"silence_fp", r.silence_fp},
       {"counts", r.counts},
       {"promoted", r.promoted}};
}

void from_json(const nlohmann::json& j, FpReport& r) {
  j.at("epoch").get_to(r.epoch);
  j.at("total_fp").get_to(r.total_fp);
  j.at("silence_fp").get_to(r.silence_fp);
  j.at("counts").get_to(r.counts);
  j.at("promoted").get_to(r.promoted);
}

FpReport BuildFpReport(
    const std::vector<std::vector<DetectionEvent>>& detections,
    const std::vector<AnnotatedClip>& clips, double collar_s,
    const CategoryRegistry& registry, int epoch) {
  if (detections.size() != clips.size()) {
    throw InputError("detections and clips differ in length");
  }
  FpReport report;
  report.epoch = epoch;
  for (size_t i = 0; i < clips.size(); ++i) {
    std::vector<TimedEvent> dets, refs;
    for (const auto& d : detections[i]) {
      if (d.category_id == kFillerCategory) dets.push_back(ToTimed(d));
    }
    for (const auto& w : clips[i].events) {
      if (registry.IsFiller(w.text)) {
        refs.push_back({w.onset, w.duration, kFillerCategory});
      }
    }
    std::vector<char> matched(dets.size(), 0);
    for (const auto& [d, r] : MatchEvents(dets, refs, collar_s)) {
      matched[d] = 1;
    }
    for (size_t d = 0; d < dets.size(); ++d) {
      if (matched[d]) continue;
      const double lo = dets[d].onset;
      const double hi = dets[d].onset + dets[d].duration;
      const WordEvent* best = nullptr;
      double best_overlap = 0.0;
      for (const auto& w : clips[i].events) {
        if (registry.IsFiller(w.text)) continue;
        const double overlap =
            std::min(hi, w.End()) - std::max(lo, w.onset);
        if (overlap > best_overlap) {
          best_overlap = overlap;
          best = &w;
        }
      }
      ++report.total_fp;
      if (best == nullptr) {
        ++report.silence_fp;
      } else {
        ++report.counts[best->text];
        if (registry.IsPromoted(best->text)) report.promoted.insert(best->text);
      }
    }
  }
  return report;
}

std::optional<std::string> SelectHardCategory(const FpReport& report,
                                              const CategoryRegistry& registry,
                                              int min_fp_count) {
  if (!registry.HasEmptySlot()) return std::nullopt;
  std::optional<std::string> best;
  int best_count = 0;
  for (const auto& [word, count] : report.counts) {
    if (registry.IsFiller(word) || registry.IsPromoted(word)) continue;
    if (count < min_fp_count) continue;
    if (!best || count > best_count) {
      best = word;
      best_count = count;
    }
  }
  return best;
}

void MiningSchedule::Validate() const {
  if (start_epoch < 1 || period_epochs < 1 || h < 0 || min_fp_count < 0) {
    throw ConfigError("invalid mining schedule");
  }
}

void to_json(nlohmann::json& j, const MiningSchedule& s) {
  j = {{"start_epoch", s.start_epoch},
       {"period_epochs", s.period_epochs},
       {"h", s.h},
       {"min_fp_count", s.min_fp_count}};
}

void from_json(const nlohmann::json& j, MiningSchedule& s) {
  MiningSchedule d;
  s.start_epoch = j.value("start_epoch", d.start_epoch);
  s.period_epochs = j.value("period_epochs", d.period_epochs);
  s.h = j.value("h", d.h);
  s.min_fp_count = j.value("min_fp_count", d.min_fp_count);
}

MiningOutcome MiningStep(int epoch, const MiningSchedule& schedule,
                         CategoryRegistry* registry,
                         const ValidationPass& validation_pass) {
  MiningOutcome outcome;
  if (!schedule.IsMiningEpoch(epoch) || !registry->HasEmptySlot()) {
    return outcome;
  }
  FpReport report = validation_pass(*registry);
  report.epoch = epoch;
  if (auto word = SelectHardCategory(report, *registry,
                                     schedule.min_fp_count)) {
    outcome.category_id = registry->Promote(*word);
    outcome.promoted = *word;
  }
  outcome.report = std::move(report);
  return outcome;
}

std::string FormatFpTable(const FpReport& report, size_t top_n) {
  std::string out = "rank\tword\tfp_count\tpromoted\n";
  char buf[64];
  size_t rank = 0;
  for (const auto& [word, count] : report.Top(top_n)) {
    std::snprintf(buf, sizeof(buf), "%zu\t", ++rank);
    out += buf + word;
    std::snprintf(buf, sizeof(buf), "\t%d\t%s\n", count,
                  report.promoted.count(word) ? "yes" : "no");
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "silence_fp\t%d\ntotal_fp\t%d\n",
                report.silence_fp, report.total_fp);
  out += buf;
  return out;
}

}  // namespace fillerspot
