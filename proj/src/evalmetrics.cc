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

#include "fillerspot/evalmetrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <tuple>

#include "fillerspot/error.h"

namespace fillerspot {
namespace {

// Absorbs decimal representation error at the collar boundary.
constexpr double kCollarSlack = 1e-9;

std::vector<TimedEvent> Filter(const std::vector<TimedEvent>& events,
                               std::optional<int> category) {
  if (!category) return events;
  std::vector<TimedEvent> out;
  for (const auto& e : events) {
    if (e.category_id == *category) out.push_back(e);
  }
  return out;
}

}  // namespace

TimedEvent ToTimed(const WordEvent& e) {
  return {e.onset, e.duration, e.category_id};
}

TimedEvent ToTimed(const DetectionEvent& e) {
  return {e.onset, e.duration, e.category_id};
}

EventScore EventScore::FromCounts(int tp, int fp, int fn) {
  EventScore s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  const int n_det = tp + fp;
  const int n_ref = tp + fn;
  if (n_det == 0 && n_ref == 0) return s;
  s.precision = n_det > 0 ? double(tp) / n_det : 0.0;
  s.recall = n_ref > 0 ? double(tp) / n_ref : 0.0;
  const double pr = s.precision + s.recall;
  s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
  return s;
}

std::vector<std::pair<size_t, size_t>> MatchEvents(
    const std::vector<TimedEvent>& detections,
    const std::vector<TimedEvent>& references, double collar_s) {
  const size_t nd = detections.size();
  const size_t nr = references.size();
  struct Candidate {
    double distance;
    size_t det, ref;
  };
  std::vector<Candidate> candidates;
  for (size_t i = 0; i < nd; ++i) {
    for (size_t j = 0; j < nr; ++j) {
      const double d = std::abs(detections[i].onset - references[j].onset);
      if (d <= collar_s + kCollarSlack) candidates.push_back({d, i, j});
    }
  }
  auto key = [&](const Candidate& c) {
    return std::make_tuple(c.distance, references[c.ref].onset,
                           detections[c.det].onset, c.ref, c.det);
  };
  std::sort(candidates.begin(), candidates.end(),
            [&](const Candidate& a, const Candidate& b) {
              return key(a) < key(b);
            });

  std::vector<long> det_match(nd, -1), ref_match(nr, -1);
  std::vector<std::vector<size_t>> adjacency(nd);
  for (const auto& c : candidates) {
    adjacency[c.det].push_back(c.ref);
    if (det_match[c.det] < 0 && ref_match[c.ref] < 0) {
      det_match[c.det] = long(c.ref);
      ref_match[c.ref] = long(c.det);
    }
  }

  // Kuhn augmentation from the greedy matching.
  std::vector<char> visited(nr);
  std::function<bool(size_t)> augment = [&](size_t det) {
    for (size_t ref : adjacency[det]) {
      if (visited[ref]) continue;
      visited[ref] = 1;
      if (ref_match[ref] < 0 || augment(size_t(ref_match[ref]))) {
        det_match[det] = long(ref);
        ref_match[ref] = long(det);
        return true;
      }
    }
    return false;
  };
  std::vector<size_t> order(nd);
  for (size_t i = 0; i < nd; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return detections[a].onset < detections[b].onset;
  });
  for (size_t det : order) {
    if (det_match[det] >= 0 || adjacency[det].empty()) continue;
    std::fill(visited.begin(), visited.end(), 0);
    augment(det);
  }

  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t i = 0; i < nd; ++i) {
    if (det_match[i] >= 0) pairs.emplace_back(i, size_t(det_match[i]));
  }
  return pairs;
}

EventScore EventPrf(const std::vector<TimedEvent>& detections,
                    const std::vector<TimedEvent>& references,
                    double collar_s, std::optional<int> category_filter) {
  if (!(collar_s > 0.0)) throw ConfigError("collar must be positive");
  const auto dets = Filter(detections, category_filter);
  const auto refs = Filter(references, category_filter);
  const int tp = int(MatchEvents(dets, refs, collar_s).size());
  return EventScore::FromCounts(tp, int(dets.size()) - tp,
                                int(refs.size()) - tp);
}

EventScore EventPrfOverClips(
    const std::vector<std::vector<TimedEvent>>& detections,
    const std::vector<std::vector<TimedEvent>>& references, double collar_s,
    std::optional<int> category_filter) {
  if (detections.size() != references.size()) {
    throw InputError("detections and references cover different clips");
  }
  int tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < detections.size(); ++i) {
    const EventScore s =
        EventPrf(detections[i], references[i], collar_s, category_filter);
    tp += s.tp;
    fp += s.fp;
    fn += s.fn;
  }
  return EventScore::FromCounts(tp, fp, fn);
}

void to_json(nlohmann::json& j, const EventScore& s) {
  j = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
       {"tp", s.tp},               {"fp", s.fp},         {"fn", s.fn}};
}

void from_json(const nlohmann::json& j, EventScore& s) {
  j.at("precision").get_to(s.precision);
  j.at("recall").get_to(s.recall);
  j.at("f1").get_to(s.f1);
  j.at("tp").get_to(s.tp);
  j.at("fp").get_to(s.fp);
  j.at("fn").get_to(s.fn);
}

std::string FormatScoreTable(
    const std::vector<std::pair<std::string, EventScore>>& rows) {
  std::string out = "category\tprecision\trecall\tf1\ttp\tfp\tfn\n";
  char buf[160];
  for (const auto& [name, s] : rows) {
    std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f\t%.6f\t%d\t%d\t%d\n",
                  s.precision, s.recall, s.f1, s.tp, s.fp, s.fn);
    out += name + buf;
  }
  return out;
}

}  // namespace fillerspot
