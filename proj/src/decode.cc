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

#include "fillerspot/decode.h"

#include <algorithm>
#include <cstdio>

namespace fillerspot {

void to_json(nlohmann::json& j, const DecodeConfig& c) {
  j = {{"score_threshold", c.score_threshold},
       {"nms_radius_frames", c.nms_radius_frames},
       {"top_k", c.top_k}};
}

void from_json(const nlohmann::json& j, DecodeConfig& c) {
  DecodeConfig d;
  c.score_threshold = j.value("score_threshold", d.score_threshold);
  c.nms_radius_frames = j.value("nms_radius_frames", d.nms_radius_frames);
  c.top_k = j.value("top_k", d.top_k);
}

std::vector<DetectionEvent> Decode(const Prediction& prediction, double hop_s,
                                   const DecodeConfig& config) {
  const int T = prediction.NumFrames();
  const int C = prediction.NumCategories();
  const int r = std::max(config.nms_radius_frames, 0);
  const double frame_s = hop_s * prediction.downsample_factor;

  std::vector<int> channels = config.channels;
  if (channels.empty()) {
    for (int c = 0; c < C; ++c) channels.push_back(c);
  }

  std::vector<DetectionEvent> events;
  for (int c : channels) {
    if (c < 0 || c >= C) continue;
    const auto heat = prediction.heatmap.col(c);
    for (int t = 0; t < T; ++t) {
      const double s = heat(t);
      if (s < config.score_threshold) continue;
      bool peak = true;
      for (int u = std::max(0, t - r); u <= std::min(T - 1, t + r) && peak;
           ++u) {
        if (u < t) peak = heat(u) < s;
        if (u > t) peak = heat(u) <= s;
      }
      if (!peak) continue;
      const double duration = prediction.length(t);
      if (!(duration > 0.0)) continue;
      const double center = (t + prediction.offset(t)) * frame_s;
      events.push_back({c, center - 0.5 * duration, duration, s, t});
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const DetectionEvent& a, const DetectionEvent& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.peak_frame != b.peak_frame) {
                       return a.peak_frame < b.peak_frame;
                     }
                     return a.category_id < b.category_id;
                   });
  if (config.top_k >= 0 && events.size() > size_t(config.top_k)) {
    events.resize(size_t(config.top_k));
  }
  return events;
}

std::string FormatDetectionsCsv(
    const std::vector<std::string>& clip_ids,
    const std::vector<std::vector<DetectionEvent>>& detections) {
  std::string out = "clip_id,category,onset_s,duration_s,score\n";
  char buf[128];
  for (size_t i = 0; i < clip_ids.size() && i < detections.size(); ++i) {
    for (const auto& d : detections[i]) {
      std::snprintf(buf, sizeof(buf), ",%d,%.6f,%.6f,%.6f\n", d.category_id,
                    d.onset, d.duration, d.score);
      out += clip_ids[i] + buf;
    }
  }
  return out;
}

}  // namespace fillerspot
