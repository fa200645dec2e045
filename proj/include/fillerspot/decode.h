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

#ifndef FILLERSPOT_DECODE_H_
#define FILLERSPOT_DECODE_H_

#include <string>
#include <vector>

#include "fillerspot/net.h"
#include "json.hpp"

namespace fillerspot {

struct DetectionEvent {
  int category_id = 0;
  double onset = 0.0;
  double duration = 0.0;
  double score = 0.0;
  int peak_frame = 0;

  bool operator==(const DetectionEvent&) const = default;
};

struct DecodeConfig {
  double score_threshold = 0.3;
  int nms_radius_frames = 2;
  int top_k = 100;
  // Empty means every channel.
  std::vector<int> channels;
};

void to_json(nlohmann::json& j, const DecodeConfig& c);
void from_json(const nlohmann::json& j, DecodeConfig& c);

// Peak picking per channel: a frame becomes an event when its score reaches
// the threshold and it is a local maximum within +-nms_radius frames
// (earlier frames win ties). Events are placed at
// (t + offset[t]) * hop_s * downsample_factor and ordered by descending
// score (then frame, then channel); at most top_k are returned.
std::vector<DetectionEvent> Decode(const Prediction& prediction, double hop_s,
                                   const DecodeConfig& config);

// "clip_id,category,onset_s,duration_s,score" rows, 6 decimals.
std::string FormatDetectionsCsv(
    const std::vector<std::string>& clip_ids,
    const std::vector<std::vector<DetectionEvent>>& detections);

}  // namespace fillerspot

#endif  // FILLERSPOT_DECODE_H_
