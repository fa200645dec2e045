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

#ifndef FILLERSPOT_TARGETS_H_
#define FILLERSPOT_TARGETS_H_

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fillerspot/corpus.h"
#include "json.hpp"

namespace fillerspot {

inline constexpr int kFillerCategory = 0;
inline constexpr int kNonFillerCategory = 1;
inline constexpr int kFirstAuxCategory = 2;

// Ordered category set: 0 = filler, 1 = non-filler, 2..1+h = auxiliary
// placeholder slots. Slots are filled append-only, lowest index first.
class CategoryRegistry {
 public:
  CategoryRegistry() : CategoryRegistry(0, {"um", "uh"}) {}
  CategoryRegistry(int num_aux_slots, std::vector<std::string> filler_lexicon);

  int NumAuxSlots() const { return int(slots_.size()); }
  int NumCategories() const { return kFirstAuxCategory + NumAuxSlots(); }
  bool HasEmptySlot() const;
  int NumAssigned() const;

  bool IsFiller(std::string_view word) const;
  bool IsPromoted(std::string_view word) const;

  // Filler lexicon words -> 0, promoted words -> their slot, others -> 1.
  int CategoryOf(std::string_view word) const;

  // Binds word to the lowest empty slot and returns its category id.
  // Throws PromotionError for fillers, duplicates, or when no slot is free.
  int Promote(const std::string& word);

  // "filler", "non-filler", or the promoted word ("" for empty slots).
  std::string CategoryName(int category_id) const;

  const std::vector<std::optional<std::string>>& slots() const {
    return slots_;
  }
  const std::vector<std::string>& filler_lexicon() const { return lexicon_; }

  bool operator==(const CategoryRegistry&) const = default;

 private:
  std::vector<std::string> lexicon_;
  std::vector<std::optional<std::string>> slots_;
};

void to_json(nlohmann::json& j, const CategoryRegistry& r);
void from_json(const nlohmann::json& j, CategoryRegistry& r);

// Fills in category_id for each event from the registry.
void AssignCategories(const CategoryRegistry& registry,
                      std::vector<WordEvent>* events);

// Per-frame training targets at the prediction resolution.
struct TargetTensor {
  Eigen::MatrixXd heatmap;  // T x C, in [0, 1]
  Eigen::VectorXd length;   // seconds, nonzero only at keypoint frames
  Eigen::VectorXd offset;   // fraction of a frame in [0, 1)
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> keypoint_mask;  // T x C
  int num_keypoints = 0;

  int NumFrames() const { return int(heatmap.rows()); }
  int NumCategories() const { return int(heatmap.cols()); }
};

// Gaussian width in frames for an event spanning duration_frames.
inline double KeypointSigma(double duration_frames, double sigma_frac) {
  return std::max(1.0, sigma_frac * duration_frames);
}

// Keypoint frame and sub-frame offset of a center time.
struct Keypoint {
  int frame;
  double offset;
};
Keypoint KeypointOf(double center_s, double hop_s);

// Encodes events (with assigned category ids) into a T-frame target at frame
// hop hop_s. Each event contributes a unit Gaussian peak at its center frame
// on its category channel; overlapping peaks combine by elementwise max.
// Throws EncodingError for events outside [0, T * hop_s] or with invalid
// category ids.
TargetTensor EncodeTargets(const std::vector<WordEvent>& events,
                           int num_frames, int num_categories, double hop_s,
                           double sigma_frac = 1.0 / 6.0);

}  // namespace fillerspot

#endif  // FILLERSPOT_TARGETS_H_
