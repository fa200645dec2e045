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

#include "fillerspot/targets.h"

#include <algorithm>
#include <cmath>

#include "fillerspot/error.h"

namespace fillerspot {

CategoryRegistry::CategoryRegistry(int num_aux_slots,
                                   std::vector<std::string> filler_lexicon)
    : lexicon_(std::move(filler_lexicon)) {
  if (num_aux_slots < 0) throw ConfigError("negative auxiliary slot count");
  slots_.resize(size_t(num_aux_slots));
}

bool CategoryRegistry::HasEmptySlot() const {
  return std::any_of(slots_.begin(), slots_.end(),
                     [](const auto& s) { return !s.has_value(); });
}

int CategoryRegistry::NumAssigned() const {
  return int(std::count_if(slots_.begin(), slots_.end(),
                           [](const auto& s) { return s.has_value(); }));
}

bool CategoryRegistry::IsFiller(std::string_view word) const {
  return std::find(lexicon_.begin(), lexicon_.end(), word) != lexicon_.end();
}

bool CategoryRegistry::IsPromoted(std::string_view word) const {
  return std::any_of(slots_.begin(), slots_.end(),
                     [&](const auto& s) { return s && *s == word; });
}

int CategoryRegistry::CategoryOf(std::string_view word) const {
  if (IsFiller(word)) return kFillerCategory;
  for (size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i] && *slots_[i] == word) return kFirstAuxCategory + int(i);
  }
  return kNonFillerCategory;
}

int CategoryRegistry::Promote(const std::string& word) {
  if (IsFiller(word)) {
    throw PromotionError("cannot promote filler word '" + word + "'");
  }
  if (IsPromoted(word)) {
    throw PromotionError("word '" + word + "' is already promoted");
  }
  for (size_t i = 0; i < slots_.size(); ++i) {
    if (!slots_[i]) {
      slots_[i] = word;
      return kFirstAuxCategory + int(i);
    }
  }
  throw PromotionError("no empty auxiliary slot for '" + word + "'");
}

std::string CategoryRegistry::CategoryName(int id) const {
  if (id == kFillerCategory) return "filler";
  if (id == kNonFillerCategory) return "non-filler";
  const int slot = id - kFirstAuxCategory;
  if (slot < 0 || slot >= NumAuxSlots()) return "?";
  return slots_[size_t(slot)].value_or("");
}

void to_json(nlohmann::json& j, const CategoryRegistry& r) {
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& s : r.slots()) {
    slots.push_back(s ? nlohmann::json(*s) : nlohmann::json(nullptr));
  }
  j = {{"filler_lexicon", r.filler_lexicon()}, {"slots", slots}};
}

void from_json(const nlohmann::json& j, CategoryRegistry& r) {
  const auto& slots = j.at("slots");
  CategoryRegistry out(int(slots.size()),
                       j.at("filler_lexicon").get<std::vector<std::string>>());
  for (const auto& s : slots) {
    if (!s.is_null()) out.Promote(s.get<std::string>());
  }
  // Promotion fills lowest slots first; empty slots are only allowed at the
  // tail since assignments are append-only.
  for (size_t i = 0; i < slots.size(); ++i) {
    const bool expect = !slots[i].is_null();
    if (expect != out.slots()[i].has_value()) {
      throw ValidationError("registry slots must be filled in order");
    }
  }
  r = std::move(out);
}

void AssignCategories(const CategoryRegistry& registry,
                      std::vector<WordEvent>* events) {
  for (auto& e : *events) e.category_id = registry.CategoryOf(e.text);
}

Keypoint KeypointOf(double center_s, double hop_s) {
  const double c = center_s / hop_s;
  const int frame = int(std::floor(c + 1e-9));
  return {frame, std::clamp(c - frame, 0.0, std::nextafter(1.0, 0.0))};
}

TargetTensor EncodeTargets(const std::vector<WordEvent>& events,
                           int num_frames, int num_categories, double hop_s,
                           double sigma_frac) {
  if (num_frames < 0 || num_categories < 2 || !(hop_s > 0.0)) {
    throw EncodingError("invalid target dimensions");
  }
  TargetTensor out;
  out.heatmap = Eigen::MatrixXd::Zero(num_frames, num_categories);
  out.length = Eigen::VectorXd::Zero(num_frames);
  out.offset = Eigen::VectorXd::Zero(num_frames);
  out.keypoint_mask.setConstant(num_frames, num_categories, false);

  const double span = num_frames * hop_s;
  constexpr double kTol = 1e-6;
  const double below_one = std::nextafter(1.0, 0.0);
  for (const auto& e : events) {
    if (e.category_id < 0 || e.category_id >= num_categories) {
      throw EncodingError("event '" + e.text + "' has invalid category " +
                          std::to_string(e.category_id));
    }
    if (!(e.duration > 0.0) || e.onset < -kTol || e.End() > span + kTol) {
      throw EncodingError("event '" + e.text + "' lies outside [0, " +
                          std::to_string(span) + "] s");
    }
    Keypoint kp = KeypointOf(e.Center(), hop_s);
    kp.frame = std::clamp(kp.frame, 0, num_frames - 1);
    const double sigma = KeypointSigma(e.duration / hop_s, sigma_frac);
    auto channel = out.heatmap.col(e.category_id);
    for (int t = 0; t < num_frames; ++t) {
      if (t == kp.frame) continue;
      const double d = t - kp.frame;
      const double g = std::min(std::exp(-d * d / (2.0 * sigma * sigma)),
                                below_one);
      channel(t) = std::max(channel(t), g);
    }
    channel(kp.frame) = 1.0;
    out.keypoint_mask(kp.frame, e.category_id) = true;
    out.length(kp.frame) = e.duration;
    out.offset(kp.frame) = kp.offset;
  }
  out.num_keypoints = int(out.keypoint_mask.count());
  return out;
}

}  // namespace fillerspot
