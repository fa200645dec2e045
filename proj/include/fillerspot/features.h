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

#ifndef FILLERSPOT_FEATURES_H_
#define FILLERSPOT_FEATURES_H_

#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "fillerspot/random.h"
#include "json.hpp"

namespace fillerspot {

struct FrontendConfig {
  int sample_rate = 16000;
  double win_ms = 25.0;
  double hop_ms = 10.0;
  int n_fft = 512;
  double log_floor = 1e-6;

  int WinLength() const { return int(std::lround(sample_rate * win_ms / 1e3)); }
  int HopLength() const { return int(std::lround(sample_rate * hop_ms / 1e3)); }
  int NumBins() const { return n_fft / 2 + 1; }
  double HopSeconds() const { return double(HopLength()) / sample_rate; }
  int NumFrames(size_t num_samples) const;

  bool operator==(const FrontendConfig&) const = default;
};

// Log-magnitude STFT, one row per frame. Frame t covers samples
// [t * hop, t * hop + win).
struct Spectrogram {
  Eigen::MatrixXd frames;  // T x F
  double hop_s = 0.0;
  int sample_rate = 0;

  int NumFrames() const { return int(frames.rows()); }
  int NumBins() const { return int(frames.cols()); }
};

// Hann-windowed STFT, log(|X| + log_floor). Throws InputError when the
// waveform is shorter than one window and ConfigError for a bad config.
Spectrogram StftFeatures(std::span<const float> waveform,
                         const FrontendConfig& config);

inline int FrameOfTime(double seconds, double hop_s) {
  return int(std::floor(seconds / hop_s));
}
inline double TimeOfFrame(int frame, double hop_s) { return frame * hop_s; }

struct AugmentConfig {
  bool enabled = false;
  int num_time_masks = 0;
  int time_mask_frames = 0;
  int num_freq_masks = 0;
  int freq_mask_bins = 0;
  int max_shift_frames = 0;   // applied by the trainer when cropping
  double noise_snr_db = 0.0;  // <= 0 disables waveform noise
};

// Time/frequency masking. Masked cells are replaced by the per-bin mean over
// time of the unmasked input. Identity when disabled or all widths are 0.
Spectrogram Augment(const Spectrogram& input, const AugmentConfig& config,
                    Rng& rng);

// Adds white Gaussian noise at the given SNR relative to the signal power.
void AddNoise(std::span<float> waveform, double snr_db, Rng& rng);

void to_json(nlohmann::json& j, const FrontendConfig& c);
void from_json(const nlohmann::json& j, FrontendConfig& c);
void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);

}  // namespace fillerspot

#endif  // FILLERSPOT_FEATURES_H_
