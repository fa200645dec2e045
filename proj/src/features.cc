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

#include "fillerspot/features.h"

#include <fftw3.h>

#include <mutex>
#include <numbers>
#include <vector>

#include "fillerspot/error.h"

namespace fillerspot {
namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& PlannerMutex() {
  static std::mutex m;
  return m;
}

}  // namespace

int FrontendConfig::NumFrames(size_t num_samples) const {
  const size_t win = size_t(WinLength());
  if (num_samples < win) return 0;
  return int((num_samples - win) / size_t(HopLength())) + 1;
}

Spectrogram StftFeatures(std::span<const float> waveform,
                         const FrontendConfig& config) {
  const int win = config.WinLength();
  const int hop = config.HopLength();
  if (win <= 0 || hop <= 0 || config.n_fft < win || !(config.log_floor > 0)) {
    throw ConfigError("invalid frontend configuration");
  }
  if (waveform.size() < size_t(win)) {
    throw InputError("waveform shorter than one analysis window");
  }
  const int n_frames = config.NumFrames(waveform.size());
  const int n_bins = config.NumBins();

  std::vector<double> window(static_cast<size_t>(win));
  for (int n = 0; n < win; ++n) {
    window[size_t(n)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / double(win));
  }

  double* in = fftw_alloc_real(size_t(config.n_fft));
  fftw_complex* out = fftw_alloc_complex(size_t(n_bins));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    plan = fftw_plan_dft_r2c_1d(config.n_fft, in, out, FFTW_ESTIMATE);
  }

  Spectrogram spec;
  spec.hop_s = config.HopSeconds();
  spec.sample_rate = config.sample_rate;
  spec.frames.resize(n_frames, n_bins);
  for (int t = 0; t < n_frames; ++t) {
    const size_t start = size_t(t) * size_t(hop);
    for (int n = 0; n < config.n_fft; ++n) {
      in[n] = n < win ? double(waveform[start + size_t(n)]) * window[size_t(n)]
                      : 0.0;
    }
    fftw_execute(plan);
    for (int k = 0; k < n_bins; ++k) {
      const double mag = std::hypot(out[k][0], out[k][1]);
      spec.frames(t, k) = std::log(mag + config.log_floor);
    }
  }

  {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return spec;
}

Spectrogram Augment(const Spectrogram& input, const AugmentConfig& config,
                    Rng& rng) {
  if (!config.enabled) return input;
  const int T = input.NumFrames();
  const int F = input.NumBins();
  const bool time_masking = config.num_time_masks > 0 &&
                            config.time_mask_frames > 0;
  const bool freq_masking = config.num_freq_masks > 0 &&
                            config.freq_mask_bins > 0;
  if (!time_masking && !freq_masking) return input;
  if ((time_masking && config.time_mask_frames >= T) ||
      (freq_masking && config.freq_mask_bins >= F)) {
    throw InputError("augmentation mask wider than the spectrogram");
  }

  const Eigen::RowVectorXd bin_mean = input.frames.colwise().mean();
  Spectrogram out = input;
  if (time_masking) {
    for (int m = 0; m < config.num_time_masks; ++m) {
      const int start = rng.UniformInt(0, T - config.time_mask_frames);
      for (int t = start; t < start + config.time_mask_frames; ++t) {
        out.frames.row(t) = bin_mean;
      }
    }
  }
  if (freq_masking) {
    for (int m = 0; m < config.num_freq_masks; ++m) {
      const int start = rng.UniformInt(0, F - config.freq_mask_bins);
      for (int f = start; f < start + config.freq_mask_bins; ++f) {
        out.frames.col(f).setConstant(bin_mean(f));
      }
    }
  }
  return out;
}

void AddNoise(std::span<float> waveform, double snr_db, Rng& rng) {
  if (waveform.empty()) return;
  double power = 0.0;
  for (float s : waveform) power += double(s) * s;
  power /= double(waveform.size());
  if (power <= 0.0) return;
  const double std_dev = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  for (float& s : waveform) s += float(std_dev * rng.Normal());
}

void to_json(nlohmann::json& j, const FrontendConfig& c) {
  j = {{"sample_rate", c.sample_rate}, {"win_ms", c.win_ms},
       {"hop_ms", c.hop_ms},           {"n_fft", c.n_fft},
       {"log_floor", c.log_floor}};
}

void from_json(const nlohmann::json& j, FrontendConfig& c) {
  FrontendConfig d;
  c.sample_rate = j.value("sample_rate", d.sample_rate);
  c.win_ms = j.value("win_ms", d.win_ms);
  c.hop_ms = j.value("hop_ms", d.hop_ms);
  c.n_fft = j.value("n_fft", d.n_fft);
  c.log_floor = j.value("log_floor", d.log_floor);
}

void to_json(nlohmann::json& j, const AugmentConfig& c) {
  j = {{"enabled", c.enabled},
       {"num_time_masks", c.num_time_masks},
       {"time_mask_frames", c.time_mask_frames},
       {"num_freq_masks", c.num_freq_masks},
       {"freq_mask_bins", c.freq_mask_bins},
       {"max_shift_frames", c.max_shift_frames},
       {"noise_snr_db", c.noise_snr_db}};
}

void from_json(const nlohmann::json& j, AugmentConfig& c) {
  AugmentConfig d;
  c.enabled = j.value("enabled", d.enabled);
  c.num_time_masks = j.value("num_time_masks", d.num_time_masks);
  c.time_mask_frames = j.value("time_mask_frames", d.time_mask_frames);
  c.num_freq_masks = j.value("num_freq_masks", d.num_freq_masks);
  c.freq_mask_bins = j.value("freq_mask_bins", d.freq_mask_bins);
  c.max_shift_frames = j.value("max_shift_frames", d.max_shift_frames);
  c.noise_snr_db = j.value("noise_snr_db", d.noise_snr_db);
}

}  // namespace fillerspot
