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

#ifndef FILLERSPOT_WAV_H_
#define FILLERSPOT_WAV_H_

#include <filesystem>
#include <vector>

namespace fillerspot {

struct Waveform {
  std::vector<float> samples;  // mono, nominal range [-1, 1]
  int sample_rate = 0;
};

// Reads a RIFF/WAVE file with 8/16/24/32-bit integer or 32-bit float PCM.
// Multi-channel audio is averaged down to mono. Throws IngestionError.
Waveform ReadWav(const std::filesystem::path& path);

// Writes 16-bit PCM mono. Samples are clipped to [-1, 1].
void WriteWav(const std::filesystem::path& path, const Waveform& wave);

// Band-limited resampling (windowed sinc). Identity when rates match.
std::vector<float> Resample(const std::vector<float>& samples, int from_rate,
                            int to_rate);

}  // namespace fillerspot

#endif  // FILLERSPOT_WAV_H_
