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

#include "fillerspot/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include "fillerspot/error.h"

namespace fillerspot {
namespace {

uint32_t ReadU32(const unsigned char* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
         (uint32_t(p[3]) << 24);
}

uint16_t ReadU16(const unsigned char* p) {
  return uint16_t(p[0] | (p[1] << 8));
}

void PutU32(std::string* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(char((v >> (8 * i)) & 0xff));
}

void PutU16(std::string* out, uint16_t v) {
  out->push_back(char(v & 0xff));
  out->push_back(char((v >> 8) & 0xff));
}

}  // namespace

Waveform ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open audio file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) {
    return IngestionError("bad WAV file " + path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("missing RIFF/WAVE header");
  }

  int format = 0, channels = 0, rate = 0, bits = 0;
  const unsigned char* data = nullptr;
  size_t data_size = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    size_t size = ReadU32(chunk + 4);
    size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) throw fail("short fmt chunk");
      format = ReadU16(bytes.data() + body);
      channels = ReadU16(bytes.data() + body + 2);
      rate = int(ReadU32(bytes.data() + body + 4));
      bits = ReadU16(bytes.data() + body + 14);
      if (format == 0xFFFE && size >= 26) {
        // WAVE_FORMAT_EXTENSIBLE: the subformat GUID starts with the tag.
        format = ReadU16(bytes.data() + body + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min(size, bytes.size() - body);
    }
    pos = body + size + (size & 1);
  }
  if (channels <= 0 || rate <= 0) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  if (!((format == 1 && (bits == 8 || bits == 16 || bits == 24 ||
                         bits == 32)) ||
        (format == 3 && bits == 32))) {
    throw fail("unsupported sample format");
  }

  const int width = bits / 8;
  const size_t frames = data_size / (size_t(width) * channels);
  Waveform wave;
  wave.sample_rate = rate;
  wave.samples.assign(frames, 0.0f);
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * width;
      double v = 0.0;
      if (format == 3) {
        float f;
        std::memcpy(&f, p, 4);
        v = f;
      } else if (bits == 8) {
        v = (double(p[0]) - 128.0) / 128.0;
      } else if (bits == 16) {
        v = double(int16_t(ReadU16(p))) / 32768.0;
      } else if (bits == 24) {
        int32_t s = int32_t(uint32_t(p[0]) << 8 | uint32_t(p[1]) << 16 |
                            uint32_t(p[2]) << 24) >> 8;
        v = double(s) / 8388608.0;
      } else {
        v = double(int32_t(ReadU32(p))) / 2147483648.0;
      }
      acc += v;
    }
    wave.samples[i] = float(acc / channels);
  }
  return wave;
}

void WriteWav(const std::filesystem::path& path, const Waveform& wave) {
  if (wave.sample_rate <= 0) throw InputError("WriteWav: invalid sample rate");
  const uint32_t data_bytes = uint32_t(wave.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  PutU32(&out, 36 + data_bytes);
  out += "WAVEfmt ";
  PutU32(&out, 16);
  PutU16(&out, 1);
  PutU16(&out, 1);
  PutU32(&out, uint32_t(wave.sample_rate));
  PutU32(&out, uint32_t(wave.sample_rate) * 2);
  PutU16(&out, 2);
  PutU16(&out, 16);
  out += "data";
  PutU32(&out, data_bytes);
  for (float s : wave.samples) {
    double c = std::clamp(double(s), -1.0, 1.0);
    auto q = int16_t(std::clamp<long>(std::lround(c * 32768.0), -32768, 32767));
    PutU16(&out, uint16_t(q));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IngestionError("cannot write " + path.string());
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IngestionError("short write to " + path.string());
}

std::vector<float> Resample(const std::vector<float>& samples, int from_rate,
                            int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) {
    throw InputError("Resample: rates must be positive");
  }
  if (from_rate == to_rate) return samples;
  const double ratio = double(to_rate) / from_rate;
  // Low-pass at the lower of the two Nyquist frequencies.
  const double cutoff = std::min(1.0, ratio);
  const int half_taps = 16;
  const double support = half_taps / cutoff;
  const size_t n_out =
      size_t(std::floor(double(samples.size()) * ratio + 1e-9));
  std::vector<float> out(n_out);
  for (size_t j = 0; j < n_out; ++j) {
    const double center = double(j) / ratio;
    const long lo = long(std::ceil(center - support));
    const long hi = long(std::floor(center + support));
    double acc = 0.0;
    for (long i = std::max(0L, lo);
         i <= std::min(long(samples.size()) - 1, hi); ++i) {
      const double x = double(i) - center;
      const double arg = std::numbers::pi * cutoff * x;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double w =
          0.5 + 0.5 * std::cos(std::numbers::pi * x / (support + 1.0));
      acc += samples[size_t(i)] * cutoff * sinc * w;
    }
    out[j] = float(acc);
  }
  return out;
}

}  // namespace fillerspot
