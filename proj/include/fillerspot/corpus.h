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

#ifndef FILLERSPOT_CORPUS_H_
#define FILLERSPOT_CORPUS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace fillerspot {

inline constexpr int kDefaultSampleRate = 16000;

// A ground-truth word occurrence. category_id is assigned from a
// CategoryRegistry right before target encoding; -1 means "not assigned".
struct WordEvent {
  std::string text;
  double onset = 0.0;     // seconds
  double duration = 0.0;  // seconds
  int category_id = -1;

  double End() const { return onset + duration; }
  double Center() const { return onset + 0.5 * duration; }
};

struct AnnotatedClip {
  std::string clip_id;
  std::vector<float> audio;
  int sample_rate = kDefaultSampleRate;
  std::vector<WordEvent> events;  // sorted by onset

  double DurationSeconds() const {
    return sample_rate > 0 ? double(audio.size()) / sample_rate : 0.0;
  }
};

// Lowercases and checks a token; throws ValidationError when the token is
// empty or contains whitespace.
std::string NormalizeWord(const std::string& word);

// Checks every AnnotatedClip invariant. Throws ValidationError naming the
// clip. End-of-clip tolerance is 1 ms.
void ValidateClip(const AnnotatedClip& clip);

// Reads "clip_id,word,onset_s,duration_s" rows (header required) and the
// audio file <audio_dir>/<clip_id>.wav for every clip. Audio is mixed to
// mono and resampled to target_rate. Clips are returned in order of first
// appearance in the file.
std::vector<AnnotatedClip> LoadCorpus(const std::filesystem::path& annotation,
                                      const std::filesystem::path& audio_dir,
                                      int target_rate = kDefaultSampleRate);

// Writes the annotation CSV and one 16-bit WAV per clip.
void SaveCorpus(const std::vector<AnnotatedClip>& clips,
                const std::filesystem::path& annotation,
                const std::filesystem::path& audio_dir);

// Annotation CSV body only, with fixed 6-decimal times.
std::string FormatAnnotations(const std::vector<AnnotatedClip>& clips);

// ---------------------------------------------------------------------------
// Synthetic corpus

// One stationary harmonic tone. harmonics[i] is the amplitude of the
// (i+1)-th partial.
struct ToneSegment {
  double f0_hz = 0.0;
  double duration_s = 0.0;
  std::vector<double> harmonics;

  bool SameSound(const ToneSegment& o) const {
    return f0_hz == o.f0_hz && harmonics == o.harmonics;
  }
};

// A parametric synthetic "word": consecutive tone segments rendered
// phase-continuously under a linear attack/release envelope.
struct WordTemplate {
  std::string word;
  std::vector<ToneSegment> segments;
  double attack_s = 0.01;
  double release_s = 0.02;
  double weight = 1.0;  // relative sampling frequency

  double Duration() const;
};

// Seconds of identical leading acoustic content between two templates.
double SharedPrefixSeconds(const WordTemplate& a, const WordTemplate& b);

struct SynthSpec {
  std::vector<WordTemplate> vocabulary;
  std::vector<std::string> filler_words;
  std::vector<std::string> confusable_words;
  int clips = 0;
  std::array<int, 2> words_per_clip = {4, 7};
  double clip_seconds = 4.0;
  double noise_snr_db = 20.0;
  // Per-occurrence variation.
  std::array<double, 2> gain_range = {0.5, 1.0};
  double f0_jitter = 0.02;        // relative, uniform +-
  double duration_jitter = 0.08;  // relative, uniform +-
  int sample_rate = kDefaultSampleRate;
  uint64_t seed = 0;
};

// Throws ConfigError when the spec violates an invariant (empty vocabulary,
// filler/confusable overlap, confusable without a >= 50% shared prefix, ...).
void ValidateSynthSpec(const SynthSpec& spec);

// Renders one word at unit gain with the given pitch/time scale; no noise.
std::vector<float> RenderWord(const WordTemplate& word, int sample_rate,
                              double f0_scale = 1.0, double time_scale = 1.0);

// Deterministic in the spec (including seed): identical specs yield
// bit-identical waveforms and annotations.
std::vector<AnnotatedClip> GenerateSynth(const SynthSpec& spec);

// Desk-scale vocabulary: fillers "uh", "um"; confusables "a", "and", "the"
// built on the fillers' leading halves; ten unrelated distractor words.
SynthSpec DefaultSynthSpec(int clips = 200, uint64_t seed = 7);

void to_json(nlohmann::json& j, const ToneSegment& s);
void from_json(const nlohmann::json& j, ToneSegment& s);
void to_json(nlohmann::json& j, const WordTemplate& w);
void from_json(const nlohmann::json& j, WordTemplate& w);
void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

// ---------------------------------------------------------------------------

struct CorpusSplit {
  std::vector<AnnotatedClip> train;
  std::vector<AnnotatedClip> val;
  std::vector<AnnotatedClip> test;
};

// Shuffles with the seed, takes floor(n * f) clips for val and test, and the
// remainder for train. Each partition keeps the input order.
CorpusSplit SplitCorpus(const std::vector<AnnotatedClip>& clips,
                        std::array<double, 3> fractions, uint64_t seed);

}  // namespace fillerspot

#endif  // FILLERSPOT_CORPUS_H_
