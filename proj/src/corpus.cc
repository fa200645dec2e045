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

#include "fillerspot/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include "fillerspot/error.h"
#include "fillerspot/random.h"
#include "fillerspot/wav.h"

namespace fillerspot {
namespace {

std::string Trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(Trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(Trim(cur));
  return out;
}

double ParseSeconds(const std::string& s, const std::string& where) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(where + ": cannot parse number '" + s + "'");
  }
}

const WordTemplate* FindTemplate(const SynthSpec& spec,
                                 const std::string& word) {
  for (const auto& t : spec.vocabulary) {
    if (t.word == word) return &t;
  }
  return nullptr;
}

}  // namespace

std::string NormalizeWord(const std::string& word) {
  std::string out = Trim(word);
  if (out.empty()) throw ValidationError("empty word token");
  for (char& c : out) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      throw ValidationError("word token contains whitespace: '" + word + "'");
    }
    c = char(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

void ValidateClip(const AnnotatedClip& clip) {
  const std::string who = "clip '" + clip.clip_id + "'";
  if (clip.clip_id.empty()) throw ValidationError("clip with empty clip_id");
  if (clip.sample_rate <= 0) throw ValidationError(who + ": bad sample rate");
  const double length = clip.DurationSeconds();
  for (size_t i = 0; i < clip.events.size(); ++i) {
    const WordEvent& e = clip.events[i];
    if (e.text.empty()) throw ValidationError(who + ": empty word");
    for (char c : e.text) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        throw ValidationError(who + ": word contains whitespace");
      }
    }
    if (!(e.onset >= 0.0)) {
      throw ValidationError(who + ": negative onset for '" + e.text + "'");
    }
    if (!(e.duration > 0.0)) {
      throw ValidationError(who + ": non-positive duration for '" + e.text +
                            "'");
    }
    if (e.End() > length + 1e-3) {
      throw ValidationError(who + ": event '" + e.text +
                            "' ends after the clip");
    }
    if (i > 0 && e.onset < clip.events[i - 1].onset) {
      throw ValidationError(who + ": events not sorted by onset");
    }
    for (size_t j = 0; j < i; ++j) {
      const WordEvent& o = clip.events[j];
      if (o.text == e.text && o.End() > e.onset && e.End() > o.onset) {
        throw ValidationError(who + ": overlapping identical events '" +
                              e.text + "'");
      }
    }
  }
}

std::vector<AnnotatedClip> LoadCorpus(const std::filesystem::path& annotation,
                                      const std::filesystem::path& audio_dir,
                                      int target_rate) {
  std::ifstream in(annotation);
  if (!in) {
    throw IngestionError("cannot open annotation file " + annotation.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError(annotation.string() + ": missing header row");
  }
  const auto header = SplitCsvLine(line);
  std::map<std::string, size_t> column;
  for (size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const char* name : {"clip_id", "word", "onset_s", "duration_s"}) {
    if (!column.count(name)) {
      throw ValidationError(annotation.string() + ": header lacks column '" +
                            name + "'");
    }
  }

  std::vector<AnnotatedClip> clips;
  std::unordered_map<std::string, size_t> index;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto cells = SplitCsvLine(line);
    const std::string where =
        annotation.string() + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw ValidationError(where + ": expected " +
                            std::to_string(header.size()) + " columns");
    }
    const std::string& id = cells[column["clip_id"]];
    if (id.empty()) throw ValidationError(where + ": empty clip_id");
    WordEvent e;
    e.text = NormalizeWord(cells[column["word"]]);
    e.onset = ParseSeconds(cells[column["onset_s"]], where);
    e.duration = ParseSeconds(cells[column["duration_s"]], where);
    if (!(e.duration > 0.0)) {
      throw ValidationError(where + ": duration must be positive");
    }
    if (!(e.onset >= 0.0)) {
      throw ValidationError(where + ": onset must be non-negative");
    }
    auto [it, inserted] = index.emplace(id, clips.size());
    if (inserted) {
      clips.emplace_back();
      clips.back().clip_id = id;
    }
    clips[it->second].events.push_back(std::move(e));
  }

  for (auto& clip : clips) {
    const auto path = audio_dir / (clip.clip_id + ".wav");
    if (!std::filesystem::exists(path)) {
      throw IngestionError("clip '" + clip.clip_id + "': missing audio file " +
                           path.string());
    }
    Waveform wave = ReadWav(path);
    clip.audio = Resample(wave.samples, wave.sample_rate, target_rate);
    clip.sample_rate = target_rate;
    std::stable_sort(clip.events.begin(), clip.events.end(),
                     [](const WordEvent& a, const WordEvent& b) {
                       return a.onset < b.onset;
                     });
    ValidateClip(clip);
  }
  return clips;
}

std::string FormatAnnotations(const std::vector<AnnotatedClip>& clips) {
  std::string out = "clip_id,word,onset_s,duration_s\n";
  char buf[64];
  for (const auto& clip : clips) {
    for (const auto& e : clip.events) {
      std::snprintf(buf, sizeof(buf), ",%.6f,%.6f\n", e.onset, e.duration);
      out += clip.clip_id + "," + e.text + buf;
    }
  }
  return out;
}

void SaveCorpus(const std::vector<AnnotatedClip>& clips,
                const std::filesystem::path& annotation,
                const std::filesystem::path& audio_dir) {
  std::filesystem::create_directories(audio_dir);
  for (const auto& clip : clips) {
    WriteWav(audio_dir / (clip.clip_id + ".wav"),
             Waveform{clip.audio, clip.sample_rate});
  }
  std::ofstream out(annotation, std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + annotation.string());
  out << FormatAnnotations(clips);
}

// ---------------------------------------------------------------------------

double WordTemplate::Duration() const {
  double d = 0.0;
  for (const auto& s : segments) d += s.duration_s;
  return d;
}

double SharedPrefixSeconds(const WordTemplate& a, const WordTemplate& b) {
  double shared = 0.0;
  if (a.attack_s != b.attack_s) return 0.0;
  for (size_t i = 0; i < a.segments.size() && i < b.segments.size(); ++i) {
    const auto& sa = a.segments[i];
    const auto& sb = b.segments[i];
    if (!sa.SameSound(sb)) break;
    shared += std::min(sa.duration_s, sb.duration_s);
    if (sa.duration_s != sb.duration_s) break;
  }
  // The release ramp is not shared content.
  return std::min(shared, std::min(a.Duration() - a.release_s,
                                   b.Duration() - b.release_s));
}

void ValidateSynthSpec(const SynthSpec& spec) {
  if (spec.vocabulary.empty()) {
    throw ConfigError("synthetic vocabulary is empty");
  }
  std::set<std::string> names;
  double longest = 0.0;
  for (const auto& t : spec.vocabulary) {
    if (t.word.empty()) throw ConfigError("vocabulary word with empty name");
    if (NormalizeWord(t.word) != t.word) {
      throw ConfigError("vocabulary word '" + t.word + "' is not normalized");
    }
    if (!names.insert(t.word).second) {
      throw ConfigError("duplicate vocabulary word '" + t.word + "'");
    }
    if (t.segments.empty()) {
      throw ConfigError("word '" + t.word + "' has no segments");
    }
    for (const auto& s : t.segments) {
      if (!(s.f0_hz > 0.0) || !(s.duration_s > 0.0) || s.harmonics.empty()) {
        throw ConfigError("word '" + t.word + "' has an invalid segment");
      }
    }
    if (t.attack_s < 0.0 || t.release_s < 0.0 ||
        t.attack_s + t.release_s > t.Duration()) {
      throw ConfigError("word '" + t.word + "' has an invalid envelope");
    }
    if (!(t.weight > 0.0)) {
      throw ConfigError("word '" + t.word + "' needs a positive weight");
    }
    longest = std::max(longest, t.Duration());
  }
  std::set<std::string> fillers;
  for (const auto& w : spec.filler_words) {
    if (!names.count(w)) {
      throw ConfigError("filler '" + w + "' not in vocabulary");
    }
    fillers.insert(w);
  }
  for (const auto& w : spec.confusable_words) {
    const WordTemplate* t = FindTemplate(spec, w);
    if (t == nullptr) {
      throw ConfigError("confusable '" + w + "' not in vocabulary");
    }
    if (fillers.count(w)) {
      throw ConfigError("'" + w + "' is both filler and confusable");
    }
    bool ok = false;
    for (const auto& f : spec.filler_words) {
      if (SharedPrefixSeconds(*t, *FindTemplate(spec, f)) >=
          0.5 * t->Duration()) {
        ok = true;
      }
    }
    if (!ok) {
      throw ConfigError("confusable '" + w +
                        "' shares less than half its duration with every "
                        "filler template");
    }
  }
  if (spec.clips < 0) throw ConfigError("negative clip count");
  const auto [lo, hi] = spec.words_per_clip;
  if (lo < 0 || hi < lo) throw ConfigError("invalid words_per_clip range");
  if (spec.sample_rate <= 0) throw ConfigError("invalid sample rate");
  if (!std::isfinite(spec.noise_snr_db)) throw ConfigError("invalid SNR");
  if (!(spec.gain_range[0] > 0.0) || spec.gain_range[1] < spec.gain_range[0]) {
    throw ConfigError("invalid gain range");
  }
  if (spec.f0_jitter < 0.0 || spec.f0_jitter >= 0.5 ||
      spec.duration_jitter < 0.0 || spec.duration_jitter >= 0.5) {
    throw ConfigError("jitter must lie in [0, 0.5)");
  }
  if (hi * longest * (1.0 + spec.duration_jitter) > spec.clip_seconds) {
    throw ConfigError("clip_seconds too short for words_per_clip");
  }
}

std::vector<float> RenderWord(const WordTemplate& word, int sample_rate,
                              double f0_scale, double time_scale) {
  const double sr = sample_rate;
  std::vector<size_t> bounds = {0};
  double cum = 0.0;
  for (const auto& s : word.segments) {
    cum += s.duration_s;
    bounds.push_back(size_t(std::llround(cum * time_scale * sr)));
  }
  const size_t total = bounds.back();
  std::vector<float> out(total, 0.0f);
  const size_t attack = size_t(std::llround(word.attack_s * time_scale * sr));
  const size_t release = size_t(std::llround(word.release_s * time_scale * sr));

  std::vector<double> phase;
  for (size_t k = 0; k < word.segments.size(); ++k) {
    const ToneSegment& seg = word.segments[k];
    const double f0 = seg.f0_hz * f0_scale;
    phase.resize(std::max(phase.size(), seg.harmonics.size()), 0.0);
    double norm = 0.0;
    for (double a : seg.harmonics) norm += std::abs(a);
    if (norm <= 0.0) norm = 1.0;
    for (size_t n = bounds[k]; n < bounds[k + 1]; ++n) {
      double v = 0.0;
      for (size_t h = 0; h < seg.harmonics.size(); ++h) {
        const double f = f0 * double(h + 1);
        if (f < 0.5 * sr) v += seg.harmonics[h] * std::sin(phase[h]);
        phase[h] += 2.0 * std::numbers::pi * f / sr;
        if (phase[h] > 2.0 * std::numbers::pi) {
          phase[h] -= 2.0 * std::numbers::pi;
        }
      }
      double env = 1.0;
      if (attack > 0 && n < attack) env = double(n) / double(attack);
      if (release > 0 && total - n < release) {
        env = std::min(env, double(total - n) / double(release));
      }
      out[n] = float(env * v / norm);
    }
  }
  return out;
}

std::vector<AnnotatedClip> GenerateSynth(const SynthSpec& spec) {
  ValidateSynthSpec(spec);
  Rng rng(spec.seed);
  std::vector<double> cum_weight;
  double total_weight = 0.0;
  for (const auto& t : spec.vocabulary) {
    total_weight += t.weight;
    cum_weight.push_back(total_weight);
  }
  const size_t clip_samples =
      size_t(std::llround(spec.clip_seconds * spec.sample_rate));

  std::vector<AnnotatedClip> clips;
  clips.reserve(size_t(spec.clips));
  for (int c = 0; c < spec.clips; ++c) {
    AnnotatedClip clip;
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%05d", c);
    clip.clip_id = id;
    clip.sample_rate = spec.sample_rate;
    clip.audio.assign(clip_samples, 0.0f);

    const int n = rng.UniformInt(spec.words_per_clip[0],
                                 spec.words_per_clip[1]);
    struct Placed {
      const WordTemplate* word;
      double gain;
      std::vector<float> samples;
    };
    std::vector<Placed> words;
    size_t used = 0;
    for (int i = 0; i < n; ++i) {
      const double u = rng.Uniform() * total_weight;
      size_t k = size_t(std::upper_bound(cum_weight.begin(), cum_weight.end(),
                                         u) -
                        cum_weight.begin());
      k = std::min(k, spec.vocabulary.size() - 1);
      const double gain = rng.Uniform(spec.gain_range[0], spec.gain_range[1]);
      const double f0s = 1.0 + rng.Uniform(-spec.f0_jitter, spec.f0_jitter);
      const double ts =
          1.0 + rng.Uniform(-spec.duration_jitter, spec.duration_jitter);
      auto samples =
          RenderWord(spec.vocabulary[k], spec.sample_rate, f0s, ts);
      used += samples.size();
      words.push_back({&spec.vocabulary[k], gain, std::move(samples)});
    }

    // Split the free samples into n + 1 random gaps.
    const size_t free_samples = clip_samples - std::min(used, clip_samples);
    std::vector<double> gap_w(size_t(n) + 1);
    double gap_sum = 0.0;
    for (auto& g : gap_w) {
      g = rng.Uniform(0.2, 1.0);
      gap_sum += g;
    }
    size_t pos = 0;
    for (int i = 0; i < n; ++i) {
      pos += size_t(std::floor(double(free_samples) * gap_w[size_t(i)] /
                               gap_sum));
      const Placed& w = words[size_t(i)];
      for (size_t s = 0; s < w.samples.size(); ++s) {
        clip.audio[pos + s] += float(w.gain) * w.samples[s];
      }
      WordEvent e;
      e.text = w.word->word;
      e.onset = double(pos) / spec.sample_rate;
      e.duration = double(w.samples.size()) / spec.sample_rate;
      clip.events.push_back(e);
      pos += w.samples.size();
    }

    double power = 0.0;
    for (float s : clip.audio) power += double(s) * s;
    power /= double(std::max<size_t>(clip_samples, 1));
    if (power <= 0.0) power = 1e-4;
    const double noise_std =
        std::sqrt(power / std::pow(10.0, spec.noise_snr_db / 10.0));
    float peak = 0.0f;
    for (float& s : clip.audio) {
      s += float(noise_std * rng.Normal());
      peak = std::max(peak, std::abs(s));
    }
    // Keep PCM export free of clipping.
    if (peak > 0.95f) {
      const float g = 0.95f / peak;
      for (float& s : clip.audio) s *= g;
    }

    clips.push_back(std::move(clip));
  }
  return clips;
}

SynthSpec DefaultSynthSpec(int clips, uint64_t seed) {
  SynthSpec spec;
  spec.clips = clips;
  spec.seed = seed;
  spec.noise_snr_db = 6.0;
  spec.f0_jitter = 0.06;
  spec.duration_jitter = 0.12;

  const ToneSegment uh{130.0, 0.36, {1.0, 0.7, 0.5, 0.3, 0.2}};
  const ToneSegment um_open{170.0, 0.16, {1.0, 0.6, 0.4, 0.2}};
  const ToneSegment um_nasal{170.0, 0.24, {1.0, 0.15, 0.05}};
  spec.vocabulary.push_back({"uh", {uh}});
  spec.vocabulary.push_back({"um", {um_open, um_nasal}});

  // Confusables keep the filler's leading part and diverge afterwards.
  ToneSegment uh_head = uh;
  uh_head.duration_s = 0.19;
  ToneSegment um_nasal_head = um_nasal;
  um_nasal_head.duration_s = 0.06;
  spec.vocabulary.push_back(
      {"a", {uh_head, ToneSegment{136.0, 0.13, {1.0, 0.6, 0.5, 0.3, 0.2}}}});
  spec.vocabulary.push_back(
      {"and",
       {um_open, um_nasal_head, ToneSegment{180.0, 0.16, {1.0, 0.2, 0.1}}}});
  spec.vocabulary.push_back(
      {"the", {uh_head, ToneSegment{122.0, 0.15, {1.0, 0.7, 0.5, 0.3, 0.2}}}});

  for (int i = 0; i < 10; ++i) {
    const double f0 = 215.0 + 14.0 * i;
    WordTemplate w;
    char name[16];
    std::snprintf(name, sizeof(name), "word%02d", i);
    w.word = name;
    std::vector<double> harm = {1.0, 0.4 + 0.05 * (i % 4), 0.3, 0.1 * (i % 3)};
    w.segments.push_back({f0, 0.12 + 0.02 * (i % 4), harm});
    if (i % 2 == 0) {
      w.segments.push_back({f0 * (1.12 + 0.03 * (i % 3)), 0.10, {1.0, 0.3}});
    }
    w.weight = 0.5;
    spec.vocabulary.push_back(std::move(w));
  }
  spec.filler_words = {"uh", "um"};
  spec.confusable_words = {"a", "and", "the"};
  return spec;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const ToneSegment& s) {
  j = {{"f0_hz", s.f0_hz},
       {"duration_s", s.duration_s},
       {"harmonics", s.harmonics}};
}

void from_json(const nlohmann::json& j, ToneSegment& s) {
  j.at("f0_hz").get_to(s.f0_hz);
  j.at("duration_s").get_to(s.duration_s);
  j.at("harmonics").get_to(s.harmonics);
}

void to_json(nlohmann::json& j, const WordTemplate& w) {
  j = {{"word", w.word},         {"segments", w.segments},
       {"attack_s", w.attack_s}, {"release_s", w.release_s},
       {"weight", w.weight}};
}

void from_json(const nlohmann::json& j, WordTemplate& w) {
  j.at("word").get_to(w.word);
  j.at("segments").get_to(w.segments);
  w.attack_s = j.value("attack_s", 0.01);
  w.release_s = j.value("release_s", 0.02);
  w.weight = j.value("weight", 1.0);
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"vocabulary", s.vocabulary},
       {"filler_words", s.filler_words},
       {"confusable_words", s.confusable_words},
       {"clips", s.clips},
       {"words_per_clip", s.words_per_clip},
       {"clip_seconds", s.clip_seconds},
       {"noise_snr_db", s.noise_snr_db},
       {"gain_range", s.gain_range},
       {"f0_jitter", s.f0_jitter},
       {"duration_jitter", s.duration_jitter},
       {"sample_rate", s.sample_rate},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  SynthSpec d = j.contains("vocabulary") ? SynthSpec{} : DefaultSynthSpec();
  if (j.contains("vocabulary")) j.at("vocabulary").get_to(d.vocabulary);
  d.filler_words = j.value("filler_words", d.filler_words);
  d.confusable_words = j.value("confusable_words", d.confusable_words);
  d.clips = j.value("clips", d.clips);
  d.words_per_clip = j.value("words_per_clip", d.words_per_clip);
  d.clip_seconds = j.value("clip_seconds", d.clip_seconds);
  d.noise_snr_db = j.value("noise_snr_db", d.noise_snr_db);
  d.gain_range = j.value("gain_range", d.gain_range);
  d.f0_jitter = j.value("f0_jitter", d.f0_jitter);
  d.duration_jitter = j.value("duration_jitter", d.duration_jitter);
  d.sample_rate = j.value("sample_rate", d.sample_rate);
  d.seed = j.value("seed", d.seed);
  s = std::move(d);
}

// ---------------------------------------------------------------------------

CorpusSplit SplitCorpus(const std::vector<AnnotatedClip>& clips,
                        std::array<double, 3> fractions, uint64_t seed) {
  double sum = 0.0;
  int partitions = 0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be >= 0");
    sum += f;
    if (f > 0.0) ++partitions;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  if (clips.size() < size_t(partitions)) {
    throw ConfigError("fewer clips than non-empty partitions");
  }
  const size_t n = clips.size();
  const size_t n_val = size_t(std::floor(double(n) * fractions[1] + 1e-9));
  const size_t n_test = size_t(std::floor(double(n) * fractions[2] + 1e-9));

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(&order);
  std::vector<size_t> val(order.begin(), order.begin() + long(n_val));
  std::vector<size_t> test(order.begin() + long(n_val),
                           order.begin() + long(n_val + n_test));
  std::vector<size_t> train(order.begin() + long(n_val + n_test), order.end());
  auto take = [&](std::vector<size_t>& idx) {
    std::sort(idx.begin(), idx.end());
    std::vector<AnnotatedClip> out;
    out.reserve(idx.size());
    for (size_t i : idx) out.push_back(clips[i]);
    return out;
  };
  return {take(train), take(val), take(test)};
}

}  // namespace fillerspot
