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

// fillerspot command-line entry point.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fillerspot/corpus.h"
#include "fillerspot/decode.h"
#include "fillerspot/error.h"
#include "fillerspot/evalmetrics.h"
#include "fillerspot/features.h"
#include "fillerspot/mining.h"
#include "fillerspot/net.h"
#include "fillerspot/targets.h"
#include "fillerspot/trainer.h"
#include "fillerspot/wav.h"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace fillerspot;

namespace {

struct Common {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string checkpoint;
  std::string out;
  std::optional<double> threshold;
  std::string data_dir;
  std::string split = "test";
};

Config ResolveConfig(const Common& c) {
  Config config = c.config_path.empty() ? DeskConfig() : LoadConfig(c.config_path);
  if (c.seed) {
    config.train.seed = *c.seed;
    config.synth.seed = *c.seed;
  }
  if (c.threshold) config.decode.score_threshold = *c.threshold;
  config.Finalize();
  return config;
}

void RequireOut(const Common& c) {
  if (c.out.empty()) throw ConfigError("--out is required");
}

// Writes to a sibling temporary file and renames it into place, so a failed
// command never leaves a partial output.
void WriteFileAtomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestionError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IngestionError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<AnnotatedClip> LoadSplit(const Common& c, const std::string& split,
                                     int sample_rate) {
  if (c.data_dir.empty()) throw ConfigError("--data is required");
  const fs::path dir(c.data_dir);
  return LoadCorpus(dir / (split + ".csv"), dir / "audio", sample_rate);
}

std::string Fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------------------

int CmdGenSynth(const Common& c) {
  RequireOut(c);
  const Config config = ResolveConfig(c);
  const auto clips = GenerateSynth(config.synth);
  const CorpusSplit split =
      SplitCorpus(clips, {config.split[0], config.split[1], config.split[2]},
                  config.synth.seed);

  const fs::path out(c.out);
  fs::path tmp = out;
  tmp += ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  SaveCorpus(split.train, tmp / "train.csv", tmp / "audio");
  SaveCorpus(split.val, tmp / "val.csv", tmp / "audio");
  SaveCorpus(split.test, tmp / "test.csv", tmp / "audio");
  nlohmann::json manifest = {{"synth", config.synth},
                             {"split", config.split},
                             {"num_clips", clips.size()},
                             {"train", split.train.size()},
                             {"val", split.val.size()},
                             {"test", split.test.size()}};
  WriteFileAtomic(tmp / "manifest.json", manifest.dump(2) + "\n");
  fs::remove_all(out);
  fs::rename(tmp, out);
  std::cout << "wrote " << clips.size() << " clips (" << split.train.size()
            << "/" << split.val.size() << "/" << split.test.size() << ") to "
            << out.string() << "\n";
  return 0;
}

int CmdTrain(const Common& c, const std::string& resume, bool quiet) {
  RequireOut(c);
  const Config config = ResolveConfig(c);
  CorpusSplit data;
  data.train = LoadSplit(c, "train", config.frontend.sample_rate);
  data.val = LoadSplit(c, "val", config.frontend.sample_rate);
  TrainOptions options;
  options.out_dir = c.out;
  options.verbose = !quiet;
  if (!resume.empty()) options.resume_from = fs::path(resume);
  const TrainResult result = Train(data, config, options);
  std::cout << "epochs " << result.final_checkpoint.epoch << " best_val_f1 "
            << Fixed(result.final_checkpoint.best_val_f1) << " promotions";
  for (const auto& w : result.promotions) std::cout << " " << w;
  std::cout << "\n";
  return 0;
}

int CmdEval(const Common& c) {
  if (c.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const Checkpoint ckpt = LoadCheckpoint(c.checkpoint);
  Config config = ResolveConfig(c);
  const auto clips = LoadSplit(c, c.split, ckpt.frontend.sample_rate);
  if (c.config_path.empty()) {
    // Without a config, evaluate with the checkpoint's own architecture.
    config.model = ckpt.model_config;
    config.frontend = ckpt.frontend;
  }
  const EvalResult result = Evaluate(ckpt, clips, config);
  std::cout << FormatScoreTable({{c.split, result.score}});
  if (!c.out.empty()) {
    nlohmann::json j = {{"split", c.split},
                        {"checkpoint_epoch", ckpt.epoch},
                        {"score", result.score}};
    WriteFileAtomic(c.out, j.dump(2) + "\n");
  }
  return 0;
}

int CmdDetect(const Common& c, const std::vector<std::string>& audio) {
  if (c.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  RequireOut(c);
  const Checkpoint ckpt = LoadCheckpoint(c.checkpoint);
  DecodeConfig decode;
  if (!c.config_path.empty()) decode = LoadConfig(c.config_path).decode;
  if (c.threshold) decode.score_threshold = *c.threshold;
  decode.channels = {kFillerCategory};
  const Model model = ckpt.ToModel();

  std::vector<std::string> ids;
  std::vector<std::vector<DetectionEvent>> detections;
  int failures = 0;
  for (const auto& file : audio) {
    try {
      Waveform wave = ReadWav(file);
      auto samples = wave.sample_rate == ckpt.frontend.sample_rate
                         ? std::move(wave.samples)
                         : Resample(wave.samples, wave.sample_rate,
                                    ckpt.frontend.sample_rate);
      const Spectrogram spec = StftFeatures(samples, ckpt.frontend);
      detections.push_back(
          Decode(model.Forward(spec), spec.hop_s, decode));
      ids.push_back(fs::path(file).stem().string());
    } catch (const Error& e) {
      ++failures;
      std::cerr << "warning: " << file << ": " << e.what() << "\n";
    }
  }
  WriteFileAtomic(c.out, FormatDetectionsCsv(ids, detections));
  if (failures > 0 && size_t(failures) == audio.size()) {
    throw InputError("no input file could be processed");
  }
  return 0;
}

int CmdFpReport(const Common& c, const std::string& log_path, int epoch,
                size_t top) {
  FpReport report;
  if (!c.checkpoint.empty()) {
    const Checkpoint ckpt = LoadCheckpoint(c.checkpoint);
    const Config config = ResolveConfig(c);
    const auto clips = LoadSplit(c, c.split, ckpt.frontend.sample_rate);
    const EvalResult result = Evaluate(ckpt.ToModel(), ckpt.frontend, clips,
                                       config.decode,
                                       config.train.eval_collar_s,
                                       ckpt.registry.filler_lexicon());
    report = BuildFpReport(result.detections, clips,
                           config.train.eval_collar_s, ckpt.registry,
                           ckpt.epoch);
  } else {
    if (log_path.empty()) {
      throw ConfigError("fp-report needs --log or --checkpoint with --data");
    }
    std::ifstream in(log_path);
    if (!in) throw IngestionError("cannot open run log " + log_path);
    std::optional<FpReport> found;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (!j.contains("fp_report") || j["fp_report"].is_null()) continue;
      if (epoch > 0 && j.value("epoch", 0) != epoch) continue;
      found = j["fp_report"].get<FpReport>();
    }
    if (!found) throw InputError("no FP report found in " + log_path);
    report = *found;
  }
  const std::string table = FormatFpTable(report, top);
  std::cout << table;
  if (!c.out.empty()) WriteFileAtomic(c.out, table);
  return 0;
}

int CmdExportEmbeddings(const Common& c) {
  if (c.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  RequireOut(c);
  const Checkpoint ckpt = LoadCheckpoint(c.checkpoint);
  const auto clips = LoadSplit(c, c.split, ckpt.frontend.sample_rate);
  const Model model = ckpt.ToModel();
  const double out_hop =
      ckpt.frontend.HopSeconds() * ckpt.model_config.downsample_factor;

  std::ostringstream out;
  out << "clip_id,word,category_id";
  for (int d = 0; d < ckpt.model_config.trunk_width; ++d) out << ",e" << d;
  out << "\n";
  for (const auto& clip : clips) {
    const Spectrogram spec = StftFeatures(clip.audio, ckpt.frontend);
    const Prediction pred = model.Forward(spec);
    for (const auto& e : clip.events) {
      const Keypoint kp = KeypointOf(e.Center(), out_hop);
      if (kp.frame < 0 || kp.frame >= pred.NumFrames()) {
        std::cerr << "warning: " << clip.clip_id << ": keypoint of '" << e.text
                  << "' at " << Fixed(e.Center())
                  << " s is outside the prediction range; skipped\n";
        continue;
      }
      out << clip.clip_id << "," << e.text << ","
          << ckpt.registry.CategoryOf(e.text);
      for (Eigen::Index d = 0; d < pred.embeddings.cols(); ++d) {
        out << "," << Fixed(pred.embeddings(kp.frame, d));
      }
      out << "\n";
    }
  }
  WriteFileAtomic(c.out, out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filler-word detection without ASR"};
  app.require_subcommand(1);
  Common common;
  std::string resume, log_path;
  std::vector<std::string> audio;
  int epoch = -1;
  size_t top = 10;
  bool quiet = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Config file (JSON)");
    sub->add_option("--seed", common.seed, "Override the config seed");
    sub->add_option("--out", common.out, "Output path");
  };
  auto add_checkpoint = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", common.checkpoint, "Checkpoint file");
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", common.data_dir,
                    "Corpus directory (split CSVs + audio/)");
    sub->add_option("--split", common.split, "Split name")
        ->check(CLI::IsMember({"train", "val", "test"}));
  };

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic corpus");
  add_common(gen);

  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train);
  add_data(train);
  train->add_option("--resume", resume, "Resume from a checkpoint");
  train->add_flag("--quiet", quiet, "No per-epoch progress");

  auto* eval = app.add_subcommand("eval", "Event-based filler P/R/F1");
  add_common(eval);
  add_checkpoint(eval);
  add_data(eval);
  eval->add_option("--threshold", common.threshold, "Heatmap threshold");

  auto* detect = app.add_subcommand("detect", "Detect fillers in WAV files");
  add_common(detect);
  add_checkpoint(detect);
  detect->add_option("--threshold", common.threshold, "Heatmap threshold");
  detect->add_option("audio", audio, "WAV files")->required();

  auto* fp = app.add_subcommand("fp-report", "Top false-positive words");
  add_common(fp);
  add_checkpoint(fp);
  add_data(fp);
  fp->add_option("--log", log_path, "Run log (JSON lines)");
  fp->add_option("--epoch", epoch, "Epoch to report (default: last)");
  fp->add_option("--top", top, "Rows to show");

  auto* emb = app.add_subcommand("export-embeddings",
                                 "Export trunk embeddings at keypoints");
  add_common(emb);
  add_checkpoint(emb);
  add_data(emb);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) return CmdGenSynth(common);
    if (*train) return CmdTrain(common, resume, quiet);
    if (*eval) return CmdEval(common);
    if (*detect) return CmdDetect(common, audio);
    if (*fp) return CmdFpReport(common, log_path, epoch, top);
    if (*emb) return CmdExportEmbeddings(common);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::cerr << "fillerspot: error: " << msg << "\n";
    return 1;
  }
  return 1;
}
