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

#ifndef FILLERSPOT_TRAINER_H_
#define FILLERSPOT_TRAINER_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fillerspot/corpus.h"
#include "fillerspot/decode.h"
#include "fillerspot/evalmetrics.h"
#include "fillerspot/features.h"
#include "fillerspot/mining.h"
#include "fillerspot/net.h"
#include "fillerspot/objective.h"
#include "fillerspot/targets.h"
#include "json.hpp"

namespace fillerspot {

struct TrainConfig {
  double lr_initial = 5e-3;
  std::vector<int> lr_drop_epochs = {300, 350, 400};
  double lr_drop_factor = 0.1;
  int total_epochs = 450;
  int batch_size = 8;
  std::string optimizer = "sgd";  // "sgd" (momentum) or "adam"
  double momentum = 0.9;
  double weight_decay = 0.0;
  double grad_clip = 0.0;  // global L2 norm; 0 disables
  double window_s = 10.0;
  double sigma_frac = 1.0 / 6.0;
  double eval_collar_s = kDefaultCollarSeconds;
  int eval_every = 1;
  uint64_t seed = 0;
  LossFactors loss;
  MiningSchedule schedule;
  AugmentConfig augment;

  // Throws ConfigError.
  void Validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// The single structured config document.
struct Config {
  FrontendConfig frontend;
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  std::vector<std::string> filler_lexicon = {"um", "uh"};
  SynthSpec synth;
  std::array<double, 3> split = {0.6, 0.2, 0.2};

  // Derives model.num_bins from the frontend and model.num_aux from the
  // schedule, then validates everything.
  void Finalize();
};

void to_json(nlohmann::json& j, const Config& c);
void from_json(const nlohmann::json& j, Config& c);
Config LoadConfig(const std::filesystem::path& path);

// Paper schedule: 450 epochs, drops at 300/350/400, mining from epoch 120
// every 10 epochs, h = 8.
Config PaperConfig();
// Same ratios at desk scale with the tiny model preset.
Config DeskConfig();

// lr_initial * factor^(number of drop epochs <= epoch).
double LrAt(int epoch, const TrainConfig& config);

struct OptimizerState {
  std::string kind;
  Eigen::VectorXd first;   // momentum buffer / Adam m
  Eigen::VectorXd second;  // Adam v (empty for SGD)
  int64_t step = 0;
};

struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  ModelConfig model_config;
  FrontendConfig frontend;
  CategoryRegistry registry;
  int epoch = 0;
  double best_val_f1 = 0.0;
  uint64_t seed = 0;
  Eigen::VectorXd params;
  Eigen::VectorXd norm_mean;
  Eigen::VectorXd norm_std;
  OptimizerState optimizer;

  Model ToModel() const;
};

// Binary, versioned. Writes to a temporary file and renames it into place.
void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& c);
// Throws CompatibilityError on a bad magic/version, IngestionError on I/O.
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

struct EvalResult {
  EventScore score;
  std::vector<std::vector<DetectionEvent>> detections;  // filler channel
};

// Detects on full clips (filler channel only) and scores against the
// lexicon's filler events.
EvalResult Evaluate(const Model& model, const FrontendConfig& frontend,
                    const std::vector<AnnotatedClip>& clips,
                    const DecodeConfig& decode, double collar_s,
                    const std::vector<std::string>& filler_lexicon);

// Checkpoint-level entry point. Throws CompatibilityError when the
// checkpoint's channel count or frontend disagrees with the config.
EvalResult Evaluate(const Checkpoint& checkpoint,
                    const std::vector<AnnotatedClip>& clips,
                    const Config& config);

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no files written
  std::optional<std::filesystem::path> resume_from;
  int stop_after_epoch = -1;  // stop early (for tests); -1 runs to the end
  bool verbose = false;
  int num_workers = 0;  // 0: FILLERSPOT_NUM_WORKERS or 1
};

struct TrainResult {
  Checkpoint final_checkpoint;
  std::vector<nlohmann::json> log;  // one entry per epoch run
  std::vector<std::string> promotions;
};

// One-pass training with the mining hook. Mining runs at the start of each
// epoch, so a promotion changes that epoch's targets and is recorded in the
// checkpoint written after it. Writes run_log.jsonl, ckpt_eNNNN.bin at every
// mining epoch and final.bin to out_dir. Deterministic for a fixed config,
// data and seed regardless of worker count. Throws NumericError (after
// dumping diagnostic.json) on a non-finite loss.
TrainResult Train(const CorpusSplit& data, const Config& config,
                  const TrainOptions& options = {});

// Number of worker threads: FILLERSPOT_NUM_WORKERS if set, else fallback.
int NumWorkers(int fallback = 1);

// Global per-bin mean/stddev of log-magnitude frames.
std::pair<Eigen::VectorXd, Eigen::VectorXd> FeatureStats(
    const std::vector<Spectrogram>& spectrograms);

}  // namespace fillerspot

#endif  // FILLERSPOT_TRAINER_H_
