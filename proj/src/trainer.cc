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

#include "fillerspot/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "fillerspot/error.h"
#include "fillerspot/random.h"

namespace fillerspot {
namespace {

constexpr char kMagic[8] = {'F', 'S', 'P', 'T', 'C', 'K', 'P', 'T'};

template <typename Fn>
void ParallelFor(size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const size_t w = std::min(size_t(workers), n);
  std::vector<std::thread> threads;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (size_t k = 0; k < w; ++k) {
    threads.emplace_back([&, k] {
      try {
        for (size_t i = k; i < n; i += w) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

void WriteBytes(std::ofstream& out, const void* data, size_t n) {
  out.write(static_cast<const char*>(data), std::streamsize(n));
}

void WriteVector(std::ofstream& out, const Eigen::VectorXd& v) {
  const uint64_t n = uint64_t(v.size());
  WriteBytes(out, &n, sizeof(n));
  WriteBytes(out, v.data(), sizeof(double) * n);
}

void ReadBytes(std::ifstream& in, void* data, size_t n,
               const std::filesystem::path& path) {
  in.read(static_cast<char*>(data), std::streamsize(n));
  if (!in) throw IngestionError("truncated checkpoint " + path.string());
}

Eigen::VectorXd ReadVector(std::ifstream& in,
                           const std::filesystem::path& path) {
  uint64_t n = 0;
  ReadBytes(in, &n, sizeof(n), path);
  if (n > (uint64_t(1) << 32)) {
    throw IngestionError("corrupt checkpoint " + path.string());
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  ReadBytes(in, v.data(), sizeof(double) * n, path);
  return v;
}

std::vector<TimedEvent> FillerReferences(
    const AnnotatedClip& clip, const std::vector<std::string>& lexicon) {
  std::vector<TimedEvent> refs;
  for (const auto& e : clip.events) {
    if (std::find(lexicon.begin(), lexicon.end(), e.text) != lexicon.end()) {
      refs.push_back({e.onset, e.duration, kFillerCategory});
    }
  }
  return refs;
}

EvalResult EvaluateSpectrograms(const Model& model,
                                const std::vector<Spectrogram>& specs,
                                const std::vector<AnnotatedClip>& clips,
                                const DecodeConfig& decode, double collar_s,
                                const std::vector<std::string>& lexicon,
                                int workers) {
  DecodeConfig filler_only = decode;
  filler_only.channels = {kFillerCategory};
  EvalResult result;
  result.detections.resize(clips.size());
  ParallelFor(clips.size(), workers, [&](size_t i) {
    const Prediction pred = model.Forward(specs[i]);
    result.detections[i] = Decode(pred, specs[i].hop_s, filler_only);
  });
  std::vector<std::vector<TimedEvent>> dets, refs;
  for (size_t i = 0; i < clips.size(); ++i) {
    dets.push_back(ToTimed(result.detections[i]));
    refs.push_back(FillerReferences(clips[i], lexicon));
  }
  result.score = EventPrfOverClips(dets, refs, collar_s, kFillerCategory);
  return result;
}

std::vector<Spectrogram> ComputeSpectrograms(
    const std::vector<AnnotatedClip>& clips, const FrontendConfig& frontend,
    int workers) {
  std::vector<Spectrogram> specs(clips.size());
  ParallelFor(clips.size(), workers, [&](size_t i) {
    if (clips[i].sample_rate != frontend.sample_rate) {
      throw InputError("clip '" + clips[i].clip_id + "' has sample rate " +
                       std::to_string(clips[i].sample_rate) +
                       "; frontend expects " +
                       std::to_string(frontend.sample_rate));
    }
    try {
      specs[i] = StftFeatures(clips[i].audio, frontend);
    } catch (const Error& e) {
      throw InputError("clip '" + clips[i].clip_id + "': " + e.what());
    }
  });
  return specs;
}

// Crops (or pads with digital silence) a window of num_frames frames starting
// at start_frame and re-indexes the events into it. Events whose center falls
// outside the window are dropped; the rest are clipped to it.
std::pair<Eigen::MatrixXd, std::vector<WordEvent>> CropWindow(
    const Spectrogram& spec, const std::vector<WordEvent>& events,
    int start_frame, int num_frames, double pad_value) {
  Eigen::MatrixXd frames =
      Eigen::MatrixXd::Constant(num_frames, spec.NumBins(), pad_value);
  for (int t = 0; t < num_frames; ++t) {
    const int src = start_frame + t;
    if (src >= 0 && src < spec.NumFrames()) frames.row(t) = spec.frames.row(src);
  }
  const double shift = start_frame * spec.hop_s;
  const double span = num_frames * spec.hop_s;
  std::vector<WordEvent> out;
  for (const auto& e : events) {
    const double center = e.Center() - shift;
    if (center < 0.0 || center >= span) continue;
    WordEvent w = e;
    const double lo = std::max(0.0, e.onset - shift);
    const double hi = std::min(span, e.End() - shift);
    w.onset = lo;
    w.duration = hi - lo;
    if (w.duration > 0.0) out.push_back(std::move(w));
  }
  return {std::move(frames), std::move(out)};
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, OptimizerState state, size_t n)
      : config_(config), state_(std::move(state)) {
    if (state_.kind.empty()) state_.kind = config.optimizer;
    if (state_.kind != config.optimizer) {
      throw CompatibilityError("checkpoint optimizer '" + state_.kind +
                               "' differs from config '" + config.optimizer +
                               "'");
    }
    if (state_.first.size() != Eigen::Index(n)) {
      state_.first = Eigen::VectorXd::Zero(Eigen::Index(n));
    }
    if (state_.kind == "adam" && state_.second.size() != Eigen::Index(n)) {
      state_.second = Eigen::VectorXd::Zero(Eigen::Index(n));
    }
  }

  void Step(Eigen::VectorXd* params, const Eigen::VectorXd& grad, double lr) {
    ++state_.step;
    if (state_.kind == "adam") {
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      state_.first = b1 * state_.first + (1.0 - b1) * grad;
      state_.second =
          b2 * state_.second + (1.0 - b2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(b1, double(state_.step));
      const double c2 = 1.0 - std::pow(b2, double(state_.step));
      *params -= lr * ((state_.first / c1).array() /
                       ((state_.second / c2).array().sqrt() + eps))
                          .matrix();
    } else {
      state_.first = config_.momentum * state_.first + grad;
      *params -= lr * state_.first;
    }
  }

  const OptimizerState& state() const { return state_; }

 private:
  const TrainConfig& config_;
  OptimizerState state_;
};

}  // namespace

// ---------------------------------------------------------------------------

void TrainConfig::Validate() const {
  if (!(lr_initial > 0.0) || !(lr_drop_factor > 0.0)) {
    throw ConfigError("learning rate and drop factor must be positive");
  }
  if (total_epochs < 1) throw ConfigError("total_epochs must be >= 1");
  for (size_t i = 0; i < lr_drop_epochs.size(); ++i) {
    if (lr_drop_epochs[i] < 1 || lr_drop_epochs[i] >= total_epochs ||
        (i > 0 && lr_drop_epochs[i] <= lr_drop_epochs[i - 1])) {
      throw ConfigError(
          "lr_drop_epochs must be strictly increasing and < total_epochs");
    }
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (optimizer != "sgd" && optimizer != "adam") {
    throw ConfigError("optimizer must be 'sgd' or 'adam'");
  }
  if (momentum < 0.0 || momentum >= 1.0 || weight_decay < 0.0 ||
      grad_clip < 0.0) {
    throw ConfigError("invalid optimizer hyperparameters");
  }
  if (!(window_s > 0.0) || !(sigma_frac > 0.0) || !(eval_collar_s > 0.0) ||
      eval_every < 1) {
    throw ConfigError("invalid training window/target/eval settings");
  }
  loss.Validate();
  schedule.Validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr_initial", c.lr_initial},
       {"lr_drop_epochs", c.lr_drop_epochs},
       {"lr_drop_factor", c.lr_drop_factor},
       {"total_epochs", c.total_epochs},
       {"batch_size", c.batch_size},
       {"optimizer", c.optimizer},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"grad_clip", c.grad_clip},
       {"window_s", c.window_s},
       {"sigma_frac", c.sigma_frac},
       {"eval_collar_s", c.eval_collar_s},
       {"eval_every", c.eval_every},
       {"seed", c.seed},
       {"loss", c.loss},
       {"schedule", c.schedule},
       {"augment", c.augment}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.lr_initial = j.value("lr_initial", d.lr_initial);
  c.lr_drop_epochs = j.value("lr_drop_epochs", d.lr_drop_epochs);
  c.lr_drop_factor = j.value("lr_drop_factor", d.lr_drop_factor);
  c.total_epochs = j.value("total_epochs", d.total_epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.optimizer = j.value("optimizer", d.optimizer);
  c.momentum = j.value("momentum", d.momentum);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.window_s = j.value("window_s", d.window_s);
  c.sigma_frac = j.value("sigma_frac", d.sigma_frac);
  c.eval_collar_s = j.value("eval_collar_s", d.eval_collar_s);
  c.eval_every = j.value("eval_every", d.eval_every);
  c.seed = j.value("seed", d.seed);
  c.loss = j.value("loss", d.loss);
  c.schedule = j.value("schedule", d.schedule);
  c.augment = j.value("augment", d.augment);
}

void Config::Finalize() {
  model.num_bins = frontend.NumBins();
  model.num_aux = train.schedule.h;
  if (frontend.sample_rate <= 0 || frontend.n_fft < frontend.WinLength() ||
      frontend.HopLength() <= 0 || !(frontend.log_floor > 0.0)) {
    throw ConfigError("invalid frontend configuration");
  }
  model.Validate();
  train.Validate();
  if (filler_lexicon.empty()) throw ConfigError("filler lexicon is empty");
  double sum = 0.0;
  for (double f : split) {
    if (f < 0.0) throw ConfigError("split fractions must be >= 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

void to_json(nlohmann::json& j, const Config& c) {
  j = {{"frontend", c.frontend},
       {"model", c.model},
       {"train", c.train},
       {"decode", c.decode},
       {"filler_lexicon", c.filler_lexicon},
       {"synth", c.synth},
       {"split", c.split}};
}

void from_json(const nlohmann::json& j, Config& c) {
  const std::string preset = j.value("preset", std::string("desk"));
  if (preset != "desk" && preset != "paper") {
    throw ConfigError("unknown preset '" + preset + "'");
  }
  // Sections patch the preset, so a config only lists what it changes.
  nlohmann::json merged = preset == "paper" ? PaperConfig() : DeskConfig();
  nlohmann::json patch = j;
  patch.erase("preset");
  merged.merge_patch(patch);
  Config d;
  merged.at("frontend").get_to(d.frontend);
  merged.at("model").get_to(d.model);
  merged.at("train").get_to(d.train);
  merged.at("decode").get_to(d.decode);
  merged.at("filler_lexicon").get_to(d.filler_lexicon);
  merged.at("synth").get_to(d.synth);
  merged.at("split").get_to(d.split);
  d.Finalize();
  c = std::move(d);
}

Config LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in).get<Config>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

namespace {

// Shift, noise and time/frequency masking shared by both presets.
AugmentConfig DefaultAugment() {
  AugmentConfig a;
  a.enabled = true;
  a.num_time_masks = 2;
  a.time_mask_frames = 5;
  a.num_freq_masks = 2;
  a.freq_mask_bins = 8;
  a.max_shift_frames = 2;
  a.noise_snr_db = 20.0;
  return a;
}

}  // namespace

Config PaperConfig() {
  Config c;
  c.train.schedule.h = 8;
  c.train.augment = DefaultAugment();
  c.Finalize();
  return c;
}

Config DeskConfig() {
  Config c;
  c.filler_lexicon = {"uh", "um"};
  c.synth = DefaultSynthSpec(400, 7);
  c.split = {0.3, 0.1, 0.6};
  c.train.total_epochs = 45;
  c.train.lr_drop_epochs = {30, 35, 40};
  c.train.optimizer = "adam";
  c.train.lr_initial = 5e-3;
  c.train.batch_size = 8;
  c.train.window_s = c.synth.clip_seconds;
  c.train.grad_clip = 5.0;
  c.train.schedule = {12, 1, 4, 3};
  c.train.augment = DefaultAugment();
  c.frontend.sample_rate = 8000;
  c.frontend.n_fft = 256;
  c.synth.sample_rate = c.frontend.sample_rate;
  c.Finalize();
  return c;
}

double LrAt(int epoch, const TrainConfig& config) {
  double lr = config.lr_initial;
  for (int drop : config.lr_drop_epochs) {
    if (drop <= epoch) lr *= config.lr_drop_factor;
  }
  return lr;
}

int NumWorkers(int fallback) {
  if (const char* env = std::getenv("FILLERSPOT_NUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(fallback, 1);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> FeatureStats(
    const std::vector<Spectrogram>& spectrograms) {
  if (spectrograms.empty()) throw InputError("no spectrograms for statistics");
  const int F = spectrograms.front().NumBins();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(F);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(F);
  double count = 0.0;
  for (const auto& s : spectrograms) {
    sum += s.frames.colwise().sum().transpose();
    sq += s.frames.array().square().colwise().sum().matrix().transpose();
    count += s.NumFrames();
  }
  Eigen::VectorXd mean = sum / count;
  Eigen::VectorXd var = (sq / count).array() - mean.array().square();
  Eigen::VectorXd stddev = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-3);
  return {mean, stddev};
}

// ---------------------------------------------------------------------------

Model Checkpoint::ToModel() const {
  Model m = Model::Build(model_config, 0);
  if (m.params().size() != params.size()) {
    throw CompatibilityError("checkpoint parameter count does not match its "
                             "architecture");
  }
  m.params() = params;
  m.SetNormalization(norm_mean, norm_std);
  return m;
}

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& c) {
  nlohmann::json header = {
      {"model", c.model_config},
      {"frontend", c.frontend},
      {"registry", c.registry},
      {"epoch", c.epoch},
      {"best_val_f1", c.best_val_f1},
      {"seed", c.seed},
      {"optimizer", {{"kind", c.optimizer.kind}, {"step", c.optimizer.step}}}};
  const std::string text = header.dump();
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestionError("cannot write checkpoint " + tmp.string());
    WriteBytes(out, kMagic, sizeof(kMagic));
    const uint32_t version = Checkpoint::kVersion;
    WriteBytes(out, &version, sizeof(version));
    const uint64_t len = text.size();
    WriteBytes(out, &len, sizeof(len));
    WriteBytes(out, text.data(), text.size());
    WriteVector(out, c.params);
    WriteVector(out, c.norm_mean);
    WriteVector(out, c.norm_std);
    WriteVector(out, c.optimizer.first);
    WriteVector(out, c.optimizer.second);
    if (!out) throw IngestionError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  ReadBytes(in, magic, sizeof(magic), path);
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CompatibilityError(path.string() + " is not a checkpoint");
  }
  uint32_t version = 0;
  ReadBytes(in, &version, sizeof(version), path);
  if (version != Checkpoint::kVersion) {
    throw CompatibilityError("unsupported checkpoint version " +
                             std::to_string(version));
  }
  uint64_t len = 0;
  ReadBytes(in, &len, sizeof(len), path);
  if (len > (uint64_t(1) << 28)) {
    throw IngestionError("corrupt checkpoint " + path.string());
  }
  std::string text(len, '\0');
  ReadBytes(in, text.data(), len, path);

  Checkpoint c;
  try {
    const auto header = nlohmann::json::parse(text);
    c.model_config = header.at("model").get<ModelConfig>();
    c.frontend = header.at("frontend").get<FrontendConfig>();
    c.registry = header.at("registry").get<CategoryRegistry>();
    c.epoch = header.at("epoch").get<int>();
    c.best_val_f1 = header.at("best_val_f1").get<double>();
    c.seed = header.at("seed").get<uint64_t>();
    c.optimizer.kind = header.at("optimizer").at("kind").get<std::string>();
    c.optimizer.step = header.at("optimizer").at("step").get<int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CompatibilityError("bad checkpoint header in " + path.string() +
                             ": " + e.what());
  }
  c.params = ReadVector(in, path);
  c.norm_mean = ReadVector(in, path);
  c.norm_std = ReadVector(in, path);
  c.optimizer.first = ReadVector(in, path);
  c.optimizer.second = ReadVector(in, path);
  if (c.registry.NumCategories() != c.model_config.NumCategories()) {
    throw CompatibilityError("checkpoint registry and model disagree on the "
                             "number of categories");
  }
  return c;
}

// ---------------------------------------------------------------------------

EvalResult Evaluate(const Model& model, const FrontendConfig& frontend,
                    const std::vector<AnnotatedClip>& clips,
                    const DecodeConfig& decode, double collar_s,
                    const std::vector<std::string>& filler_lexicon) {
  const int workers = NumWorkers();
  const auto specs = ComputeSpectrograms(clips, frontend, workers);
  return EvaluateSpectrograms(model, specs, clips, decode, collar_s,
                              filler_lexicon, workers);
}

EvalResult Evaluate(const Checkpoint& checkpoint,
                    const std::vector<AnnotatedClip>& clips,
                    const Config& config) {
  if (checkpoint.registry.NumCategories() != config.model.NumCategories()) {
    throw CompatibilityError(
        "checkpoint has " +
        std::to_string(checkpoint.registry.NumCategories()) +
        " categories; config expects " +
        std::to_string(config.model.NumCategories()));
  }
  if (!(checkpoint.frontend == config.frontend)) {
    throw CompatibilityError("checkpoint frontend differs from config");
  }
  return Evaluate(checkpoint.ToModel(), checkpoint.frontend, clips,
                  config.decode, config.train.eval_collar_s,
                  checkpoint.registry.filler_lexicon());
}

// ---------------------------------------------------------------------------

TrainResult Train(const CorpusSplit& data, const Config& config,
                  const TrainOptions& options) {
  const TrainConfig& tc = config.train;
  tc.Validate();
  config.model.Validate();
  if (config.model.num_aux != tc.schedule.h) {
    throw ConfigError("model.num_aux must equal schedule.h");
  }
  if (config.model.num_bins != config.frontend.NumBins()) {
    throw ConfigError("model.num_bins must equal the frontend bin count");
  }
  if (data.train.empty()) throw ConfigError("empty training split");
  const int workers =
      options.num_workers > 0 ? options.num_workers : NumWorkers();
  const bool write_files = !options.out_dir.empty();
  if (write_files) std::filesystem::create_directories(options.out_dir);

  const auto train_specs =
      ComputeSpectrograms(data.train, config.frontend, workers);
  const auto val_specs = ComputeSpectrograms(data.val, config.frontend, workers);

  Checkpoint state;
  Model model;
  if (options.resume_from) {
    state = LoadCheckpoint(*options.resume_from);
    if (!(state.model_config == config.model) ||
        !(state.frontend == config.frontend)) {
      throw CompatibilityError("resume checkpoint does not match the config");
    }
    model = state.ToModel();
  } else {
    model = Model::Build(config.model, MixSeed(tc.seed, 1));
    auto [mean, stddev] = FeatureStats(train_specs);
    model.SetNormalization(mean, stddev);
    state.model_config = config.model;
    state.frontend = config.frontend;
    state.registry = CategoryRegistry(tc.schedule.h, config.filler_lexicon);
    state.epoch = 0;
    state.seed = tc.seed;
  }
  CategoryRegistry& registry = state.registry;
  Optimizer optimizer(tc, state.optimizer, model.NumParams());

  const double hop_s = config.frontend.HopSeconds();
  const int window_frames = config.frontend.NumFrames(
      size_t(std::llround(tc.window_s * config.frontend.sample_rate)));
  if (window_frames < 1) throw ConfigError("training window shorter than STFT");
  const int out_frames = model.OutputFrames(window_frames);
  const double out_hop = hop_s * config.model.downsample_factor;
  const double pad_value = std::log(config.frontend.log_floor);

  std::ofstream log_file;
  if (write_files) {
    log_file.open(options.out_dir / "run_log.jsonl", std::ios::trunc);
  }

  TrainResult result;
  const int last_epoch = options.stop_after_epoch > 0
                             ? std::min(options.stop_after_epoch,
                                        tc.total_epochs)
                             : tc.total_epochs;
  for (int epoch = state.epoch + 1; epoch <= last_epoch; ++epoch) {
    const double lr = LrAt(epoch, tc);
    nlohmann::json entry = {{"epoch", epoch}, {"lr", lr}};

    const MiningOutcome mining = MiningStep(
        epoch, tc.schedule, &registry, [&](const CategoryRegistry& reg) {
          const EvalResult val =
              EvaluateSpectrograms(model, val_specs, data.val, config.decode,
                                   tc.eval_collar_s, reg.filler_lexicon(),
                                   workers);
          return BuildFpReport(val.detections, data.val, tc.eval_collar_s,
                               reg, epoch);
        });
    entry["fp_report"] = mining.report ? nlohmann::json(*mining.report)
                                       : nlohmann::json(nullptr);
    entry["promoted"] = mining.promoted ? nlohmann::json(*mining.promoted)
                                        : nlohmann::json(nullptr);
    if (mining.promoted) {
      result.promotions.push_back(*mining.promoted);
      if (options.verbose) {
        std::cerr << "epoch " << epoch << ": promoted '" << *mining.promoted
                  << "' to category " << mining.category_id << "\n";
      }
    }
    entry["registry"] = registry;

    const int active_channels = kFirstAuxCategory + registry.NumAssigned();
    Rng rng(MixSeed(tc.seed, 1000 + uint64_t(epoch)));
    std::vector<size_t> order(data.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.Shuffle(&order);

    LossBreakdown epoch_loss;
    int clips_seen = 0;
    for (size_t b0 = 0; b0 < order.size(); b0 += size_t(tc.batch_size)) {
      const size_t b1 = std::min(order.size(), b0 + size_t(tc.batch_size));
      const size_t n = b1 - b0;

      // Random draws happen here, in order, so results do not depend on the
      // number of workers.
      std::vector<Eigen::MatrixXd> inputs(n);
      std::vector<TargetTensor> targets(n);
      for (size_t k = 0; k < n; ++k) {
        const size_t idx = order[b0 + k];
        Spectrogram noisy;
        const Spectrogram* src = &train_specs[idx];
        if (tc.augment.enabled && tc.augment.noise_snr_db > 0.0) {
          std::vector<float> audio = data.train[idx].audio;
          AddNoise(audio, tc.augment.noise_snr_db, rng);
          noisy = StftFeatures(audio, config.frontend);
          src = &noisy;
        }
        const Spectrogram& spec = *src;
        int start = 0;
        if (spec.NumFrames() > window_frames) {
          start = rng.UniformInt(0, spec.NumFrames() - window_frames);
        }
        if (tc.augment.enabled && tc.augment.max_shift_frames > 0) {
          start += rng.UniformInt(-tc.augment.max_shift_frames,
                                  tc.augment.max_shift_frames);
        }
        auto [frames, events] = CropWindow(spec, data.train[idx].events,
                                           start, window_frames, pad_value);
        if (tc.augment.enabled) {
          Spectrogram window{std::move(frames), hop_s, spec.sample_rate};
          frames = Augment(window, tc.augment, rng).frames;
        }
        AssignCategories(registry, &events);
        targets[k] = EncodeTargets(events, out_frames,
                                   registry.NumCategories(), out_hop,
                                   tc.sigma_frac);
        inputs[k] = std::move(frames);
      }

      std::vector<Eigen::VectorXd> grads(n);
      std::vector<LossBreakdown> losses(n);
      ParallelFor(n, workers, [&](size_t k) {
        ForwardCache cache;
        const Prediction pred = model.Forward(inputs[k], &cache);
        LossGradients lg =
            LossGradients::Zero(pred.NumFrames(), pred.NumCategories());
        losses[k] = ActiveTotalLoss(pred.heatmap, pred.length, pred.offset,
                                    targets[k], tc.loss, active_channels,
                                    &lg);
        grads[k] = Eigen::VectorXd::Zero(Eigen::Index(model.NumParams()));
        model.Backward(cache, lg, &grads[k]);
      });

      Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.params().size());
      for (size_t k = 0; k < n; ++k) {
        const LossBreakdown& l = losses[k];
        if (!std::isfinite(l.total) || !grads[k].allFinite()) {
          const std::string clip_id = data.train[order[b0 + k]].clip_id;
          nlohmann::json dump = {{"epoch", epoch},
                                 {"clip_id", clip_id},
                                 {"loss", l},
                                 {"registry", registry}};
          if (write_files) {
            std::ofstream(options.out_dir / "diagnostic.json") << dump.dump(2);
          }
          throw NumericError("non-finite loss at epoch " +
                             std::to_string(epoch) + " on clip '" + clip_id +
                             "': " + dump.dump());
        }
        grad += grads[k];
        epoch_loss.main += l.main;
        epoch_loss.fn += l.fn;
        epoch_loss.nf += l.nf;
        epoch_loss.len += l.len;
        epoch_loss.off += l.off;
        epoch_loss.total += l.total;
        ++clips_seen;
      }
      grad /= double(n);
      if (tc.weight_decay > 0.0) grad += tc.weight_decay * model.params();
      if (tc.grad_clip > 0.0) {
        const double norm = grad.norm();
        if (norm > tc.grad_clip) grad *= tc.grad_clip / norm;
      }
      optimizer.Step(&model.params(), grad, lr);
    }
    for (double* v : {&epoch_loss.main, &epoch_loss.fn, &epoch_loss.nf,
                      &epoch_loss.len, &epoch_loss.off, &epoch_loss.total}) {
      *v /= std::max(clips_seen, 1);
    }
    entry["loss"] = epoch_loss;

    state.epoch = epoch;
    if (!data.val.empty() &&
        (epoch % tc.eval_every == 0 || epoch == last_epoch)) {
      const EvalResult val = EvaluateSpectrograms(
          model, val_specs, data.val, config.decode, tc.eval_collar_s,
          registry.filler_lexicon(), workers);
      state.best_val_f1 = std::max(state.best_val_f1, val.score.f1);
      entry["val"] = val.score;
    } else {
      entry["val"] = nullptr;
    }
    entry["best_val_f1"] = state.best_val_f1;

    state.params = model.params();
    state.norm_mean = model.norm_mean();
    state.norm_std = model.norm_std();
    state.optimizer = optimizer.state();
    if (write_files) {
      log_file << entry.dump() << "\n";
      log_file.flush();
      if (tc.schedule.h > 0 && tc.schedule.IsMiningEpoch(epoch)) {
        char name[32];
        std::snprintf(name, sizeof(name), "ckpt_e%04d.bin", epoch);
        SaveCheckpoint(options.out_dir / name, state);
      }
    }
    if (options.verbose) {
      std::cerr << "epoch " << epoch << " lr " << lr << " loss "
                << epoch_loss.total;
      if (!entry["val"].is_null()) {
        std::cerr << " val_f1 " << entry["val"]["f1"].get<double>();
      }
      std::cerr << "\n";
    }
    result.log.push_back(std::move(entry));
  }

  state.params = model.params();
  state.norm_mean = model.norm_mean();
  state.norm_std = model.norm_std();
  state.optimizer = optimizer.state();
  if (write_files) SaveCheckpoint(options.out_dir / "final.bin", state);
  result.final_checkpoint = std::move(state);
  return result;
}

}  // namespace fillerspot
