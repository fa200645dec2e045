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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <gtest/gtest.h>

#include "fillerspot/corpus.h"
#include "fillerspot/trainer.h"
#include "fillerspot/wav.h"
#include "json.hpp"
#include "support/fixtures.h"

namespace fillerspot {
namespace {

namespace fs = std::filesystem;

fs::path ScratchDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() /
                     ("fillerspot_cli_" + std::to_string(::getpid()) + "_" +
                      name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string ReadAll(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> Fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

struct RunResult {
  int status = -1;
  std::string stdout_text;
  std::string stderr_text;
};

RunResult RunCli(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "stdout.txt";
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string("'") + FILLERSPOT_CLI + "' " + args +
                          " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.stdout_text = ReadAll(out);
  r.stderr_text = ReadAll(err);
  return r;
}

void WriteConfig(const Config& config, const fs::path& path) {
  std::ofstream(path) << nlohmann::json(config).dump(2);
}

// A small corpus written through gen-synth, shared by several tests.
class CliCorpusTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = ScratchDir(::testing::UnitTest::GetInstance()
                          ->current_test_info()
                          ->name());
    config_ = testing::TinyConfig(8, 3);
    config_.train.total_epochs = 4;
    config_.train.lr_drop_epochs = {};
    config_.train.eval_every = 2;
    config_.train.schedule = {2, 1, 4, 1};
    config_.Finalize();
    WriteConfig(config_, dir_ / "config.json");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string ConfigArg() const {
    return "--config '" + (dir_ / "config.json").string() + "'";
  }

  fs::path dir_;
  Config config_;
};

TEST_F(CliCorpusTest, GenSynthIsDeterministic) {
  for (const char* name : {"a", "b"}) {
    const RunResult r = RunCli("gen-synth " + ConfigArg() + " --out '" +
                                (dir_ / name).string() + "'",
                            dir_);
    ASSERT_EQ(r.status, 0) << r.stderr_text;
  }
  for (const char* f : {"train.csv", "val.csv", "test.csv", "manifest.json"}) {
    const std::string a = ReadAll(dir_ / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, ReadAll(dir_ / "b" / f)) << f;
  }
  const auto train = Lines(ReadAll(dir_ / "a" / "train.csv"));
  ASSERT_FALSE(train.empty());
  EXPECT_EQ(train[0], "clip_id,word,onset_s,duration_s");
  for (const auto& entry : fs::directory_iterator(dir_ / "a" / "audio")) {
    EXPECT_EQ(ReadAll(entry.path()),
              ReadAll(dir_ / "b" / "audio" / entry.path().filename()));
  }

  const RunResult other = RunCli("gen-synth " + ConfigArg() +
                                  " --seed 11 --out '" +
                                  (dir_ / "c").string() + "'",
                              dir_);
  ASSERT_EQ(other.status, 0) << other.stderr_text;
  EXPECT_NE(ReadAll(dir_ / "a" / "train.csv"),
            ReadAll(dir_ / "c" / "train.csv"));
}

TEST_F(CliCorpusTest, InvalidSpecFailsWithoutOutput) {
  std::ofstream(dir_ / "bad.json")
      << R"({"synth": {"confusable_words": ["uh"]}})";
  const RunResult r = RunCli("gen-synth --config '" +
                              (dir_ / "bad.json").string() + "' --out '" +
                              (dir_ / "out").string() + "'",
                          dir_);
  EXPECT_NE(r.status, 0);
  EXPECT_EQ(Lines(r.stderr_text).size(), 1u) << r.stderr_text;
  EXPECT_NE(r.stderr_text.find("error"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "out"));

  const RunResult missing = RunCli("eval --checkpoint '" +
                                    (dir_ / "none.bin").string() +
                                    "' --data '" + dir_.string() + "'",
                                dir_);
  EXPECT_NE(missing.status, 0);
  EXPECT_EQ(Lines(missing.stderr_text).size(), 1u) << missing.stderr_text;
}

TEST_F(CliCorpusTest, TrainEvalReportAndExport) {
  const std::string data = " --data '" + (dir_ / "data").string() + "'";
  ASSERT_EQ(RunCli("gen-synth " + ConfigArg() + " --out '" +
                    (dir_ / "data").string() + "'",
                dir_)
                .status,
            0);
  const RunResult train = RunCli("train --quiet " + ConfigArg() + data +
                                  " --out '" + (dir_ / "run").string() + "'",
                              dir_);
  ASSERT_EQ(train.status, 0) << train.stderr_text;
  ASSERT_TRUE(fs::exists(dir_ / "run" / "final.bin"));
  ASSERT_TRUE(fs::exists(dir_ / "run" / "run_log.jsonl"));
  const std::string ckpt =
      " --checkpoint '" + (dir_ / "run" / "final.bin").string() + "'";

  const RunResult eval = RunCli("eval" + ckpt + data + " --split val --out '" +
                                 (dir_ / "eval.json").string() + "'",
                             dir_);
  ASSERT_EQ(eval.status, 0) << eval.stderr_text;
  const auto score = nlohmann::json::parse(ReadAll(dir_ / "eval.json"));
  EXPECT_EQ(score["split"], "val");
  EXPECT_GE(score["score"]["f1"].get<double>(), 0.0);
  EXPECT_LE(score["score"]["f1"].get<double>(), 1.0);

  const RunResult fp = RunCli(
      "fp-report --log '" + (dir_ / "run" / "run_log.jsonl").string() + "'",
      dir_);
  ASSERT_EQ(fp.status, 0) << fp.stderr_text;
  EXPECT_NE(fp.stdout_text.find("total"), std::string::npos);
  const RunResult fp_live =
      RunCli("fp-report" + ckpt + data + " --split val --top 3", dir_);
  ASSERT_EQ(fp_live.status, 0) << fp_live.stderr_text;

  // Every labeled word whose keypoint lies inside the clip gets one row.
  const auto clips =
      LoadCorpus(dir_ / "data" / "test.csv", dir_ / "data" / "audio",
                 config_.frontend.sample_rate);
  size_t words = 0;
  for (const auto& c : clips) words += c.events.size();
  const int max_category = config_.model.NumCategories() - 1;
  std::string first;
  for (const char* name : {"e1.csv", "e2.csv"}) {
    const RunResult r = RunCli("export-embeddings" + ckpt + data + " --out '" +
                                (dir_ / name).string() + "'",
                            dir_);
    ASSERT_EQ(r.status, 0) << r.stderr_text;
    const std::string text = ReadAll(dir_ / name);
    if (first.empty()) first = text;
    EXPECT_EQ(text, first);
  }
  const auto rows = Lines(first);
  ASSERT_EQ(rows.size(), words + 1);
  EXPECT_EQ(Fields(rows[0]).size(), size_t(3 + config_.model.trunk_width));
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto f = Fields(rows[i]);
    ASSERT_EQ(f.size(), size_t(3 + config_.model.trunk_width));
    const int category = std::stoi(f[2]);
    EXPECT_GE(category, -1);
    EXPECT_LE(category, max_category);
  }
}

class CliDetectTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(ScratchDir("detect"));
    const Config cfg = testing::OverfitConfig();
    const CorpusSplit data = testing::TinyData(cfg);
    TrainOptions options;
    options.out_dir = *dir_ / "run";
    Train(data, cfg, options);
    for (const auto& clip : data.train) {
      int fillers = 0;
      for (const auto& e : clip.events) {
        if (e.text == "uh" || e.text == "um") {
          ++fillers;
          onset_ = e.onset;
        }
      }
      if (fillers == 1) {
        WriteWav(*dir_ / "one_filler.wav", {clip.audio, clip.sample_rate});
        break;
      }
    }
    std::vector<float> silence(size_t(cfg.synth.clip_seconds *
                                      cfg.frontend.sample_rate),
                               0.0f);
    WriteWav(*dir_ / "silence.wav", {silence, cfg.frontend.sample_rate});
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }

  RunResult Detect(const std::string& wav, const std::string& extra) {
    return RunCli("detect --checkpoint '" +
                   (*dir_ / "run" / "final.bin").string() + "' --out '" +
                   (*dir_ / "det.csv").string() + "' " + extra + " '" +
                   (*dir_ / wav).string() + "'",
               *dir_);
  }

  static fs::path* dir_;
  static double onset_;
};

fs::path* CliDetectTest::dir_ = nullptr;
double CliDetectTest::onset_ = -1.0;

TEST_F(CliDetectTest, OverfitModelFindsTheInjectedFiller) {
  ASSERT_TRUE(fs::exists(*dir_ / "one_filler.wav"));
  const RunResult r = Detect("one_filler.wav", "");
  ASSERT_EQ(r.status, 0) << r.stderr_text;
  const auto rows = Lines(ReadAll(*dir_ / "det.csv"));
  ASSERT_EQ(rows.size(), 2u) << ReadAll(*dir_ / "det.csv");
  EXPECT_EQ(rows[0], "clip_id,category,onset_s,duration_s,score");
  const auto f = Fields(rows[1]);
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f[0], "one_filler");
  EXPECT_NEAR(std::stod(f[2]), onset_, 0.1);
}

TEST_F(CliDetectTest, SilenceAndUnitThresholdGiveHeaderOnly) {
  ASSERT_EQ(Detect("silence.wav", "").status, 0);
  EXPECT_EQ(Lines(ReadAll(*dir_ / "det.csv")).size(), 1u);
  ASSERT_EQ(Detect("one_filler.wav", "--threshold 1.0").status, 0);
  EXPECT_EQ(Lines(ReadAll(*dir_ / "det.csv")).size(), 1u);
}

TEST_F(CliDetectTest, UnreadableInputs) {
  std::ofstream(*dir_ / "junk.wav") << "not audio";
  const RunResult partial =
      RunCli("detect --checkpoint '" + (*dir_ / "run" / "final.bin").string() +
              "' --out '" + (*dir_ / "mixed.csv").string() + "' '" +
              (*dir_ / "junk.wav").string() + "' '" +
              (*dir_ / "one_filler.wav").string() + "'",
          *dir_);
  EXPECT_EQ(partial.status, 0);
  EXPECT_NE(partial.stderr_text.find("warning"), std::string::npos);
  EXPECT_EQ(Lines(ReadAll(*dir_ / "mixed.csv")).size(), 2u);

  fs::remove(*dir_ / "det.csv");
  const RunResult all_bad = Detect("junk.wav", "");
  EXPECT_NE(all_bad.status, 0);
}

}  // namespace
}  // namespace fillerspot
