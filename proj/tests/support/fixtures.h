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

// Random inputs shared by the unit and acceptance tests.

#ifndef FILLERSPOT_TESTS_SUPPORT_FIXTURES_H_
#define FILLERSPOT_TESTS_SUPPORT_FIXTURES_H_

#include <Eigen/Dense>

#include "fillerspot/objective.h"
#include "fillerspot/random.h"
#include "fillerspot/targets.h"
#include "fillerspot/trainer.h"

namespace fillerspot::testing {

// A structurally valid target: Y = 1 exactly at keypoints, shoulders in
// [0, 0.99), length/offset set only at keypoint frames.
inline TargetTensor RandomTarget(Rng& rng, int frames, int categories,
                                 double keypoint_rate = 0.15) {
  TargetTensor t;
  t.heatmap.resize(frames, categories);
  t.keypoint_mask = BoolMatrix::Constant(frames, categories, false);
  t.length = Eigen::VectorXd::Zero(frames);
  t.offset = Eigen::VectorXd::Zero(frames);
  t.num_keypoints = 0;
  for (int f = 0; f < frames; ++f) {
    for (int c = 0; c < categories; ++c) {
      if (rng.Uniform() < keypoint_rate) {
        t.heatmap(f, c) = 1.0;
        t.keypoint_mask(f, c) = true;
        ++t.num_keypoints;
        t.length(f) = rng.Uniform(0.1, 0.6);
        t.offset(f) = rng.Uniform(0.0, 0.99);
      } else {
        t.heatmap(f, c) = rng.Uniform() < 0.5 ? 0.0 : rng.Uniform(0.0, 0.99);
      }
    }
  }
  return t;
}

inline Eigen::MatrixXd RandomProbabilities(Rng& rng, int rows, int cols,
                                           double lo = 0.05,
                                           double hi = 0.95) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Uniform(lo, hi);
  return m;
}

// A config small enough to train in seconds: 2 s clips at 8 kHz, a narrow
// trunk, and the smoke-test mining schedule (start 10, every 5, h = 2).
inline Config TinyConfig(int clips = 16, uint64_t seed = 1) {
  Config c = DeskConfig();
  c.synth = DefaultSynthSpec(clips, seed);
  c.synth.sample_rate = c.frontend.sample_rate;
  c.synth.clip_seconds = 2.0;
  c.synth.words_per_clip = {2, 3};
  c.split = {0.5, 0.25, 0.25};
  c.model.stem_channels = 4;
  c.model.blocks2d = 0;
  c.model.trunk_width = 16;
  c.model.blocks = 2;
  c.train.total_epochs = 30;
  c.train.lr_drop_epochs = {20, 25};
  c.train.batch_size = 4;
  c.train.window_s = 2.0;
  c.train.eval_every = 5;
  c.train.seed = seed;
  c.train.schedule = {10, 5, 2, 3};
  c.train.augment.enabled = false;
  c.Finalize();
  return c;
}

// Clean, short clips trained long enough to memorize: the overfit probe.
inline Config OverfitConfig(int clips = 8, uint64_t seed = 4) {
  Config c = TinyConfig(clips, seed);
  c.synth.noise_snr_db = 30.0;
  c.split = {1.0, 0.0, 0.0};
  c.train.total_epochs = 80;
  c.train.lr_drop_epochs = {60};
  c.train.eval_every = 80;
  c.train.batch_size = 2;
  c.train.schedule.h = 0;
  c.Finalize();
  return c;
}

inline CorpusSplit TinyData(const Config& c) {
  return SplitCorpus(GenerateSynth(c.synth), c.split, c.synth.seed);
}

}  // namespace fillerspot::testing

#endif  // FILLERSPOT_TESTS_SUPPORT_FIXTURES_H_
