// Copyright (c) 2026 segagg authors
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

#ifndef SEGAGG_CONFIG_HPP_
#define SEGAGG_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace segagg {

// Experiment configuration, read from line-oriented "section.key = value"
// text. '#' starts a comment line; unknown keys are rejected. Parsing then
// serializing then parsing again yields an identical configuration.
struct ExperimentConfig {
  struct Corpus {
    std::string dir = "data/corpus";
    uint64_t seed = 1;
    int sample_rate = 4000;
    int train_speakers = 20;
    int val_speakers = 5;
    int test_speakers = 8;
    int utterances_per_speaker = 10;
    int64_t duration_min = 8000;
    int64_t duration_max = 16000;
    double f0_min = 80.0;
    double f0_max = 300.0;
    int harmonics = 8;
    double noise_min = 0.01;
    double noise_max = 0.12;
    bool operator==(const Corpus&) const = default;
  } corpus;

  struct ModelSection {
    uint64_t seed = 7;
    int64_t input_length = 6561;
    int64_t first_conv_channels = 16;
    std::string block_groups = "2x16,4x32";
    int64_t gru_hidden = 32;
    int64_t embedding_dim = 32;
    // 0 derives the speaker count from corpus.train_speakers.
    int64_t num_speakers = 0;
    double leaky_slope = 0.3;
    bool operator==(const ModelSection&) const = default;
  } model;

  struct Training {
    std::string regime = "sa";
    // Negative selects the regime default (0.2 for sa, 1.0 for sa_ts).
    double segment_loss_weight = -1.0;
    std::string segment_policy = "fixed";  // fixed | random
    int64_t segment_length = 2187;
    int64_t segment_min = 2187;
    int64_t segment_max = 6561;
    double overlap_fraction = 0.1;
    int64_t batch_size = 8;
    int64_t steps = 600;
    double learning_rate = 0.001;
    double weight_decay = 1e-4;
    double pre_emphasis = 0.97;
    uint64_t seed = 11;
    int64_t val_interval = 100;
    int64_t val_trials = 100;
    // Empty means <checkpoint_dir>/baseline_best.ckpt for the sa_ts regime.
    std::string teacher_checkpoint;
    std::string checkpoint_dir = "runs/desk";
    bool operator==(const Training&) const = default;
  } training;

  struct Eval {
    std::string conditions = "1.0,0.75,0.5,0.25";  // fractions of the crop
    int64_t trials_per_condition = 200;
    int64_t segment_length = 2187;
    uint64_t seed = 23;
    std::string report_path = "runs/desk/report.csv";
    std::string scores_dir = "runs/desk/scores";
    bool operator==(const Eval&) const = default;
  } eval;

  struct Runtime {
    int threads = 0;  // 0 = hardware concurrency
    bool operator==(const Runtime&) const = default;
  } runtime;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_text(const ExperimentConfig& config);

std::vector<double> parse_double_list(const std::string& text);

}  // namespace segagg

#endif  // SEGAGG_CONFIG_HPP_
