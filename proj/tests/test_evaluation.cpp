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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "segagg/evaluation.hpp"
#include "segagg/training.hpp"
#include "eer_oracle.hpp"
#include "test_util.hpp"

using namespace segagg;
namespace fs = std::filesystem;

namespace {

std::vector<LoadedUtterance> synth_split(int speakers, int utts, int64_t duration,
                                         uint64_t seed, int first_id = 100) {
  std::vector<LoadedUtterance> split;
  const VoiceConfig voice;
  for (int s = 0; s < speakers; ++s) {
    const SpeakerProfile profile = make_speaker(seed, first_id + s, voice);
    for (int u = 0; u < utts; ++u) {
      LoadedUtterance utt;
      utt.speaker_id = first_id + s;
      utt.relative_path =
          "spk" + std::to_string(first_id + s) + "/u" + std::to_string(u);
      utt.samples =
          synth_utterance(profile, seed * 131 + s * 17 + u, duration, 4000).samples;
      split.push_back(std::move(utt));
    }
  }
  return split;
}

ModelConfig tiny_config(int64_t heads) {
  ModelConfig config;
  config.input_length = 108;
  config.first_conv_channels = 4;
  config.block_groups = {{1, 6}};
  config.gru_hidden = 6;
  config.embedding_dim = 6;
  config.num_speakers = 3;
  config.num_segment_output_layers = heads;
  return config;
}

}  // namespace

// ------------------------------------------------------------ compute_eer --

TEST_CASE("perfect separation yields zero EER") {
  const ScoreSet scores{{0.9, 0.8}, {0.7, 0.1}};
  const EerResult result = compute_eer(scores);
  CHECK(result.eer_percent == 0.0);
  CHECK(result.threshold > 0.7);
  CHECK(result.threshold <= 0.8);
}

TEST_CASE("brute-force sweep example: EER one third") {
  const ScoreSet scores{{0.9, 0.8, 0.4}, {0.5, 0.2, 0.1}};
  const EerResult result = compute_eer(scores);
  CHECK(result.eer_percent == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
  CHECK(result.threshold > 0.4);
  CHECK(result.threshold <= 0.5);
}

TEST_CASE("mirrored score sets have the same EER") {
  // Swapping the lists of a score set mirrored around its midpoint leaves
  // the error rate unchanged.
  const std::vector<double> targets = {0.8, 0.6, 0.3};
  const std::vector<double> impostors = {0.7, 0.4, 0.2};
  const double base = compute_eer({targets, impostors}).eer_percent;
  std::vector<double> mirrored_targets, mirrored_impostors;
  for (double s : impostors) mirrored_targets.push_back(1.0 - s);
  for (double s : targets) mirrored_impostors.push_back(1.0 - s);
  const double mirrored =
      compute_eer({mirrored_targets, mirrored_impostors}).eer_percent;
  CHECK(base == doctest::Approx(mirrored).epsilon(1e-12));
}

TEST_CASE("compute_eer rejects empty lists") {
  CHECK_THROWS_AS(compute_eer({{}, {0.1}}), std::invalid_argument);
  CHECK_THROWS_AS(compute_eer({{0.1}, {}}), std::invalid_argument);
}

TEST_CASE("compute_eer matches the exhaustive oracle on 200 random sets") {
  Rng rng(401);
  for (int instance = 0; instance < 200; ++instance) {
    const int64_t n_targets = rng.uniform_int(1, 100);
    const int64_t n_impostors = rng.uniform_int(1, 100);
    std::vector<double> targets(n_targets), impostors(n_impostors);
    // A mild separation plus heavy overlap; occasional exact duplicates.
    for (double& s : targets) s = rng.uniform(-0.5, 1.0);
    for (double& s : impostors) s = rng.uniform(-1.0, 0.5);
    if (instance % 5 == 0 && n_targets > 1 && n_impostors > 1) {
      targets[0] = impostors[0];  // force a pooled duplicate
      targets[1] = targets[0];
    }
    const EerResult expected = test::eer_oracle(targets, impostors);
    const EerResult actual = compute_eer({targets, impostors});
    CHECK(actual.eer_percent == expected.eer_percent);
    CHECK(actual.threshold == expected.threshold);
    CHECK(actual.eer_percent >= 0.0);
    CHECK(actual.eer_percent <= 100.0);
  }
}

TEST_CASE("EER is invariant under strictly increasing monotone transforms") {
  Rng rng(409);
  for (int instance = 0; instance < 30; ++instance) {
    std::vector<double> targets(20), impostors(25);
    for (double& s : targets) s = rng.uniform(-1.0, 1.0);
    for (double& s : impostors) s = rng.uniform(-1.0, 1.0);
    const double base = compute_eer({targets, impostors}).eer_percent;
    auto transform = [](double s) { return std::exp(2.0 * s) + s; };
    for (double& s : targets) s = transform(s);
    for (double& s : impostors) s = transform(s);
    const double mapped = compute_eer({targets, impostors}).eer_percent;
    CHECK(base == doctest::Approx(mapped).epsilon(1e-12));
  }
}

TEST_CASE("identical target and impostor scores give 50% EER") {
  const ScoreSet scores{{0.5, 0.5}, {0.5, 0.5}};
  CHECK(compute_eer(scores).eer_percent == doctest::Approx(50.0).epsilon(1e-12));
}

// ------------------------------------------------------------ trial pairs --

TEST_CASE("exhaustive trials on 2 speakers x 2 utterances: 2 + 4 pairs") {
  const auto utts = synth_split(2, 2, 64, 5);
  Rng rng(1);
  const auto trials = build_trial_pairs(utts, 0, rng);
  int64_t targets = 0, impostors = 0;
  for (const TrialPair& t : trials) (t.is_target ? targets : impostors) += 1;
  CHECK(targets == 2);
  CHECK(impostors == 4);
}

TEST_CASE("trial sampling is balanced, deterministic and self-pair free") {
  const auto utts = synth_split(3, 4, 64, 6);
  Rng a(77), b(77);
  const auto first = build_trial_pairs(utts, 40, a);
  const auto second = build_trial_pairs(utts, 40, b);
  REQUIRE(first.size() == second.size());
  REQUIRE(first.size() == 40);
  int64_t targets = 0;
  for (size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].enrol_index == second[i].enrol_index);
    CHECK(first[i].test_index == second[i].test_index);
    CHECK(first[i].is_target == second[i].is_target);
    CHECK(first[i].enrol_index != first[i].test_index);
    const bool same_speaker = utts[first[i].enrol_index].speaker_id ==
                              utts[first[i].test_index].speaker_id;
    CHECK(same_speaker == first[i].is_target);
    targets += first[i].is_target ? 1 : 0;
  }
  CHECK(targets == 20);
}

TEST_CASE("trial building fails without enough speakers or utterances") {
  const auto one_speaker = synth_split(1, 4, 64, 7);
  Rng rng(1);
  CHECK_THROWS_AS(build_trial_pairs(one_speaker, 10, rng), std::invalid_argument);
  const auto single_utts = synth_split(3, 1, 64, 8);
  CHECK_THROWS_AS(build_trial_pairs(single_utts, 10, rng), std::invalid_argument);
}

// ---------------------------------------------------------- score_trials --

TEST_CASE("identical audio on both sides scores 1") {
  Model model = Model::build(tiny_config(0), 3);
  auto utts = synth_split(2, 2, 120, 9);
  utts[1].samples = utts[0].samples;  // same audio, same speaker
  {
    Rng rng(4);
    std::vector<std::vector<double>> warm;
    warm.push_back(utts[0].samples);
    warm[0].resize(108);
    warm.push_back(utts[2].samples);
    warm[1].resize(108);
    model.forward_embedding(waveform_batch(warm), true);
  }
  InferenceSettings settings;
  settings.segmented = false;
  settings.pre_emphasis = 0.97;
  const std::vector<TrialPair> trials = {{0, 1, true}};
  const auto scores = score_trials(model, settings, utts, trials, 108, 108);
  REQUIRE(scores.size() == 1);
  CHECK(std::fabs(scores[0] - 1.0) < 1e-9);
}

TEST_CASE("scores stay within the cosine range and are symmetric") {
  Model model = Model::build(tiny_config(2), 5);
  const auto utts = synth_split(3, 3, 150, 11);
  {
    std::vector<std::vector<double>> warm;
    for (int i = 0; i < 2; ++i) {
      auto row = utts[i].samples;
      row.resize(108);
      warm.push_back(std::move(row));
    }
    model.forward_embedding(waveform_batch(warm), true);
  }
  InferenceSettings settings;
  settings.segmented = true;
  settings.spec = SegmentSpec{54, 5};
  settings.pre_emphasis = 0.97;

  Rng rng(12);
  const auto trials = build_trial_pairs(utts, 20, rng);
  const auto scores = score_trials(model, settings, utts, trials, 108, 108);
  for (double s : scores) {
    CHECK(s >= -1.0 - 1e-12);
    CHECK(s <= 1.0 + 1e-12);
  }

  // Swapping enrol and test sides under equal durations keeps the score.
  std::vector<TrialPair> swapped = trials;
  for (TrialPair& t : swapped) std::swap(t.enrol_index, t.test_index);
  const auto swapped_scores = score_trials(model, settings, utts, swapped, 108, 108);
  for (size_t i = 0; i < scores.size(); ++i) {
    CHECK(scores[i] == doctest::Approx(swapped_scores[i]).epsilon(1e-12));
  }
}

TEST_CASE("segmented scoring uses the closed-form segment count per side") {
  Model model = Model::build(tiny_config(3), 7);
  {
    Rng rng(8);
    std::vector<std::vector<double>> warm(2, std::vector<double>(54));
    for (auto& row : warm) {
      for (double& v : row) v = rng.uniform(-0.9, 0.9);
    }
    model.forward_embedding(waveform_batch(warm), true);
  }
  InferenceSettings settings;
  settings.segmented = true;
  settings.spec = SegmentSpec{54, 0};
  settings.pre_emphasis = 0.0;

  // Quarter-length condition: duration 27 < segment 54 means one padded
  // segment; full length 108 means exactly segment_count(108) = 2.
  const auto utts = synth_split(2, 2, 108, 13);
  CHECK(segment_count(27, settings.spec) == 1);
  CHECK(segment_count(108, settings.spec) == 2);
  const std::vector<double> quarter =
      embed_utterance(model, settings, utts[0].samples, 27);
  const std::vector<double> full =
      embed_utterance(model, settings, utts[0].samples, 108);
  CHECK(quarter.size() == 6);
  CHECK(full.size() == 6);
}

// --------------------------------------------------------------- file IO --

TEST_CASE("report CSV values round-trip as four-digit decimal text") {
  const fs::path dir = "evaluation_scratch";
  fs::remove_all(dir);
  fs::create_directories(dir);

  EvalReport report;
  report.systems = {"baseline_best", "sa_best"};
  report.condition_fractions = {1.0, 0.25};
  for (const std::string& system : report.systems) {
    for (double fraction : report.condition_fractions) {
      EvalCell cell;
      cell.system = system;
      cell.condition_fraction = fraction;
      cell.eer.eer_percent = system == "sa_best" ? 12.3456789 : 20.41;
      report.cells.push_back(cell);
    }
  }
  const std::string path = (dir / "report.csv").string();
  write_report_csv(report, path);

  std::ifstream is(path);
  std::string header, row1, row2;
  std::getline(is, header);
  std::getline(is, row1);
  std::getline(is, row2);
  CHECK(header == "system,eer_at_1.00,eer_at_0.25");
  CHECK(row1 == "baseline_best,20.4100,20.4100");
  CHECK(row2 == "sa_best,12.3457,12.3457");

  // Re-parsing and re-printing the grid values is bit-exact.
  std::stringstream cell(row2.substr(row2.find(',') + 1));
  std::string token;
  while (std::getline(cell, token, ',')) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", std::stod(token));
    CHECK(token == buf);
  }
}

TEST_CASE("single-cell report is a two-line file") {
  const fs::path dir = "evaluation_scratch";
  fs::create_directories(dir);
  EvalReport report;
  report.systems = {"only"};
  report.condition_fractions = {1.0};
  EvalCell cell;
  cell.system = "only";
  cell.eer.eer_percent = 5.0;
  report.cells.push_back(cell);
  const std::string path = (dir / "single.csv").string();
  write_report_csv(report, path);
  std::ifstream is(path);
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 2);
}

TEST_CASE("score dumps and trial lists use the documented line formats") {
  const fs::path dir = "evaluation_scratch";
  fs::create_directories(dir);
  const auto utts = synth_split(2, 2, 64, 21);
  const std::vector<TrialPair> trials = {{0, 1, true}, {0, 2, false}};
  const std::vector<double> scores = {0.75, -0.125};

  const std::string dump_path = (dir / "scores.txt").string();
  write_score_dump(trials, scores, dump_path);
  std::ifstream dump(dump_path);
  std::string line1, line2;
  std::getline(dump, line1);
  std::getline(dump, line2);
  CHECK(line1 == "1 0.75");
  CHECK(line2 == "0 -0.125");

  const std::string list_path = (dir / "trials.txt").string();
  write_trial_list(trials, utts, list_path);
  std::ifstream list(list_path);
  std::getline(list, line1);
  std::getline(list, line2);
  CHECK(line1 == "1 " + utts[0].relative_path + " " + utts[1].relative_path);
  CHECK(line2 == "0 " + utts[0].relative_path + " " + utts[2].relative_path);
}
