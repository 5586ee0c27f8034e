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

#ifndef SEGAGG_EVALUATION_HPP_
#define SEGAGG_EVALUATION_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segagg/corpus.hpp"
#include "segagg/model.hpp"
#include "segagg/rng.hpp"
#include "segagg/segmentation.hpp"

namespace segagg {

// How a model turns an utterance crop into one embedding at inference time.
// Segmented systems run the segment-and-aggregate pipeline; plain systems
// embed the whole crop as a single (zero-padded to a valid length) segment.
struct InferenceSettings {
  bool segmented = false;
  SegmentSpec spec;  // used when segmented
  double pre_emphasis = 0.97;
};

struct TrialPair {
  int64_t enrol_index = 0;
  int64_t test_index = 0;
  bool is_target = false;
};

struct ScoreSet {
  std::vector<double> target_scores;
  std::vector<double> impostor_scores;
};

struct EerResult {
  double eer_percent = 0.0;
  double threshold = 0.0;
};

// Balanced target/impostor pairs over the given utterances, no self-pairs,
// deterministic for a fixed rng. count == 0 enumerates every unordered pair.
std::vector<TrialPair> build_trial_pairs(
    const std::vector<LoadedUtterance>& utterances, int64_t count, Rng& rng);

// Crops to `duration` (zero-padding short inputs), pre-emphasizes, segments
// per the settings, embeds and aggregates. Runs without recording gradients.
std::vector<double> embed_utterance(Model& model,
                                    const InferenceSettings& settings,
                                    std::span<const double> samples,
                                    int64_t duration);

// Scores every trial with the cosine similarity of the two aggregated
// embeddings, in trial order. The enrol side uses enrol_duration, the test
// side test_duration; embeddings are cached per (utterance, duration).
std::vector<double> score_trials(Model& model,
                                 const InferenceSettings& settings,
                                 const std::vector<LoadedUtterance>& utterances,
                                 const std::vector<TrialPair>& trials,
                                 int64_t enrol_duration, int64_t test_duration);

// Splits per-trial scores into target and impostor lists.
ScoreSet split_scores(const std::vector<TrialPair>& trials,
                      const std::vector<double>& scores);

// Equal error rate by exhaustive threshold sweep over score midpoints, with
// linear interpolation between the two operating points bracketing the
// FAR = FRR crossing when no candidate threshold attains it exactly.
EerResult compute_eer(const ScoreSet& scores);

struct EvalCell {
  std::string system;
  double condition_fraction = 1.0;
  int64_t test_duration = 0;
  EerResult eer;
  int64_t num_target = 0;
  int64_t num_impostor = 0;
};

struct EvalReport {
  std::vector<std::string> systems;          // row order
  std::vector<double> condition_fractions;   // column order
  std::vector<EvalCell> cells;               // row-major
};

// CSV grid, EER with four fractional digits: rows = systems, columns =
// duration conditions.
void write_report_csv(const EvalReport& report, const std::string& path);

// One line per trial: "label score" with label 1 for targets. Scores print
// in shortest round-trip form, so equal runs produce identical bytes.
void write_score_dump(const std::vector<TrialPair>& trials,
                      const std::vector<double>& scores,
                      const std::string& path);

// Trial list: "label enrol_path test_path" per line.
void write_trial_list(const std::vector<TrialPair>& trials,
                      const std::vector<LoadedUtterance>& utterances,
                      const std::string& path);

}  // namespace segagg

#endif  // SEGAGG_EVALUATION_HPP_
