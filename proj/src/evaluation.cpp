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

#include "segagg/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "segagg/ops.hpp"
#include "segagg/training.hpp"

namespace segagg {
namespace {

std::string format_double(double value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

}  // namespace

std::vector<TrialPair> build_trial_pairs(
    const std::vector<LoadedUtterance>& utterances, int64_t count, Rng& rng) {
  const int64_t n = static_cast<int64_t>(utterances.size());
  std::vector<std::pair<int64_t, int64_t>> target_pool;
  std::vector<std::pair<int64_t, int64_t>> impostor_pool;
  for (int64_t a = 0; a < n; ++a) {
    for (int64_t b = a + 1; b < n; ++b) {
      if (utterances[a].speaker_id == utterances[b].speaker_id) {
        target_pool.emplace_back(a, b);
      } else {
        impostor_pool.emplace_back(a, b);
      }
    }
  }
  if (target_pool.empty() || impostor_pool.empty()) {
    throw std::invalid_argument(
        "build_trial_pairs: need >= 2 speakers with >= 2 utterances each");
  }

  std::vector<TrialPair> trials;
  auto push = [&trials](const std::pair<int64_t, int64_t>& pair, bool target) {
    trials.push_back({pair.first, pair.second, target});
  };
  if (count == 0) {
    for (const auto& p : target_pool) push(p, true);
    for (const auto& p : impostor_pool) push(p, false);
    return trials;
  }
  const int64_t per_side = std::max<int64_t>(1, count / 2);
  for (int64_t i = 0; i < per_side; ++i) {
    push(target_pool[rng.uniform_int(0, static_cast<int64_t>(target_pool.size()) - 1)],
         true);
  }
  for (int64_t i = 0; i < per_side; ++i) {
    push(impostor_pool[rng.uniform_int(0, static_cast<int64_t>(impostor_pool.size()) - 1)],
         false);
  }
  return trials;
}

std::vector<double> embed_utterance(Model& model,
                                    const InferenceSettings& settings,
                                    std::span<const double> samples,
                                    int64_t duration) {
  if (duration < 1) throw std::invalid_argument("embed_utterance: empty crop");
  std::vector<double> crop(duration, 0.0);
  const int64_t take = std::min<int64_t>(duration, static_cast<int64_t>(samples.size()));
  std::copy(samples.begin(), samples.begin() + take, crop.begin());
  const std::vector<double> emphasized = pre_emphasize(crop, settings.pre_emphasis);

  NoGradGuard guard;
  SegmentSpec spec = settings.spec;
  if (!settings.segmented) {
    // Plain systems embed the whole crop as one segment, zero-padded up to
    // the next valid input length.
    const int64_t factor = model.config().downsampling_factor();
    spec.segment_length = (duration + factor - 1) / factor * factor;
    spec.overlap = 0;
  }
  const SegmentSet set = segment(emphasized, spec);
  std::vector<Tensor> embeddings;
  embeddings.reserve(set.count());
  for (const auto& seg : set.segments) {
    embeddings.push_back(model.forward_embedding(waveform_batch({seg}), false));
  }
  const Tensor aggregated = aggregate(embeddings);
  return std::vector<double>(aggregated.values().begin(), aggregated.values().end());
}

namespace {

double cosine_of(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw std::runtime_error("zero-norm embedding");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::vector<double> score_trials(Model& model,
                                 const InferenceSettings& settings,
                                 const std::vector<LoadedUtterance>& utterances,
                                 const std::vector<TrialPair>& trials,
                                 int64_t enrol_duration, int64_t test_duration) {
  std::map<std::pair<int64_t, int64_t>, std::vector<double>> cache;
  auto embedding_for = [&](int64_t index, int64_t duration)
      -> const std::vector<double>& {
    const auto key = std::make_pair(index, duration);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, embed_utterance(model, settings,
                                              utterances[index].samples, duration))
               .first;
    }
    return it->second;
  };

  std::vector<double> scores;
  scores.reserve(trials.size());
  for (size_t i = 0; i < trials.size(); ++i) {
    const TrialPair& trial = trials[i];
    try {
      const auto& enrol = embedding_for(trial.enrol_index, enrol_duration);
      const auto& test = embedding_for(trial.test_index, test_duration);
      scores.push_back(cosine_of(enrol, test));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("score_trials: trial " + std::to_string(i) + " (" +
                               utterances[trial.enrol_index].relative_path + " vs " +
                               utterances[trial.test_index].relative_path +
                               "): " + e.what());
    }
  }
  return scores;
}

ScoreSet split_scores(const std::vector<TrialPair>& trials,
                      const std::vector<double>& scores) {
  if (trials.size() != scores.size()) {
    throw std::invalid_argument("split_scores: trial/score count mismatch");
  }
  ScoreSet set;
  for (size_t i = 0; i < trials.size(); ++i) {
    (trials[i].is_target ? set.target_scores : set.impostor_scores)
        .push_back(scores[i]);
  }
  return set;
}

EerResult compute_eer(const ScoreSet& scores) {
  if (scores.target_scores.empty() || scores.impostor_scores.empty()) {
    throw std::invalid_argument("compute_eer: both score lists must be non-empty");
  }
  std::vector<double> targets = scores.target_scores;
  std::vector<double> impostors = scores.impostor_scores;
  std::sort(targets.begin(), targets.end());
  std::sort(impostors.begin(), impostors.end());

  std::vector<double> pooled;
  pooled.reserve(targets.size() + impostors.size());
  pooled.insert(pooled.end(), targets.begin(), targets.end());
  pooled.insert(pooled.end(), impostors.begin(), impostors.end());
  std::sort(pooled.begin(), pooled.end());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

  // Candidate thresholds: below all scores, midpoints of adjacent distinct
  // scores, above all scores. FAR falls from 1 to 0 and FRR rises from 0 to
  // 1 across this sweep, so FAR - FRR crosses zero exactly once.
  std::vector<double> thresholds;
  thresholds.reserve(pooled.size() + 1);
  thresholds.push_back(pooled.front() - 1.0);
  for (size_t i = 0; i + 1 < pooled.size(); ++i) {
    thresholds.push_back(0.5 * (pooled[i] + pooled[i + 1]));
  }
  thresholds.push_back(pooled.back() + 1.0);

  const double n_t = static_cast<double>(targets.size());
  const double n_i = static_cast<double>(impostors.size());
  auto far_at = [&](double threshold) {
    const auto it = std::lower_bound(impostors.begin(), impostors.end(), threshold);
    return static_cast<double>(impostors.end() - it) / n_i;  // score >= threshold
  };
  auto frr_at = [&](double threshold) {
    const auto it = std::lower_bound(targets.begin(), targets.end(), threshold);
    return static_cast<double>(it - targets.begin()) / n_t;  // score < threshold
  };

  double prev_far = 0.0, prev_frr = 0.0, prev_threshold = 0.0;
  bool have_prev = false;
  for (double threshold : thresholds) {
    const double far = far_at(threshold);
    const double frr = frr_at(threshold);
    if (far == frr) {
      // Exact crossing; the sweep visits thresholds in increasing order, so
      // the first hit is the lowest such threshold.
      return {100.0 * 0.5 * (far + frr), threshold};
    }
    if (have_prev && prev_far > prev_frr && far < frr) {
      // Interpolate between the bracketing operating points.
      const double d0 = prev_far - prev_frr;
      const double d1 = far - frr;
      const double t = d0 / (d0 - d1);
      const double eer = prev_far + t * (far - prev_far);
      return {100.0 * eer, prev_threshold + t * (threshold - prev_threshold)};
    }
    prev_far = far;
    prev_frr = frr;
    prev_threshold = threshold;
    have_prev = true;
  }
  throw std::logic_error("compute_eer: no FAR/FRR crossing found");
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  if (report.cells.empty()) {
    throw std::invalid_argument("write_report_csv: empty report");
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_report_csv: cannot open " + path);
  os << "system";
  for (double fraction : report.condition_fractions) {
    char label[32];
    std::snprintf(label, sizeof(label), "eer_at_%.2f", fraction);
    os << "," << label;
  }
  os << "\n";
  const size_t columns = report.condition_fractions.size();
  for (size_t r = 0; r < report.systems.size(); ++r) {
    os << report.systems[r];
    for (size_t c = 0; c < columns; ++c) {
      char value[32];
      std::snprintf(value, sizeof(value), "%.4f",
                    report.cells[r * columns + c].eer.eer_percent);
      os << "," << value;
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("write_report_csv: write failed for " + path);
}

void write_score_dump(const std::vector<TrialPair>& trials,
                      const std::vector<double>& scores,
                      const std::string& path) {
  if (trials.size() != scores.size()) {
    throw std::invalid_argument("write_score_dump: trial/score count mismatch");
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_score_dump: cannot open " + path);
  for (size_t i = 0; i < trials.size(); ++i) {
    os << (trials[i].is_target ? 1 : 0) << " " << format_double(scores[i]) << "\n";
  }
  if (!os) throw std::runtime_error("write_score_dump: write failed for " + path);
}

void write_trial_list(const std::vector<TrialPair>& trials,
                      const std::vector<LoadedUtterance>& utterances,
                      const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_trial_list: cannot open " + path);
  for (const TrialPair& trial : trials) {
    os << (trial.is_target ? 1 : 0) << " "
       << utterances[trial.enrol_index].relative_path << " "
       << utterances[trial.test_index].relative_path << "\n";
  }
  if (!os) throw std::runtime_error("write_trial_list: write failed for " + path);
}

}  // namespace segagg
