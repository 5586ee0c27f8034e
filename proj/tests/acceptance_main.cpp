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

// Acceptance suite. Runs every acceptance criterion at its stated tolerance
// and prints one [PASS]/[FAIL] line per criterion.
//
// Usage: acceptance --cli <segagg binary> --workdir <scratch dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "eer_oracle.hpp"
#include "segagg/commands.hpp"
#include "segagg/config.hpp"
#include "segagg/evaluation.hpp"
#include "segagg/model.hpp"
#include "segagg/ops.hpp"
#include "segagg/segmentation.hpp"
#include "segagg/synthdata.hpp"
#include "segagg/thread_pool.hpp"
#include "segagg/training.hpp"
#include "test_util.hpp"

using namespace segagg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// ----------------------------------------------------- trend experiment --
// Budgets for the 5-seed trend run; identical for every system of a seed.
constexpr int kTrendSeeds = 5;
constexpr int64_t kTrendSteps = 1000;
constexpr int64_t kTrendBatch = 8;
constexpr int64_t kTrendSegmentLength = 2187;
constexpr double kTrendOverlap = 0.1;
constexpr int64_t kTrendValInterval = 250;
constexpr int64_t kTrendValTrials = 64;
constexpr int64_t kTrendEvalTrials = 200;
// Utterance durations include files shorter than the crop, so training
// batches contain zero-padded crops and short-condition padding is
// in-distribution for both systems.
constexpr int64_t kTrendDurationMin = 4000;
constexpr int64_t kTrendDurationMax = 16000;
// Stated budget: 30 minutes on a commodity 8-core CPU. On hosts with fewer
// cores the bound is extrapolated by the missing parallelism.
constexpr double kTrendBudgetSeconds8Core = 1800.0;

struct CheckFailure {
  std::string message;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw CheckFailure{message};
}

std::string format_eer(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

ModelConfig tiny_model_config(int64_t segment_heads) {
  ModelConfig config;
  config.input_length = 108;
  config.first_conv_channels = 4;
  config.block_groups = {{1, 6}};
  config.gru_hidden = 6;
  config.embedding_dim = 6;
  config.num_speakers = 3;
  config.num_segment_output_layers = segment_heads;
  return config;
}

std::vector<std::vector<double>> random_rows(Rng& rng, int64_t batch,
                                             int64_t length) {
  std::vector<std::vector<double>> rows(batch);
  for (auto& row : rows) {
    row.resize(length);
    for (double& v : row) v = rng.uniform(-0.9, 0.9);
  }
  return rows;
}

void copy_shared_state(Model& from, Model& to) {
  std::map<std::string, std::vector<double>> params;
  from.visit_parameters([&](const std::string& name, Tensor& p) {
    params.emplace(name, std::vector<double>(p.values().begin(), p.values().end()));
  });
  to.visit_parameters([&](const std::string& name, Tensor& p) {
    const auto it = params.find(name);
    if (it != params.end()) {
      std::copy(it->second.begin(), it->second.end(), p.values().begin());
    }
  });
  std::map<std::string, BatchNormState> states;
  from.visit_batchnorm([&](const std::string& name, BatchNormState& s) {
    states.emplace(name, s);
  });
  to.visit_batchnorm([&](const std::string& name, BatchNormState& s) {
    s = states.at(name);
  });
}

// --------------------------------------------------------- criterion 1 --

bool note_full_scale(std::ostream& out) {
  out << "  full-scale EER numbers (20.41% -> 11.15% at the 1 s condition;\n"
         "  3.15% full-length) need the original training corpus and are out\n"
         "  of scope at desk scale; the trend criterion is the substitute.\n";
  return true;
}

// --------------------------------------------------------- criterion 2 --

bool gradient_correctness(std::ostream& out) {
  constexpr int kInstances = 20;
  constexpr double kRelTol = 1e-4;
  constexpr double kStep = 1e-5;
  Rng rng(20260101);

  auto expect_ok = [&](const char* what, const test::GradCheckResult& result) {
    require(result.ok, std::string(what) + ": gradient mismatch, " + result.worst);
  };

  for (int i = 0; i < kInstances; ++i) {
    {
      const int64_t stride = rng.uniform_int(1, 3);
      const int64_t padding = rng.uniform_int(0, 2);
      Tensor x = test::random_tensor(rng, {2, 2, 9});
      Tensor w = test::random_tensor(rng, {3, 2, 3});
      auto forward = [&] { return sum(mul(conv1d(x, w, stride, padding),
                                          conv1d(x, w, stride, padding))); };
      expect_ok("conv1d", test::check_gradients(forward, {x, w}, kRelTol, kStep));
    }
    {
      Tensor x = test::random_tensor(rng, {2, 2, 12});
      auto forward = [&] { return sum(mul(maxpool1d(x, 3), maxpool1d(x, 3))); };
      expect_ok("maxpool1d", test::check_gradients(forward, {x}, kRelTol, kStep));
    }
    {
      Tensor x = test::random_tensor(rng, {3, 2, 4});
      Tensor gamma = test::random_tensor(rng, {2}, true, 0.5, 1.5);
      Tensor beta = test::random_tensor(rng, {2}, true, -0.5, 0.5);
      const bool training = i % 2 == 0;
      BatchNormState warm;
      batchnorm1d(x, gamma, beta, warm, true);
      auto forward = [&] {
        BatchNormState state = warm;
        return sum(mul(batchnorm1d(x, gamma, beta, state, training),
                       batchnorm1d(x, gamma, beta, state, training)));
      };
      expect_ok("batchnorm1d",
                test::check_gradients(forward, {x, gamma, beta}, kRelTol, kStep));
    }
    {
      Tensor x = test::random_tensor(rng, {4, 5});
      auto forward = [&] {
        return sum(mul(leaky_relu(x, 0.3), leaky_relu(x, 0.3)));
      };
      expect_ok("leaky_relu", test::check_gradients(forward, {x}, kRelTol, kStep));
    }
    {
      GruParams p;
      p.weight_update_x = test::random_tensor(rng, {3, 2});
      p.weight_update_h = test::random_tensor(rng, {3, 3});
      p.bias_update = test::random_tensor(rng, {3});
      p.weight_reset_x = test::random_tensor(rng, {3, 2});
      p.weight_reset_h = test::random_tensor(rng, {3, 3});
      p.bias_reset = test::random_tensor(rng, {3});
      p.weight_cand_x = test::random_tensor(rng, {3, 2});
      p.weight_cand_h = test::random_tensor(rng, {3, 3});
      p.bias_cand = test::random_tensor(rng, {3});
      Tensor x = test::random_tensor(rng, {2, 3, 2});
      std::vector<Tensor> leaves = {
          p.weight_update_x, p.weight_update_h, p.bias_update,
          p.weight_reset_x,  p.weight_reset_h,  p.bias_reset,
          p.weight_cand_x,   p.weight_cand_h,   p.bias_cand,
          x};
      auto forward = [&] { return sum(mul(gru_forward(x, p), gru_forward(x, p))); };
      expect_ok("gru_forward",
                test::check_gradients(forward, leaves, kRelTol, kStep));
    }
    {
      Tensor x = test::random_tensor(rng, {3, 4});
      Tensor w = test::random_tensor(rng, {5, 4});
      Tensor b = test::random_tensor(rng, {5});
      auto forward = [&] { return sum(tanh_op(linear(x, w, b))); };
      expect_ok("linear", test::check_gradients(forward, {x, w, b}, kRelTol, kStep));
    }
    {
      Tensor logits = test::random_tensor(rng, {4, 6}, true, -2.0, 2.0);
      std::vector<int64_t> labels;
      for (int j = 0; j < 4; ++j) labels.push_back(rng.uniform_int(0, 5));
      auto forward = [&] { return softmax_cce(logits, labels); };
      expect_ok("softmax_cce",
                test::check_gradients(forward, {logits}, kRelTol, kStep));
    }
    {
      Tensor a = test::random_tensor(rng, {5});
      Tensor b = test::random_tensor(rng, {5});
      auto forward = [&] { return cosine_similarity(a, b); };
      expect_ok("cosine_similarity",
                test::check_gradients(forward, {a, b}, kRelTol, kStep));
      Tensor ar = test::random_tensor(rng, {2, 4});
      Tensor br = test::random_tensor(rng, {2, 4});
      auto rows = [&] { return sum(cosine_similarity_rows(ar, br)); };
      expect_ok("cosine_similarity_rows",
                test::check_gradients(rows, {ar, br}, kRelTol, kStep));
    }
  }
  out << "  per-operation gradients: " << kInstances
      << " random instances each, rel tol " << kRelTol << ", step " << kStep
      << "\n";

  // Composite losses through the whole SA pipeline on a small model.
  for (int i = 0; i < kInstances; ++i) {
    Model model = Model::build(tiny_model_config(2), 3000 + i);
    Model teacher_base = Model::build(tiny_model_config(0), 4000 + i);
    Rng data_rng(5000 + i);
    Batch batch;
    batch.waveforms = random_rows(data_rng, 2, 108);
    batch.labels = {static_cast<int64_t>(i % 3), static_cast<int64_t>((i + 1) % 3)};
    teacher_base.forward_embedding(waveform_batch(batch.waveforms), true);
    Model teacher = teacher_base;
    teacher.freeze();

    std::vector<Tensor> leaves;
    model.visit_parameters([&](const std::string&, Tensor& p) { leaves.push_back(p); });

    const SegmentSpec spec{54, 0};
    auto sa_loss = [&] {
      const SaForward forward = sa_forward(model, batch, spec, true);
      return loss_sa(forward.aggregate_logits, forward.segment_logits,
                     batch.labels, 0.2);
    };
    auto sa_result = test::check_gradients(sa_loss, leaves, kRelTol, kStep);
    require(sa_result.ok, "loss_sa composite: " + sa_result.worst);

    auto ts_loss = [&] {
      const SaForward forward = sa_forward(model, batch, spec, true);
      const TsLoss ts = loss_ts(teacher, waveform_batch(batch.waveforms),
                                forward.aggregate_embedding,
                                forward.aggregate_logits);
      return ts.total;
    };
    auto ts_result = test::check_gradients(ts_loss, leaves, kRelTol, kStep);
    require(ts_result.ok, "loss_ts composite: " + ts_result.worst);
  }
  out << "  composite losses (aggregate objective with W=0.2; distillation "
         "with the 1-cos convention): "
      << kInstances << " instances each\n";
  return true;
}

// --------------------------------------------------------- criterion 3 --

bool segmentation_oracle(std::ostream& out) {
  {
    // Worked example: 6 s input, 2 s segments, 1 s overlap -> 5 segments.
    std::vector<double> x(6, 1.0);
    const SegmentSet set = segment(x, SegmentSpec{2, 1});
    require(set.count() == 5, "worked example: expected 5 segments, got " +
                                  std::to_string(set.count()));
    require(set.starts == std::vector<int64_t>({0, 1, 2, 3, 4}),
            "worked example: wrong starts");
  }

  Rng rng(424242);
  for (int i = 0; i < 1000; ++i) {
    const int64_t c = rng.uniform_int(1, 60);
    const int64_t source = rng.uniform_int(1, 500);
    const int64_t overlap = c == 1 ? 0 : rng.uniform_int(0, c - 1);
    const SegmentSpec spec{c, overlap};
    std::vector<double> x(source);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    const SegmentSet set = segment(x, spec);
    require(set.count() >= 1, "empty segmentation");
    for (int64_t k = 0; k + 1 < set.count(); ++k) {
      require(set.starts[k] < set.starts[k + 1], "starts not increasing");
      require(set.starts[k + 1] - set.starts[k] <= spec.hop(),
              "start gap exceeds hop");
    }
    if (source > c) {
      require(set.starts.back() + c == source, "last segment not end-anchored");
      std::vector<bool> covered(source, false);
      for (int64_t start : set.starts) {
        for (int64_t t = start; t < start + c; ++t) covered[t] = true;
      }
      require(std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }),
              "coverage gap");
    } else {
      require(set.count() == 1, "short input must give one segment");
      require(static_cast<int64_t>(set.segments[0].size()) == c,
              "short input not padded to C");
    }
  }
  out << "  worked example yields exactly 5 segments; coverage and "
         "end-anchoring hold on 1000 random (F, C, overlap) triples\n";
  return true;
}

// --------------------------------------------------------- criterion 4 --

bool aggregation_invariants(std::ostream& out) {
  Rng rng(515151);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t k = rng.uniform_int(1, 8);
    const int64_t dim = rng.uniform_int(1, 12);
    std::vector<Tensor> embeddings;
    for (int64_t i = 0; i < k; ++i) {
      embeddings.push_back(test::random_tensor(rng, {dim}, true));
    }

    if (k == 1) {
      const Tensor one = aggregate(embeddings);
      for (int64_t i = 0; i < dim; ++i) {
        require(one.value_at(i) == embeddings[0].value_at(i),
                "K=1 aggregate is not the identity");
      }
    }

    const Tensor base = aggregate(embeddings);
    std::vector<Tensor> shuffled = embeddings;
    for (int64_t i = k - 1; i > 0; --i) {
      std::swap(shuffled[i], shuffled[rng.uniform_int(0, i)]);
    }
    const Tensor permuted = aggregate(shuffled);
    for (int64_t i = 0; i < dim; ++i) {
      require(std::fabs(base.value_at(i) - permuted.value_at(i)) <= 1e-12,
              "aggregate not permutation-invariant within 1e-12");
    }

    Tensor weights = test::random_tensor(rng, {dim}, false);
    auto forward = [&] { return sum(mul(aggregate(embeddings), weights)); };
    const auto check = test::check_gradients(forward, embeddings, 1e-4, 1e-5);
    require(check.ok, "aggregate gradient mismatch: " + check.worst);
    for (Tensor& e : embeddings) e.zero_grad();
    backward(forward());
    for (Tensor& e : embeddings) {
      for (int64_t i = 0; i < dim; ++i) {
        const double expected = weights.value_at(i) / static_cast<double>(k);
        require(std::fabs(e.grad()[i] - expected) <= 1e-12,
                "aggregate fan-out is not exactly 1/K");
      }
    }
  }
  out << "  permutation invariance (1e-12), K=1 identity and exact 1/K "
         "gradient fan-out over 50 random configurations\n";
  return true;
}

// --------------------------------------------------------- criterion 5 --

bool eer_oracle_equivalence(std::ostream& out) {
  {
    const EerResult perfect = compute_eer({{0.9, 0.8}, {0.7, 0.1}});
    require(perfect.eer_percent == 0.0, "perfect separation must give 0%");
  }
  Rng rng(616161);
  for (int i = 0; i < 200; ++i) {
    const int64_t n_targets = rng.uniform_int(1, 100);
    const int64_t n_impostors = rng.uniform_int(1, 100);
    std::vector<double> targets(n_targets), impostors(n_impostors);
    for (double& s : targets) s = rng.uniform(-0.5, 1.0);
    for (double& s : impostors) s = rng.uniform(-1.0, 0.5);
    if (i % 4 == 0 && n_targets > 1) targets[0] = targets[1];
    if (i % 7 == 0) impostors[0] = targets[0];
    const EerResult expected = test::eer_oracle(targets, impostors);
    const EerResult actual = compute_eer({targets, impostors});
    require(actual.eer_percent == expected.eer_percent &&
                actual.threshold == expected.threshold,
            "compute_eer diverges from the exhaustive sweep oracle at set " +
                std::to_string(i));
  }
  out << "  exact agreement with the exhaustive threshold sweep on 200 random "
         "score sets of size <= 100; perfect separation returns 0%\n";
  return true;
}

// --------------------------------------------------------- criterion 6 --

bool loss_reductions(std::ostream& out) {
  Rng rng(717171);
  for (int i = 0; i < 20; ++i) {
    Tensor logits = test::random_tensor(rng, {3, 5}, false, -2.0, 2.0);
    Tensor seg = test::random_tensor(rng, {3, 5}, false, -2.0, 2.0);
    std::vector<int64_t> labels = {rng.uniform_int(0, 4), rng.uniform_int(0, 4),
                                   rng.uniform_int(0, 4)};
    const double direct = softmax_cce(logits, labels).item();
    require(loss_sa(logits, {seg}, labels, 0.0).item() == direct,
            "loss_sa(W=0) differs from the plain CCE");
  }

  Model base = Model::build(tiny_model_config(0), 81);
  Rng data_rng(82);
  const auto rows = random_rows(data_rng, 2, 108);
  base.forward_embedding(waveform_batch(rows), true);
  Model student = Model::build(tiny_model_config(1), 83);
  copy_shared_state(base, student);
  Model teacher = Model::build(tiny_model_config(0), 84);
  copy_shared_state(base, teacher);
  teacher.freeze();

  Batch batch;
  batch.waveforms = rows;
  batch.labels = {0, 1};
  const SaForward forward = sa_forward(student, batch, SegmentSpec{108, 0}, false);
  const TsLoss ts = loss_ts(teacher, waveform_batch(rows),
                            forward.aggregate_embedding, forward.aggregate_logits);
  require(std::fabs(ts.cosine_term.item()) <= 1e-9,
          "self-distillation cosine term exceeds 1e-9");

  double entropy = 0.0;
  {
    NoGradGuard guard;
    const Tensor emb = teacher.forward_embedding(waveform_batch(rows), false);
    const Tensor logits = teacher.forward_logits(emb, Model::kAggregateHead);
    for (int64_t b = 0; b < 2; ++b) {
      double m = logits.value_at(b * 3);
      for (int64_t c = 1; c < 3; ++c) m = std::max(m, logits.value_at(b * 3 + c));
      double z = 0.0;
      for (int64_t c = 0; c < 3; ++c) z += std::exp(logits.value_at(b * 3 + c) - m);
      for (int64_t c = 0; c < 3; ++c) {
        const double p = std::exp(logits.value_at(b * 3 + c) - m) / z;
        entropy -= p * std::log(p);
      }
    }
  }
  require(std::fabs(ts.soft_label_term.item() - entropy) <= 1e-9,
          "self-distillation soft-label term differs from teacher entropy");
  out << "  loss_sa(W=0) equals the aggregate CCE bit-for-bit; "
         "self-distillation gives a zero cosine term and a teacher-entropy "
         "soft term within 1e-9\n";
  return true;
}

// --------------------------------------------------------- criterion 7 --

struct CliRunner {
  std::string binary;

  int run(const std::string& args) const {
    const std::string command = binary + " " + args + " > /dev/null 2>&1";
    return std::system(command.c_str());
  }
};

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "missing artifact: " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(is),
                           std::istreambuf_iterator<char>());
}

ExperimentConfig determinism_config(const fs::path& root) {
  ExperimentConfig config;
  config.corpus.dir = (root / "corpus").string();
  config.corpus.seed = 9;
  config.corpus.train_speakers = 6;
  config.corpus.val_speakers = 2;
  config.corpus.test_speakers = 3;
  config.corpus.utterances_per_speaker = 4;
  config.corpus.duration_min = 200;
  config.corpus.duration_max = 400;
  config.model.seed = 15;
  config.model.input_length = 108;
  config.model.first_conv_channels = 4;
  config.model.block_groups = "1x6";
  config.model.gru_hidden = 6;
  config.model.embedding_dim = 6;
  config.training.segment_policy = "fixed";
  config.training.segment_length = 54;
  config.training.batch_size = 3;
  config.training.steps = 40;
  config.training.seed = 31;
  config.training.val_interval = 20;
  config.training.val_trials = 16;
  config.training.checkpoint_dir = (root / "run").string();
  config.eval.conditions = "1.0,0.5,0.25";
  config.eval.trials_per_condition = 24;
  config.eval.segment_length = 54;
  config.eval.seed = 77;
  config.eval.report_path = (root / "run" / "report.csv").string();
  config.eval.scores_dir = (root / "run" / "scores").string();
  config.runtime.threads = 1;  // the criterion concerns single-threaded runs
  return config;
}

bool reproduce_determinism(std::ostream& out, const CliRunner& cli,
                           const fs::path& workdir) {
  const fs::path root = workdir / "determinism";
  fs::remove_all(root);
  std::vector<fs::path> artifact_sets;
  for (const char* run_name : {"one", "two"}) {
    const fs::path run_root = root / run_name;
    fs::create_directories(run_root);
    const ExperimentConfig config = determinism_config(run_root);
    const fs::path config_path = run_root / "experiment.cfg";
    std::ofstream(config_path) << config_to_text(config);
    require(cli.run("reproduce --config " + config_path.string()) == 0,
            "reproduce failed in " + run_root.string());
    artifact_sets.push_back(run_root / "run");
  }

  std::vector<std::string> relative;
  for (const auto& entry : fs::recursive_directory_iterator(artifact_sets[0])) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 4 && name.substr(name.size() - 4) == ".log") continue;
    relative.push_back(fs::relative(entry.path(), artifact_sets[0]).string());
  }
  std::sort(relative.begin(), relative.end());
  require(relative.size() >= 10, "reproduce produced too few artifacts");
  int checkpoints = 0;
  for (const std::string& name : relative) {
    const auto a = read_bytes(artifact_sets[0] / name);
    const auto b = read_bytes(artifact_sets[1] / name);
    require(a == b, "artifact differs between runs: " + name);
    if (name.size() > 5 && name.substr(name.size() - 5) == ".ckpt") ++checkpoints;
  }
  require(checkpoints == 6, "expected six checkpoints, saw " +
                                std::to_string(checkpoints));
  out << "  " << relative.size()
      << " artifacts (checkpoints, report, score dumps, trial list) are "
         "bit-identical across two single-threaded runs\n";
  return true;
}

// --------------------------------------------------------- criterion 8 --

struct TrendSeedResult {
  double baseline_full = 0.0, baseline_quarter = 0.0;
  double sa_full = 0.0, sa_quarter = 0.0;
  double ts_full = -1.0;  // only trained when SA misses the full-length window
  bool quarter_win = false;
  bool full_ok = false;
};

ExperimentConfig trend_config(const fs::path& root, int master_seed) {
  ExperimentConfig config;  // desk-scale defaults
  config.corpus.dir = (root / "corpus").string();
  config.corpus.seed = static_cast<uint64_t>(master_seed);
  config.corpus.duration_min = kTrendDurationMin;
  config.corpus.duration_max = kTrendDurationMax;
  config.model.seed = 7000 + master_seed;
  config.training.seed = 11000 + master_seed;
  config.training.steps = kTrendSteps;
  config.training.batch_size = kTrendBatch;
  config.training.segment_policy = "fixed";
  config.training.segment_length = kTrendSegmentLength;
  config.training.overlap_fraction = kTrendOverlap;
  config.training.val_interval = kTrendValInterval;
  config.training.val_trials = kTrendValTrials;
  config.training.checkpoint_dir = (root / "run").string();
  config.eval.seed = 23000 + master_seed;
  config.eval.segment_length = kTrendSegmentLength;
  return config;
}

double eer_for(Model& model, const InferenceSettings& settings,
               const LoadedCorpus& corpus, const std::vector<TrialPair>& trials,
               int64_t crop, int64_t duration) {
  const std::vector<double> scores =
      score_trials(model, settings, corpus.test, trials, crop, duration);
  return compute_eer(split_scores(trials, scores)).eer_percent;
}

bool trend_experiment(std::ostream& out, const fs::path& workdir) {
  const auto start = Clock::now();
  std::vector<TrendSeedResult> results;

  for (int seed = 1; seed <= kTrendSeeds; ++seed) {
    const fs::path root = workdir / ("trend_seed" + std::to_string(seed));
    fs::remove_all(root);
    const ExperimentConfig config = trend_config(root, seed);
    CorpusConfig cc;
    cc.output_dir = config.corpus.dir;
    cc.master_seed = config.corpus.seed;
    cc.sample_rate = config.corpus.sample_rate;
    cc.train_speakers = config.corpus.train_speakers;
    cc.val_speakers = config.corpus.val_speakers;
    cc.test_speakers = config.corpus.test_speakers;
    cc.utterances_per_speaker = config.corpus.utterances_per_speaker;
    cc.duration_min = config.corpus.duration_min;
    cc.duration_max = config.corpus.duration_max;
    generate_corpus(cc);
    const LoadedCorpus corpus = load_corpus(config.corpus.dir);
    const int64_t crop = config.model.input_length;
    const int64_t quarter = std::llround(0.25 * static_cast<double>(crop));

    std::ofstream log((root / "train.log").string());

    // Identical budgets: only the regime differs between the systems.
    auto train_system = [&](Regime regime) {
      Model model =
          Model::build(make_model_config(config, regime), config.model.seed);
      Model teacher;
      Model* teacher_ptr = nullptr;
      if (regime == Regime::kSaTs) {
        teacher = load_checkpoint(config.training.checkpoint_dir +
                                  "/baseline_best.ckpt");
        teacher.freeze();
        teacher_ptr = &teacher;
      }
      TrainOptions options;
      options.regime = regime;
      options.segment_loss_weight = default_segment_loss_weight(regime);
      options.segment_policy = make_segment_policy(config);
      options.overlap_fraction = config.training.overlap_fraction;
      options.batch.batch_size = config.training.batch_size;
      options.batch.crop_length = crop;
      options.steps = config.training.steps;
      options.seed = config.training.seed;
      options.val_interval = config.training.val_interval;
      options.val_trials = config.training.val_trials;
      options.eval_segment_length = config.eval.segment_length;
      options.checkpoint_dir = config.training.checkpoint_dir;
      options.run_name = regime_name(regime);
      const TrainResult result = train_run(model, teacher_ptr, corpus, options, log);
      return load_checkpoint(result.best_checkpoint);
    };

    Rng trial_rng = Rng(config.eval.seed).fork(0x7472696cULL);
    const std::vector<TrialPair> trials =
        build_trial_pairs(corpus.test, kTrendEvalTrials, trial_rng);

    TrendSeedResult r;
    {
      Model baseline = train_system(Regime::kBaseline);
      const InferenceSettings settings = make_inference_settings(config, baseline);
      r.baseline_full = eer_for(baseline, settings, corpus, trials, crop, crop);
      r.baseline_quarter = eer_for(baseline, settings, corpus, trials, crop, quarter);
    }
    {
      Model sa = train_system(Regime::kSa);
      const InferenceSettings settings = make_inference_settings(config, sa);
      r.sa_full = eer_for(sa, settings, corpus, trials, crop, crop);
      r.sa_quarter = eer_for(sa, settings, corpus, trials, crop, quarter);
    }
    r.quarter_win = r.sa_quarter < r.baseline_quarter;
    r.full_ok = r.sa_full <= r.baseline_full + 2.0;
    if (!r.full_ok) {
      // The criterion admits SA+TS for the long-utterance clause.
      Model sa_ts = train_system(Regime::kSaTs);
      const InferenceSettings settings = make_inference_settings(config, sa_ts);
      r.ts_full = eer_for(sa_ts, settings, corpus, trials, crop, crop);
      r.full_ok = r.ts_full <= r.baseline_full + 2.0;
    }
    results.push_back(r);

    out << "  seed " << seed << ": baseline full/quarter "
        << format_eer(r.baseline_full) << "/" << format_eer(r.baseline_quarter)
        << "%, sa " << format_eer(r.sa_full) << "/" << format_eer(r.sa_quarter)
        << "%";
    if (r.ts_full >= 0.0) out << ", sa_ts full " << format_eer(r.ts_full) << "%";
    out << (r.quarter_win ? "  [quarter win]" : "  [quarter MISS]")
        << (r.full_ok ? " [full ok]" : " [full MISS]") << "\n";
    out.flush();
  }

  int quarter_wins = 0;
  int full_oks = 0;
  for (const TrendSeedResult& r : results) {
    quarter_wins += r.quarter_win ? 1 : 0;
    full_oks += r.full_ok ? 1 : 0;
  }
  const double elapsed =
      std::chrono::duration<double>(Clock::now() - start).count();
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const double parallelism = static_cast<double>(std::min(8u, hw));
  const double budget = kTrendBudgetSeconds8Core * 8.0 / parallelism;
  out << "  quarter-condition wins: " << quarter_wins << "/" << kTrendSeeds
      << " (need >= 4); full-length within +2 points: " << full_oks << "/"
      << kTrendSeeds << " (need >= 4)\n";
  out << "  runtime: " << static_cast<int>(elapsed) << " s on " << hw
      << " hardware thread(s); budget " << static_cast<int>(budget)
      << " s (1800 s at >= 8 cores)\n";
  require(quarter_wins >= 4, "SA quarter-duration improvement missed 4/5 seeds");
  require(full_oks >= 4, "full-length EER drifted above baseline + 2 points");
  require(elapsed <= budget, "trend experiment exceeded the runtime budget");
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segagg acceptance suite"};
  std::string cli_path;
  std::string workdir = "acceptance_work";
  std::string only;
  app.add_option("--cli", cli_path, "Path to the segagg CLI binary")->required();
  app.add_option("--workdir", workdir, "Scratch directory");
  app.add_option("--only", only, "Run a single criterion by name");
  CLI11_PARSE(app, argc, argv);

  const fs::path work(workdir);
  fs::create_directories(work);
  const CliRunner cli{cli_path};

  using Criterion = std::pair<std::string, std::function<bool(std::ostream&)>>;
  const std::vector<Criterion> criteria = {
      {"full-scale-numbers-out-of-scope", note_full_scale},
      {"gradient-correctness", gradient_correctness},
      {"segmentation-oracle", segmentation_oracle},
      {"aggregation-invariants", aggregation_invariants},
      {"eer-oracle-equivalence", eer_oracle_equivalence},
      {"loss-reductions", loss_reductions},
      {"reproduce-determinism",
       [&](std::ostream& out) { return reproduce_determinism(out, cli, work); }},
      {"short-utterance-trend",
       [&](std::ostream& out) { return trend_experiment(out, work); }},
  };

  int failures = 0;
  for (const auto& [name, body] : criteria) {
    if (!only.empty() && only != name) continue;
    std::ostringstream detail;
    bool ok = false;
    std::string error;
    const auto start = Clock::now();
    try {
      ok = body(detail);
    } catch (const CheckFailure& f) {
      error = f.message;
    } catch (const std::exception& e) {
      error = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(Clock::now() - start).count();
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << " ("
              << static_cast<int>(seconds) << " s)\n"
              << detail.str();
    if (!ok) {
      std::cout << "  reason: " << error << "\n";
      ++failures;
    }
    std::cout.flush();
  }
  if (failures == 0) {
    std::cout << "acceptance: all criteria passed\n";
    return 0;
  }
  std::cout << "acceptance: " << failures << " criterion(s) failed\n";
  return 1;
}
