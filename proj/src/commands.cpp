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

#include "segagg/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "segagg/thread_pool.hpp"

namespace segagg {
namespace {

namespace fs = std::filesystem;

CorpusConfig make_corpus_config(const ExperimentConfig& config) {
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
  cc.voice.f0_min = config.corpus.f0_min;
  cc.voice.f0_max = config.corpus.f0_max;
  cc.voice.harmonics = config.corpus.harmonics;
  cc.voice.noise_min = config.corpus.noise_min;
  cc.voice.noise_max = config.corpus.noise_max;
  return cc;
}

std::string checkpoint_stem(const std::string& path) {
  return fs::path(path).stem().string();
}

std::string teacher_path_for(const ExperimentConfig& config) {
  if (!config.training.teacher_checkpoint.empty()) {
    return config.training.teacher_checkpoint;
  }
  return (fs::path(config.training.checkpoint_dir) / "baseline_best.ckpt").string();
}

TrainOptions make_train_options(const ExperimentConfig& config, Regime regime) {
  TrainOptions options;
  options.regime = regime;
  options.segment_loss_weight = resolve_segment_loss_weight(config, regime);
  options.segment_policy = make_segment_policy(config);
  options.overlap_fraction = config.training.overlap_fraction;
  options.batch.batch_size = config.training.batch_size;
  options.batch.crop_length = config.model.input_length;
  options.steps = config.training.steps;
  options.optimizer.learning_rate = config.training.learning_rate;
  options.optimizer.weight_decay = config.training.weight_decay;
  options.pre_emphasis = config.training.pre_emphasis;
  options.seed = config.training.seed;
  options.val_interval = config.training.val_interval;
  options.val_trials = config.training.val_trials;
  options.eval_segment_length = config.eval.segment_length;
  options.checkpoint_dir = config.training.checkpoint_dir;
  options.run_name = regime_name(regime);
  return options;
}

TrainResult train_one_regime(const ExperimentConfig& config,
                             const LoadedCorpus& corpus, Regime regime) {
  Model model = Model::build(make_model_config(config, regime), config.model.seed);

  Model teacher;
  Model* teacher_ptr = nullptr;
  if (regime == Regime::kSaTs) {
    const std::string teacher_path = teacher_path_for(config);
    if (!fs::exists(teacher_path)) {
      throw std::runtime_error(
          "sa_ts regime needs a teacher checkpoint at " + teacher_path +
          "; train regime=baseline first or set training.teacher_checkpoint");
    }
    teacher = load_checkpoint(teacher_path);
    teacher.freeze();
    teacher_ptr = &teacher;
  }

  const TrainOptions options = make_train_options(config, regime);
  const std::string log_path =
      (fs::path(options.checkpoint_dir) / ("train_" + options.run_name + ".log"))
          .string();
  fs::create_directories(options.checkpoint_dir);
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot open training log " + log_path);

  std::cout << "training regime=" << options.run_name << " steps=" << options.steps
            << " batch=" << options.batch.batch_size << " W="
            << options.segment_loss_weight << "\n";
  const TrainResult result = train_run(model, teacher_ptr, corpus, options, log);
  std::cout << "  final_loss=" << result.final_loss
            << " best_val_eer=" << result.best_val_eer_percent << "% at step "
            << result.best_step << "\n  checkpoints: " << result.best_checkpoint
            << ", " << result.final_checkpoint << "\n";
  return result;
}

}  // namespace

ModelConfig make_model_config(const ExperimentConfig& config, Regime regime) {
  ModelConfig mc;
  mc.input_length = config.model.input_length;
  mc.first_conv_channels = config.model.first_conv_channels;
  mc.block_groups = parse_block_groups(config.model.block_groups);
  mc.gru_hidden = config.model.gru_hidden;
  mc.embedding_dim = config.model.embedding_dim;
  mc.num_speakers = config.model.num_speakers > 0 ? config.model.num_speakers
                                                  : config.corpus.train_speakers;
  mc.leaky_slope = config.model.leaky_slope;
  mc.num_segment_output_layers = 0;
  if (regime != Regime::kBaseline) {
    // Enough separate heads for the largest K any batch can produce, i.e.
    // the shortest valid segment length under the configured policy.
    const SegmentLengthPolicy policy = make_segment_policy(config);
    const int64_t factor = mc.downsampling_factor();
    const int64_t shortest =
        policy.kind == SegmentLengthPolicy::Kind::kFixed
            ? std::max(factor, policy.fixed_length / factor * factor)
            : std::max(factor, policy.min_length / factor * factor);
    const SegmentSpec spec =
        make_segment_spec(shortest, config.training.overlap_fraction);
    mc.num_segment_output_layers = segment_count(mc.input_length, spec);
  }
  return mc;
}

double resolve_segment_loss_weight(const ExperimentConfig& config, Regime regime) {
  if (config.training.segment_loss_weight >= 0.0) {
    return config.training.segment_loss_weight;
  }
  return default_segment_loss_weight(regime);
}

SegmentLengthPolicy make_segment_policy(const ExperimentConfig& config) {
  SegmentLengthPolicy policy;
  if (config.training.segment_policy == "fixed") {
    policy.kind = SegmentLengthPolicy::Kind::kFixed;
    policy.fixed_length = config.training.segment_length;
  } else if (config.training.segment_policy == "random") {
    policy.kind = SegmentLengthPolicy::Kind::kPerBatchRandom;
    policy.min_length = config.training.segment_min;
    policy.max_length = config.training.segment_max;
  } else {
    throw std::invalid_argument("training.segment_policy must be fixed or random, got '" +
                                config.training.segment_policy + "'");
  }
  return policy;
}

InferenceSettings make_inference_settings(const ExperimentConfig& config,
                                          const Model& model) {
  InferenceSettings settings;
  settings.pre_emphasis = config.training.pre_emphasis;
  settings.segmented = model.config().num_segment_output_layers > 0;
  if (settings.segmented) {
    const int64_t factor = model.config().downsampling_factor();
    const int64_t length =
        std::max(factor, config.eval.segment_length / factor * factor);
    settings.spec = make_segment_spec(length, config.training.overlap_fraction);
  }
  return settings;
}

void run_generate(const ExperimentConfig& config) {
  set_num_threads(config.runtime.threads);
  const CorpusManifest manifest = generate_corpus(make_corpus_config(config));
  std::cout << "corpus: " << manifest.total_speakers() << " speakers ("
            << manifest.train_speakers << " train, " << manifest.val_speakers
            << " val, " << manifest.test_speakers << " test), "
            << manifest.entries.size() << " utterances at "
            << manifest.sample_rate << " Hz -> " << config.corpus.dir << "\n";
}

TrainResult run_train(const ExperimentConfig& config) {
  set_num_threads(config.runtime.threads);
  const LoadedCorpus corpus = load_corpus(config.corpus.dir);
  const Regime regime = regime_from_name(config.training.regime);
  return train_one_regime(config, corpus, regime);
}

EvalReport run_evaluate(const ExperimentConfig& config,
                        const std::vector<std::string>& checkpoints) {
  set_num_threads(config.runtime.threads);
  if (checkpoints.empty()) {
    throw std::invalid_argument("evaluate needs at least one checkpoint");
  }
  for (const std::string& path : checkpoints) {
    if (!fs::exists(path)) {
      throw std::runtime_error("checkpoint not found: " + path);
    }
  }
  const LoadedCorpus corpus = load_corpus(config.corpus.dir);
  const std::vector<double> conditions = parse_double_list(config.eval.conditions);

  Rng trial_rng = Rng(config.eval.seed).fork(0x7472696cULL);  // "tril"
  const std::vector<TrialPair> trials =
      build_trial_pairs(corpus.test, config.eval.trials_per_condition, trial_rng);

  fs::create_directories(config.eval.scores_dir);
  write_trial_list(trials, corpus.test,
                   (fs::path(config.eval.scores_dir) / "trials.txt").string());

  EvalReport report;
  report.condition_fractions = conditions;
  for (const std::string& checkpoint : checkpoints) {
    Model model = load_checkpoint(checkpoint);
    const InferenceSettings settings = make_inference_settings(config, model);
    const std::string system = checkpoint_stem(checkpoint);
    report.systems.push_back(system);
    const int64_t crop = model.config().input_length;

    for (double fraction : conditions) {
      const int64_t duration =
          std::max<int64_t>(1, std::llround(fraction * static_cast<double>(crop)));
      const std::vector<double> scores =
          score_trials(model, settings, corpus.test, trials, crop, duration);

      char dump_name[128];
      std::snprintf(dump_name, sizeof(dump_name), "scores_%s_%03d.txt",
                    system.c_str(),
                    static_cast<int>(std::llround(fraction * 100.0)));
      write_score_dump(trials, scores,
                       (fs::path(config.eval.scores_dir) / dump_name).string());

      EvalCell cell;
      cell.system = system;
      cell.condition_fraction = fraction;
      cell.test_duration = duration;
      const ScoreSet split = split_scores(trials, scores);
      cell.num_target = static_cast<int64_t>(split.target_scores.size());
      cell.num_impostor = static_cast<int64_t>(split.impostor_scores.size());
      cell.eer = compute_eer(split);
      report.cells.push_back(cell);
      std::cout << system << " @ " << fraction << " (" << duration
                << " samples): EER " << cell.eer.eer_percent << "%\n";
    }
  }
  write_report_csv(report, config.eval.report_path);
  std::cout << "report -> " << config.eval.report_path << "\n";
  return report;
}

EvalReport run_reproduce(const ExperimentConfig& config) {
  set_num_threads(config.runtime.threads);
  run_generate(config);
  const LoadedCorpus corpus = load_corpus(config.corpus.dir);

  train_one_regime(config, corpus, Regime::kBaseline);
  train_one_regime(config, corpus, Regime::kSa);
  train_one_regime(config, corpus, Regime::kSaTs);

  const fs::path dir(config.training.checkpoint_dir);
  const std::vector<std::string> checkpoints = {
      (dir / "baseline_best.ckpt").string(),
      (dir / "sa_best.ckpt").string(),
      (dir / "sa_ts_best.ckpt").string(),
  };
  return run_evaluate(config, checkpoints);
}

}  // namespace segagg
