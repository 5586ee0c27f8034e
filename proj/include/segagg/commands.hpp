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

#ifndef SEGAGG_COMMANDS_HPP_
#define SEGAGG_COMMANDS_HPP_

#include <string>
#include <vector>

#include "segagg/config.hpp"
#include "segagg/evaluation.hpp"
#include "segagg/model.hpp"
#include "segagg/training.hpp"

namespace segagg {

// Model architecture for one training regime: SA-style regimes get enough
// separate segment output heads for the shortest drawable segment length.
ModelConfig make_model_config(const ExperimentConfig& config, Regime regime);

// Segment loss weight W: explicit non-negative config value, or the regime
// default (0.2 for sa, 1.0 for sa_ts) when the config leaves it negative.
double resolve_segment_loss_weight(const ExperimentConfig& config, Regime regime);

SegmentLengthPolicy make_segment_policy(const ExperimentConfig& config);

// Inference-time embedding settings for a loaded checkpoint. Models with
// segment heads run the segment-and-aggregate pipeline.
InferenceSettings make_inference_settings(const ExperimentConfig& config,
                                          const Model& model);

// Subcommand bodies. Throw on failure; the CLI turns exceptions into a
// one-line diagnostic and a nonzero exit code.
void run_generate(const ExperimentConfig& config);
TrainResult run_train(const ExperimentConfig& config);
EvalReport run_evaluate(const ExperimentConfig& config,
                        const std::vector<std::string>& checkpoints);
// Full pipeline: generate, train baseline / sa / sa_ts with identical
// budgets, evaluate all three across the duration grid.
EvalReport run_reproduce(const ExperimentConfig& config);

}  // namespace segagg

#endif  // SEGAGG_COMMANDS_HPP_
