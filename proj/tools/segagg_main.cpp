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

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segagg/commands.hpp"
#include "segagg/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "segagg: segment-aggregation speaker verification on a synthetic "
      "desk-scale corpus"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> checkpoints;

  CLI::App* generate = app.add_subcommand("generate", "Synthesize the speaker corpus");
  generate->add_option("--config", config_path, "Experiment config file")->required();

  CLI::App* train = app.add_subcommand("train", "Train the configured regime");
  train->add_option("--config", config_path, "Experiment config file")->required();

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Duration-conditioned EER grid for checkpoints");
  evaluate->add_option("--config", config_path, "Experiment config file")->required();
  evaluate->add_option("--checkpoint", checkpoints, "Checkpoint file (repeatable)")
      ->required();

  CLI::App* reproduce = app.add_subcommand(
      "reproduce", "Full pipeline: generate, train baseline/sa/sa_ts, evaluate");
  reproduce->add_option("--config", config_path, "Experiment config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const segagg::ExperimentConfig config = segagg::load_config(config_path);
    if (generate->parsed()) {
      segagg::run_generate(config);
    } else if (train->parsed()) {
      segagg::run_train(config);
    } else if (evaluate->parsed()) {
      segagg::run_evaluate(config, checkpoints);
    } else if (reproduce->parsed()) {
      segagg::run_reproduce(config);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
