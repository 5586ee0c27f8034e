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

#include "segagg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace segagg {
namespace {

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_integer(const std::string& text) {
  T value{};
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw std::invalid_argument("malformed integer: " + text);
  }
  return value;
}

double parse_floating(const std::string& text) {
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw std::invalid_argument("malformed number: " + text);
  }
  return value;
}

std::string format_floating(double value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

struct FieldBinding {
  std::string name;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

FieldBinding field(std::string name, std::string& target) {
  return {std::move(name), [&target](const std::string& v) { target = v; },
          [&target] { return target; }};
}

FieldBinding field(std::string name, double& target) {
  return {std::move(name),
          [&target](const std::string& v) { target = parse_floating(v); },
          [&target] { return format_floating(target); }};
}

FieldBinding field(std::string name, int& target) {
  return {std::move(name),
          [&target](const std::string& v) { target = parse_integer<int>(v); },
          [&target] { return std::to_string(target); }};
}

FieldBinding field(std::string name, int64_t& target) {
  return {std::move(name),
          [&target](const std::string& v) { target = parse_integer<int64_t>(v); },
          [&target] { return std::to_string(target); }};
}

FieldBinding field(std::string name, uint64_t& target) {
  return {std::move(name),
          [&target](const std::string& v) { target = parse_integer<uint64_t>(v); },
          [&target] { return std::to_string(target); }};
}

std::vector<FieldBinding> bind_fields(ExperimentConfig& c) {
  return {
      field("corpus.dir", c.corpus.dir),
      field("corpus.seed", c.corpus.seed),
      field("corpus.sample_rate", c.corpus.sample_rate),
      field("corpus.train_speakers", c.corpus.train_speakers),
      field("corpus.val_speakers", c.corpus.val_speakers),
      field("corpus.test_speakers", c.corpus.test_speakers),
      field("corpus.utterances_per_speaker", c.corpus.utterances_per_speaker),
      field("corpus.duration_min", c.corpus.duration_min),
      field("corpus.duration_max", c.corpus.duration_max),
      field("corpus.f0_min", c.corpus.f0_min),
      field("corpus.f0_max", c.corpus.f0_max),
      field("corpus.harmonics", c.corpus.harmonics),
      field("corpus.noise_min", c.corpus.noise_min),
      field("corpus.noise_max", c.corpus.noise_max),
      field("model.seed", c.model.seed),
      field("model.input_length", c.model.input_length),
      field("model.first_conv_channels", c.model.first_conv_channels),
      field("model.block_groups", c.model.block_groups),
      field("model.gru_hidden", c.model.gru_hidden),
      field("model.embedding_dim", c.model.embedding_dim),
      field("model.num_speakers", c.model.num_speakers),
      field("model.leaky_slope", c.model.leaky_slope),
      field("training.regime", c.training.regime),
      field("training.segment_loss_weight", c.training.segment_loss_weight),
      field("training.segment_policy", c.training.segment_policy),
      field("training.segment_length", c.training.segment_length),
      field("training.segment_min", c.training.segment_min),
      field("training.segment_max", c.training.segment_max),
      field("training.overlap_fraction", c.training.overlap_fraction),
      field("training.batch_size", c.training.batch_size),
      field("training.steps", c.training.steps),
      field("training.learning_rate", c.training.learning_rate),
      field("training.weight_decay", c.training.weight_decay),
      field("training.pre_emphasis", c.training.pre_emphasis),
      field("training.seed", c.training.seed),
      field("training.val_interval", c.training.val_interval),
      field("training.val_trials", c.training.val_trials),
      field("training.teacher_checkpoint", c.training.teacher_checkpoint),
      field("training.checkpoint_dir", c.training.checkpoint_dir),
      field("eval.conditions", c.eval.conditions),
      field("eval.trials_per_condition", c.eval.trials_per_condition),
      field("eval.segment_length", c.eval.segment_length),
      field("eval.seed", c.eval.seed),
      field("eval.report_path", c.eval.report_path),
      field("eval.scores_dir", c.eval.scores_dir),
      field("runtime.threads", c.runtime.threads),
  };
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  std::vector<FieldBinding> fields = bind_fields(config);
  std::istringstream is(text);
  std::string line;
  int line_number = 0;
  while (std::getline(is, line)) {
    ++line_number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_number) +
                                  ": expected 'section.key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    bool found = false;
    for (FieldBinding& field : fields) {
      if (field.name == key) {
        field.set(value);
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::invalid_argument("config line " + std::to_string(line_number) +
                                  ": unknown key '" + key + "'");
    }
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return parse_config_text(buffer.str());
}

std::string config_to_text(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  std::ostringstream os;
  std::string section;
  for (const FieldBinding& field : bind_fields(copy)) {
    const std::string current = field.name.substr(0, field.name.find('.'));
    if (current != section) {
      if (!section.empty()) os << "\n";
      section = current;
    }
    os << field.name << " = " << field.get() << "\n";
  }
  return os.str();
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    const std::string stripped = trim(item);
    if (stripped.empty()) continue;
    values.push_back(parse_floating(stripped));
  }
  if (values.empty()) throw std::invalid_argument("empty list: " + text);
  return values;
}

}  // namespace segagg
