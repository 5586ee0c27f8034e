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

#include "segagg/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "segagg/binary_io.hpp"
#include "segagg/rng.hpp"

namespace segagg {
namespace {

double parse_double(const std::string& text) {
  double value = 0.0;
  const auto result =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw std::invalid_argument("malformed number: " + text);
  }
  return value;
}

std::string format_double(double value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

Tensor init_uniform(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  const int64_t n = shape_numel(shape);
  std::vector<double> values(n);
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor::from_values(std::move(shape), std::move(values), true);
}

BatchNormLayer init_batchnorm(int64_t channels) {
  BatchNormLayer layer;
  layer.gamma = Tensor::full({channels}, 1.0, true);
  layer.beta = Tensor::zeros({channels}, true);
  layer.state.reset(channels);
  return layer;
}

}  // namespace

int64_t ModelConfig::total_blocks() const {
  int64_t n = 0;
  for (const auto& [blocks, channels] : block_groups) n += blocks;
  return n;
}

int64_t ModelConfig::downsampling_factor() const {
  int64_t factor = 3;  // strided front-end convolution
  for (int64_t i = 0; i < total_blocks(); ++i) factor *= 3;  // one pool each
  return factor;
}

int64_t ModelConfig::frames_for_length(int64_t length) const {
  return length / downsampling_factor();
}

void ModelConfig::validate() const {
  if (block_groups.empty()) {
    throw std::invalid_argument("model config: needs at least one block group");
  }
  for (const auto& [blocks, channels] : block_groups) {
    if (blocks < 1 || channels < 1) {
      throw std::invalid_argument("model config: invalid block group");
    }
  }
  if (first_conv_channels < 1) {
    throw std::invalid_argument("model config: first_conv_channels must be >= 1");
  }
  if (input_length < 1 || input_length % downsampling_factor() != 0) {
    throw std::invalid_argument(
        "model config: input_length must be a positive multiple of the "
        "downsampling factor " +
        std::to_string(downsampling_factor()));
  }
  if (embedding_dim < 1) {
    throw std::invalid_argument("model config: embedding_dim must be >= 1");
  }
  if (num_speakers < 2) {
    throw std::invalid_argument("model config: num_speakers must be >= 2");
  }
  if (gru_hidden < 1) {
    throw std::invalid_argument("model config: gru_hidden must be >= 1");
  }
  if (num_segment_output_layers < 0) {
    throw std::invalid_argument("model config: negative segment head count");
  }
}

std::string model_config_to_text(const ModelConfig& config) {
  std::ostringstream os;
  os << "input_length = " << config.input_length << "\n";
  os << "first_conv_channels = " << config.first_conv_channels << "\n";
  os << "block_groups = ";
  for (size_t i = 0; i < config.block_groups.size(); ++i) {
    if (i) os << ",";
    os << config.block_groups[i].first << "x" << config.block_groups[i].second;
  }
  os << "\n";
  os << "gru_hidden = " << config.gru_hidden << "\n";
  os << "embedding_dim = " << config.embedding_dim << "\n";
  os << "num_speakers = " << config.num_speakers << "\n";
  os << "leaky_slope = " << format_double(config.leaky_slope) << "\n";
  os << "num_segment_output_layers = " << config.num_segment_output_layers
     << "\n";
  return os.str();
}

std::vector<std::pair<int64_t, int64_t>> parse_block_groups(
    const std::string& text) {
  std::vector<std::pair<int64_t, int64_t>> groups;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    const size_t x = item.find('x');
    if (x == std::string::npos) {
      throw std::invalid_argument("malformed block group list: " + text);
    }
    groups.emplace_back(std::stoll(item.substr(0, x)),
                        std::stoll(item.substr(x + 1)));
  }
  if (groups.empty()) {
    throw std::invalid_argument("empty block group list");
  }
  return groups;
}

ModelConfig model_config_from_text(const std::string& text) {
  ModelConfig config;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("model config: malformed line: " + line);
    }
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t");
      const size_t b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "input_length") config.input_length = std::stoll(value);
    else if (key == "first_conv_channels") config.first_conv_channels = std::stoll(value);
    else if (key == "block_groups") config.block_groups = parse_block_groups(value);
    else if (key == "gru_hidden") config.gru_hidden = std::stoll(value);
    else if (key == "embedding_dim") config.embedding_dim = std::stoll(value);
    else if (key == "num_speakers") config.num_speakers = std::stoll(value);
    else if (key == "leaky_slope") config.leaky_slope = parse_double(value);
    else if (key == "num_segment_output_layers") config.num_segment_output_layers = std::stoll(value);
    else throw std::invalid_argument("model config: unknown key: " + key);
  }
  return config;
}

Model Model::build(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Model model;
  model.config_ = config;
  Rng rng(seed);

  model.stem_kernel_ = init_uniform({config.first_conv_channels, 1, 3}, 3, rng);
  model.stem_bn_ = init_batchnorm(config.first_conv_channels);

  int64_t in_channels = config.first_conv_channels;
  bool first_block = true;
  for (const auto& [blocks, channels] : config.block_groups) {
    for (int64_t b = 0; b < blocks; ++b) {
      ResidualBlock block;
      if (!first_block) {
        block.lead_bn = init_batchnorm(in_channels);
      }
      block.conv1 = init_uniform({channels, in_channels, 3}, in_channels * 3, rng);
      block.mid_bn = init_batchnorm(channels);
      block.conv2 = init_uniform({channels, channels, 3}, channels * 3, rng);
      if (channels != in_channels) {
        block.projection = init_uniform({channels, in_channels, 1}, in_channels, rng);
      }
      model.blocks_.push_back(std::move(block));
      in_channels = channels;
      first_block = false;
    }
  }

  const int64_t features = in_channels;
  const int64_t hidden = config.gru_hidden;
  model.gru_.weight_update_x = init_uniform({hidden, features}, features, rng);
  model.gru_.weight_update_h = init_uniform({hidden, hidden}, hidden, rng);
  model.gru_.bias_update = init_uniform({hidden}, hidden, rng);
  model.gru_.weight_reset_x = init_uniform({hidden, features}, features, rng);
  model.gru_.weight_reset_h = init_uniform({hidden, hidden}, hidden, rng);
  model.gru_.bias_reset = init_uniform({hidden}, hidden, rng);
  model.gru_.weight_cand_x = init_uniform({hidden, features}, features, rng);
  model.gru_.weight_cand_h = init_uniform({hidden, hidden}, hidden, rng);
  model.gru_.bias_cand = init_uniform({hidden}, hidden, rng);

  model.embedding_weight_ = init_uniform({config.embedding_dim, hidden}, hidden, rng);
  model.embedding_bias_ = init_uniform({config.embedding_dim}, hidden, rng);

  model.aggregate_head_.weight =
      init_uniform({config.num_speakers, config.embedding_dim}, config.embedding_dim, rng);
  model.aggregate_head_.bias =
      init_uniform({config.num_speakers}, config.embedding_dim, rng);
  for (int64_t k = 0; k < config.num_segment_output_layers; ++k) {
    OutputHead head;
    head.weight = init_uniform({config.num_speakers, config.embedding_dim},
                               config.embedding_dim, rng);
    head.bias = init_uniform({config.num_speakers}, config.embedding_dim, rng);
    model.segment_heads_.push_back(std::move(head));
  }
  return model;
}

void Model::freeze() {
  frozen_ = true;
  visit_parameters([](const std::string&, Tensor& p) { p.set_requires_grad(false); });
}

Tensor Model::forward_embedding(const Tensor& waveforms, bool training) {
  if (waveforms.rank() != 3 || waveforms.dim(1) != 1) {
    throw std::invalid_argument(
        "forward_embedding: expected [batch, 1, length] waveforms");
  }
  const int64_t length = waveforms.dim(2);
  const int64_t factor = config_.downsampling_factor();
  if (length < factor || length % factor != 0) {
    throw std::invalid_argument(
        "forward_embedding: input length " + std::to_string(length) +
        " is not a positive multiple of the downsampling factor " +
        std::to_string(factor));
  }

  std::optional<NoGradGuard> guard;
  if (frozen_) guard.emplace();
  const bool bn_training = training && !frozen_;
  const double slope = config_.leaky_slope;

  Tensor h = conv1d(waveforms, stem_kernel_, 3, 0);
  h = batchnorm1d(h, stem_bn_.gamma, stem_bn_.beta, stem_bn_.state, bn_training);
  h = leaky_relu(h, slope);

  for (ResidualBlock& block : blocks_) {
    Tensor y = h;
    if (block.lead_bn) {
      y = batchnorm1d(y, block.lead_bn->gamma, block.lead_bn->beta,
                      block.lead_bn->state, bn_training);
      y = leaky_relu(y, slope);
    }
    y = conv1d(y, block.conv1, 1, 1);
    y = batchnorm1d(y, block.mid_bn.gamma, block.mid_bn.beta,
                    block.mid_bn.state, bn_training);
    y = leaky_relu(y, slope);
    y = conv1d(y, block.conv2, 1, 1);
    const Tensor skip =
        block.projection.defined() ? conv1d(h, block.projection, 1, 0) : h;
    h = maxpool1d(add(y, skip), 3);
  }

  const Tensor frames = transpose_last2(h);  // [batch, frames, channels]
  const Tensor final_hidden = gru_forward(frames, gru_);
  const Tensor embedding = linear(final_hidden, embedding_weight_, embedding_bias_);

  for (double v : embedding.values()) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("forward_embedding: non-finite embedding value");
    }
  }
  return embedding;
}

Tensor Model::forward_logits(const Tensor& embeddings, int64_t head) {
  if (embeddings.rank() != 2 || embeddings.dim(1) != config_.embedding_dim) {
    throw std::invalid_argument("forward_logits: expected [batch, embedding_dim]");
  }
  if (head == kAggregateHead) {
    return linear(embeddings, aggregate_head_.weight, aggregate_head_.bias);
  }
  if (head < 0 || head >= static_cast<int64_t>(segment_heads_.size())) {
    throw std::invalid_argument(
        "forward_logits: unknown head " + std::to_string(head) + " (model has " +
        std::to_string(segment_heads_.size()) + " segment heads)");
  }
  OutputHead& h = segment_heads_[head];
  return linear(embeddings, h.weight, h.bias);
}

void Model::visit_parameters(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("stem.conv.kernel", stem_kernel_);
  fn("stem.bn.gamma", stem_bn_.gamma);
  fn("stem.bn.beta", stem_bn_.beta);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i) + ".";
    ResidualBlock& block = blocks_[i];
    if (block.lead_bn) {
      fn(prefix + "bn1.gamma", block.lead_bn->gamma);
      fn(prefix + "bn1.beta", block.lead_bn->beta);
    }
    fn(prefix + "conv1.kernel", block.conv1);
    fn(prefix + "bn2.gamma", block.mid_bn.gamma);
    fn(prefix + "bn2.beta", block.mid_bn.beta);
    fn(prefix + "conv2.kernel", block.conv2);
    if (block.projection.defined()) fn(prefix + "proj.kernel", block.projection);
  }
  fn("gru.w_update", gru_.weight_update_x);
  fn("gru.u_update", gru_.weight_update_h);
  fn("gru.b_update", gru_.bias_update);
  fn("gru.w_reset", gru_.weight_reset_x);
  fn("gru.u_reset", gru_.weight_reset_h);
  fn("gru.b_reset", gru_.bias_reset);
  fn("gru.w_cand", gru_.weight_cand_x);
  fn("gru.u_cand", gru_.weight_cand_h);
  fn("gru.b_cand", gru_.bias_cand);
  fn("embedding.weight", embedding_weight_);
  fn("embedding.bias", embedding_bias_);
  fn("head.aggregate.weight", aggregate_head_.weight);
  fn("head.aggregate.bias", aggregate_head_.bias);
  for (size_t k = 0; k < segment_heads_.size(); ++k) {
    const std::string prefix = "head.segment" + std::to_string(k) + ".";
    fn(prefix + "weight", segment_heads_[k].weight);
    fn(prefix + "bias", segment_heads_[k].bias);
  }
}

void Model::visit_batchnorm(
    const std::function<void(const std::string&, BatchNormState&)>& fn) {
  fn("stem.bn", stem_bn_.state);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i) + ".";
    if (blocks_[i].lead_bn) fn(prefix + "bn1", blocks_[i].lead_bn->state);
    fn(prefix + "bn2", blocks_[i].mid_bn.state);
  }
}

Tensor waveform_batch(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("waveform_batch: empty batch");
  const int64_t batch = static_cast<int64_t>(rows.size());
  const int64_t length = static_cast<int64_t>(rows.front().size());
  std::vector<double> data;
  data.reserve(batch * length);
  for (const auto& row : rows) {
    if (static_cast<int64_t>(row.size()) != length) {
      throw std::invalid_argument("waveform_batch: ragged rows");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor::from_values({batch, 1, length}, std::move(data));
}

namespace {

void write_array(std::ostream& os, const std::string& name,
                 const std::vector<int64_t>& shape,
                 const std::vector<double>& values) {
  write_le<uint32_t>(os, static_cast<uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_le<uint32_t>(os, static_cast<uint32_t>(shape.size()));
  for (int64_t d : shape) write_le<uint64_t>(os, static_cast<uint64_t>(d));
  for (double v : values) write_le<double>(os, v);
}

struct NamedArray {
  std::vector<int64_t> shape;
  std::vector<double> values;
};

std::pair<std::string, NamedArray> read_array(std::istream& is) {
  const uint32_t name_len = read_le<uint32_t>(is);
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  if (!is) throw std::runtime_error("checkpoint: truncated array name");
  NamedArray array;
  const uint32_t rank = read_le<uint32_t>(is);
  array.shape.resize(rank);
  int64_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    array.shape[i] = static_cast<int64_t>(read_le<uint64_t>(is));
    numel *= array.shape[i];
  }
  array.values.resize(numel);
  for (int64_t i = 0; i < numel; ++i) array.values[i] = read_le<double>(is);
  return {std::move(name), std::move(array)};
}

constexpr char kCheckpointMagic[4] = {'S', 'G', 'C', 'K'};
constexpr uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(Model& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, 4);
  write_le<uint32_t>(os, kCheckpointVersion);
  const std::string config_text = model_config_to_text(model.config());
  write_le<uint32_t>(os, static_cast<uint32_t>(config_text.size()));
  os.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));

  uint32_t count = 0;
  model.visit_parameters([&](const std::string&, Tensor&) { ++count; });
  model.visit_batchnorm([&](const std::string&, BatchNormState&) { count += 3; });
  write_le<uint32_t>(os, count);

  model.visit_parameters([&](const std::string& name, Tensor& p) {
    write_array(os, name, p.shape(),
                std::vector<double>(p.values().begin(), p.values().end()));
  });
  model.visit_batchnorm([&](const std::string& name, BatchNormState& state) {
    const int64_t channels = static_cast<int64_t>(state.running_mean.size());
    write_array(os, name + ".running_mean", {channels}, state.running_mean);
    write_array(os, name + ".running_var", {channels}, state.running_var);
    write_array(os, name + ".batches", {1},
                {static_cast<double>(state.batches_tracked)});
  });
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string_view(magic, 4) != std::string_view(kCheckpointMagic, 4)) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  }
  const uint32_t version = read_le<uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));
  }
  const uint32_t config_len = read_le<uint32_t>(is);
  std::string config_text(config_len, '\0');
  is.read(config_text.data(), config_len);
  if (!is) throw std::runtime_error("load_checkpoint: truncated config");

  const ModelConfig config = model_config_from_text(config_text);
  Model model = Model::build(config, 0);

  const uint32_t count = read_le<uint32_t>(is);
  std::map<std::string, NamedArray> arrays;
  for (uint32_t i = 0; i < count; ++i) arrays.insert(read_array(is));

  auto take = [&](const std::string& name) -> NamedArray {
    auto it = arrays.find(name);
    if (it == arrays.end()) {
      throw std::runtime_error("load_checkpoint: missing array " + name);
    }
    NamedArray array = std::move(it->second);
    arrays.erase(it);
    return array;
  };

  model.visit_parameters([&](const std::string& name, Tensor& p) {
    NamedArray array = take(name);
    if (array.shape != p.shape()) {
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    }
    std::copy(array.values.begin(), array.values.end(), p.values().begin());
  });
  model.visit_batchnorm([&](const std::string& name, BatchNormState& state) {
    NamedArray mean = take(name + ".running_mean");
    NamedArray var = take(name + ".running_var");
    NamedArray batches = take(name + ".batches");
    if (mean.values.size() != state.running_mean.size() ||
        var.values.size() != state.running_var.size()) {
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    }
    state.running_mean = std::move(mean.values);
    state.running_var = std::move(var.values);
    state.batches_tracked = static_cast<int64_t>(batches.values.at(0));
  });
  if (!arrays.empty()) {
    throw std::runtime_error("load_checkpoint: unexpected array " +
                             arrays.begin()->first);
  }
  return model;
}

}  // namespace segagg
