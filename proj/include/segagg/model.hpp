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

#ifndef SEGAGG_MODEL_HPP_
#define SEGAGG_MODEL_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "segagg/ops.hpp"
#include "segagg/tensor.hpp"

namespace segagg {

// Architecture description of the raw-waveform embedding extractor:
// a strided front-end convolution (kernel 3, stride 3), groups of
// pre-activation residual blocks (two 3-tap convolutions each, identity
// skip, MaxPool(3) after the block), a GRU over the remaining frames, an
// embedding projection and speaker-identification output heads.
struct ModelConfig {
  int64_t input_length = 6561;
  int64_t first_conv_channels = 16;
  // Pairs of (number of blocks, channels). Default mirrors the reference
  // layout of two groups at 1/8 channel width.
  std::vector<std::pair<int64_t, int64_t>> block_groups = {{2, 16}, {4, 32}};
  int64_t gru_hidden = 32;
  int64_t embedding_dim = 32;
  int64_t num_speakers = 20;
  double leaky_slope = 0.3;
  // Separate per-segment output heads; 0 for a plain (non-SA) model.
  int64_t num_segment_output_layers = 0;

  int64_t total_blocks() const;
  // 3^(1 + total pooling layers); every valid input length is a positive
  // multiple of this.
  int64_t downsampling_factor() const;
  int64_t frames_for_length(int64_t length) const;
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

std::string model_config_to_text(const ModelConfig& config);
ModelConfig model_config_from_text(const std::string& text);

// Parses "2x16,4x32" style block group lists.
std::vector<std::pair<int64_t, int64_t>> parse_block_groups(
    const std::string& text);

struct BatchNormLayer {
  Tensor gamma;
  Tensor beta;
  BatchNormState state;
};

struct ResidualBlock {
  // The first block of the network omits its leading BN + activation.
  std::optional<BatchNormLayer> lead_bn;
  Tensor conv1;  // [out, in, 3], stride 1, padding 1
  BatchNormLayer mid_bn;
  Tensor conv2;  // [out, out, 3], stride 1, padding 1
  Tensor projection;  // [out, in, 1] when channels change, else undefined
};

struct OutputHead {
  Tensor weight;
  Tensor bias;
};

// A built network: parameter set plus the frozen flag. Frozen models run
// batch norm in eval mode, never record gradients and never change.
class Model {
 public:
  Model() = default;

  // Deterministic construction: weights are uniform in +-sqrt(1/fan_in),
  // drawn in a fixed order from `seed`; equal (config, seed) pairs build
  // bit-identical parameter sets.
  static Model build(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  bool frozen() const { return frozen_; }
  void freeze();

  // Embeds a batch of equal-length waveform segments [batch, 1, length];
  // the length must be a positive multiple of downsampling_factor().
  // `training` selects batch-norm mode; frozen models always run eval mode
  // without recording gradients. Output: [batch, embedding_dim].
  Tensor forward_embedding(const Tensor& waveforms, bool training);

  // Speaker logits [batch, num_speakers] from embeddings [batch, dim].
  static constexpr int64_t kAggregateHead = -1;
  Tensor forward_logits(const Tensor& embeddings, int64_t head);

  // Fixed-order traversal used by the optimizer and checkpoints.
  void visit_parameters(
      const std::function<void(const std::string&, Tensor&)>& fn);
  void visit_batchnorm(
      const std::function<void(const std::string&, BatchNormState&)>& fn);

 private:
  ModelConfig config_;
  bool frozen_ = false;

  Tensor stem_kernel_;
  BatchNormLayer stem_bn_;
  std::vector<ResidualBlock> blocks_;
  GruParams gru_;
  Tensor embedding_weight_;
  Tensor embedding_bias_;
  OutputHead aggregate_head_;
  std::vector<OutputHead> segment_heads_;
};

// Packs a waveform batch into a [batch, 1, length] input tensor.
Tensor waveform_batch(const std::vector<std::vector<double>>& rows);

// Flat binary checkpoint: "SGCK" magic, format version, the serialized
// ModelConfig, then named arrays (u32 name length, name, u32 rank, u64 dims,
// 64-bit little-endian values) covering parameters and batch-norm state.
// Byte-stable for identical models.
void save_checkpoint(Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace segagg

#endif  // SEGAGG_MODEL_HPP_
