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

#ifndef SEGAGG_OPS_HPP_
#define SEGAGG_OPS_HPP_

#include <cstdint>
#include <vector>

#include "segagg/tensor.hpp"

namespace segagg {

// Elementwise arithmetic on identically shaped tensors.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

// Full reductions to a rank-0 scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);

// x for x >= 0, slope * x otherwise; the backward gate uses the same branch.
Tensor leaky_relu(const Tensor& a, double slope);

// y = x * W^T + b with x [batch, in], W [out, in], b [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor linear(const Tensor& x, const Tensor& weight);

// Cross-correlation of [batch, ch_in, len] with [ch_out, ch_in, k].
// Rank-1 input and kernel are treated as a single-channel batch of one.
Tensor conv1d(const Tensor& input, const Tensor& kernel, int64_t stride,
              int64_t padding);

// Output length of conv1d for valid arguments.
int64_t conv1d_output_length(int64_t length, int64_t k, int64_t stride,
                             int64_t padding);

// Non-overlapping max over each window; the window must divide the length.
// Gradient routes to the first (lowest-index) maximum of each window.
Tensor maxpool1d(const Tensor& input, int64_t window);

// Running statistics owned by a batch-norm layer. Training-mode forward
// passes update them; eval mode requires at least one prior update.
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  int64_t batches_tracked = 0;

  bool initialized() const { return batches_tracked > 0; }
  void reset(int64_t channels) {
    running_mean.assign(channels, 0.0);
    running_var.assign(channels, 0.0);
    batches_tracked = 0;
  }
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;  // new = 0.9 old + 0.1 batch

// Per-channel normalization of [batch, channels, len]. Training mode
// normalizes with batch statistics (biased variance) and updates `state`;
// eval mode normalizes with the running statistics.
Tensor batchnorm1d(const Tensor& input, const Tensor& gamma,
                   const Tensor& beta, BatchNormState& state, bool training,
                   double momentum = kBatchNormMomentum,
                   double eps = kBatchNormEps);

// Row-wise log(softmax(x)) of [batch, classes], max-stabilized.
Tensor log_softmax(const Tensor& logits);

// Mean over the batch of -log softmax(logits)[label].
Tensor softmax_cce(const Tensor& logits, const std::vector<int64_t>& labels);

// a.b / (|a||b|) of two same-length vectors; rank-0 result in [-1, 1].
// Throws on a zero-norm argument (degenerate embedding).
Tensor cosine_similarity(const Tensor& a, const Tensor& b);
// Row-wise variant: [batch, dim] x [batch, dim] -> [batch].
Tensor cosine_similarity_rows(const Tensor& a, const Tensor& b);

// Slice of [batch, steps, features] at one time step -> [batch, features].
Tensor select_time(const Tensor& input, int64_t step);

// [batch, channels, len] -> [batch, len, channels].
Tensor transpose_last2(const Tensor& input);

// Single-layer GRU weights. x-side matrices are [hidden, features], h-side
// [hidden, hidden], biases [hidden].
struct GruParams {
  Tensor weight_update_x, weight_update_h, bias_update;
  Tensor weight_reset_x, weight_reset_h, bias_reset;
  Tensor weight_cand_x, weight_cand_h, bias_cand;
};

// Runs the GRU recurrence over [batch, steps, features] and returns the
// final hidden state [batch, hidden]. The reset gate is applied to the
// hidden state before the candidate projection:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wn x + Un (r * h) + bn)
//   h' = (1 - z) * n + z * h
// An undefined initial_hidden starts from zeros.
Tensor gru_forward(const Tensor& input, const GruParams& params,
                   const Tensor& initial_hidden = Tensor());

}  // namespace segagg

#endif  // SEGAGG_OPS_HPP_
