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

#ifndef SEGAGG_TRAINING_HPP_
#define SEGAGG_TRAINING_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "segagg/corpus.hpp"
#include "segagg/model.hpp"
#include "segagg/rng.hpp"
#include "segagg/segmentation.hpp"
#include "segagg/tensor.hpp"

namespace segagg {

inline constexpr double kDefaultPreEmphasis = 0.97;

// y[0] = x[0]; y[t] = x[t] - coeff * x[t-1].
std::vector<double> pre_emphasize(std::span<const double> x, double coeff);

enum class Regime { kBaseline, kSa, kSaTs };
std::string regime_name(Regime regime);
Regime regime_from_name(const std::string& name);

// Per-segment loss weights from the training protocol: 0.2 for SA (more
// weight on the aggregate term), 1.0 once the distillation loss is added.
double default_segment_loss_weight(Regime regime);

struct BatchSpec {
  int64_t batch_size = 8;
  int64_t crop_length = 6561;
};

struct Batch {
  std::vector<std::vector<double>> waveforms;  // pre-emphasized crops
  std::vector<int64_t> labels;
};

// Uniformly samples utterances, crops each to crop_length at a random
// offset (zero-padding shorter ones), and applies pre-emphasis.
Batch make_batch(const std::vector<LoadedUtterance>& train,
                 const BatchSpec& spec, double pre_emphasis, Rng& rng);

// Composite SA objective: CCE(aggregate) + weight * sum_k CCE(segment_k).
// weight == 0 returns the aggregate CCE node itself.
Tensor loss_sa(const Tensor& aggregate_logits,
               const std::vector<Tensor>& segment_logits,
               const std::vector<int64_t>& labels, double weight);

struct TsLoss {
  Tensor total;            // cosine_term + soft_label_term
  Tensor cosine_term;      // sum_j (1 - cos(e_T_j, e_S_j))
  Tensor soft_label_term;  // -sum_j sum_i P_T(i|j) log P_S(i|j)
};

// Distillation loss against a frozen teacher consuming the identical
// full-length batch. Gradients flow only into the student tensors.
TsLoss loss_ts(Model& teacher, const Tensor& teacher_input,
               const Tensor& student_embedding, const Tensor& student_logits);

struct AmsGradOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;  // L2-coupled into the gradient
};

// AMSGrad with Adam-style bias correction. The element-wise maximum of the
// second-moment estimate never decreases.
class AmsGrad {
 public:
  AmsGrad(std::vector<Tensor> params, const AmsGradOptions& options);

  void zero_grad();
  void step();
  int64_t step_count() const { return step_count_; }
  const std::vector<double>& max_second_moment(size_t param) const {
    return vhat_[param];
  }

 private:
  std::vector<Tensor> params_;
  AmsGradOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::vector<std::vector<double>> vhat_;
  int64_t step_count_ = 0;
};

// One forward pass of the SA pipeline over a pre-emphasized crop batch.
struct SaForward {
  std::vector<Tensor> segment_embeddings;  // K x [batch, dim]
  Tensor aggregate_embedding;              // [batch, dim]
  Tensor aggregate_logits;                 // [batch, speakers]
  std::vector<Tensor> segment_logits;      // K x [batch, speakers]
};

// Segments every crop with `spec`, embeds the K segment batches, aggregates
// and projects through the aggregate plus per-segment heads. The model must
// have at least K segment output heads.
SaForward sa_forward(Model& model, const Batch& batch, const SegmentSpec& spec,
                     bool training);

struct TrainOptions {
  Regime regime = Regime::kBaseline;
  double segment_loss_weight = 0.2;
  SegmentLengthPolicy segment_policy;
  double overlap_fraction = 0.1;
  BatchSpec batch;
  int64_t steps = 2000;
  AmsGradOptions optimizer;
  double pre_emphasis = kDefaultPreEmphasis;
  uint64_t seed = 11;
  // Validation EER cadence for best-checkpoint selection; 0 disables.
  int64_t val_interval = 100;
  int64_t val_trials = 100;
  int64_t eval_segment_length = 2187;  // inference segmentation for SA models
  std::string checkpoint_dir;
  std::string run_name;  // checkpoint file stem, e.g. the regime name
};

struct TrainResult {
  double final_loss = 0.0;
  double best_val_eer_percent = 100.0;
  int64_t best_step = 0;
  std::string best_checkpoint;
  std::string final_checkpoint;
};

// Runs the configured regime for the full step budget, logging one line per
// step and writing best-validation plus final checkpoints. `teacher` is
// required (frozen) for the SA+TS regime and ignored otherwise.
TrainResult train_run(Model& model, Model* teacher, const LoadedCorpus& corpus,
                      const TrainOptions& options, std::ostream& log);

}  // namespace segagg

#endif  // SEGAGG_TRAINING_HPP_
