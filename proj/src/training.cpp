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

#include "segagg/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <stdexcept>

#include "segagg/evaluation.hpp"
#include "segagg/ops.hpp"

namespace segagg {
namespace {

constexpr uint64_t kBatchStream = 0x62617463ULL;      // "batc"
constexpr uint64_t kSegmentStream = 0x7365676cULL;    // "segl"
constexpr uint64_t kValidationStream = 0x76616c69ULL; // "vali"

std::string format_double(double value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

}  // namespace

std::vector<double> pre_emphasize(std::span<const double> x, double coeff) {
  std::vector<double> y(x.size());
  if (x.empty()) return y;
  y[0] = x[0];
  for (size_t t = 1; t < x.size(); ++t) y[t] = x[t] - coeff * x[t - 1];
  return y;
}

std::string regime_name(Regime regime) {
  switch (regime) {
    case Regime::kBaseline: return "baseline";
    case Regime::kSa: return "sa";
    case Regime::kSaTs: return "sa_ts";
  }
  throw std::invalid_argument("unknown regime");
}

Regime regime_from_name(const std::string& name) {
  if (name == "baseline") return Regime::kBaseline;
  if (name == "sa") return Regime::kSa;
  if (name == "sa_ts") return Regime::kSaTs;
  throw std::invalid_argument("unknown regime: " + name +
                              " (expected baseline, sa or sa_ts)");
}

double default_segment_loss_weight(Regime regime) {
  return regime == Regime::kSaTs ? 1.0 : 0.2;
}

Batch make_batch(const std::vector<LoadedUtterance>& train,
                 const BatchSpec& spec, double pre_emphasis, Rng& rng) {
  if (train.empty()) throw std::invalid_argument("make_batch: empty corpus");
  if (spec.batch_size < 1 || spec.crop_length < 1) {
    throw std::invalid_argument("make_batch: invalid batch spec");
  }
  Batch batch;
  batch.waveforms.reserve(spec.batch_size);
  batch.labels.reserve(spec.batch_size);
  for (int64_t j = 0; j < spec.batch_size; ++j) {
    const int64_t pick = rng.uniform_int(0, static_cast<int64_t>(train.size()) - 1);
    const LoadedUtterance& utt = train[pick];
    const int64_t len = static_cast<int64_t>(utt.samples.size());
    std::vector<double> crop(spec.crop_length, 0.0);
    if (len >= spec.crop_length) {
      const int64_t offset = rng.uniform_int(0, len - spec.crop_length);
      std::copy(utt.samples.begin() + offset,
                utt.samples.begin() + offset + spec.crop_length, crop.begin());
    } else {
      std::copy(utt.samples.begin(), utt.samples.end(), crop.begin());
    }
    batch.waveforms.push_back(pre_emphasize(crop, pre_emphasis));
    batch.labels.push_back(utt.label);
  }
  return batch;
}

Tensor loss_sa(const Tensor& aggregate_logits,
               const std::vector<Tensor>& segment_logits,
               const std::vector<int64_t>& labels, double weight) {
  if (weight < 0.0) throw std::invalid_argument("loss_sa: weight must be >= 0");
  const Tensor aggregate_loss = softmax_cce(aggregate_logits, labels);
  if (weight == 0.0) return aggregate_loss;
  if (segment_logits.empty()) {
    throw std::invalid_argument("loss_sa: no segment logits with weight > 0");
  }
  Tensor segment_sum = softmax_cce(segment_logits.front(), labels);
  for (size_t k = 1; k < segment_logits.size(); ++k) {
    segment_sum = add(segment_sum, softmax_cce(segment_logits[k], labels));
  }
  return add(aggregate_loss, scale(segment_sum, weight));
}

TsLoss loss_ts(Model& teacher, const Tensor& teacher_input,
               const Tensor& student_embedding, const Tensor& student_logits) {
  if (!teacher.frozen()) {
    throw std::invalid_argument("loss_ts: teacher must be frozen");
  }
  if (teacher.config().embedding_dim != student_embedding.dim(1)) {
    throw std::invalid_argument(
        "loss_ts: teacher embedding dim " +
        std::to_string(teacher.config().embedding_dim) +
        " does not match student dim " + std::to_string(student_embedding.dim(1)));
  }
  if (teacher.config().num_speakers != student_logits.dim(1)) {
    throw std::invalid_argument("loss_ts: speaker count mismatch");
  }

  // Teacher runs detached; its outputs enter the graph as constants.
  Tensor teacher_embedding;
  Tensor teacher_probs;
  {
    NoGradGuard guard;
    teacher_embedding = teacher.forward_embedding(teacher_input, false);
    const Tensor teacher_logits =
        teacher.forward_logits(teacher_embedding, Model::kAggregateHead);
    const int64_t batch = teacher_logits.dim(0);
    const int64_t classes = teacher_logits.dim(1);
    std::vector<double> probs(batch * classes);
    const double* z = teacher_logits.values().data();
    for (int64_t b = 0; b < batch; ++b) {
      const double* row = z + b * classes;
      double m = row[0];
      for (int64_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
      double denom = 0.0;
      for (int64_t c = 0; c < classes; ++c) denom += std::exp(row[c] - m);
      for (int64_t c = 0; c < classes; ++c) {
        probs[b * classes + c] = std::exp(row[c] - m) / denom;
      }
    }
    teacher_probs = Tensor::from_values({batch, classes}, std::move(probs));
  }

  TsLoss loss;
  const Tensor cos_rows = cosine_similarity_rows(teacher_embedding, student_embedding);
  loss.cosine_term = sum(add_scalar(scale(cos_rows, -1.0), 1.0));
  const Tensor log_probs = log_softmax(student_logits);
  loss.soft_label_term = scale(sum(mul(teacher_probs, log_probs)), -1.0);
  loss.total = add(loss.cosine_term, loss.soft_label_term);
  return loss;
}

AmsGrad::AmsGrad(std::vector<Tensor> params, const AmsGradOptions& options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  vhat_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
    vhat_.emplace_back(p.numel(), 0.0);
  }
}

void AmsGrad::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void AmsGrad::step() {
  ++step_count_;
  const double beta1 = options_.beta1;
  const double beta2 = options_.beta2;
  const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
  const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    std::span<double> theta = p.values();
    std::span<double> grad = p.grad();
    double* m = m_[i].data();
    double* v = v_[i].data();
    double* vhat = vhat_[i].data();
    for (size_t j = 0; j < theta.size(); ++j) {
      const double g = grad[j] + options_.weight_decay * theta[j];
      m[j] = beta1 * m[j] + (1.0 - beta1) * g;
      v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
      vhat[j] = std::max(vhat[j], v[j]);
      const double m_hat = m[j] / bias1;
      const double v_hat_corr = vhat[j] / bias2;
      theta[j] -= options_.learning_rate * m_hat /
                  (std::sqrt(v_hat_corr) + options_.epsilon);
    }
  }
}

SaForward sa_forward(Model& model, const Batch& batch, const SegmentSpec& spec,
                     bool training) {
  SaForward out;
  const int64_t batch_size = static_cast<int64_t>(batch.waveforms.size());
  if (batch_size < 1) throw std::invalid_argument("sa_forward: empty batch");

  // Every crop has the same length, so all rows share K and the starts.
  std::vector<SegmentSet> sets;
  sets.reserve(batch_size);
  for (const auto& row : batch.waveforms) sets.push_back(segment(row, spec));
  const int64_t k = sets.front().count();
  if (k > model.config().num_segment_output_layers) {
    throw std::invalid_argument(
        "sa_forward: " + std::to_string(k) + " segments exceed the model's " +
        std::to_string(model.config().num_segment_output_layers) +
        " segment output heads");
  }

  for (int64_t s = 0; s < k; ++s) {
    std::vector<std::vector<double>> rows;
    rows.reserve(batch_size);
    for (const SegmentSet& set : sets) rows.push_back(set.segments[s]);
    const Tensor segment_batch = waveform_batch(rows);
    out.segment_embeddings.push_back(model.forward_embedding(segment_batch, training));
  }
  out.aggregate_embedding = aggregate(out.segment_embeddings);
  out.aggregate_logits =
      model.forward_logits(out.aggregate_embedding, Model::kAggregateHead);
  for (int64_t s = 0; s < k; ++s) {
    out.segment_logits.push_back(model.forward_logits(out.segment_embeddings[s], s));
  }
  return out;
}

namespace {

// Validation EER with the model's own inference mode, used to pick the best
// checkpoint along the run.
double validation_eer(Model& model, const TrainOptions& options,
                      const LoadedCorpus& corpus,
                      const std::vector<TrialPair>& pairs) {
  InferenceSettings settings;
  settings.segmented = model.config().num_segment_output_layers > 0;
  if (settings.segmented) {
    settings.spec =
        make_segment_spec(options.eval_segment_length, options.overlap_fraction);
  }
  settings.pre_emphasis = options.pre_emphasis;
  const std::vector<double> scores =
      score_trials(model, settings, corpus.validation, pairs,
                   options.batch.crop_length, options.batch.crop_length);
  return compute_eer(split_scores(pairs, scores)).eer_percent;
}

}  // namespace

TrainResult train_run(Model& model, Model* teacher, const LoadedCorpus& corpus,
                      const TrainOptions& options, std::ostream& log) {
  if (corpus.train.empty()) {
    throw std::invalid_argument("train_run: training split is empty");
  }
  if (options.regime == Regime::kSaTs) {
    if (teacher == nullptr) {
      throw std::invalid_argument("train_run: sa_ts regime needs a teacher model");
    }
    if (!teacher->frozen()) teacher->freeze();
  }
  const int64_t factor = model.config().downsampling_factor();
  if (options.batch.crop_length % factor != 0) {
    throw std::invalid_argument("train_run: crop length must be a multiple of " +
                                std::to_string(factor));
  }

  std::filesystem::create_directories(options.checkpoint_dir);
  const std::string best_path =
      (std::filesystem::path(options.checkpoint_dir) /
       (options.run_name + "_best.ckpt")).string();
  const std::string final_path =
      (std::filesystem::path(options.checkpoint_dir) /
       (options.run_name + "_final.ckpt")).string();

  std::vector<Tensor> params;
  model.visit_parameters([&](const std::string&, Tensor& p) { params.push_back(p); });
  AmsGrad optimizer(std::move(params), options.optimizer);

  Rng batch_rng = Rng(options.seed).fork(kBatchStream);
  Rng segment_rng = Rng(options.seed).fork(kSegmentStream);
  Rng validation_rng = Rng(options.seed).fork(kValidationStream);

  const bool validate = options.val_interval > 0 && options.val_trials > 0 &&
                        corpus.validation.size() >= 4;
  std::vector<TrialPair> val_pairs;
  if (validate) {
    val_pairs = build_trial_pairs(corpus.validation, options.val_trials, validation_rng);
  }

  TrainResult result;
  const auto start_time = std::chrono::steady_clock::now();
  bool best_saved = false;

  for (int64_t step = 1; step <= options.steps; ++step) {
    const Batch batch =
        make_batch(corpus.train, options.batch, options.pre_emphasis, batch_rng);

    Tensor loss;
    double loss_e = 0.0;
    double loss_segments = 0.0;
    double loss_ts_cos = 0.0;
    double loss_ts_soft = 0.0;
    int64_t segment_length = 0;

    if (options.regime == Regime::kBaseline) {
      const Tensor x = waveform_batch(batch.waveforms);
      const Tensor embedding = model.forward_embedding(x, true);
      const Tensor logits = model.forward_logits(embedding, Model::kAggregateHead);
      loss = softmax_cce(logits, batch.labels);
      loss_e = loss.item();
    } else {
      segment_length = draw_segment_length(options.segment_policy, factor, segment_rng);
      const SegmentSpec spec =
          make_segment_spec(segment_length, options.overlap_fraction);
      const SaForward forward = sa_forward(model, batch, spec, true);
      loss = loss_sa(forward.aggregate_logits, forward.segment_logits,
                     batch.labels, options.segment_loss_weight);
      {
        NoGradGuard guard;
        loss_e = softmax_cce(forward.aggregate_logits, batch.labels).item();
      }
      loss_segments = loss.item() - loss_e;
      if (options.regime == Regime::kSaTs) {
        const Tensor x = waveform_batch(batch.waveforms);
        const TsLoss ts = loss_ts(*teacher, x, forward.aggregate_embedding,
                                  forward.aggregate_logits);
        loss_ts_cos = ts.cosine_term.item();
        loss_ts_soft = ts.soft_label_term.item();
        loss = add(loss, ts.total);
      }
    }

    optimizer.zero_grad();
    backward(loss);
    optimizer.step();
    result.final_loss = loss.item();

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time)
            .count();
    log << "step=" << step << " regime=" << regime_name(options.regime)
        << " loss=" << format_double(result.final_loss)
        << " loss_e=" << format_double(loss_e);
    if (options.regime != Regime::kBaseline) {
      log << " loss_seg=" << format_double(loss_segments)
          << " segment_length=" << segment_length;
    }
    if (options.regime == Regime::kSaTs) {
      log << " loss_ts_cos=" << format_double(loss_ts_cos)
          << " loss_ts_soft=" << format_double(loss_ts_soft);
    }
    log << " elapsed_s=" << format_double(elapsed) << "\n";

    if (validate && (step % options.val_interval == 0 || step == options.steps)) {
      const double eer = validation_eer(model, options, corpus, val_pairs);
      log << "validation step=" << step << " eer=" << format_double(eer) << "\n";
      if (eer < result.best_val_eer_percent) {
        result.best_val_eer_percent = eer;
        result.best_step = step;
        save_checkpoint(model, best_path);
        best_saved = true;
      }
    }
  }

  save_checkpoint(model, final_path);
  if (!best_saved) {
    // No validation ran (or never improved); the final model is the best.
    save_checkpoint(model, best_path);
    result.best_step = options.steps;
  }
  result.best_checkpoint = best_path;
  result.final_checkpoint = final_path;
  return result;
}

}  // namespace segagg
