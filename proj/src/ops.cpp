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

#include "segagg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "segagg/thread_pool.hpp"

namespace segagg {
namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

std::string shape_text(const std::vector<int64_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
  return make_node(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    for (size_t slot = 0; slot < 2; ++slot) {
      TensorImpl& parent = *self.parents[slot];
      if (!parent.requires_grad) continue;
      parent.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) parent.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
  return make_node(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    TensorImpl& pa = *self.parents[0];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    TensorImpl& pb = *self.parents[1];
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
  return make_node(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    TensorImpl& pa = *self.parents[0];
    TensorImpl& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        pa.grad[i] += self.grad[i] * pb.data[i];
      }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        pb.grad[i] += self.grad[i] * pa.data[i];
      }
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  const double* pa = a.values().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * factor;
  return make_node(a.shape(), std::move(out), {a}, [factor](TensorImpl& self) {
    TensorImpl& parent = *self.parents[0];
    parent.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      parent.grad[i] += self.grad[i] * factor;
    }
  });
}

Tensor add_scalar(const Tensor& a, double value) {
  std::vector<double> out(a.numel());
  const double* pa = a.values().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + value;
  return make_node(a.shape(), std::move(out), {a}, [](TensorImpl& self) {
    TensorImpl& parent = *self.parents[0];
    parent.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) parent.grad[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_node({}, {total}, {a}, [](TensorImpl& self) {
    TensorImpl& parent = *self.parents[0];
    parent.ensure_grad();
    const double g = self.grad[0];
    for (double& v : parent.grad) v += g;
  });
}

Tensor mean(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  const double inv = 1.0 / static_cast<double>(a.numel());
  return make_node({}, {total * inv}, {a}, [inv](TensorImpl& self) {
    TensorImpl& parent = *self.parents[0];
    parent.ensure_grad();
    const double g = self.grad[0] * inv;
    for (double& v : parent.grad) v += g;
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  const double* pa = a.values().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-pa[i]));
  return make_node(a.shape(), std::move(out), {a}, [](TensorImpl& self) {
    TensorImpl& parent = *self.parents[0];
    parent.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.data[i];
      parent.grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh_op(const Tensor& a) {
  std::vector<double> out(a.numel());
  const double* pa = a.values().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(pa[i]);
  return make_node(a.shape(), std::move(out), {a}, [](TensorImpl& self) {
    TensorImpl& parent = *self.parents[0];
    parent.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.data[i];
      parent.grad[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  std::vector<double> out(a.numel());
  const double* pa = a.values().data();
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = pa[i] >= 0.0 ? pa[i] : slope * pa[i];
  }
  return make_node(a.shape(), std::move(out), {a}, [slope](TensorImpl& self) {
    TensorImpl& parent = *self.parents[0];
    parent.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      parent.grad[i] += self.grad[i] * (parent.data[i] >= 0.0 ? 1.0 : slope);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2) {
    throw std::invalid_argument("linear: x and weight must be rank 2");
  }
  const int64_t batch = x.dim(0);
  const int64_t in = x.dim(1);
  const int64_t out_dim = weight.dim(0);
  if (weight.dim(1) != in) {
    throw std::invalid_argument("linear: weight columns " +
                                std::to_string(weight.dim(1)) +
                                " do not match input features " +
                                std::to_string(in));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    throw std::invalid_argument("linear: bias must be [out]");
  }

  std::vector<double> out(batch * out_dim);
  const double* px = x.values().data();
  const double* pw = weight.values().data();
  const double* pb = has_bias ? bias.values().data() : nullptr;
  parallel_for(batch, 4, [&](int64_t b0, int64_t b1) {
    for (int64_t b = b0; b < b1; ++b) {
      const double* xr = px + b * in;
      double* yr = out.data() + b * out_dim;
      for (int64_t o = 0; o < out_dim; ++o) {
        const double* wr = pw + o * in;
        double acc = pb ? pb[o] : 0.0;
        for (int64_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
        yr[o] = acc;
      }
    }
  });

  std::vector<Tensor> parents = {x, weight};
  if (has_bias) parents.push_back(bias);
  return make_node(
      {batch, out_dim}, std::move(out), std::move(parents),
      [batch, in, out_dim, has_bias](TensorImpl& self) {
        TensorImpl& px = *self.parents[0];
        TensorImpl& pw = *self.parents[1];
        const double* g = self.grad.data();
        if (px.requires_grad) {
          px.ensure_grad();
          double* dx = px.grad.data();
          const double* w = pw.data.data();
          parallel_for(batch, 4, [&](int64_t b0, int64_t b1) {
            for (int64_t b = b0; b < b1; ++b) {
              const double* gr = g + b * out_dim;
              double* dxr = dx + b * in;
              for (int64_t o = 0; o < out_dim; ++o) {
                const double go = gr[o];
                const double* wr = w + o * in;
                for (int64_t i = 0; i < in; ++i) dxr[i] += go * wr[i];
              }
            }
          });
        }
        if (pw.requires_grad) {
          pw.ensure_grad();
          double* dw = pw.grad.data();
          const double* xv = px.data.data();
          parallel_for(out_dim, 8, [&](int64_t o0, int64_t o1) {
            for (int64_t o = o0; o < o1; ++o) {
              double* dwr = dw + o * in;
              for (int64_t b = 0; b < batch; ++b) {
                const double go = g[b * out_dim + o];
                const double* xr = xv + b * in;
                for (int64_t i = 0; i < in; ++i) dwr[i] += go * xr[i];
              }
            }
          });
        }
        if (has_bias) {
          TensorImpl& pbias = *self.parents[2];
          if (pbias.requires_grad) {
            pbias.ensure_grad();
            for (int64_t b = 0; b < batch; ++b) {
              for (int64_t o = 0; o < out_dim; ++o) {
                pbias.grad[o] += g[b * out_dim + o];
              }
            }
          }
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& weight) {
  return linear(x, weight, Tensor());
}

int64_t conv1d_output_length(int64_t length, int64_t k, int64_t stride,
                             int64_t padding) {
  return (length + 2 * padding - k) / stride + 1;
}

Tensor conv1d(const Tensor& input, const Tensor& kernel, int64_t stride,
              int64_t padding) {
  if (stride < 1) throw std::invalid_argument("conv1d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv1d: padding must be >= 0");
  const bool vector_form = input.rank() == 1 && kernel.rank() == 1;
  if (!vector_form && (input.rank() != 3 || kernel.rank() != 3)) {
    throw std::invalid_argument(
        "conv1d: expected [batch, ch_in, len] input with [ch_out, ch_in, k] "
        "kernel, got " +
        shape_text(input.shape()) + " and " + shape_text(kernel.shape()));
  }
  const int64_t batch = vector_form ? 1 : input.dim(0);
  const int64_t ch_in = vector_form ? 1 : input.dim(1);
  const int64_t length = vector_form ? input.dim(0) : input.dim(2);
  const int64_t ch_out = vector_form ? 1 : kernel.dim(0);
  const int64_t k = vector_form ? kernel.dim(0) : kernel.dim(2);
  if (!vector_form && kernel.dim(1) != ch_in) {
    throw std::invalid_argument("conv1d: input channels " +
                                std::to_string(ch_in) +
                                " do not match kernel channels " +
                                std::to_string(kernel.dim(1)));
  }
  if (k > length + 2 * padding) {
    throw std::invalid_argument("conv1d: kernel longer than padded input");
  }
  const int64_t out_len = conv1d_output_length(length, k, stride, padding);
  if (out_len < 1) throw std::invalid_argument("conv1d: empty output");

  std::vector<double> out(batch * ch_out * out_len, 0.0);
  const double* px = input.values().data();
  const double* pw = kernel.values().data();

  // Valid t range for one kernel tap j: 0 <= t*stride - padding + j < length.
  // Captures by value: the backward closure outlives this frame.
  auto tap_range = [padding, stride, length, out_len](int64_t j, int64_t& t0,
                                                      int64_t& t1) {
    const int64_t lo = padding - j;
    t0 = lo > 0 ? (lo + stride - 1) / stride : 0;
    const int64_t hi = length - 1 + padding - j;
    if (hi < 0) {
      t1 = -1;
      return;
    }
    t1 = std::min(out_len - 1, hi / stride);
  };

  const int64_t slice_work = ch_in * k * out_len;
  const int64_t min_slices = std::max<int64_t>(2, 32768 / std::max<int64_t>(1, slice_work));
  parallel_for(batch * ch_out, min_slices, [&](int64_t s0, int64_t s1) {
    for (int64_t s = s0; s < s1; ++s) {
      const int64_t b = s / ch_out;
      const int64_t o = s % ch_out;
      double* __restrict yr = out.data() + s * out_len;
      for (int64_t i = 0; i < ch_in; ++i) {
        const double* __restrict xr = px + (b * ch_in + i) * length;
        const double* wr = pw + (o * ch_in + i) * k;
        for (int64_t j = 0; j < k; ++j) {
          const double wv = wr[j];
          if (wv == 0.0) continue;
          int64_t t0, t1;
          tap_range(j, t0, t1);
          const double* __restrict xs = xr - padding + j;
          if (stride == 1) {
            // Contiguous axpy; the common residual-block case.
            for (int64_t t = t0; t <= t1; ++t) yr[t] += wv * xs[t];
          } else {
            for (int64_t t = t0; t <= t1; ++t) yr[t] += wv * xs[t * stride];
          }
        }
      }
    }
  });

  std::vector<int64_t> out_shape =
      vector_form ? std::vector<int64_t>{out_len}
                  : std::vector<int64_t>{batch, ch_out, out_len};
  return make_node(
      std::move(out_shape), std::move(out), {input, kernel},
      [batch, ch_in, ch_out, length, k, out_len, stride, padding,
       tap_range](TensorImpl& self) {
        TensorImpl& px = *self.parents[0];
        TensorImpl& pw = *self.parents[1];
        const double* g = self.grad.data();
        if (px.requires_grad) {
          px.ensure_grad();
          double* dx = px.grad.data();
          const double* w = pw.data.data();
          const int64_t slice_work = ch_out * k * out_len;
          const int64_t min_slices =
              std::max<int64_t>(2, 32768 / std::max<int64_t>(1, slice_work));
          parallel_for(batch * ch_in, min_slices, [&](int64_t s0, int64_t s1) {
            for (int64_t s = s0; s < s1; ++s) {
              const int64_t b = s / ch_in;
              const int64_t i = s % ch_in;
              double* __restrict dxr = dx + s * length;
              for (int64_t o = 0; o < ch_out; ++o) {
                const double* __restrict gr = g + (b * ch_out + o) * out_len;
                const double* wr = w + (o * ch_in + i) * k;
                for (int64_t j = 0; j < k; ++j) {
                  const double wv = wr[j];
                  if (wv == 0.0) continue;
                  int64_t t0, t1;
                  tap_range(j, t0, t1);
                  double* __restrict xs = dxr - padding + j;
                  if (stride == 1) {
                    for (int64_t t = t0; t <= t1; ++t) xs[t] += wv * gr[t];
                  } else {
                    for (int64_t t = t0; t <= t1; ++t) xs[t * stride] += wv * gr[t];
                  }
                }
              }
            }
          });
        }
        if (pw.requires_grad) {
          pw.ensure_grad();
          double* dw = pw.grad.data();
          const double* xv = px.data.data();
          const int64_t slice_work = batch * k * out_len;
          const int64_t min_slices =
              std::max<int64_t>(2, 32768 / std::max<int64_t>(1, slice_work));
          parallel_for(ch_out * ch_in, min_slices, [&](int64_t s0, int64_t s1) {
            for (int64_t s = s0; s < s1; ++s) {
              const int64_t o = s / ch_in;
              const int64_t i = s % ch_in;
              double* dwr = dw + s * k;
              for (int64_t j = 0; j < k; ++j) {
                int64_t t0, t1;
                tap_range(j, t0, t1);
                double acc = 0.0;
                for (int64_t b = 0; b < batch; ++b) {
                  const double* __restrict gr = g + (b * ch_out + o) * out_len;
                  const double* __restrict xs = xv + (b * ch_in + i) * length - padding + j;
                  if (stride == 1) {
                    // Four-lane partial sums let the dot product vectorize.
                    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                    int64_t t = t0;
                    for (; t + 3 <= t1; t += 4) {
                      a0 += gr[t] * xs[t];
                      a1 += gr[t + 1] * xs[t + 1];
                      a2 += gr[t + 2] * xs[t + 2];
                      a3 += gr[t + 3] * xs[t + 3];
                    }
                    for (; t <= t1; ++t) a0 += gr[t] * xs[t];
                    acc += (a0 + a1) + (a2 + a3);
                  } else {
                    for (int64_t t = t0; t <= t1; ++t) acc += gr[t] * xs[t * stride];
                  }
                }
                dwr[j] += acc;
              }
            }
          });
        }
      });
}

Tensor maxpool1d(const Tensor& input, int64_t window) {
  if (window < 1) throw std::invalid_argument("maxpool1d: window must be >= 1");
  const bool vector_form = input.rank() == 1;
  if (!vector_form && input.rank() != 3) {
    throw std::invalid_argument("maxpool1d: expected rank-1 or rank-3 input");
  }
  const int64_t rows = vector_form ? 1 : input.dim(0) * input.dim(1);
  const int64_t length = vector_form ? input.dim(0) : input.dim(2);
  if (length % window != 0) {
    throw std::invalid_argument("maxpool1d: length " + std::to_string(length) +
                                " not divisible by window " +
                                std::to_string(window));
  }
  const int64_t out_len = length / window;

  std::vector<double> out(rows * out_len);
  auto argmax = std::make_shared<std::vector<int64_t>>(rows * out_len);
  const double* px = input.values().data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = px + r * length;
    for (int64_t t = 0; t < out_len; ++t) {
      const int64_t base = t * window;
      double best = xr[base];
      int64_t best_index = base;
      for (int64_t j = 1; j < window; ++j) {
        if (xr[base + j] > best) {
          best = xr[base + j];
          best_index = base + j;
        }
      }
      out[r * out_len + t] = best;
      (*argmax)[r * out_len + t] = best_index;
    }
  }

  std::vector<int64_t> out_shape =
      vector_form ? std::vector<int64_t>{out_len}
                  : std::vector<int64_t>{input.dim(0), input.dim(1), out_len};
  return make_node(std::move(out_shape), std::move(out), {input},
                   [rows, length, out_len, argmax](TensorImpl& self) {
                     TensorImpl& parent = *self.parents[0];
                     parent.ensure_grad();
                     for (int64_t r = 0; r < rows; ++r) {
                       for (int64_t t = 0; t < out_len; ++t) {
                         const int64_t at = r * out_len + t;
                         parent.grad[r * length + (*argmax)[at]] += self.grad[at];
                       }
                     }
                   });
}

Tensor batchnorm1d(const Tensor& input, const Tensor& gamma,
                   const Tensor& beta, BatchNormState& state, bool training,
                   double momentum, double eps) {
  if (input.rank() != 3) {
    throw std::invalid_argument("batchnorm1d: expected [batch, channels, len]");
  }
  const int64_t batch = input.dim(0);
  const int64_t channels = input.dim(1);
  const int64_t length = input.dim(2);
  if (gamma.rank() != 1 || gamma.dim(0) != channels || beta.rank() != 1 ||
      beta.dim(0) != channels) {
    throw std::invalid_argument("batchnorm1d: gamma/beta must be [channels]");
  }
  if (state.running_mean.empty()) state.reset(channels);
  if (static_cast<int64_t>(state.running_mean.size()) != channels) {
    throw std::invalid_argument("batchnorm1d: state channel mismatch");
  }

  const int64_t per_channel = batch * length;
  auto mean_buf = std::make_shared<std::vector<double>>(channels);
  auto inv_std_buf = std::make_shared<std::vector<double>>(channels);

  if (training) {
    if (per_channel < 2) {
      throw std::invalid_argument(
          "batchnorm1d: training mode needs batch*len >= 2");
    }
    const double* px = input.values().data();
    for (int64_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (int64_t b = 0; b < batch; ++b) {
        const double* xr = px + (b * channels + c) * length;
        for (int64_t t = 0; t < length; ++t) s += xr[t];
      }
      const double m = s / static_cast<double>(per_channel);
      double sq = 0.0;
      for (int64_t b = 0; b < batch; ++b) {
        const double* xr = px + (b * channels + c) * length;
        for (int64_t t = 0; t < length; ++t) {
          const double d = xr[t] - m;
          sq += d * d;
        }
      }
      const double var = sq / static_cast<double>(per_channel);
      (*mean_buf)[c] = m;
      (*inv_std_buf)[c] = 1.0 / std::sqrt(var + eps);
      // Running statistics seed from the first batch, then follow
      // new = momentum * old + (1 - momentum) * batch.
      if (state.batches_tracked == 0) {
        state.running_mean[c] = m;
        state.running_var[c] = var;
      } else {
        state.running_mean[c] = momentum * state.running_mean[c] + (1.0 - momentum) * m;
        state.running_var[c] = momentum * state.running_var[c] + (1.0 - momentum) * var;
      }
    }
    ++state.batches_tracked;
  } else {
    if (!state.initialized()) {
      throw std::runtime_error(
          "batchnorm1d: eval mode requested before any running statistics "
          "exist");
    }
    for (int64_t c = 0; c < channels; ++c) {
      (*mean_buf)[c] = state.running_mean[c];
      (*inv_std_buf)[c] = 1.0 / std::sqrt(state.running_var[c] + eps);
    }
  }

  std::vector<double> out(input.numel());
  {
    const double* px = input.values().data();
    const double* pg = gamma.values().data();
    const double* pb = beta.values().data();
    const int64_t min_slices =
        std::max<int64_t>(2, 16384 / std::max<int64_t>(1, length));
    parallel_for(batch * channels, min_slices, [&](int64_t s0, int64_t s1) {
      for (int64_t s = s0; s < s1; ++s) {
        const int64_t c = s % channels;
        const double m = (*mean_buf)[c];
        const double is = (*inv_std_buf)[c];
        const double gm = pg[c];
        const double bt = pb[c];
        const double* xr = px + s * length;
        double* yr = out.data() + s * length;
        for (int64_t t = 0; t < length; ++t) yr[t] = gm * (xr[t] - m) * is + bt;
      }
    });
  }

  return make_node(
      input.shape(), std::move(out), {input, gamma, beta},
      [batch, channels, length, training, mean_buf,
       inv_std_buf](TensorImpl& self) {
        TensorImpl& px = *self.parents[0];
        TensorImpl& pgamma = *self.parents[1];
        TensorImpl& pbeta = *self.parents[2];
        const double* g = self.grad.data();
        const double* xv = px.data.data();
        const double n = static_cast<double>(batch * length);

        // Per-channel reductions shared by all three gradients.
        std::vector<double> sum_g(channels, 0.0);
        std::vector<double> sum_g_xhat(channels, 0.0);
        for (int64_t c = 0; c < channels; ++c) {
          const double m = (*mean_buf)[c];
          const double is = (*inv_std_buf)[c];
          double sg = 0.0, sgx = 0.0;
          for (int64_t b = 0; b < batch; ++b) {
            const int64_t base = (b * channels + c) * length;
            for (int64_t t = 0; t < length; ++t) {
              const double gv = g[base + t];
              sg += gv;
              sgx += gv * (xv[base + t] - m) * is;
            }
          }
          sum_g[c] = sg;
          sum_g_xhat[c] = sgx;
        }
        if (pgamma.requires_grad) {
          pgamma.ensure_grad();
          for (int64_t c = 0; c < channels; ++c) pgamma.grad[c] += sum_g_xhat[c];
        }
        if (pbeta.requires_grad) {
          pbeta.ensure_grad();
          for (int64_t c = 0; c < channels; ++c) pbeta.grad[c] += sum_g[c];
        }
        if (px.requires_grad) {
          px.ensure_grad();
          double* dx = px.grad.data();
          const double* gam = pgamma.data.data();
          for (int64_t c = 0; c < channels; ++c) {
            const double m = (*mean_buf)[c];
            const double is = (*inv_std_buf)[c];
            const double gm = gam[c];
            if (training) {
              const double k1 = sum_g[c] / n;
              const double k2 = sum_g_xhat[c] / n;
              for (int64_t b = 0; b < batch; ++b) {
                const int64_t base = (b * channels + c) * length;
                for (int64_t t = 0; t < length; ++t) {
                  const double xhat = (xv[base + t] - m) * is;
                  dx[base + t] += gm * is * (g[base + t] - k1 - xhat * k2);
                }
              }
            } else {
              for (int64_t b = 0; b < batch; ++b) {
                const int64_t base = (b * channels + c) * length;
                for (int64_t t = 0; t < length; ++t) {
                  dx[base + t] += g[base + t] * gm * is;
                }
              }
            }
          }
        }
      });
}

Tensor log_softmax(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("log_softmax: expected [batch, classes]");
  }
  const int64_t batch = logits.dim(0);
  const int64_t classes = logits.dim(1);
  std::vector<double> out(logits.numel());
  const double* px = logits.values().data();
  for (int64_t b = 0; b < batch; ++b) {
    const double* xr = px + b * classes;
    double m = xr[0];
    for (int64_t c = 1; c < classes; ++c) m = std::max(m, xr[c]);
    double z = 0.0;
    for (int64_t c = 0; c < classes; ++c) z += std::exp(xr[c] - m);
    const double log_z = m + std::log(z);
    for (int64_t c = 0; c < classes; ++c) out[b * classes + c] = xr[c] - log_z;
  }
  return make_node(logits.shape(), std::move(out), {logits},
                   [batch, classes](TensorImpl& self) {
                     TensorImpl& parent = *self.parents[0];
                     parent.ensure_grad();
                     for (int64_t b = 0; b < batch; ++b) {
                       const int64_t base = b * classes;
                       double row_sum = 0.0;
                       for (int64_t c = 0; c < classes; ++c) {
                         row_sum += self.grad[base + c];
                       }
                       for (int64_t c = 0; c < classes; ++c) {
                         parent.grad[base + c] +=
                             self.grad[base + c] -
                             std::exp(self.data[base + c]) * row_sum;
                       }
                     }
                   });
}

Tensor softmax_cce(const Tensor& logits, const std::vector<int64_t>& labels) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("softmax_cce: expected [batch, classes]");
  }
  const int64_t batch = logits.dim(0);
  const int64_t classes = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != batch) {
    throw std::invalid_argument("softmax_cce: one label per batch row needed");
  }
  for (int64_t y : labels) {
    if (y < 0 || y >= classes) {
      throw std::invalid_argument("softmax_cce: label " + std::to_string(y) +
                                  " out of range [0, " +
                                  std::to_string(classes) + ")");
    }
  }

  auto probs = std::make_shared<std::vector<double>>(logits.numel());
  const double* px = logits.values().data();
  double loss = 0.0;
  for (int64_t b = 0; b < batch; ++b) {
    const double* xr = px + b * classes;
    double m = xr[0];
    for (int64_t c = 1; c < classes; ++c) m = std::max(m, xr[c]);
    double z = 0.0;
    for (int64_t c = 0; c < classes; ++c) z += std::exp(xr[c] - m);
    const double log_z = m + std::log(z);
    loss += log_z - xr[labels[b]];
    for (int64_t c = 0; c < classes; ++c) {
      (*probs)[b * classes + c] = std::exp(xr[c] - log_z);
    }
  }
  loss /= static_cast<double>(batch);

  auto labels_copy = std::make_shared<std::vector<int64_t>>(labels);
  return make_node(
      {}, {loss}, {logits},
      [batch, classes, probs, labels_copy](TensorImpl& self) {
        TensorImpl& parent = *self.parents[0];
        parent.ensure_grad();
        const double g = self.grad[0] / static_cast<double>(batch);
        for (int64_t b = 0; b < batch; ++b) {
          const int64_t base = b * classes;
          for (int64_t c = 0; c < classes; ++c) {
            const double onehot = c == (*labels_copy)[b] ? 1.0 : 0.0;
            parent.grad[base + c] += g * ((*probs)[base + c] - onehot);
          }
        }
      });
}

namespace {

// Shared cosine kernel; `rows` x `dim` against `rows` x `dim`, one similarity
// per row. Throws on any zero-norm row.
Tensor cosine_rows_impl(const Tensor& a, const Tensor& b, int64_t rows,
                        int64_t dim, std::vector<int64_t> out_shape) {
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  std::vector<double> out(rows);
  auto norms_a = std::make_shared<std::vector<double>>(rows);
  auto norms_b = std::make_shared<std::vector<double>>(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const double* ar = pa + r * dim;
    const double* br = pb + r * dim;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int64_t i = 0; i < dim; ++i) {
      dot += ar[i] * br[i];
      na += ar[i] * ar[i];
      nb += br[i] * br[i];
    }
    if (na == 0.0 || nb == 0.0) {
      throw std::runtime_error(
          "cosine_similarity: zero-norm input (degenerate embedding)");
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    out[r] = dot / (na * nb);
    (*norms_a)[r] = na;
    (*norms_b)[r] = nb;
  }
  return make_node(
      std::move(out_shape), std::move(out), {a, b},
      [rows, dim, norms_a, norms_b](TensorImpl& self) {
        TensorImpl& pa = *self.parents[0];
        TensorImpl& pb = *self.parents[1];
        for (int64_t r = 0; r < rows; ++r) {
          const double g = self.grad[r];
          const double cos_v = self.data[r];
          const double na = (*norms_a)[r];
          const double nb = (*norms_b)[r];
          const double* av = pa.data.data() + r * dim;
          const double* bv = pb.data.data() + r * dim;
          if (pa.requires_grad) {
            pa.ensure_grad();
            double* da = pa.grad.data() + r * dim;
            for (int64_t i = 0; i < dim; ++i) {
              da[i] += g * (bv[i] / (na * nb) - cos_v * av[i] / (na * na));
            }
          }
          if (pb.requires_grad) {
            pb.ensure_grad();
            double* db = pb.grad.data() + r * dim;
            for (int64_t i = 0; i < dim; ++i) {
              db[i] += g * (av[i] / (na * nb) - cos_v * bv[i] / (nb * nb));
            }
          }
        }
      });
}

}  // namespace

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1 || a.dim(0) != b.dim(0)) {
    throw std::invalid_argument(
        "cosine_similarity: expected two equal-length vectors");
  }
  return cosine_rows_impl(a, b, 1, a.dim(0), {});
}

Tensor cosine_similarity_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape() != b.shape()) {
    throw std::invalid_argument(
        "cosine_similarity_rows: expected matching [batch, dim] tensors");
  }
  return cosine_rows_impl(a, b, a.dim(0), a.dim(1), {a.dim(0)});
}

Tensor select_time(const Tensor& input, int64_t step) {
  if (input.rank() != 3) {
    throw std::invalid_argument("select_time: expected [batch, steps, features]");
  }
  const int64_t batch = input.dim(0);
  const int64_t steps = input.dim(1);
  const int64_t features = input.dim(2);
  if (step < 0 || step >= steps) {
    throw std::invalid_argument("select_time: step out of range");
  }
  std::vector<double> out(batch * features);
  const double* px = input.values().data();
  for (int64_t b = 0; b < batch; ++b) {
    const double* xr = px + (b * steps + step) * features;
    std::copy(xr, xr + features, out.data() + b * features);
  }
  return make_node({batch, features}, std::move(out), {input},
                   [batch, steps, features, step](TensorImpl& self) {
                     TensorImpl& parent = *self.parents[0];
                     parent.ensure_grad();
                     for (int64_t b = 0; b < batch; ++b) {
                       double* dst = parent.grad.data() + (b * steps + step) * features;
                       const double* src = self.grad.data() + b * features;
                       for (int64_t f = 0; f < features; ++f) dst[f] += src[f];
                     }
                   });
}

Tensor transpose_last2(const Tensor& input) {
  if (input.rank() != 3) {
    throw std::invalid_argument("transpose_last2: expected rank-3 input");
  }
  const int64_t batch = input.dim(0);
  const int64_t rows = input.dim(1);
  const int64_t cols = input.dim(2);
  std::vector<double> out(input.numel());
  const double* px = input.values().data();
  for (int64_t b = 0; b < batch; ++b) {
    const double* xb = px + b * rows * cols;
    double* yb = out.data() + b * rows * cols;
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t c = 0; c < cols; ++c) yb[c * rows + r] = xb[r * cols + c];
    }
  }
  return make_node({batch, cols, rows}, std::move(out), {input},
                   [batch, rows, cols](TensorImpl& self) {
                     TensorImpl& parent = *self.parents[0];
                     parent.ensure_grad();
                     for (int64_t b = 0; b < batch; ++b) {
                       const double* gb = self.grad.data() + b * rows * cols;
                       double* db = parent.grad.data() + b * rows * cols;
                       for (int64_t r = 0; r < rows; ++r) {
                         for (int64_t c = 0; c < cols; ++c) {
                           db[r * cols + c] += gb[c * rows + r];
                         }
                       }
                     }
                   });
}

Tensor gru_forward(const Tensor& input, const GruParams& params,
                   const Tensor& initial_hidden) {
  if (input.rank() != 3) {
    throw std::invalid_argument("gru_forward: expected [batch, steps, features]");
  }
  const int64_t batch = input.dim(0);
  const int64_t steps = input.dim(1);
  const int64_t hidden = params.weight_update_x.dim(0);
  if (steps < 1) throw std::invalid_argument("gru_forward: needs >= 1 step");

  Tensor h = initial_hidden.defined() ? initial_hidden
                                      : Tensor::zeros({batch, hidden});
  if (h.rank() != 2 || h.dim(0) != batch || h.dim(1) != hidden) {
    throw std::invalid_argument("gru_forward: initial hidden must be [batch, hidden]");
  }
  for (int64_t t = 0; t < steps; ++t) {
    const Tensor xt = select_time(input, t);
    const Tensor z = sigmoid(add(linear(xt, params.weight_update_x, params.bias_update),
                                 linear(h, params.weight_update_h)));
    const Tensor r = sigmoid(add(linear(xt, params.weight_reset_x, params.bias_reset),
                                 linear(h, params.weight_reset_h)));
    const Tensor cand = tanh_op(add(linear(xt, params.weight_cand_x, params.bias_cand),
                                    linear(mul(r, h), params.weight_cand_h)));
    // h' = (1 - z) * cand + z * h
    h = add(cand, mul(z, sub(h, cand)));
  }
  return h;
}

}  // namespace segagg
