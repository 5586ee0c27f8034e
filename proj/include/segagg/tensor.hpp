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

#ifndef SEGAGG_TENSOR_HPP_
#define SEGAGG_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace segagg {

struct TensorImpl;

// Reads self.grad and accumulates into the grads of self's parents.
using BackwardFn = std::function<void(TensorImpl&)>;

// Dense row-major 64-bit tensor node. Rank 0 (empty shape) is a scalar.
// Non-leaf nodes keep their inputs alive through `parents` and carry the
// backward rule that consumed them.
struct TensorImpl {
  std::vector<int64_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // same size as data once touched, else empty
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  BackwardFn backward_fn;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

// Shared-ownership handle with value semantics; copying a Tensor aliases the
// same node. All graph-building operations live in ops.hpp.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<int64_t> shape, double value,
                     bool requires_grad = false);
  static Tensor from_values(std::vector<int64_t> shape,
                            std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int64_t>& shape() const { return impl_->shape; }
  int64_t numel() const { return impl_->numel(); }
  int64_t dim(int axis) const { return impl_->shape[axis]; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value);

  std::span<double> values() { return impl_->data; }
  std::span<const double> values() const { return impl_->data; }
  double value_at(int64_t index) const { return impl_->data[index]; }
  // Scalar (single-element) read; throws otherwise.
  double item() const;

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// True while gradient recording is on (thread-local).
bool grad_enabled();

// RAII switch that disables graph construction, used for frozen models and
// all evaluation-time forward passes.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reverse-mode sweep from a scalar loss. Populates grad on every
// requires_grad leaf reachable from `loss`; contributions from multiple uses
// of a tensor accumulate additively.
void backward(const Tensor& loss);

// Validates product(shape) == values and builds a graph node. Used by every
// operation in ops.cpp; exposed for tests that assemble custom nodes.
Tensor make_node(std::vector<int64_t> shape, std::vector<double> data,
                 std::vector<Tensor> parents, BackwardFn backward_fn);

int64_t shape_numel(const std::vector<int64_t>& shape);

}  // namespace segagg

#endif  // SEGAGG_TENSOR_HPP_
