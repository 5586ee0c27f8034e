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

#include "segagg/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace segagg {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape dims must be positive");
    n *= d;
  }
  return n;
}

Tensor Tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int64_t> shape, double value,
                    bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  const int64_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data.assign(n, value);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from_values(std::vector<int64_t> shape,
                           std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
    throw std::invalid_argument("tensor value count does not match shape");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({}, {value}, requires_grad);
}

void Tensor::set_requires_grad(bool value) {
  if (impl_->backward_fn) {
    throw std::invalid_argument("requires_grad can only be toggled on leaves");
  }
  impl_->requires_grad = value;
  if (!value) impl_->grad.clear();
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() needs a single-element tensor");
  return impl_->data[0];
}

std::span<double> Tensor::grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

std::span<const double> Tensor::grad() const {
  if (impl_->grad.empty()) {
    throw std::runtime_error("tensor has no gradient buffer");
  }
  return impl_->grad;
}

void Tensor::zero_grad() {
  impl_->ensure_grad();
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_node(std::vector<int64_t> shape, std::vector<double> data,
                 std::vector<Tensor> parents, BackwardFn backward_fn) {
  Tensor out = Tensor::from_values(std::move(shape), std::move(data));
  if (!grad_enabled()) return out;
  bool any_grad = false;
  for (const Tensor& p : parents) any_grad = any_grad || p.requires_grad();
  if (!any_grad) return out;
  TensorImpl& impl = *out.impl();
  impl.requires_grad = true;
  impl.parents.reserve(parents.size());
  for (Tensor& p : parents) impl.parents.push_back(p.impl());
  impl.backward_fn = std::move(backward_fn);
  return out;
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward requires a scalar loss");
  }
  TensorImpl* root = loss.impl().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS over parent edges; reversing it yields an order
  // where every node is processed before any of its inputs.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, child] = stack.back();
    if (child < node->parents.size()) {
      TensorImpl* parent = node->parents[child++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

}  // namespace segagg
