// Copyright 2026 The LyricMood Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lyricmood/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "lyricmood/error.hpp"

namespace lyricmood::nn {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(nn::numel(shape), value);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (nn::numel(shape) != values.size()) {
    throw ShapeError("tensor of shape " + shape_str(shape) + " needs " +
                     std::to_string(nn::numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  for (auto d : shape) {
    if (d == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->requires_grad) return;
  if (node_->sparse_rows) {
    const std::size_t width = node_->value.size() / node_->shape[0];
    for (auto r : node_->touched_rows) {
      std::fill_n(node_->grad.begin() + static_cast<std::ptrdiff_t>(r * width), width, 0.0);
    }
    node_->touched_rows.clear();
    return;
  }
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  node_->touched_rows.clear();
}

void Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on && node_->grad.size() != node_->value.size()) {
    node_->grad.assign(node_->value.size(), 0.0);
  }
  if (!on) {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
  }
}

Tensor Tensor::detach() const {
  return from(shape(), node_->value, false);
}

std::vector<Node*> topological_order(const Tensor& root) {
  std::vector<Node*> order;
  std::unordered_map<Node*, bool> state;  // false: on stack, true: done
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  state[root.node()] = false;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (!state.contains(parent)) {
        state[parent] = false;
        stack.emplace_back(parent, 0);
      }
      continue;
    }
    state[node] = true;
    order.push_back(node);
    stack.pop_back();
  }
  return order;
}

void Tensor::backward() {
  if (numel() != 1) {
    throw ShapeError("backward() needs a scalar, got shape " + shape_str(shape()));
  }
  if (!node_->requires_grad) return;
  auto order = topological_order(*this);
  if (node_->grad.size() != 1) node_->grad.assign(1, 0.0);
  node_->grad[0] += 1.0;
  // Interior gradients exist only between the first write from a consumer
  // and the node's own backward step, which keeps peak memory low.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward) continue;
    for (const auto& p : n->parents) {
      if (p->requires_grad && p->grad.size() != p->value.size()) p->grad.assign(p->value.size(), 0.0);
    }
    if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
    n->backward(*n);
    if (n != node_.get()) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_result(Shape shape, std::vector<double> values,
                   std::vector<std::shared_ptr<Node>> parents, const char* op,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  const bool track = g_grad_enabled &&
                     std::any_of(parents.begin(), parents.end(),
                                 [](const auto& p) { return p->requires_grad; });
  if (track) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace lyricmood::nn
