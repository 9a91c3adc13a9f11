// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/numerics/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "mgct/errors.hpp"

namespace mgct {

namespace {
thread_local bool g_grad_mode = true;
}

std::size_t numel(const Shape& s) noexcept {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float v, bool requires_grad) {
  auto n = std::make_shared<detail::Node>();
  n->value.assign(::mgct::numel(shape), v);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  MGCT_EXPECT(::mgct::numel(shape) == values.size(),
              "Tensor::from: shape " + shape_str(shape) + " does not match " +
                  std::to_string(values.size()) + " values");
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(float v) { return from({1}, {v}); }

std::size_t Tensor::rows() const {
  MGCT_EXPECT(rank() == 2, "expected a rank-2 tensor, got " + shape_str(shape()));
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  MGCT_EXPECT(rank() == 2, "expected a rank-2 tensor, got " + shape_str(shape()));
  return node_->shape[1];
}

float Tensor::item() const {
  MGCT_EXPECT(numel() == 1, "item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

Tensor Tensor::clone() const { return from(shape(), node_->value, false); }

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

bool grad_mode_enabled() noexcept { return g_grad_mode; }

namespace detail {

bool tracks(const Node& n) noexcept { return n.requires_grad; }

template <typename Range>
std::shared_ptr<Node> make_node_impl(Shape shape, const char* op, const Range& inputs) {
  auto n = std::make_shared<Node>();
  n->value.assign(numel(shape), 0.0f);
  n->shape = std::move(shape);
  n->op = op;
  if (g_grad_mode) {
    for (const Tensor& t : inputs) {
      if (t.requires_grad()) n->requires_grad = true;
    }
    if (n->requires_grad) {
      n->inputs.reserve(inputs.size());
      for (const Tensor& t : inputs) n->inputs.push_back(t.node_ptr());
    }
  }
  return n;
}

std::shared_ptr<Node> make_node(Shape shape, const char* op,
                                std::initializer_list<Tensor> inputs) {
  return make_node_impl(std::move(shape), op, inputs);
}

std::shared_ptr<Node> make_node(Shape shape, const char* op,
                                const std::vector<Tensor>& inputs) {
  return make_node_impl(std::move(shape), op, inputs);
}

}  // namespace detail

Gradients grad_of(const Tensor& loss, std::span<const Tensor> params) {
  MGCT_EXPECT(loss.defined(), "grad_of: undefined loss");
  MGCT_EXPECT(loss.numel() == 1,
              "grad_of: loss must be a scalar, got shape " + shape_str(loss.shape()));
  if (!std::isfinite(loss.item())) {
    throw NumericError(std::string("grad_of: non-finite loss produced by ") + loss.op());
  }

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::Node*> order;
  if (loss.requires_grad()) {
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        detail::Node* child = node->inputs[next++].get();
        if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  for (detail::Node* n : order) n->grad.assign(n->value.size(), 0.0f);
  if (!order.empty()) order.back()->grad[0] = 1.0f;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->backward) continue;
    n->backward(*n);
    for (const auto& in : n->inputs) {
      if (!in->requires_grad) continue;
      for (float g : in->grad) {
        if (!std::isfinite(g)) {
          throw NumericError(std::string("non-finite gradient in backward of '") + n->op + "'");
        }
      }
    }
  }

  Gradients out;
  out.reserve(params.size());
  for (const Tensor& p : params) {
    const auto& g = p.node()->grad;
    if (g.size() == p.numel())
      out.push_back(g);
    else
      out.emplace_back(p.numel(), 0.0f);
  }
  // Leave leaves clean so a second call does not see stale accumulations;
  // intermediate grads are released with the graph.
  for (detail::Node* n : order) {
    if (n->inputs.empty()) n->grad.clear();
  }
  return out;
}

}  // namespace mgct
