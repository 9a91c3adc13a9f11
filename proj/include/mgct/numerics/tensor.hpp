// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mgct {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s) noexcept;
std::string shape_str(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;  // empty until a backward pass touches the node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad and accumulates into inputs[i]->grad (already sized).
  std::function<void(Node&)> backward;
};

}  // namespace detail

/// Dense float32 row-major array with an optional place in the autodiff
/// graph. Copies share the underlying node; use `clone()` for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float v);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }
  /// Rows and columns of a rank-2 tensor.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const float> data() const { return node_->value; }
  /// Direct write access, for parameter updates and test fixtures. Mutating
  /// a tensor that is already part of a recorded graph invalidates it.
  std::span<float> mutable_data() { return node_->value; }
  float item() const;
  float at(std::size_t i) const { return node_->value.at(i); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  /// Gradient accumulated by the last backward pass (empty if untouched).
  std::span<const float> grad() const { return node_->grad; }
  const char* op() const { return node_->op; }

  /// Same values, detached from any graph, no gradient.
  Tensor clone() const;

  detail::Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const noexcept { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// While alive, ops on this thread do not record graph edges.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled() noexcept;

using Gradients = std::vector<std::vector<float>>;

/// Reverse-mode gradient of a scalar `loss` with respect to each tensor in
/// `params`. Parameters the loss does not depend on get all-zero gradients.
/// Throws ContractViolation for a non-scalar loss and NumericError (naming the
/// op) when a non-finite gradient appears.
Gradients grad_of(const Tensor& loss, std::span<const Tensor> params);

namespace detail {

/// Creates the output node of an op. Edges and the backward closure are kept
/// only when some input requires grad and grad mode is on.
std::shared_ptr<Node> make_node(Shape shape, const char* op,
                                std::initializer_list<Tensor> inputs);
std::shared_ptr<Node> make_node(Shape shape, const char* op,
                                const std::vector<Tensor>& inputs);
bool tracks(const Node& n) noexcept;

}  // namespace detail

}  // namespace mgct
