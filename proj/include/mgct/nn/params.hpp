// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "mgct/numerics/adamw.hpp"
#include "mgct/numerics/rng.hpp"
#include "mgct/numerics/tensor.hpp"

namespace mgct::nn {

/// Ordered, named set of trainable leaves. Registration order is the
/// checkpoint order and the optimizer slot order.
class ParamStore {
 public:
  Tensor add_normal(const std::string& name, Shape shape, float stddev, Rng& rng);
  Tensor add_zeros(const std::string& name, Shape shape);
  Tensor add_constant(const std::string& name, Shape shape, float value);

  std::vector<Tensor>& tensors() noexcept { return tensors_; }
  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return tensors_.size(); }
  std::size_t scalar_count() const noexcept;

  /// Throws ContractViolation if absent.
  Tensor find(const std::string& name) const;
  bool contains(const std::string& name) const;

 private:
  Tensor add(const std::string& name, Tensor t);

  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

/// One optimisation step on every tensor of `ps`: gradients of `loss`,
/// optional clipping, AdamW. Returns the loss value. A non-finite loss
/// throws NumericError before any parameter changes.
double minimize_step(ParamStore& ps, OptimizerState& opt, const Tensor& loss);

}  // namespace mgct::nn
