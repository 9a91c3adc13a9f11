// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/nn/params.hpp"

#include <algorithm>
#include <cmath>

#include "mgct/errors.hpp"

namespace mgct::nn {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  MGCT_EXPECT(!contains(name), "ParamStore: duplicate parameter '" + name + "'");
  names_.push_back(name);
  tensors_.push_back(t);
  return t;
}

Tensor ParamStore::add_normal(const std::string& name, Shape shape, float stddev, Rng& rng) {
  std::vector<float> v(numel(shape));
  for (float& x : v) x = static_cast<float>(rng.normal()) * stddev;
  return add(name, Tensor::from(std::move(shape), std::move(v), true));
}

Tensor ParamStore::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor::zeros(std::move(shape), true));
}

Tensor ParamStore::add_constant(const std::string& name, Shape shape, float value) {
  return add(name, Tensor::full(std::move(shape), value, true));
}

std::size_t ParamStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

bool ParamStore::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Tensor ParamStore::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  MGCT_EXPECT(it != names_.end(), "ParamStore: no parameter named '" + name + "'");
  return tensors_[static_cast<std::size_t>(it - names_.begin())];
}

double minimize_step(ParamStore& ps, OptimizerState& opt, const Tensor& loss) {
  const double value = loss.item();
  if (!std::isfinite(value)) throw NumericError("minimize_step: non-finite loss");
  Gradients g = grad_of(loss, ps.tensors());
  if (opt.config.clip_norm > 0.0) clip_grad_norm(g, opt.config.clip_norm);
  adamw_step(opt, ps.tensors(), g);
  return value;
}

}  // namespace mgct::nn
