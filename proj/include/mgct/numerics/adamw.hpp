// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mgct/numerics/tensor.hpp"

namespace mgct {

struct AdamWConfig {
  double lr = 1e-4;
  std::int64_t warmup = 32000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

/// Linear warmup to `base` at step == warmup, then base * sqrt(warmup/step).
double lr_schedule(std::int64_t step, double base, std::int64_t warmup);

struct OptimizerState {
  AdamWConfig config;
  std::int64_t step = 0;  // number of updates applied so far
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  OptimizerState() = default;
  explicit OptimizerState(AdamWConfig cfg) : config(cfg) {}
};

/// One decoupled-weight-decay Adam update with lr = lr_schedule(step + 1).
/// Moments are allocated on first use and must keep matching `params`.
void adamw_step(OptimizerState& state, std::span<Tensor> params, const Gradients& grads);

/// Scales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(Gradients& grads, double max_norm);

}  // namespace mgct
