// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/numerics/adamw.hpp"

#include <algorithm>
#include <cmath>

#include "mgct/errors.hpp"

namespace mgct {

double lr_schedule(std::int64_t step, double base, std::int64_t warmup) {
  MGCT_EXPECT(step >= 1, "lr_schedule: step must be >= 1, got " + std::to_string(step));
  MGCT_EXPECT(warmup >= 1, "lr_schedule: warmup must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return base * std::min(s / w, std::sqrt(w / s));
}

double clip_grad_norm(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (float x : g) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto f = static_cast<float>(max_norm / norm);
    for (auto& g : grads)
      for (float& x : g) x *= f;
  }
  return norm;
}

void adamw_step(OptimizerState& state, std::span<Tensor> params, const Gradients& grads) {
  MGCT_EXPECT(params.size() == grads.size(), "adamw_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.numel(), 0.0f);
      state.v.emplace_back(p.numel(), 0.0f);
    }
  }
  MGCT_EXPECT(state.m.size() == params.size(), "adamw_step: optimizer state has " +
                                                   std::to_string(state.m.size()) +
                                                   " slots for " +
                                                   std::to_string(params.size()) + " params");
  for (std::size_t i = 0; i < params.size(); ++i) {
    MGCT_EXPECT(grads[i].size() == params[i].numel() && state.m[i].size() == params[i].numel(),
                "adamw_step: shape mismatch for parameter " + std::to_string(i));
    for (float g : grads[i])
      if (!std::isfinite(g)) throw NumericError("adamw_step: non-finite gradient");
  }

  const AdamWConfig& c = state.config;
  const std::int64_t t = ++state.step;
  const double lr = lr_schedule(t, c.lr, c.warmup);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  const auto b1 = static_cast<float>(c.beta1);
  const auto b2 = static_cast<float>(c.beta2);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      const double update = mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * w[j];
      w[j] = static_cast<float>(w[j] - lr * update);
    }
  }
}

}  // namespace mgct
