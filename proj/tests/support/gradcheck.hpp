// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Central finite-difference oracle. Independent of the autodiff code path:
// it only evaluates the forward function.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mgct/numerics/rng.hpp"
#include "mgct/numerics/tensor.hpp"

namespace mgct::testing {

struct GradCheck {
  double worst_rel = 0.0;  // max over tensors of ||analytic - numeric|| / max norm
  std::size_t worst_tensor = 0;
};

inline GradCheck gradcheck(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                           double eps = 1e-3) {
  const Tensor loss = loss_fn();
  const Gradients analytic = grad_of(loss, params);
  GradCheck out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto data = params[p].mutable_data();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float orig = data[i];
      double fp, fm;
      {
        NoGradGuard ng;
        data[i] = static_cast<float>(orig + eps);
        fp = loss_fn().item();
        data[i] = static_cast<float>(orig - eps);
        fm = loss_fn().item();
      }
      data[i] = orig;
      const double num = (fp - fm) / (2.0 * eps);
      const double ana = analytic[p][i];
      diff2 += (num - ana) * (num - ana);
      a2 += ana * ana;
      n2 += num * num;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-6});
    const double rel = std::sqrt(diff2) / denom;
    if (rel > out.worst_rel) {
      out.worst_rel = rel;
      out.worst_tensor = p;
    }
  }
  return out;
}

inline Tensor random_tensor(Shape shape, Rng& rng, float stddev = 1.0f, bool grad = true) {
  std::vector<float> v(numel(shape));
  for (float& x : v) x = static_cast<float>(rng.normal()) * stddev;
  return Tensor::from(std::move(shape), std::move(v), grad);
}

}  // namespace mgct::testing

#include "mgct/numerics/ops.hpp"

namespace mgct::testing {

/// sum(y * W) for a fixed pseudo-random W, so every output element carries a
/// distinct weight into the scalar loss.
inline Tensor project(const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return ops::sum(ops::mul(y, random_tensor(y.shape(), rng, 1.0f, false)));
}

}  // namespace mgct::testing
