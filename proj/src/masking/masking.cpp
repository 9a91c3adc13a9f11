// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/masking/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mgct/errors.hpp"
#include "mgct/numerics/ops.hpp"

namespace mgct::masking {

double MaskSchedule::gamma(double t) const {
  const double u = t / horizon;
  switch (kind) {
    case ScheduleKind::linear:
      return u;
    case ScheduleKind::sine:
    default:
      return std::sin(std::numbers::pi * u / 2.0);
  }
}

std::size_t MaskState::masked_count() const noexcept {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

MaskState apply_random_mask(const TokenSequence& x, double t, const MaskSchedule& schedule,
                            Rng& rng, Token mask_id) {
  MGCT_EXPECT(t > 0.0 && t <= schedule.horizon,
              "apply_random_mask: t must lie in (0, T], got " + std::to_string(t));
  const double p = schedule.gamma(t);
  MaskState s{x, std::vector<std::uint8_t>(x.size(), 0), t};
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (rng.bernoulli(p)) {
      s.mask[i] = 1;
      s.tokens[i] = mask_id;
    }
  }
  return s;
}

MaskedLoss masked_nll_loss(const Tensor& logits, std::span<const Token> target,
                           std::span<const std::uint8_t> mask) {
  MGCT_EXPECT(target.size() == logits.rows() && mask.size() == logits.rows(),
              "masked_nll_loss: logits, target and mask must have one row per position");
  std::vector<float> w(mask.size());
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    w[i] = mask[i] ? 1.0f : 0.0f;
    count += mask[i] ? 1 : 0;
  }
  if (count == 0) return {Tensor::scalar(0.0f), 0, true};
  return {ops::weighted_nll(logits, target, w, static_cast<float>(count)), count, false};
}

std::size_t remask_count(std::size_t n, const MaskSchedule& schedule, std::size_t steps,
                         std::size_t i) {
  MGCT_EXPECT(steps >= 1 && i >= 1 && i <= steps,
              "remask_count: step index must satisfy 1 <= i <= S");
  if (i == steps) return 0;
  const double t = schedule.horizon -
                   static_cast<double>(i) * schedule.horizon / static_cast<double>(steps);
  // The guard absorbs round-off such as sin(pi/6) = 0.49999999999999994 so
  // that exact products like 10 * 0.5 floor to 5, not 4.
  const double v = static_cast<double>(n) * schedule.gamma(t);
  const auto k = static_cast<std::size_t>(std::floor(v + 1e-9));
  return std::min(k, n);
}

std::vector<float> cfg_combine(std::span<const float> cond, std::span<const float> uncond,
                               std::size_t vocab, double w_cfg, double w_rescale) {
  MGCT_EXPECT(vocab > 0 && cond.size() % vocab == 0,
              "cfg_combine: logits length is not a multiple of the vocabulary");
  MGCT_EXPECT(uncond.size() == cond.size(), "cfg_combine: conditional/unconditional mismatch");
  const std::size_t rows = cond.size() / vocab;
  std::vector<float> out(cond.size());
  std::vector<double> guided(vocab);
  auto stddev = [vocab](auto get) {
    double m = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) m += get(j);
    m /= static_cast<double>(vocab);
    double v = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) v += (get(j) - m) * (get(j) - m);
    return std::sqrt(v / static_cast<double>(vocab));
  };
  for (std::size_t r = 0; r < rows; ++r) {
    const float* c = cond.data() + r * vocab;
    const float* u = uncond.data() + r * vocab;
    for (std::size_t j = 0; j < vocab; ++j) {
      const double cj = c[j];
      guided[j] = cj + w_cfg * (cj - static_cast<double>(u[j]));
    }
    const double s_cond = stddev([&](std::size_t j) { return static_cast<double>(c[j]); });
    const double s_cfg = stddev([&](std::size_t j) { return guided[j]; });
    const double ratio = s_cfg > 0.0 ? s_cond / s_cfg : 1.0;
    for (std::size_t j = 0; j < vocab; ++j) {
      const double rescaled = guided[j] * ratio;
      // cfg + w*(rescaled - cfg) equals the convex combination and is exact
      // whenever rescaled == cfg.
      out[r * vocab + j] = static_cast<float>(guided[j] + w_rescale * (rescaled - guided[j]));
    }
  }
  return out;
}

double anneal_temperature(std::size_t i, std::size_t steps, double temp_start, double temp_end) {
  MGCT_EXPECT(steps >= 1 && i >= 1 && i <= steps, "anneal_temperature: need 1 <= i <= S");
  const double span = static_cast<double>(std::max<std::size_t>(steps - 1, 1));
  return temp_start + static_cast<double>(i - 1) / span * (temp_end - temp_start);
}

}  // namespace mgct::masking
