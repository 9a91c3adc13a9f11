// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mgct/numerics/rng.hpp"
#include "mgct/numerics/tensor.hpp"
#include "mgct/tokens.hpp"

namespace mgct::masking {

enum class ScheduleKind { sine, linear };

/// gamma(t): fraction of positions masked at corruption time t in (0, T].
/// The default sin(pi t / 2T) has gamma(T) = 1 and gamma(0+) = 0.
struct MaskSchedule {
  double horizon = 1.0;
  ScheduleKind kind = ScheduleKind::sine;

  double gamma(double t) const;
};

/// A token sequence with its mask: mask[i] == 1 exactly where
/// tokens[i] == mask_id.
struct MaskState {
  TokenSequence tokens;
  std::vector<std::uint8_t> mask;
  double t = 0.0;

  std::size_t masked_count() const noexcept;
};

/// Masks each position independently with probability gamma(t).
MaskState apply_random_mask(const TokenSequence& x, double t, const MaskSchedule& schedule,
                            Rng& rng, Token mask_id);

struct MaskedLoss {
  Tensor loss;               // scalar
  std::size_t masked = 0;    // positions contributing
  bool degenerate = false;   // no masked position; loss is a constant 0
};

/// Mean negative log-likelihood of `target` under softmax(logits) over the
/// masked rows. Unmasked rows are never read. logits: [rows, vocab].
MaskedLoss masked_nll_loss(const Tensor& logits, std::span<const Token> target,
                           std::span<const std::uint8_t> mask);

/// floor(N * gamma(T - i*T/S)): how many positions stay masked after step i.
std::size_t remask_count(std::size_t n, const MaskSchedule& schedule, std::size_t steps,
                         std::size_t i);

/// Classifier-free guidance with std rescaling, row by row over `vocab`:
///   cfg     = cond + w_cfg * (cond - uncond)
///   rescale = cfg * std(cond) / std(cfg)
///   out     = w_rescale * rescale + (1 - w_rescale) * cfg
/// Rows where std(cfg) == 0 skip the rescale.
std::vector<float> cfg_combine(std::span<const float> cond, std::span<const float> uncond,
                               std::size_t vocab, double w_cfg, double w_rescale);

/// Linear ramp from temp_start at i = 1 to temp_end at i = S.
double anneal_temperature(std::size_t i, std::size_t steps, double temp_start, double temp_end);

}  // namespace mgct::masking
