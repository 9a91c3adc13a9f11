// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mgct/masking/masking.hpp"
#include "mgct/numerics/rng.hpp"
#include "mgct/tokens.hpp"

namespace mgct::masking {

struct DecodeConfig {
  std::size_t steps = 50;
  std::size_t top_k = 20;
  double temp_start = 1.5;
  double temp_end = 0.0;
  /// Perturb remasking confidences with Gumbel noise scaled by the current
  /// temperature.
  bool gumbel = true;
  double w_cfg = 2.5;
  double w_rescale = 0.75;
  /// A decode with a single step samples greedily.
  bool greedy_single_step = true;
  MaskSchedule schedule{};

  void validate() const;
};

/// Model outputs for every position of the sequence being decoded, row-major
/// [N, vocab]. `uncond` is filled only when requested.
struct GuidedLogits {
  std::vector<float> cond;
  std::vector<float> uncond;
};

/// Called once per decoding step with the current partially masked sequence.
using TokenPredictor = std::function<GuidedLogits(const MaskState& state, bool want_uncond)>;

/// Optional per-step record for inspection and tests.
struct DecodeTrace {
  std::vector<std::vector<std::uint8_t>> masks;  // mask after each step
  std::vector<double> temperatures;
};

/// Confidence-based iterative parallel decoding of N tokens over `vocab`
/// codes. Starts fully masked; each step samples every masked position, pins
/// previously committed positions at infinite confidence, and remasks the
/// remask_count lowest-confidence positions (ties: lowest index first).
TokenSequence decode_iterative(const TokenPredictor& predict, std::size_t n, std::size_t vocab,
                               Token mask_id, const DecodeConfig& cfg, Rng& rng,
                               DecodeTrace* trace = nullptr);

/// Top-k filtered, tempered sample from one row of logits. temperature <= 0
/// returns the argmax (lowest index on ties).
Token sample_token(std::span<const float> logits, std::size_t top_k, double temperature,
                   Rng& rng);

}  // namespace mgct::masking
