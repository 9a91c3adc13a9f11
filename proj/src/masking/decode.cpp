// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/masking/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mgct/errors.hpp"

namespace mgct::masking {

void DecodeConfig::validate() const {
  MGCT_EXPECT(steps >= 1, "DecodeConfig: steps must be >= 1");
  MGCT_EXPECT(top_k >= 1, "DecodeConfig: top_k must be >= 1");
  MGCT_EXPECT(temp_start >= temp_end && temp_end >= 0.0,
              "DecodeConfig: need temp_start >= temp_end >= 0");
}

Token sample_token(std::span<const float> logits, std::size_t top_k, double temperature,
                   Rng& rng) {
  MGCT_EXPECT(!logits.empty(), "sample_token: empty distribution");
  if (temperature <= 0.0) {
    return static_cast<Token>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  const std::size_t v = logits.size();
  const std::size_t k = std::min(top_k, v);
  std::vector<std::size_t> idx(v);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  idx.resize(k);
  const double mx = logits[idx.front()];
  std::vector<double> w(k);
  for (std::size_t j = 0; j < k; ++j) w[j] = std::exp((logits[idx[j]] - mx) / temperature);
  return static_cast<Token>(idx[rng.categorical(w)]);
}

TokenSequence decode_iterative(const TokenPredictor& predict, std::size_t n, std::size_t vocab,
                               Token mask_id, const DecodeConfig& cfg, Rng& rng,
                               DecodeTrace* trace) {
  MGCT_EXPECT(n >= 1, "decode_iterative: need at least one position");
  MGCT_EXPECT(vocab >= 1, "decode_iterative: empty vocabulary");
  cfg.validate();
  const double horizon = cfg.schedule.horizon;
  const bool want_uncond = cfg.w_cfg != 0.0;

  MaskState state{TokenSequence(n, mask_id), std::vector<std::uint8_t>(n, 1), horizon};
  std::vector<double> conf(n);
  std::vector<double> probs(vocab);
  std::vector<std::size_t> order(n);

  for (std::size_t i = 1; i <= cfg.steps; ++i) {
    state.t = horizon - static_cast<double>(i - 1) * horizon / static_cast<double>(cfg.steps);
    GuidedLogits out = predict(state, want_uncond);
    MGCT_EXPECT(out.cond.size() == n * vocab, "decode_iterative: predictor returned " +
                                                  std::to_string(out.cond.size()) +
                                                  " logits, expected " +
                                                  std::to_string(n * vocab));
    std::vector<float> logits;
    if (want_uncond) {
      MGCT_EXPECT(out.uncond.size() == out.cond.size(),
                  "decode_iterative: predictor did not return unconditional logits");
      logits = cfg_combine(out.cond, out.uncond, vocab, cfg.w_cfg, cfg.w_rescale);
    } else {
      logits = std::move(out.cond);
    }

    const bool greedy = cfg.steps == 1 && cfg.greedy_single_step;
    const double temp =
        greedy ? 0.0 : anneal_temperature(i, cfg.steps, cfg.temp_start, cfg.temp_end);
    if (trace) trace->temperatures.push_back(temp);

    for (std::size_t p = 0; p < n; ++p) {
      if (!state.mask[p]) {
        conf[p] = std::numeric_limits<double>::infinity();
        continue;
      }
      const std::span<const float> row(logits.data() + p * vocab, vocab);
      float mx = -std::numeric_limits<float>::infinity();
      for (float x : row) {
        if (!std::isfinite(x)) throw NumericError("decode_iterative: model returned non-finite logits");
        mx = std::max(mx, x);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < vocab; ++j) {
        probs[j] = std::exp(static_cast<double>(row[j] - mx));
        z += probs[j];
      }
      const Token tok = sample_token(row, cfg.top_k, temp, rng);
      state.tokens[p] = tok;
      double c = std::log(probs[static_cast<std::size_t>(tok)] / z);
      if (cfg.gumbel && temp > 0.0) c += temp * rng.gumbel();
      conf[p] = c;
    }

    const std::size_t keep_masked = remask_count(n, cfg.schedule, cfg.steps, i);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return conf[a] < conf[b]; });
    std::fill(state.mask.begin(), state.mask.end(), 0);
    for (std::size_t r = 0; r < keep_masked; ++r) {
      state.mask[order[r]] = 1;
      state.tokens[order[r]] = mask_id;
    }
    if (trace) trace->masks.push_back(state.mask);
  }
  return state.tokens;
}

}  // namespace mgct::masking
