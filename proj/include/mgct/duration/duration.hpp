// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mgct/nn/params.hpp"
#include "mgct/nn/transformer.hpp"
#include "mgct/numerics/adamw.hpp"
#include "mgct/tokens.hpp"

namespace mgct::duration {

inline double to_log(double frames) { return std::log(frames + 1.0); }
inline double from_log(double x) { return std::exp(x) - 1.0; }

/// x_t = (1 - t) x0 + t x1, elementwise.
std::vector<float> interpolate(std::span<const float> x0, std::span<const float> x1, double t);

using VelocityField = std::function<std::vector<float>(std::span<const float> x, double t)>;

/// Midpoint (RK2) integration of dx/dt = v(x, t) from t = 0 to 1 in equal
/// steps. A non-finite velocity throws NumericError.
std::vector<float> midpoint_solve(const VelocityField& v, std::vector<float> x0, std::size_t steps);

struct DurationConfig {
  nn::TransformerConfig backbone{};
  std::size_t phones = 16;
  double prompt_drop = 0.15;
  double prompt_max_fraction = 0.5;
  std::size_t solver_steps = 4;
  double w_cfg = 1.0;

  void validate() const;
};

/// One utterance: phone ids and their durations in frames.
struct DurationSample {
  TokenSequence phones;
  std::vector<float> durations;
};

/// Flow input: the first prompt_count phones carry clean log-durations,
/// the rest carry x_t.
struct FlowInput {
  TokenSequence phones;
  std::vector<float> x;
  std::size_t prompt_count = 0;

  std::size_t target_count() const noexcept { return phones.size() - prompt_count; }
};

class DurationModel {
 public:
  DurationModel(const DurationConfig& cfg, std::uint64_t seed);

  /// Velocity for every non-prompt phone, stacked in batch order: [n, 1].
  Tensor velocity(std::span<const FlowInput> batch, std::span<const float> t) const;

  const DurationConfig& config() const noexcept { return cfg_; }
  nn::ParamStore& params() noexcept { return ps_; }
  const nn::ParamStore& params() const noexcept { return ps_; }

 private:
  DurationConfig cfg_;
  nn::ParamStore ps_;
  Tensor phone_embed_, segment_embed_;
  nn::Linear value_in_;
  nn::Transformer backbone_;
  nn::Linear head_;
};

struct FlowBatch {
  std::vector<FlowInput> inputs;
  std::vector<float> t;
  std::vector<float> velocity_target;  // x1 - x0 per non-prompt phone
  std::size_t prompts_dropped = 0;
};

/// Random prompt prefix (clean), t uniform in [0, 1], x0 ~ N(0, 1) on the
/// other phones. A dropped prompt removes its phones.
FlowBatch make_batch(std::span<const DurationSample> samples, const DurationConfig& cfg, Rng& rng);

/// Mean squared error between predicted and target velocities.
Tensor flow_loss(const Tensor& predicted, std::span<const float> target);

struct DurationStepStats {
  double loss = 0.0;
  std::size_t prompts_dropped = 0;
};

class DurationTrainer {
 public:
  DurationTrainer(DurationModel& model, const AdamWConfig& opt);
  DurationStepStats step(std::span<const DurationSample> samples, Rng& rng);
  OptimizerState& optimizer() noexcept { return opt_; }

 private:
  DurationModel& model_;
  OptimizerState opt_;
};

/// Samples per-phone durations (frames, >= 1) for `text` given a prompt of
/// phones with known durations.
std::vector<double> predict_durations(const DurationModel& model, std::span<const Token> text,
                                      std::span<const Token> prompt_phones,
                                      std::span<const float> prompt_durations, Rng& rng);

/// Rounded sum of predict_durations.
std::size_t predict_total_duration(const DurationModel& model, std::span<const Token> text,
                                   std::span<const Token> prompt_phones,
                                   std::span<const float> prompt_durations, Rng& rng);

/// Synthetic durations: phone p has a lognormal duration with median
/// medians[p] frames and log-stddev sigma, rounded to whole frames (>= 1).
class LognormalDurations {
 public:
  LognormalDurations(std::size_t phones, double min_median, double max_median, double sigma,
                     std::uint64_t seed);
  DurationSample sample(std::size_t count, Rng& rng) const;
  double median(std::size_t phone) const { return medians_.at(phone); }

 private:
  std::vector<double> medians_;
  double sigma_;
};

}  // namespace mgct::duration
