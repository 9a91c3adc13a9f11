// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/duration/duration.hpp"

#include <algorithm>
#include <cmath>

#include "mgct/errors.hpp"
#include "mgct/masking/masking.hpp"
#include "mgct/numerics/ops.hpp"

namespace mgct::duration {

std::vector<float> interpolate(std::span<const float> x0, std::span<const float> x1, double t) {
  MGCT_EXPECT(x0.size() == x1.size(), "interpolate: size mismatch");
  std::vector<float> out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>((1.0 - t) * x0[i] + t * x1[i]);
  return out;
}

namespace {

std::vector<float> checked(std::vector<float> v, std::size_t n) {
  MGCT_EXPECT(v.size() == n, "midpoint_solve: field returned " + std::to_string(v.size()) +
                                 " values for " + std::to_string(n));
  for (float x : v)
    if (!std::isfinite(x)) throw NumericError("midpoint_solve: non-finite velocity");
  return v;
}

}  // namespace

std::vector<float> midpoint_solve(const VelocityField& v, std::vector<float> x, std::size_t steps) {
  MGCT_EXPECT(steps >= 1, "midpoint_solve: steps must be >= 1");
  const std::size_t n = x.size();
  const double h = 1.0 / static_cast<double>(steps);
  std::vector<float> mid(n);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * h;
    const auto k1 = checked(v(x, t), n);
    for (std::size_t i = 0; i < n; ++i) mid[i] = static_cast<float>(x[i] + 0.5 * h * k1[i]);
    const auto k2 = checked(v(mid, t + 0.5 * h), n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<float>(x[i] + h * k2[i]);
  }
  return x;
}

void DurationConfig::validate() const {
  backbone.validate();
  MGCT_EXPECT(phones >= 1, "DurationConfig: empty phone vocabulary");
  MGCT_EXPECT(prompt_drop >= 0.0 && prompt_drop <= 1.0, "DurationConfig: prompt_drop outside [0, 1]");
  MGCT_EXPECT(prompt_max_fraction >= 0.0 && prompt_max_fraction < 1.0,
              "DurationConfig: prompt_max_fraction outside [0, 1)");
  MGCT_EXPECT(solver_steps >= 1, "DurationConfig: solver_steps must be >= 1");
}

DurationModel::DurationModel(const DurationConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t d = cfg_.backbone.model_dim;
  phone_embed_ = ps_.add_normal("embed.phone", {cfg_.phones, d}, 1.0f, rng);
  segment_embed_ = ps_.add_normal("embed.segment", {2, d}, 1.0f, rng);
  value_in_ = nn::Linear(ps_, "value_in", 1, d, rng);
  backbone_ = nn::Transformer(ps_, "backbone", cfg_.backbone, rng);
  head_ = nn::Linear(ps_, "head", d, 1, rng);
}

Tensor DurationModel::velocity(std::span<const FlowInput> batch, std::span<const float> t) const {
  MGCT_EXPECT(!batch.empty() && t.size() == batch.size(),
              "DurationModel::velocity: need one timestep per input");
  TokenSequence ids, seg;
  std::vector<float> x;
  std::vector<std::size_t> target_rows;
  nn::SequenceLayout layout;
  for (const auto& in : batch) {
    MGCT_EXPECT(in.x.size() == in.phones.size(), "FlowInput: one value per phone required");
    MGCT_EXPECT(in.prompt_count < in.phones.size(), "FlowInput: no phones to predict");
    for (std::size_t i = 0; i < in.phones.size(); ++i) {
      const Token p = in.phones[i];
      MGCT_EXPECT(p >= 0 && static_cast<std::size_t>(p) < cfg_.phones,
                  "FlowInput: phone id " + std::to_string(p) + " out of range");
      if (i >= in.prompt_count) target_rows.push_back(ids.size());
      ids.push_back(p);
      seg.push_back(i < in.prompt_count ? 0 : 1);
      x.push_back(in.x[i]);
    }
    layout.push(in.phones.size());
  }
  const std::size_t rows = x.size();
  const Tensor values = Tensor::from({rows, 1}, std::move(x));
  Tensor h = ops::add(ops::add(ops::embedding(phone_embed_, ids), ops::embedding(segment_embed_, seg)),
                      value_in_(values));
  h = backbone_(h, t, layout);
  return head_(ops::gather_rows(h, target_rows));
}

FlowBatch make_batch(std::span<const DurationSample> samples, const DurationConfig& cfg, Rng& rng) {
  FlowBatch b;
  for (const auto& s : samples) {
    const std::size_t len = s.phones.size();
    MGCT_EXPECT(len >= 1 && s.durations.size() == len,
                "duration make_batch: one duration per phone required");
    auto k = static_cast<std::size_t>(rng.uniform() * cfg.prompt_max_fraction *
                                      static_cast<double>(len + 1));
    k = std::min(k, len - 1);
    const double t = rng.uniform();
    const bool drop = rng.bernoulli(cfg.prompt_drop);
    b.prompts_dropped += drop;
    FlowInput in;
    const std::size_t first = drop ? k : 0;
    in.prompt_count = drop ? 0 : k;
    for (std::size_t i = first; i < len; ++i) {
      MGCT_EXPECT(s.durations[i] > 0.0f, "duration make_batch: durations must be positive");
      const auto x1 = static_cast<float>(to_log(s.durations[i]));
      in.phones.push_back(s.phones[i]);
      if (i < k) {
        in.x.push_back(x1);
        continue;
      }
      const auto x0 = static_cast<float>(rng.normal());
      in.x.push_back(static_cast<float>((1.0 - t) * x0 + t * x1));
      b.velocity_target.push_back(x1 - x0);
    }
    b.inputs.push_back(std::move(in));
    b.t.push_back(static_cast<float>(t));
  }
  return b;
}

Tensor flow_loss(const Tensor& predicted, std::span<const float> target) {
  MGCT_EXPECT(predicted.numel() == target.size() && !target.empty(),
              "flow_loss: prediction and target sizes differ");
  const Tensor tgt = Tensor::from(predicted.shape(), std::vector<float>(target.begin(), target.end()));
  return ops::mean(ops::square(ops::sub(predicted, tgt)));
}

DurationTrainer::DurationTrainer(DurationModel& model, const AdamWConfig& opt)
    : model_(model), opt_(opt) {}

DurationStepStats DurationTrainer::step(std::span<const DurationSample> samples, Rng& rng) {
  const FlowBatch b = make_batch(samples, model_.config(), rng);
  const Tensor loss = flow_loss(model_.velocity(b.inputs, b.t), b.velocity_target);
  DurationStepStats st;
  st.prompts_dropped = b.prompts_dropped;
  st.loss = nn::minimize_step(model_.params(), opt_, loss);
  return st;
}

std::vector<double> predict_durations(const DurationModel& model, std::span<const Token> text,
                                      std::span<const Token> prompt_phones,
                                      std::span<const float> prompt_durations, Rng& rng) {
  MGCT_EXPECT(!text.empty(), "predict_total_duration: empty text");
  MGCT_EXPECT(prompt_phones.size() == prompt_durations.size(),
              "predict_total_duration: one prompt duration per prompt phone required");
  const DurationConfig& cfg = model.config();
  const std::size_t n = text.size();
  FlowInput cond;
  cond.prompt_count = prompt_phones.size();
  cond.phones.assign(prompt_phones.begin(), prompt_phones.end());
  cond.phones.insert(cond.phones.end(), text.begin(), text.end());
  for (float d : prompt_durations) {
    MGCT_EXPECT(d > 0.0f, "predict_total_duration: prompt durations must be positive");
    cond.x.push_back(static_cast<float>(to_log(d)));
  }
  cond.x.resize(cond.phones.size());
  FlowInput uncond;
  uncond.phones.assign(text.begin(), text.end());
  uncond.x.resize(n);

  const VelocityField field = [&](std::span<const float> x, double t) {
    NoGradGuard ng;
    std::copy(x.begin(), x.end(), cond.x.begin() + static_cast<std::ptrdiff_t>(cond.prompt_count));
    if (cfg.w_cfg == 0.0) {
      const Tensor v = model.velocity(std::vector<FlowInput>{cond}, std::vector<float>{static_cast<float>(t)});
      return std::vector<float>(v.data().begin(), v.data().end());
    }
    std::copy(x.begin(), x.end(), uncond.x.begin());
    const auto tf = static_cast<float>(t);
    const Tensor v = model.velocity(std::vector<FlowInput>{cond, uncond}, std::vector<float>{tf, tf});
    const auto d = v.data();
    // One row over all phones; rescale is a token-logit device and stays off here.
    return masking::cfg_combine(d.subspan(0, n), d.subspan(n, n), n, cfg.w_cfg, 0.0);
  };
  std::vector<float> x0(n);
  for (auto& x : x0) x = static_cast<float>(rng.normal());
  const std::vector<float> x1 = midpoint_solve(field, std::move(x0), cfg.solver_steps);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(1.0, from_log(x1[i]));
  return out;
}

std::size_t predict_total_duration(const DurationModel& model, std::span<const Token> text,
                                   std::span<const Token> prompt_phones,
                                   std::span<const float> prompt_durations, Rng& rng) {
  double total = 0.0;
  for (double d : predict_durations(model, text, prompt_phones, prompt_durations, rng)) total += d;
  return static_cast<std::size_t>(std::llround(total));
}

LognormalDurations::LognormalDurations(std::size_t phones, double min_median, double max_median,
                                       double sigma, std::uint64_t seed)
    : sigma_(sigma) {
  MGCT_EXPECT(phones >= 1 && min_median >= 1.0 && max_median >= min_median && sigma >= 0.0,
              "LognormalDurations: invalid parameters");
  Rng rng(seed);
  for (std::size_t p = 0; p < phones; ++p)
    medians_.push_back(min_median + (max_median - min_median) * rng.uniform());
}

DurationSample LognormalDurations::sample(std::size_t count, Rng& rng) const {
  DurationSample s;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = rng.below(medians_.size());
    const double d = medians_[p] * std::exp(sigma_ * rng.normal());
    s.phones.push_back(static_cast<Token>(p));
    s.durations.push_back(static_cast<float>(std::max(1.0, std::round(d))));
  }
  return s;
}

}  // namespace mgct::duration
