// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/nn/transformer.hpp"

#include <cmath>

#include "mgct/errors.hpp"
#include "mgct/numerics/ops.hpp"

namespace mgct::nn {

void TransformerConfig::validate() const {
  MGCT_EXPECT(layers >= 1 && model_dim >= 1 && ffn_dim >= 1 && heads >= 1,
              "TransformerConfig: all sizes must be >= 1");
  MGCT_EXPECT(model_dim % heads == 0, "TransformerConfig: model_dim " +
                                          std::to_string(model_dim) +
                                          " not divisible by heads " + std::to_string(heads));
  MGCT_EXPECT((model_dim / heads) % 2 == 0, "TransformerConfig: head dimension must be even");
  MGCT_EXPECT(rope_theta > 0.0, "TransformerConfig: rope_theta must be positive");
}

void SequenceLayout::push(std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) positions.push_back(static_cast<float>(i));
  offsets.push_back(offsets.back() + len);
}

Linear::Linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
               Rng& rng, bool bias, float gain) {
  weight = ps.add_normal(name + ".weight", {in, out},
                         gain / std::sqrt(static_cast<float>(in)), rng);
  if (bias) this->bias = ps.add_zeros(name + ".bias", {out});
}

Tensor Linear::operator()(const Tensor& x) const { return ops::linear(x, weight, bias); }

TimestepEmbedder::TimestepEmbedder(ParamStore& ps, const std::string& name, std::size_t dim,
                                   Rng& rng)
    : dim_(dim),
      fc1_(ps, name + ".fc1", dim, dim, rng),
      fc2_(ps, name + ".fc2", dim, dim, rng) {}

std::vector<float> TimestepEmbedder::sinusoidal(float t, std::size_t dim) {
  std::vector<float> f(dim, 0.0f);
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                 static_cast<double>(std::max<std::size_t>(half, 1)));
    const double a = 1000.0 * static_cast<double>(t) * freq;
    f[i] = static_cast<float>(std::cos(a));
    f[half + i] = static_cast<float>(std::sin(a));
  }
  return f;
}

Tensor TimestepEmbedder::operator()(std::span<const float> t) const {
  std::vector<float> feats;
  feats.reserve(t.size() * dim_);
  for (float v : t) {
    auto f = sinusoidal(v, dim_);
    feats.insert(feats.end(), f.begin(), f.end());
  }
  Tensor x = Tensor::from({t.size(), dim_}, std::move(feats));
  return fc2_(ops::silu(fc1_(x)));
}

AdaptiveRmsNorm::AdaptiveRmsNorm(ParamStore& ps, const std::string& name, std::size_t dim,
                                 Rng& rng)
    : scale_proj(ps, name + ".scale", dim, dim, rng, true, 0.0f),
      shift_proj(ps, name + ".shift", dim, dim, rng, true, 0.0f) {}

Tensor AdaptiveRmsNorm::operator()(const Tensor& x, const Tensor& temb,
                                   std::span<const std::size_t> offsets) const {
  const Tensor cond = ops::silu(temb);
  const Tensor s = ops::expand_rows(scale_proj(cond), offsets);
  const Tensor h = ops::expand_rows(shift_proj(cond), offsets);
  return ops::add(ops::mul(ops::rms_norm(x, 1e-6f), ops::add_scalar(s, 1.0f)), h);
}

SelfAttention::SelfAttention(ParamStore& ps, const std::string& name,
                             const TransformerConfig& cfg, Rng& rng)
    : heads_(cfg.heads),
      theta_(cfg.rope_theta),
      wq_(ps, name + ".wq", cfg.model_dim, cfg.model_dim, rng, false),
      wk_(ps, name + ".wk", cfg.model_dim, cfg.model_dim, rng, false),
      wv_(ps, name + ".wv", cfg.model_dim, cfg.model_dim, rng, false),
      wo_(ps, name + ".wo", cfg.model_dim, cfg.model_dim, rng, false,
          1.0f / std::sqrt(2.0f * static_cast<float>(cfg.layers))) {}

Tensor SelfAttention::operator()(const Tensor& x, const SequenceLayout& layout) const {
  const Tensor q = ops::rope(wq_(x), layout.positions, heads_, theta_);
  const Tensor k = ops::rope(wk_(x), layout.positions, heads_, theta_);
  const Tensor v = wv_(x);
  return wo_(ops::attention(q, k, v, heads_, layout.offsets));
}

SwiGlu::SwiGlu(ParamStore& ps, const std::string& name, std::size_t dim, std::size_t hidden,
               std::size_t layers, Rng& rng)
    : gate_(ps, name + ".gate", dim, hidden, rng, false),
      up_(ps, name + ".up", dim, hidden, rng, false),
      down_(ps, name + ".down", hidden, dim, rng, false,
            1.0f / std::sqrt(2.0f * static_cast<float>(layers))) {}

Tensor SwiGlu::operator()(const Tensor& x) const {
  return down_(ops::mul(ops::silu(gate_(x)), up_(x)));
}

TransformerBlock::TransformerBlock(ParamStore& ps, const std::string& name,
                                   const TransformerConfig& cfg, Rng& rng)
    : norm_attn_(ps, name + ".norm_attn", cfg.model_dim, rng),
      norm_ffn_(ps, name + ".norm_ffn", cfg.model_dim, rng),
      attn_(ps, name + ".attn", cfg, rng),
      ffn_(ps, name + ".ffn", cfg.model_dim, cfg.ffn_dim, cfg.layers, rng) {}

Tensor TransformerBlock::operator()(const Tensor& x, const Tensor& temb,
                                    const SequenceLayout& layout) const {
  const Tensor h = ops::add(x, attn_(norm_attn_(x, temb, layout.offsets), layout));
  return ops::add(h, ffn_(norm_ffn_(h, temb, layout.offsets)));
}

Transformer::Transformer(ParamStore& ps, const std::string& name, const TransformerConfig& cfg,
                         Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  time_ = TimestepEmbedder(ps, name + ".time", cfg.model_dim, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l)
    blocks_.emplace_back(ps, name + ".block" + std::to_string(l), cfg, rng);
  final_norm_ = AdaptiveRmsNorm(ps, name + ".final_norm", cfg.model_dim, rng);
}

Tensor Transformer::operator()(const Tensor& x, std::span<const float> t,
                               const SequenceLayout& layout) const {
  MGCT_EXPECT(x.rows() == layout.rows() && x.cols() == cfg_.model_dim,
              "Transformer: input " + shape_str(x.shape()) + " does not match layout of " +
                  std::to_string(layout.rows()) + " rows");
  MGCT_EXPECT(t.size() == layout.sequences(), "Transformer: need one timestep per sequence");
  MGCT_EXPECT(layout.positions.size() == layout.rows(), "Transformer: positions/rows mismatch");
  const Tensor temb = time_(t);
  Tensor h = x;
  for (const auto& b : blocks_) h = b(h, temb, layout);
  return final_norm_(h, temb, layout.offsets);
}

}  // namespace mgct::nn
