// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mgct/nn/params.hpp"
#include "mgct/numerics/rng.hpp"
#include "mgct/numerics/tensor.hpp"

// Llama-style bidirectional transformer conditioned on a diffusion timestep
// through adaptive RMSNorm. Inputs are packed batches: a [rows, model_dim]
// tensor plus a layout saying where each sequence starts and which RoPE
// position each row has.

namespace mgct::nn {

struct TransformerConfig {
  std::size_t layers = 2;
  std::size_t model_dim = 64;
  std::size_t ffn_dim = 256;
  std::size_t heads = 4;
  double rope_theta = 10000.0;

  void validate() const;

  static TransformerConfig desk() { return {}; }
  static TransformerConfig paper_t2s_base() { return {16, 1024, 4096, 16, 10000.0}; }
  static TransformerConfig paper_t2s_large() { return {16, 1536, 6144, 16, 10000.0}; }
  static TransformerConfig paper_s2a() { return {16, 1024, 4096, 16, 10000.0}; }
  static TransformerConfig paper_duration() { return {12, 768, 3072, 12, 10000.0}; }
};

struct SequenceLayout {
  /// offsets[b]..offsets[b+1] are the rows of sequence b.
  std::vector<std::size_t> offsets{0};
  /// RoPE position of every row.
  std::vector<float> positions;

  std::size_t sequences() const noexcept { return offsets.size() - 1; }
  std::size_t rows() const noexcept { return offsets.back(); }
  /// Appends a sequence of `len` rows at positions 0..len-1.
  void push(std::size_t len);
};

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
         bool bias = true, float gain = 1.0f);
  Tensor operator()(const Tensor& x) const;

  Tensor weight;
  Tensor bias;
};

/// Sinusoidal features of t followed by Linear-SiLU-Linear.
class TimestepEmbedder {
 public:
  TimestepEmbedder() = default;
  TimestepEmbedder(ParamStore& ps, const std::string& name, std::size_t dim, Rng& rng);
  /// One row per timestep: [t.size(), dim].
  Tensor operator()(std::span<const float> t) const;

  static std::vector<float> sinusoidal(float t, std::size_t dim);

 private:
  std::size_t dim_ = 0;
  Linear fc1_, fc2_;
};

/// rms_norm(x) * (1 + scale(temb)) + shift(temb), with scale and shift
/// projected from the timestep embedding of each row's sequence.
class AdaptiveRmsNorm {
 public:
  AdaptiveRmsNorm() = default;
  AdaptiveRmsNorm(ParamStore& ps, const std::string& name, std::size_t dim, Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& temb,
                    std::span<const std::size_t> offsets) const;

  Linear scale_proj, shift_proj;
};

class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(ParamStore& ps, const std::string& name, const TransformerConfig& cfg, Rng& rng);
  Tensor operator()(const Tensor& x, const SequenceLayout& layout) const;

 private:
  std::size_t heads_ = 1;
  double theta_ = 10000.0;
  Linear wq_, wk_, wv_, wo_;
};

class SwiGlu {
 public:
  SwiGlu() = default;
  SwiGlu(ParamStore& ps, const std::string& name, std::size_t dim, std::size_t hidden,
         std::size_t layers, Rng& rng);
  Tensor operator()(const Tensor& x) const;

 private:
  Linear gate_, up_, down_;
};

class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ParamStore& ps, const std::string& name, const TransformerConfig& cfg,
                   Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& temb, const SequenceLayout& layout) const;

 private:
  AdaptiveRmsNorm norm_attn_, norm_ffn_;
  SelfAttention attn_;
  SwiGlu ffn_;
};

class Transformer {
 public:
  Transformer() = default;
  Transformer(ParamStore& ps, const std::string& name, const TransformerConfig& cfg, Rng& rng);

  /// x: [layout.rows(), model_dim]; t: one timestep per sequence.
  /// Returns the final normalized hidden states, same shape as x.
  Tensor operator()(const Tensor& x, std::span<const float> t,
                    const SequenceLayout& layout) const;

  const TransformerConfig& config() const noexcept { return cfg_; }

 private:
  TransformerConfig cfg_;
  TimestepEmbedder time_;
  std::vector<TransformerBlock> blocks_;
  AdaptiveRmsNorm final_norm_;
};

}  // namespace mgct::nn
