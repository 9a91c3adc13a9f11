// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mgct/codec/conv.hpp"
#include "mgct/codec/features.hpp"
#include "mgct/codec/semantic.hpp"
#include "mgct/codec/vq.hpp"
#include "mgct/nn/params.hpp"
#include "mgct/numerics/adamw.hpp"
#include "mgct/tokens.hpp"

namespace mgct::codec {

struct AcousticCodecConfig {
  std::size_t feature_dim = 16;
  std::size_t hidden = 32;
  std::size_t blocks = 1;
  std::size_t kernel = 7;
  std::size_t code_dim = 8;
  std::size_t layers = 4;
  std::size_t codebook_size = 32;
  float lambda_rec = 10.0f;
  float lambda_codebook = 1.0f;
  float lambda_commit = 0.25f;
  std::vector<std::size_t> windows{1, 4, 16};
  std::int64_t revive_after = 200;
  /// Kept as metadata so token rates mean something: 24 kHz audio, hop 480.
  std::size_t sample_rate = 24000;
  std::size_t hop = 480;

  void validate() const;
  static AcousticCodecConfig paper() {
    AcousticCodecConfig c;
    c.layers = 12;
    c.codebook_size = 1024;
    return c;
  }
};

struct RvqTerms {
  /// Per layer: the residual that layer quantised (gradient reaches the
  /// encoder) and the entries it selected (gradient reaches the codebook).
  std::vector<Tensor> residuals;
  std::vector<Tensor> entries;
};

/// lambda.rec * sum_w mean|pool_w(x) - pool_w(x_hat)|
///   + (lambda.codebook * sum_j |sg(r_j) - e_j|^2 + lambda.commit * sum_j |r_j - sg(e_j)|^2) / (T d)
/// for a single utterance x, x_hat [T, d]; pool_w averages windows of w frames.
VqLossTerms acoustic_recon_loss(const Tensor& x, const Tensor& x_hat, const RvqTerms& rvq,
                                const VqWeights& w, std::span<const std::size_t> windows);

struct RvqQuantization {
  TokenGrid grid;
  RvqTerms terms;
  Tensor quantized;  // sum of entries, [T, code_dim]
};

class AcousticCodec {
 public:
  AcousticCodec(const AcousticCodecConfig& cfg, std::uint64_t seed);

  Tensor encode(const Tensor& x, std::span<const std::size_t> offsets) const;
  /// Residual quantisation with graph edges for training.
  RvqQuantization quantize(const Tensor& latents) const;
  Tensor decode(const Tensor& codes, std::span<const std::size_t> offsets) const;

  /// Raw features -> token grid.
  TokenGrid tokenize(const FeatureSequence& raw) const;
  /// Token grid -> raw features using layers 1..up_to.
  FeatureSequence reconstruct(const TokenGrid& grid, std::size_t up_to) const;

  RvqStack stack() const { return RvqStack(books_); }
  const AcousticCodecConfig& config() const noexcept { return cfg_; }
  nn::ParamStore& params() noexcept { return ps_; }
  const nn::ParamStore& params() const noexcept { return ps_; }
  std::vector<Tensor>& books() noexcept { return books_; }
  std::size_t book_index(std::size_t layer) const { return book_params_.at(layer); }

  Normalizer normalizer;

 private:
  AcousticCodecConfig cfg_;
  nn::ParamStore ps_;
  ConvStack encoder_, decoder_;
  std::vector<Tensor> books_;
  std::vector<std::size_t> book_params_;
};

class AcousticTrainer {
 public:
  AcousticTrainer(AcousticCodec& codec, const AdamWConfig& opt);
  CodecStepStats step(std::span<const FeatureSequence> batch, Rng& rng);
  OptimizerState& optimizer() noexcept { return opt_; }
  std::vector<CodeUsage>& usage() noexcept { return usage_; }

 private:
  AcousticCodec& codec_;
  OptimizerState opt_;
  std::vector<CodeUsage> usage_;
};

}  // namespace mgct::codec
