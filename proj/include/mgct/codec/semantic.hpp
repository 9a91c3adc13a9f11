// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mgct/codec/conv.hpp"
#include "mgct/codec/features.hpp"
#include "mgct/codec/vq.hpp"
#include "mgct/nn/params.hpp"
#include "mgct/numerics/adamw.hpp"
#include "mgct/tokens.hpp"

namespace mgct::codec {

struct SemanticCodecConfig {
  std::size_t feature_dim = 16;
  std::size_t hidden = 32;
  std::size_t blocks = 2;
  std::size_t kernel = 7;
  std::size_t codebook_size = 64;
  std::size_t code_dim = 4;
  float lambda_rec = 1.0f;
  float lambda_codebook = 1.0f;
  float lambda_commit = 0.25f;
  /// Codes unused for this many consecutive training steps are reseeded.
  std::int64_t revive_after = 200;

  void validate() const;
  static SemanticCodecConfig paper() {
    SemanticCodecConfig c;
    c.feature_dim = 1024;
    c.hidden = 384;
    c.blocks = 12;
    c.codebook_size = 8192;
    c.code_dim = 8;
    return c;
  }
};

struct VqWeights {
  float rec = 1.0f;
  float codebook = 1.0f;
  float commit = 0.25f;
};

struct VqLossTerms {
  Tensor total;     // weighted sum / (T * d)
  Tensor rec;       // sum |S - S_hat|
  Tensor codebook;  // sum (sg(enc) - E)^2
  Tensor commit;    // sum (sg(E) - enc)^2
};

/// (rec*|S - S_hat|_1 + codebook*|sg(enc) - E|^2 + commit*|sg(E) - enc|^2) / (T d)
/// with S, S_hat [T, d] and enc, E [T, c]. The codebook term reaches only E,
/// the commitment term only enc.
VqLossTerms vqvae_loss(const Tensor& s, const Tensor& s_hat, const Tensor& enc,
                       const Tensor& quantized, const VqWeights& w);

struct Quantization {
  TokenSequence indices;
  Tensor quantized;  // codebook rows, differentiable w.r.t. the codebook
};

/// Encoder -> factorised down-projection -> VQ -> up-projection -> decoder.
/// Operates on normalised features; packed batches via `offsets`.
class SemanticCodec {
 public:
  SemanticCodec(const SemanticCodecConfig& cfg, std::uint64_t seed);

  /// [T, d] -> [T, code_dim].
  Tensor encode(const Tensor& x, std::span<const std::size_t> offsets) const;
  Quantization quantize(const Tensor& latents) const;
  /// [T, code_dim] -> [T, d].
  Tensor decode(const Tensor& codes, std::span<const std::size_t> offsets) const;

  /// Normalises, encodes and quantises one raw utterance.
  TokenSequence tokenize(const FeatureSequence& raw) const;
  /// Decodes tokens back to raw (de-normalised) features.
  FeatureSequence reconstruct(std::span<const Token> tokens) const;

  const SemanticCodecConfig& config() const noexcept { return cfg_; }
  nn::ParamStore& params() noexcept { return ps_; }
  const nn::ParamStore& params() const noexcept { return ps_; }
  Tensor& codebook() noexcept { return codebook_; }
  const Tensor& codebook() const noexcept { return codebook_; }
  std::size_t codebook_index() const noexcept { return codebook_param_; }

  Normalizer normalizer;

 private:
  SemanticCodecConfig cfg_;
  nn::ParamStore ps_;
  ConvStack encoder_, decoder_;
  nn::Linear down_, up_;
  Tensor codebook_;
  std::size_t codebook_param_ = 0;
};

struct CodecStepStats {
  double loss = 0.0;
  double rec_l1 = 0.0;  // mean |S - S_hat| per element
  std::size_t codes_used = 0;
  std::size_t revived = 0;
};

/// AdamW training with data-based codebook initialisation on the first step
/// and dead-code revival.
class SemanticTrainer {
 public:
  SemanticTrainer(SemanticCodec& codec, const AdamWConfig& opt);

  /// `batch` holds normalised utterances.
  CodecStepStats step(std::span<const FeatureSequence> batch, Rng& rng);

  OptimizerState& optimizer() noexcept { return opt_; }
  CodeUsage& usage() noexcept { return usage_; }

 private:
  SemanticCodec& codec_;
  OptimizerState opt_;
  CodeUsage usage_;
};

/// Packs utterances into one [sum T, d] tensor; `offsets` receives the
/// sequence boundaries.
Tensor pack_features(std::span<const FeatureSequence> batch, std::vector<std::size_t>& offsets);

}  // namespace mgct::codec
