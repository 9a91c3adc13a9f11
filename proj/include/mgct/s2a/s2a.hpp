// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mgct/masking/decode.hpp"
#include "mgct/masking/masking.hpp"
#include "mgct/nn/params.hpp"
#include "mgct/nn/transformer.hpp"
#include "mgct/numerics/adamw.hpp"
#include "mgct/tokens.hpp"

namespace mgct::s2a {

/// p(j) = 2(N+1-j) / (N(N+1)) for j = 1..N.
double layer_probability(std::size_t j, std::size_t layers);
/// Draws a 1-based acoustic layer index from layer_probability.
std::size_t sample_layer(std::size_t layers, Rng& rng);

/// Decode steps per acoustic layer, coarsest first.
struct LayerStepSchedule {
  std::vector<std::size_t> steps;

  void validate(std::size_t layers) const;
  static LayerStepSchedule desk() { return {{8, 4, 1, 1}}; }
  static LayerStepSchedule paper(std::size_t layers);  // 40, 16, then 1
  static LayerStepSchedule fast(std::size_t layers);   // 10, then 1
};

struct S2aConfig {
  nn::TransformerConfig backbone{};
  std::size_t semantic_codes = 64;
  std::size_t layers = 4;
  std::size_t codebook_size = 32;
  double prompt_drop = 0.15;
  double prompt_max_fraction = 0.5;
  masking::MaskSchedule schedule{};

  Token mask_id() const noexcept { return static_cast<Token>(codebook_size); }
  void validate() const;
};

/// One model input. `acoustic` spans all |S| frames; the first prompt_frames
/// frames are the prompt A^p. Layers below `layer` carry codes everywhere,
/// layer `layer` carries codes on the prompt and codes or MASK on the target,
/// layers above it are ignored.
struct S2aInput {
  TokenSequence semantic;
  TokenGrid acoustic;
  std::size_t prompt_frames = 0;
  std::size_t layer = 1;  // 1-based j

  std::size_t frames() const noexcept { return semantic.size(); }
  std::size_t target_frames() const noexcept { return semantic.size() - prompt_frames; }
};

class S2aModel {
 public:
  S2aModel(const S2aConfig& cfg, std::uint64_t seed);

  /// Per-frame input vectors: semantic embedding plus the layer embeddings of
  /// layers 1..j. [total frames, model_dim].
  Tensor embed(std::span<const S2aInput> batch) const;

  /// Layer-j logits for the target frames of every input, stacked in batch
  /// order: [sum of target frames, codebook_size].
  Tensor target_logits(std::span<const S2aInput> batch, std::span<const float> t) const;

  const S2aConfig& config() const noexcept { return cfg_; }
  nn::ParamStore& params() noexcept { return ps_; }
  const nn::ParamStore& params() const noexcept { return ps_; }

 private:
  void check(const S2aInput& in) const;

  S2aConfig cfg_;
  nn::ParamStore ps_;
  Tensor semantic_embed_;
  std::vector<Tensor> acoustic_embed_;  // [codebook_size + 1, d] per layer, last row MASK
  nn::Transformer backbone_;
  std::vector<nn::Linear> heads_;
};

/// One training utterance: semantic tokens and the aligned acoustic grid.
struct S2aExample {
  TokenSequence semantic;
  TokenGrid acoustic;
};

struct S2aBatch {
  std::vector<S2aInput> inputs;
  std::vector<float> t;
  TokenSequence targets;           // layer-j truth for every target frame
  std::vector<std::uint8_t> mask;  // 1 where that frame is masked
  std::size_t prompts_dropped = 0;
};

/// Per utterance: random prompt prefix, layer j ~ p(j), t uniform in (0, T],
/// masking of layer j over the target frames. A dropped prompt removes its
/// frames from both S and the grid.
S2aBatch make_batch(std::span<const S2aExample> examples, const S2aConfig& cfg, Rng& rng);

masking::MaskedLoss batch_loss(const S2aModel& model, const S2aBatch& batch);

struct S2aStepStats {
  double loss = 0.0;
  std::size_t masked = 0;
  std::size_t prompts_dropped = 0;
};

class S2aTrainer {
 public:
  S2aTrainer(S2aModel& model, const AdamWConfig& opt);
  S2aStepStats step(std::span<const S2aExample> examples, Rng& rng);
  OptimizerState& optimizer() noexcept { return opt_; }

 private:
  S2aModel& model_;
  OptimizerState opt_;
};

/// Decodes layer j (1-based) of the target frames given the layers below it
/// in `target`; returns the layer's codes. Layers >= j of `target` are not
/// read.
TokenSequence generate_layer(const S2aModel& model, std::span<const Token> semantic,
                             const TokenGrid& prompt, const TokenGrid& target, std::size_t j,
                             masking::DecodeConfig cfg, Rng& rng);

/// Coarse-to-fine generation of the target grid (layers x (|S| - prompt
/// frames)); layer j uses schedule.steps[j-1] decode steps.
TokenGrid generate(const S2aModel& model, std::span<const Token> semantic, const TokenGrid& prompt,
                   const LayerStepSchedule& schedule, const masking::DecodeConfig& cfg, Rng& rng);

}  // namespace mgct::s2a
