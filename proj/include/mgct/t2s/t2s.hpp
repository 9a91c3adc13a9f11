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

namespace mgct::t2s {

enum class Segment : std::uint8_t { text = 0, prompt = 1, target = 2 };

struct T2sConfig {
  nn::TransformerConfig backbone{};
  std::size_t text_vocab = 16;
  /// Codec codes 0..semantic_codes-1; MASK and SEP follow.
  std::size_t semantic_codes = 64;
  double prompt_drop = 0.15;
  double prompt_max_fraction = 0.5;
  masking::MaskSchedule schedule{};

  Token mask_id() const noexcept { return static_cast<Token>(semantic_codes); }
  Token sep_id() const noexcept { return static_cast<Token>(semantic_codes + 1); }
  void validate() const;
};

/// Flat model input [P, SEP, S^p, S_t]. Text rows index the text table, all
/// other rows the semantic table (codes, MASK, SEP).
struct PrefixInput {
  TokenSequence ids;
  std::vector<Segment> segments;
  std::size_t target_begin = 0;  // first row of S_t

  std::size_t size() const noexcept { return ids.size(); }
  std::size_t target_size() const noexcept { return ids.size() - target_begin; }
};

PrefixInput build_prefix_input(std::span<const Token> text, std::span<const Token> prompt,
                               std::span<const Token> target, const T2sConfig& cfg);

/// Loss positions of a prefix input: 1 on masked target rows only.
std::vector<std::uint8_t> loss_mask(const PrefixInput& in, const T2sConfig& cfg);

class T2sModel {
 public:
  T2sModel(const T2sConfig& cfg, std::uint64_t seed);

  /// Logits over the semantic codes for the target rows of every input,
  /// stacked in batch order: [sum of target sizes, semantic_codes].
  Tensor target_logits(std::span<const PrefixInput> batch, std::span<const float> t) const;

  const T2sConfig& config() const noexcept { return cfg_; }
  nn::ParamStore& params() noexcept { return ps_; }
  const nn::ParamStore& params() const noexcept { return ps_; }

 private:
  T2sConfig cfg_;
  nn::ParamStore ps_;
  Tensor text_embed_, semantic_embed_, segment_embed_;
  nn::Transformer backbone_;
  nn::Linear head_;
};

/// One training utterance: text P and its full semantic sequence S.
struct T2sExample {
  TokenSequence text;
  TokenSequence semantic;
};

struct T2sStepStats {
  double loss = 0.0;
  std::size_t masked = 0;
  std::size_t prompts_dropped = 0;
};

/// Builds the masked training batch: per utterance a random prompt prefix
/// (fraction uniform in [0, prompt_max_fraction], at least one target token
/// kept), t uniform in (0, T], masking of the target, and prompt dropping
/// with probability prompt_drop. Loss is the masked NLL over all masked
/// target rows of the batch.
struct T2sBatch {
  std::vector<PrefixInput> inputs;
  std::vector<float> t;
  TokenSequence targets;            // ground truth for every target row
  std::vector<std::uint8_t> mask;   // 1 where a target row is masked
  std::size_t prompts_dropped = 0;
};

T2sBatch make_batch(std::span<const T2sExample> examples, const T2sConfig& cfg, Rng& rng);

class T2sTrainer {
 public:
  T2sTrainer(T2sModel& model, const AdamWConfig& opt);
  T2sStepStats step(std::span<const T2sExample> examples, Rng& rng);
  OptimizerState& optimizer() noexcept { return opt_; }

 private:
  T2sModel& model_;
  OptimizerState opt_;
};

/// Masked loss of a prepared batch (no parameter update).
masking::MaskedLoss batch_loss(const T2sModel& model, const T2sBatch& batch);

/// Length-N generation conditioned on text and a semantic prompt. The
/// unconditional pass keeps the text and drops the prompt.
TokenSequence generate(const T2sModel& model, std::span<const Token> text,
                       std::span<const Token> prompt, std::size_t n,
                       const masking::DecodeConfig& cfg, Rng& rng);

}  // namespace mgct::t2s
