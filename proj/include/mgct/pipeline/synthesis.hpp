// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>

#include "mgct/pipeline/train.hpp"

namespace mgct::pipeline {

/// Token-level prompt: the semantic prefix and its acoustic grid, plus the
/// phones and durations used when the length is predicted.
struct PromptRecord {
  TokenSequence semantic;
  TokenGrid acoustic;  // layers x |semantic|; an empty grid when there is no prompt
  TokenSequence phones;
  std::vector<float> durations;
};

struct SynthesisResult {
  TokenSequence semantic;  // generated part only, length N
  TokenGrid acoustic;      // layers x N
  bool predicted_length = false;
};

/// T2S followed by S2A. Model shapes come from the checkpoints; decoding
/// settings (steps, top-k, guidance, schedule) come from the run config.
class Synthesizer {
 public:
  /// Throws MissingCheckpoint naming the module when `<dir>/<kind>.ckpt`
  /// does not exist; the duration model is only required when
  /// `with_duration` is set.
  Synthesizer(const Config& run, const std::filesystem::path& dir, bool with_duration);

  /// Generates N semantic tokens after the prompt and the matching
  /// acoustic grid. Without `length`, N is the duration model's total for
  /// `phones` (the target part, after the prompt's phones), at least 1;
  /// empty `phones` means the text symbols are read as phones.
  SynthesisResult run(std::span<const Token> text, const PromptRecord& prompt,
                      std::optional<std::size_t> length, Rng& rng,
                      std::span<const Token> phones = {}) const;

  std::size_t predict_length(std::span<const Token> phones, const PromptRecord& prompt, Rng& rng) const;

  TokenSequence semantic(std::span<const Token> text, std::span<const Token> prompt, std::size_t n,
                         std::size_t steps, Rng& rng) const;
  TokenGrid acoustic(std::span<const Token> semantic, const TokenGrid& prompt, Rng& rng) const;

  bool has_duration() const noexcept { return duration_.model != nullptr; }
  const t2s::T2sModel& t2s_model() const { return *t2s_.model; }
  const s2a::S2aModel& s2a_model() const { return *s2a_.model; }
  const masking::DecodeConfig& t2s_decode() const noexcept { return t2s_decode_; }

 private:
  Loaded<t2s::T2sModel> t2s_;
  Loaded<s2a::S2aModel> s2a_;
  Loaded<duration::DurationModel> duration_;
  masking::DecodeConfig t2s_decode_, s2a_decode_;
  s2a::LayerStepSchedule schedule_;
};

/// Path of a module checkpoint inside `dir`, or MissingCheckpoint.
std::filesystem::path require_checkpoint(const std::filesystem::path& dir, ModuleKind kind);

}  // namespace mgct::pipeline
