// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/pipeline/synthesis.hpp"

#include <algorithm>
#include <cmath>

#include "mgct/errors.hpp"

namespace mgct::pipeline {

std::filesystem::path require_checkpoint(const std::filesystem::path& dir, ModuleKind kind) {
  const std::filesystem::path p = dir / checkpoint_name(kind);
  if (!std::filesystem::exists(p))
    throw MissingCheckpoint("module " + std::string(kind_name(kind)) + " has no checkpoint at " +
                            p.string());
  return p;
}

Synthesizer::Synthesizer(const Config& run, const std::filesystem::path& dir, bool with_duration)
    : t2s_decode_(decode_config(run, "t2s")),
      s2a_decode_(decode_config(run, "s2a")),
      schedule_(s2a_schedule(run)) {
  // Check every required file first so the error names the missing module
  // before any loading work.
  const auto t2s_path = require_checkpoint(dir, ModuleKind::t2s);
  const auto s2a_path = require_checkpoint(dir, ModuleKind::s2a);
  std::optional<std::filesystem::path> dur_path;
  if (with_duration) dur_path = require_checkpoint(dir, ModuleKind::duration);
  t2s_ = load_t2s(t2s_path);
  s2a_ = load_s2a(s2a_path);
  if (dur_path) duration_ = load_duration(*dur_path);
  schedule_.validate(s2a_.model->config().layers);
}

TokenSequence Synthesizer::semantic(std::span<const Token> text, std::span<const Token> prompt,
                                    std::size_t n, std::size_t steps, Rng& rng) const {
  masking::DecodeConfig d = t2s_decode_;
  d.steps = steps;
  return t2s::generate(*t2s_.model, text, prompt, n, d, rng);
}

TokenGrid Synthesizer::acoustic(std::span<const Token> semantic, const TokenGrid& prompt,
                                Rng& rng) const {
  return s2a::generate(*s2a_.model, semantic, prompt, schedule_, s2a_decode_, rng);
}

std::size_t Synthesizer::predict_length(std::span<const Token> phones, const PromptRecord& prompt,
                                        Rng& rng) const {
  MGCT_EXPECT(has_duration(), "predicted length needs a duration checkpoint");
  return std::max<std::size_t>(
      1, duration::predict_total_duration(*duration_.model, phones, prompt.phones, prompt.durations, rng));
}

SynthesisResult Synthesizer::run(std::span<const Token> text, const PromptRecord& prompt,
                                 std::optional<std::size_t> length, Rng& rng,
                                 std::span<const Token> phones) const {
  const std::size_t layers = s2a_.model->config().layers;
  TokenGrid prompt_grid = prompt.acoustic;
  if (prompt_grid.layers == 0 && prompt_grid.frames == 0) prompt_grid = TokenGrid(layers, 0);
  MGCT_EXPECT(prompt_grid.layers == layers,
              "prompt grid has " + std::to_string(prompt_grid.layers) + " layers, model has " +
                  std::to_string(layers));
  MGCT_EXPECT(prompt_grid.frames == prompt.semantic.size(),
              "prompt grid has " + std::to_string(prompt_grid.frames) + " frames for " +
                  std::to_string(prompt.semantic.size()) + " semantic tokens");

  SynthesisResult out;
  out.predicted_length = !length.has_value();
  const std::size_t n = length ? *length : predict_length(phones.empty() ? text : phones, prompt, rng);
  out.semantic = semantic(text, prompt.semantic, n, t2s_decode_.steps, rng);
  TokenSequence full = prompt.semantic;
  full.insert(full.end(), out.semantic.begin(), out.semantic.end());
  out.acoustic = acoustic(full, prompt_grid, rng);
  return out;
}

}  // namespace mgct::pipeline
