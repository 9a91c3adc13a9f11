// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "mgct/codec/features.hpp"
#include "mgct/duration/duration.hpp"
#include "mgct/pipeline/config.hpp"
#include "mgct/s2a/s2a.hpp"
#include "mgct/t2s/t2s.hpp"
#include "mgct/tokens.hpp"

namespace mgct::pipeline {

/// Independent stream seed for a named purpose.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// Text formats. Every reader throws FormatError with the line number on
// malformed input and IoError when the file cannot be opened.

/// "TEXT_IDS | SEMANTIC_IDS" per line.
void write_t2s_corpus(const std::filesystem::path& path, std::span<const t2s::T2sExample> records);
std::vector<t2s::T2sExample> read_t2s_corpus(const std::filesystem::path& path);

/// "PHONE_IDS | DURATIONS" per line, durations in whole frames.
void write_duration_corpus(const std::filesystem::path& path,
                           std::span<const duration::DurationSample> records);
std::vector<duration::DurationSample> read_duration_corpus(const std::filesystem::path& path);

/// One space-separated token sequence per line.
void write_sequences(const std::filesystem::path& path, std::span<const TokenSequence> seqs);
std::vector<TokenSequence> read_sequences(const std::filesystem::path& path);

/// Token grids: "layers=N frames=F", then one line of F codes per layer.
std::string format_grid(const TokenGrid& g);
void write_grids(const std::filesystem::path& path, std::span<const TokenGrid> grids);
std::vector<TokenGrid> read_grids(const std::filesystem::path& path);

/// Ground truth of the synthetic tasks, fully determined by the config.
class SyntheticTask {
 public:
  explicit SyntheticTask(const Config& c);

  /// Expansion of a text; the stochastic mapping draws each symbol's
  /// alternate expansion with probability 0.2.
  TokenSequence expand(std::span<const Token> text, Rng& rng) const;
  /// The primary expansion (the only one for the deterministic mapping).
  TokenSequence expand(std::span<const Token> text) const;
  /// Acoustic grid fixed frame by frame by the semantic tokens.
  TokenGrid acoustic(std::span<const Token> semantic) const;

  t2s::T2sExample t2s_example(Rng& rng) const;
  s2a::S2aExample s2a_example(Rng& rng) const;
  duration::DurationSample duration_example(Rng& rng) const;
  const codec::MixtureSource& features() const noexcept { return features_; }

  bool stochastic() const noexcept { return stochastic_; }
  std::size_t tokens_per_symbol() const noexcept { return per_symbol_; }

 private:
  bool stochastic_ = false;
  std::size_t text_vocab_, per_symbol_, text_min_, text_max_;
  std::size_t semantic_codes_, s2a_min_, s2a_max_, phones_min_, phones_max_;
  std::vector<TokenSequence> primary_, alternate_;
  std::vector<std::vector<Token>> columns_;  // per semantic code, one code per layer
  duration::LognormalDurations durations_;
  codec::MixtureSource features_;
};

/// File names inside a corpus directory.
struct CorpusLayout {
  std::filesystem::path dir;

  std::filesystem::path t2s(bool train) const;
  std::filesystem::path s2a_semantic(bool train) const;
  std::filesystem::path s2a_grid(bool train) const;
  std::filesystem::path e2e_grid() const;  // truth grids of the t2s held-out lines
  std::filesystem::path duration(bool train) const;
  std::filesystem::path features(bool train) const;
};

/// Emits every corpus with a 90/10 (task.train_fraction) train/held-out
/// split. Held-out t2s texts never repeat a training text.
void gen_corpus(const Config& c, const std::filesystem::path& dir);

std::vector<s2a::S2aExample> read_s2a_corpus(const CorpusLayout& layout, bool train);

}  // namespace mgct::pipeline
