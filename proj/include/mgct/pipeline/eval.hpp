// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mgct/pipeline/synthesis.hpp"

namespace mgct::pipeline {

struct SweepRow {
  std::size_t steps = 0;
  double token_accuracy = 0.0;
  double exact_match = 0.0;
  bool operator==(const SweepRow&) const = default;
};

/// Metrics keyed by name, e.g. "t2s.exact_match", "s2a.layer2.accuracy",
/// "e2e.exact_match", "semantic_codec.utilization", "duration.within10".
/// Sections of modules that were not evaluated are absent.
struct EvalReport {
  std::string config_hash;
  double wall_clock = 0.0;  // seconds
  std::map<std::string, double> metrics;
  std::vector<SweepRow> sweep;  // t2s accuracy per decode step count

  double at(const std::string& key) const;
  bool has(const std::string& key) const { return metrics.contains(key); }
  /// Equality of everything except wall_clock.
  bool same_results(const EvalReport& o) const;
  bool operator==(const EvalReport&) const = default;
};

/// "key=value" lines, then "[sweep]" and a whitespace-separated table with a
/// header row. Numbers use the shortest round-trip form.
std::string format_report(const EvalReport& r);
EvalReport parse_report(std::string_view text);
void write_report(const std::filesystem::path& path, const EvalReport& r);
EvalReport read_report(const std::filesystem::path& path);

// Generators under evaluation. The trained models are wrapped by
// model_generators(); tests plug in oracles.
using SemanticGenerator = std::function<TokenSequence(
    std::span<const Token> text, std::span<const Token> prompt, std::size_t n, std::size_t steps,
    Rng& rng)>;
using AcousticGenerator =
    std::function<TokenGrid(std::span<const Token> semantic, const TokenGrid& prompt, Rng& rng)>;
using TotalPredictor = std::function<double(std::span<const Token> phones,
                                            std::span<const Token> prompt_phones,
                                            std::span<const float> prompt_durations, Rng& rng)>;

// Every evaluator draws utterance i's prompt split and sampling noise from
// stream i of derive_seed(seed, <section>), so results do not depend on
// evaluation order. The prompt is a prefix of k tokens (phones) with k
// uniform in [0, len/2].

struct T2sScore {
  double token_accuracy = 0.0;
  double exact_match = 0.0;
};
T2sScore eval_t2s(const SemanticGenerator& gen, std::span<const t2s::T2sExample> held,
                  std::size_t steps, std::uint64_t seed);

struct S2aScore {
  std::vector<double> layer_accuracy;
  double exact_match = 0.0;
};
S2aScore eval_s2a(const AcousticGenerator& gen, std::span<const s2a::S2aExample> held,
                  std::uint64_t seed);

/// Exact match of the target-region acoustic grid with the length given.
double eval_e2e(const SemanticGenerator& sem, const AcousticGenerator& ac,
                std::span<const t2s::T2sExample> held, std::span<const TokenGrid> truth,
                std::size_t steps, std::uint64_t seed);

struct PredictedChainScore {
  double mean_rel_error = 0.0;  // |N' - N| / N against the duration ground truth
  double within10 = 0.0;
  double completed = 0.0;  // runs whose semantic and acoustic outputs have length N'
};
/// Predicted-length synthesis. Utterance i takes its length from the
/// duration model on duration utterance i (prompt prefix given, remaining
/// phones predicted), then chains t2s and s2a on text utterance i.
PredictedChainScore eval_predicted_chain(const SemanticGenerator& sem, const AcousticGenerator& ac,
                                         const TotalPredictor& total,
                                         std::span<const t2s::T2sExample> held,
                                         std::span<const TokenGrid> truth,
                                         std::span<const duration::DurationSample> phones,
                                         std::size_t steps, std::uint64_t seed);

struct DurationScore {
  double mean_rel_error = 0.0;
  double within10 = 0.0;
};
DurationScore eval_duration(const TotalPredictor& pred,
                            std::span<const duration::DurationSample> held, std::uint64_t seed);

struct CodecScore {
  std::vector<std::size_t> codes_used;  // per quantizer layer
  std::vector<double> utilization;
  double recon_l1 = 0.0;  // mean |x - x_hat| over normalised frames and dimensions
};
CodecScore eval_semantic_codec(const codec::SemanticCodec& codec,
                               std::span<const codec::FeatureSequence> raw);
CodecScore eval_acoustic_codec(const codec::AcousticCodec& codec,
                               std::span<const codec::FeatureSequence> raw);

struct EvalOptions {
  std::filesystem::path checkpoint_dir;
  std::filesystem::path corpus_dir;
  /// Decode step counts of the t2s sweep; empty disables the sweep.
  std::vector<std::size_t> sweep;
  std::ostream* log = nullptr;
};

/// Evaluates every module that has a checkpoint in `checkpoint_dir` on the
/// held-out corpora; the end-to-end chain runs when t2s and s2a are both
/// present. Decoding settings and the seed come from `run`.
EvalReport evaluate(const Config& run, const EvalOptions& opt);

}  // namespace mgct::pipeline
