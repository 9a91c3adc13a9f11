// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mgct/numerics/adamw.hpp"
#include "mgct/numerics/rng.hpp"
#include "mgct/numerics/tensor.hpp"
#include "mgct/tokens.hpp"

namespace mgct::codec {

/// Index of the nearest codebook row for every latent row (squared L2,
/// lowest index on ties). latents [T, c], codebook [K, c].
TokenSequence nearest_codes(const Tensor& latents, const Tensor& codebook,
                            std::vector<float>* dist2 = nullptr);

std::size_t distinct_codes(std::span<const Token> idx);

/// Remembers the last training step at which each code was selected.
class CodeUsage {
 public:
  CodeUsage() = default;
  explicit CodeUsage(std::size_t codes) : last_(codes, 0) {}

  void observe(std::span<const Token> idx, std::int64_t step);
  /// Codes not selected during the last `after` steps.
  std::vector<std::size_t> stale(std::int64_t step, std::int64_t after) const;
  void touch(std::size_t code, std::int64_t step) { last_.at(code) = step; }
  std::span<const std::int64_t> last_used() const noexcept { return last_; }
  std::span<std::int64_t> last_used() noexcept { return last_; }

 private:
  std::vector<std::int64_t> last_;
};

/// Overwrites row `code` of `codebook` and clears that row's Adam moments
/// (`param` is the codebook's index in the optimizer state).
void reseed_code(Tensor& codebook, std::size_t code, std::span<const float> value,
                 OptimizerState& opt, std::size_t param);

/// Fills the codebook with distinct random rows of `latents` (with a small
/// jitter when there are fewer latent rows than codes).
void init_codebook_from(Tensor& codebook, const Tensor& latents, Rng& rng);

struct RvqEncoding {
  TokenGrid grid;
  /// Frobenius norm of the residual before layer 1 (the input) and after
  /// each layer: layers + 1 entries.
  std::vector<double> residual_norms;
  std::vector<float> reconstruction;  // [frames, dim], sum of all layers
  std::vector<float> residual;        // input - reconstruction
};

/// Residual vector quantiser over a fixed list of codebooks, each [K_l, dim].
/// Layer 1 quantises the input; layer j the residual left by layers 1..j-1.
class RvqStack {
 public:
  RvqStack() = default;
  explicit RvqStack(std::vector<Tensor> books);

  std::size_t layers() const noexcept { return books_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t codes(std::size_t layer) const { return books_.at(layer).rows(); }
  const Tensor& book(std::size_t layer) const { return books_.at(layer); }

  /// x: [frames, dim] row-major.
  RvqEncoding encode(std::span<const float> x, std::size_t frames) const;
  /// Sum of the selected entries of layers 1..up_to (1-based, inclusive).
  std::vector<float> decode(const TokenGrid& grid, std::size_t up_to) const;

 private:
  std::vector<Tensor> books_;
  std::size_t dim_ = 0;
};

}  // namespace mgct::codec
