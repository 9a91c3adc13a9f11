// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

namespace mgct {

/// Counter-based generator: draw n of a stream is a pure function of
/// (seed, n). Copying an Rng forks an identical stream; `split` derives an
/// independent child stream that does not advance the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t position = 0)
      : seed_(seed), position_(position) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t position() const noexcept { return position_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in (0, 1); safe for log().
  double uniform_open();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p);
  /// Standard Gumbel draw, -log(-log(u)).
  double gumbel();
  /// Index drawn proportional to nonnegative `weights` (need not sum to 1).
  std::size_t categorical(std::span<const double> weights);

  Rng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t position_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace mgct
