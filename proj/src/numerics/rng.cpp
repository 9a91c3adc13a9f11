// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/numerics/rng.hpp"

#include <cmath>
#include <numbers>

#include "mgct/errors.hpp"

namespace mgct {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::next_u64() {
  return splitmix64(seed_ + kGolden * position_++);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  MGCT_EXPECT(n > 0, "Rng::below: empty range");
  // Lemire's multiply-shift; the bias is < n / 2^64 and irrelevant here.
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

double Rng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

double Rng::gumbel() { return -std::log(-std::log(uniform_open())); }

std::size_t Rng::categorical(std::span<const double> weights) {
  MGCT_EXPECT(!weights.empty(), "Rng::categorical: no outcomes");
  double total = 0.0;
  for (double w : weights) total += w;
  MGCT_EXPECT(total > 0.0 && std::isfinite(total),
              "Rng::categorical: weights must have a positive finite sum");
  const double target = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream * 0xD1B54A32D192ED03ULL + 1)), 0);
}

}  // namespace mgct
