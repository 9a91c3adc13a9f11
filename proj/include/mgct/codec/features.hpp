// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "mgct/numerics/rng.hpp"
#include "mgct/numerics/tensor.hpp"

namespace mgct::codec {

/// T x d continuous frames, row-major.
struct FeatureSequence {
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t t) const { return {values.data() + t * dim, dim}; }
  Tensor tensor() const { return Tensor::from({frames, dim}, values); }
  bool operator==(const FeatureSequence&) const = default;
};

/// Per-dimension standardisation with statistics from a training set.
struct Normalizer {
  std::vector<float> mean;
  std::vector<float> stddev;

  static Normalizer fit(std::span<const FeatureSequence> data);
  FeatureSequence apply(const FeatureSequence& x) const;
  FeatureSequence invert(const FeatureSequence& x) const;
  bool fitted() const noexcept { return !mean.empty(); }
};

/// Frame streams from a Gaussian mixture. Consecutive frames stay in the
/// same component with probability `stay`, which sets the temporal
/// smoothness (mean run length 1 / (1 - stay)).
struct MixtureSpec {
  std::size_t dim = 16;
  std::size_t clusters = 8;
  double spread = 1.0;  // stddev of component means
  double noise = 0.02;  // stddev around a component mean
  double stay = 0.85;
  std::size_t min_frames = 32;
  std::size_t max_frames = 64;

  void validate() const;
};

class MixtureSource {
 public:
  MixtureSource(const MixtureSpec& spec, std::uint64_t seed);

  /// One utterance; `labels`, when given, receives the component of each frame.
  FeatureSequence sample(Rng& rng, std::vector<int>* labels = nullptr) const;
  std::span<const float> mean(std::size_t k) const {
    return {means_.data() + k * spec_.dim, spec_.dim};
  }
  const MixtureSpec& spec() const noexcept { return spec_; }

 private:
  MixtureSpec spec_;
  std::vector<float> means_;
};

/// Binary feature file: one or more records back to back, each "MGFT",
/// u32 version, u64 T, u64 d, then T*d little-endian f32.
void write_features(const std::filesystem::path& path, std::span<const FeatureSequence> xs);
std::vector<FeatureSequence> read_features(const std::filesystem::path& path);

}  // namespace mgct::codec
