// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/codec/features.hpp"

#include <cmath>
#include <fstream>

#include "mgct/binary_io.hpp"
#include "mgct/errors.hpp"

namespace mgct::codec {

namespace {
constexpr std::string_view kMagic = "MGFT";
constexpr std::uint32_t kVersion = 1;
}  // namespace

Normalizer Normalizer::fit(std::span<const FeatureSequence> data) {
  MGCT_EXPECT(!data.empty(), "Normalizer::fit: no data");
  const std::size_t d = data.front().dim;
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  std::size_t n = 0;
  for (const auto& x : data) {
    MGCT_EXPECT(x.dim == d, "Normalizer::fit: inconsistent feature dimension");
    for (std::size_t t = 0; t < x.frames; ++t)
      for (std::size_t j = 0; j < d; ++j) {
        const double v = x.values[t * d + j];
        sum[j] += v;
        sq[j] += v * v;
      }
    n += x.frames;
  }
  MGCT_EXPECT(n > 0, "Normalizer::fit: no frames");
  Normalizer out;
  out.mean.resize(d);
  out.stddev.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double m = sum[j] / static_cast<double>(n);
    const double var = std::max(sq[j] / static_cast<double>(n) - m * m, 0.0);
    out.mean[j] = static_cast<float>(m);
    out.stddev[j] = static_cast<float>(std::max(std::sqrt(var), 1e-6));
  }
  return out;
}

FeatureSequence Normalizer::apply(const FeatureSequence& x) const {
  MGCT_EXPECT(x.dim == mean.size(), "Normalizer::apply: dimension mismatch");
  FeatureSequence y = x;
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    const std::size_t j = i % x.dim;
    y.values[i] = (x.values[i] - mean[j]) / stddev[j];
  }
  return y;
}

FeatureSequence Normalizer::invert(const FeatureSequence& x) const {
  MGCT_EXPECT(x.dim == mean.size(), "Normalizer::invert: dimension mismatch");
  FeatureSequence y = x;
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    const std::size_t j = i % x.dim;
    y.values[i] = x.values[i] * stddev[j] + mean[j];
  }
  return y;
}

void MixtureSpec::validate() const {
  MGCT_EXPECT(dim >= 1 && clusters >= 1, "MixtureSpec: dim and clusters must be >= 1");
  MGCT_EXPECT(min_frames >= 1 && min_frames <= max_frames, "MixtureSpec: bad frame range");
  MGCT_EXPECT(stay >= 0.0 && stay < 1.0, "MixtureSpec: stay must lie in [0, 1)");
  MGCT_EXPECT(noise >= 0.0 && spread > 0.0, "MixtureSpec: bad noise/spread");
}

MixtureSource::MixtureSource(const MixtureSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Rng rng(seed);
  means_.resize(spec_.clusters * spec_.dim);
  for (auto& m : means_) m = static_cast<float>(rng.normal() * spec_.spread);
}

FeatureSequence MixtureSource::sample(Rng& rng, std::vector<int>* labels) const {
  const std::size_t len = spec_.min_frames + rng.below(spec_.max_frames - spec_.min_frames + 1);
  FeatureSequence x{len, spec_.dim, std::vector<float>(len * spec_.dim)};
  if (labels) labels->assign(len, 0);
  std::size_t k = rng.below(spec_.clusters);
  for (std::size_t t = 0; t < len; ++t) {
    if (t > 0 && !rng.bernoulli(spec_.stay)) k = rng.below(spec_.clusters);
    if (labels) (*labels)[t] = static_cast<int>(k);
    for (std::size_t j = 0; j < spec_.dim; ++j)
      x.values[t * spec_.dim + j] =
          means_[k * spec_.dim + j] + static_cast<float>(rng.normal() * spec_.noise);
  }
  return x;
}

void write_features(const std::filesystem::path& path, std::span<const FeatureSequence> xs) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& x : xs) {
    MGCT_EXPECT(x.values.size() == x.frames * x.dim, "write_features: inconsistent sequence");
    io::put_bytes(os, kMagic);
    io::put_u32(os, kVersion);
    io::put_u64(os, x.frames);
    io::put_u64(os, x.dim);
    io::put_f32s(os, x.values);
  }
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<FeatureSequence> read_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::vector<FeatureSequence> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    if (io::get_bytes(is, 4, "feature header") != kMagic)
      throw FormatError("'" + path.string() + "' is not a feature file");
    const std::uint32_t version = io::get_u32(is, "feature header");
    if (version != kVersion)
      throw FormatError("feature file version " + std::to_string(version) + ", expected " +
                        std::to_string(kVersion));
    FeatureSequence x;
    x.frames = io::get_u64(is, "feature header");
    x.dim = io::get_u64(is, "feature header");
    if (x.dim == 0 || x.frames > (std::uint64_t{1} << 32) / x.dim)
      throw FormatError("implausible feature shape in '" + path.string() + "'");
    x.values = io::get_f32s(is, x.frames * x.dim, "feature payload");
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace mgct::codec
