// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/codec/vq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mgct/errors.hpp"
#include "mgct/numerics/kernels.hpp"

namespace mgct::codec {

TokenSequence nearest_codes(const Tensor& latents, const Tensor& codebook,
                            std::vector<float>* dist2) {
  MGCT_EXPECT(latents.rank() == 2 && codebook.rank() == 2 && latents.cols() == codebook.cols(),
              "nearest_codes: latents " + shape_str(latents.shape()) + " vs codebook " +
                  shape_str(codebook.shape()));
  MGCT_EXPECT(codebook.rows() >= 1, "nearest_codes: empty codebook");
  TokenSequence idx(latents.rows());
  if (dist2) dist2->assign(latents.rows(), 0.0f);
  kernels::nearest_code(latents.data(), codebook.data(), idx,
                        dist2 ? std::span<float>(*dist2) : std::span<float>{},
                        {latents.rows(), codebook.rows(), codebook.cols()});
  return idx;
}

std::size_t distinct_codes(std::span<const Token> idx) {
  return std::set<Token>(idx.begin(), idx.end()).size();
}

void CodeUsage::observe(std::span<const Token> idx, std::int64_t step) {
  for (Token k : idx) last_.at(static_cast<std::size_t>(k)) = step;
}

std::vector<std::size_t> CodeUsage::stale(std::int64_t step, std::int64_t after) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < last_.size(); ++k)
    if (step - last_[k] >= after) out.push_back(k);
  return out;
}

void reseed_code(Tensor& codebook, std::size_t code, std::span<const float> value,
                 OptimizerState& opt, std::size_t param) {
  const std::size_t c = codebook.cols();
  MGCT_EXPECT(value.size() == c && code < codebook.rows(), "reseed_code: bad row");
  auto data = codebook.mutable_data();
  std::copy(value.begin(), value.end(), data.begin() + static_cast<std::ptrdiff_t>(code * c));
  if (param < opt.m.size() && !opt.m[param].empty()) {
    std::fill_n(opt.m[param].begin() + static_cast<std::ptrdiff_t>(code * c), c, 0.0f);
    std::fill_n(opt.v[param].begin() + static_cast<std::ptrdiff_t>(code * c), c, 0.0f);
  }
}

void init_codebook_from(Tensor& codebook, const Tensor& latents, Rng& rng) {
  const std::size_t k = codebook.rows(), c = codebook.cols(), n = latents.rows();
  MGCT_EXPECT(latents.cols() == c && n >= 1, "init_codebook_from: shape mismatch");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  double scale = 0.0;
  for (float v : latents.data()) scale += static_cast<double>(v) * v;
  scale = std::sqrt(scale / static_cast<double>(latents.numel()));
  auto dst = codebook.mutable_data();
  for (std::size_t r = 0; r < k; ++r) {
    const float* src = latents.data().data() + order[r % n] * c;
    const bool repeat = r >= n;
    for (std::size_t j = 0; j < c; ++j)
      dst[r * c + j] = src[j] + (repeat ? static_cast<float>(rng.normal() * 0.01 * scale) : 0.0f);
  }
}

RvqStack::RvqStack(std::vector<Tensor> books) : books_(std::move(books)) {
  MGCT_EXPECT(!books_.empty(), "RvqStack: need at least one layer");
  dim_ = books_.front().cols();
  for (const auto& b : books_)
    MGCT_EXPECT(b.rank() == 2 && b.cols() == dim_ && b.rows() >= 1,
                "RvqStack: every layer must be [K, " + std::to_string(dim_) + "]");
}

RvqEncoding RvqStack::encode(std::span<const float> x, std::size_t frames) const {
  MGCT_EXPECT(x.size() == frames * dim_, "rvq_encode: input is not [frames, dim]");
  for (float v : x)
    if (!std::isfinite(v)) throw NumericError("rvq_encode: non-finite input");
  RvqEncoding out;
  out.grid = TokenGrid(layers(), frames);
  out.residual.assign(x.begin(), x.end());
  out.reconstruction.assign(x.size(), 0.0f);
  auto norm = [](std::span<const float> v) {
    double s = 0;
    for (float a : v) s += static_cast<double>(a) * a;
    return std::sqrt(s);
  };
  out.residual_norms.push_back(norm(out.residual));
  TokenSequence idx(frames);
  for (std::size_t l = 0; l < layers(); ++l) {
    const Tensor& b = books_[l];
    kernels::nearest_code(out.residual, b.data(), idx, {}, {frames, b.rows(), dim_});
    for (std::size_t t = 0; t < frames; ++t) {
      out.grid.at(l, t) = idx[t];
      const float* e = b.data().data() + static_cast<std::size_t>(idx[t]) * dim_;
      for (std::size_t j = 0; j < dim_; ++j) {
        out.residual[t * dim_ + j] -= e[j];
        out.reconstruction[t * dim_ + j] += e[j];
      }
    }
    out.residual_norms.push_back(norm(out.residual));
  }
  return out;
}

std::vector<float> RvqStack::decode(const TokenGrid& grid, std::size_t up_to) const {
  MGCT_EXPECT(up_to >= 1 && up_to <= layers(),
              "rvq_decode: layer " + std::to_string(up_to) + " outside 1.." +
                  std::to_string(layers()));
  MGCT_EXPECT(grid.layers >= up_to && grid.codes.size() == grid.layers * grid.frames,
              "rvq_decode: grid has too few layers");
  std::vector<float> out(grid.frames * dim_, 0.0f);
  for (std::size_t l = 0; l < up_to; ++l) {
    const Tensor& b = books_[l];
    for (std::size_t t = 0; t < grid.frames; ++t) {
      const Token k = grid.at(l, t);
      MGCT_EXPECT(k >= 0 && static_cast<std::size_t>(k) < b.rows(),
                  "rvq_decode: code " + std::to_string(k) + " out of range in layer " +
                      std::to_string(l + 1));
      const float* e = b.data().data() + static_cast<std::size_t>(k) * dim_;
      for (std::size_t j = 0; j < dim_; ++j) out[t * dim_ + j] += e[j];
    }
  }
  return out;
}

}  // namespace mgct::codec
