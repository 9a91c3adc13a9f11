// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/codec/conv.hpp"

#include <cmath>

#include "mgct/errors.hpp"
#include "mgct/numerics/ops.hpp"

namespace mgct::codec {

ConvNextBlock::ConvNextBlock(nn::ParamStore& ps, const std::string& name, std::size_t channels,
                             std::size_t kernel, std::size_t blocks, Rng& rng)
    : fc1_(ps, name + ".fc1", channels, 4 * channels, rng),
      fc2_(ps, name + ".fc2", 4 * channels, channels, rng, true,
           1.0f / std::sqrt(static_cast<float>(2 * blocks))) {
  MGCT_EXPECT(kernel % 2 == 1, "ConvNextBlock: kernel size must be odd");
  dw_weight_ = ps.add_normal(name + ".dw.weight", {kernel, channels},
                             1.0f / std::sqrt(static_cast<float>(kernel)), rng);
  dw_bias_ = ps.add_zeros(name + ".dw.bias", {channels});
}

Tensor ConvNextBlock::operator()(const Tensor& x, std::span<const std::size_t> offsets) const {
  Tensor h = ops::depthwise_conv1d(x, dw_weight_, dw_bias_, offsets);
  h = fc2_(ops::gelu(fc1_(ops::rms_norm(h))));
  return ops::add(x, h);
}

ConvStack::ConvStack(nn::ParamStore& ps, const std::string& name, std::size_t in,
                     std::size_t hidden, std::size_t out, std::size_t blocks, std::size_t kernel,
                     Rng& rng)
    : in_(ps, name + ".in", in, hidden, rng), out_(ps, name + ".out", hidden, out, rng) {
  for (std::size_t b = 0; b < blocks; ++b)
    blocks_.emplace_back(ps, name + ".block" + std::to_string(b), hidden, kernel, blocks, rng);
}

Tensor ConvStack::operator()(const Tensor& x, std::span<const std::size_t> offsets) const {
  Tensor h = in_(x);
  for (const auto& b : blocks_) h = b(h, offsets);
  return out_(h);
}

}  // namespace mgct::codec
