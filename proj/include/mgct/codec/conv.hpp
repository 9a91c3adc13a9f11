// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "mgct/nn/params.hpp"
#include "mgct/nn/transformer.hpp"

namespace mgct::codec {

/// x + fc2(gelu(fc1(rms_norm(dwconv(x))))), the ConvNeXt layout with an
/// RMS norm and a 4x expansion.
class ConvNextBlock {
 public:
  ConvNextBlock() = default;
  ConvNextBlock(nn::ParamStore& ps, const std::string& name, std::size_t channels,
                std::size_t kernel, std::size_t blocks, Rng& rng);
  Tensor operator()(const Tensor& x, std::span<const std::size_t> offsets) const;

 private:
  Tensor dw_weight_, dw_bias_;
  nn::Linear fc1_, fc2_;
};

/// in -> hidden projection, residual ConvNeXt blocks, hidden -> out
/// projection. Frame count is preserved.
class ConvStack {
 public:
  ConvStack() = default;
  ConvStack(nn::ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
            std::size_t out, std::size_t blocks, std::size_t kernel, Rng& rng);
  Tensor operator()(const Tensor& x, std::span<const std::size_t> offsets) const;

 private:
  nn::Linear in_, out_;
  std::vector<ConvNextBlock> blocks_;
};

}  // namespace mgct::codec
