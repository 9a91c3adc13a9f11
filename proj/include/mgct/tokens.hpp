// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mgct {

using Token = std::int32_t;
using TokenSequence = std::vector<Token>;

/// layers x frames matrix of acoustic codes, stored layer-major.
struct TokenGrid {
  std::size_t layers = 0;
  std::size_t frames = 0;
  std::vector<Token> codes;

  TokenGrid() = default;
  TokenGrid(std::size_t l, std::size_t f, Token fill = 0) : layers(l), frames(f), codes(l * f, fill) {}

  Token& at(std::size_t layer, std::size_t frame) { return codes[layer * frames + frame]; }
  Token at(std::size_t layer, std::size_t frame) const { return codes[layer * frames + frame]; }
  std::span<Token> layer(std::size_t l) { return {codes.data() + l * frames, frames}; }
  std::span<const Token> layer(std::size_t l) const { return {codes.data() + l * frames, frames}; }

  bool operator==(const TokenGrid&) const = default;
};

}  // namespace mgct
