// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mgct/numerics/tensor.hpp"

// Differentiable tensor operations. All rank-2 operands are [rows, cols].
// Operations that take `offsets` work on a packed batch: rows
// [offsets[b], offsets[b+1]) belong to sequence b, and nothing mixes rows of
// different sequences.

namespace mgct::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);
/// x[R,C] + row[C] broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& row);

Tensor matmul(const Tensor& a, const Tensor& b);
/// x[M,K] * w[K,N] (+ b[N] when defined).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = {});

Tensor silu(const Tensor& x);
/// tanh approximation.
Tensor gelu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Row-wise x / sqrt(mean(x^2) + eps).
Tensor rms_norm(const Tensor& x, float eps = 1e-6f);

/// [B,C] -> [offsets.back(), C], row b repeated for every row of sequence b.
Tensor expand_rows(const Tensor& x, std::span<const std::size_t> offsets);
/// table[V,C] gathered at ids -> [ids.size(), C].
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
/// Rows of x at `rows`, in order.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
Tensor concat_rows(const std::vector<Tensor>& parts);

/// Rotary position encoding on each head's interleaved (even, odd) pairs.
/// Pair p of a head of width dh rotates by position * theta^(-2p/dh).
Tensor rope(const Tensor& x, std::span<const float> positions, std::size_t heads,
            double theta);

/// Multi-head softmax(QK^T/sqrt(dh))V with full (bidirectional) attention
/// inside each packed sequence.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 std::span<const std::size_t> offsets);

/// Per-row attention probabilities for one sequence and one head, [L*L].
/// Not differentiable; exposed for inspection.
std::vector<float> attention_probs(const Tensor& q, const Tensor& k, std::size_t heads,
                                   std::size_t head);

/// sum_i w_i * (-log softmax(logits_i)[targets_i]) / normalizer.
/// Rows with zero weight are never read.
Tensor weighted_nll(const Tensor& logits, std::span<const std::int32_t> targets,
                    std::span<const float> weights, float normalizer);

/// Copy with gradient flow blocked.
Tensor detach(const Tensor& x);
/// Forward value of `value`, but the incoming gradient is passed unchanged to
/// `route` (and not to `value`). Equivalent to route + detach(value - route).
Tensor straight_through(const Tensor& value, const Tensor& route);

/// Depthwise 1-D convolution along rows with zero "same" padding inside each
/// packed sequence. x[T,C], w[K,C] (K odd), b[C].
Tensor depthwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
                        std::span<const std::size_t> offsets);

/// Means over consecutive non-overlapping windows of `window` rows; the last
/// window may be shorter. [T,C] -> [ceil(T/window), C].
Tensor avg_pool_rows(const Tensor& x, std::size_t window);

}  // namespace mgct::ops
