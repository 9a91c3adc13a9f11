// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

// Dense inner loops used by the autodiff ops and the quantizers.
//
// Every kernel exists twice: `serial::` is the reference used by tests and
// `parallel::` splits the outermost (row) loop across OpenMP threads. Both
// call the same per-row routine, so each output element sees the same
// sequence of floating-point operations and the two paths agree bit for bit.
// The dispatching functions in `kernels::` pick one according to the
// process-wide backend.

namespace mgct::kernels {

enum class Backend { serial, parallel };

void set_backend(Backend b) noexcept;
Backend backend() noexcept;
/// Threads the parallel backend will use (1 when built without OpenMP).
int max_threads() noexcept;

/// C[M,N] = A[M,K] * B[K,N] (+ C when accumulate).
struct GemmShape {
  std::size_t m, k, n;
};

/// Nearest codebook entry per frame under squared L2, ties to the lowest
/// index. frames is [T, c] and codes is [K, c], both row-major.
struct NearestShape {
  std::size_t frames, codes, dim;
};

namespace serial {
void gemm_nn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate);
/// C[M,N] = A[K,M]^T * B[K,N]
void gemm_tn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate);
void nearest_code(std::span<const float> frames, std::span<const float> codes,
                  std::span<std::int32_t> index, std::span<float> dist2, NearestShape s);
}  // namespace serial

namespace parallel {
void gemm_nn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate);
void gemm_tn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate);
void nearest_code(std::span<const float> frames, std::span<const float> codes,
                  std::span<std::int32_t> index, std::span<float> dist2, NearestShape s);
}  // namespace parallel

void gemm_nn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate = false);
void gemm_tn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate = false);
/// C[M,N] = A[M,K] * B[N,K]^T. Transposes B into scratch and runs gemm_nn.
void gemm_nt(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate = false);
void nearest_code(std::span<const float> frames, std::span<const float> codes,
                  std::span<std::int32_t> index, std::span<float> dist2, NearestShape s);

}  // namespace mgct::kernels
