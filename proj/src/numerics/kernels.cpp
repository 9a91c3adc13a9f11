// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/numerics/kernels.hpp"

#include <atomic>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mgct::kernels {

namespace {

#ifdef _OPENMP
std::atomic<Backend> g_backend{Backend::parallel};
#else
std::atomic<Backend> g_backend{Backend::serial};
#endif

// Rows below this many multiply-adds stay on one thread; the fork/join cost
// dominates otherwise.
constexpr std::size_t kParallelWork = 1u << 15;

inline void axpy(float alpha, const float* __restrict x, float* __restrict y,
                 std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

inline void gemm_nn_row(const float* a, const float* b, float* c, GemmShape s,
                        std::size_t i, bool accumulate) {
  float* ci = c + i * s.n;
  if (!accumulate) {
    for (std::size_t j = 0; j < s.n; ++j) ci[j] = 0.0f;
  }
  const float* ai = a + i * s.k;
  for (std::size_t p = 0; p < s.k; ++p) {
    const float av = ai[p];
    if (av == 0.0f) continue;
    axpy(av, b + p * s.n, ci, s.n);
  }
}

inline void gemm_tn_row(const float* a, const float* b, float* c, GemmShape s,
                        std::size_t i, bool accumulate) {
  float* ci = c + i * s.n;
  if (!accumulate) {
    for (std::size_t j = 0; j < s.n; ++j) ci[j] = 0.0f;
  }
  for (std::size_t p = 0; p < s.k; ++p) {
    const float av = a[p * s.m + i];
    if (av == 0.0f) continue;
    axpy(av, b + p * s.n, ci, s.n);
  }
}

inline void nearest_row(const float* frames, const float* codes, std::int32_t* index,
                        float* dist2, NearestShape s, std::size_t t) {
  const float* f = frames + t * s.dim;
  double best = std::numeric_limits<double>::infinity();
  std::int32_t best_k = 0;
  for (std::size_t k = 0; k < s.codes; ++k) {
    const float* e = codes + k * s.dim;
    double d = 0.0;
    for (std::size_t q = 0; q < s.dim; ++q) {
      const double diff = static_cast<double>(f[q]) - static_cast<double>(e[q]);
      d += diff * diff;
    }
    if (d < best) {
      best = d;
      best_k = static_cast<std::int32_t>(k);
    }
  }
  index[t] = best_k;
  if (dist2 != nullptr) dist2[t] = static_cast<float>(best);
}

}  // namespace

void set_backend(Backend b) noexcept { g_backend.store(b); }
Backend backend() noexcept { return g_backend.load(); }

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void gemm_nn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate) {
  for (std::size_t i = 0; i < s.m; ++i) gemm_nn_row(a.data(), b.data(), c.data(), s, i, accumulate);
}

void gemm_tn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate) {
  for (std::size_t i = 0; i < s.m; ++i) gemm_tn_row(a.data(), b.data(), c.data(), s, i, accumulate);
}

void nearest_code(std::span<const float> frames, std::span<const float> codes,
                  std::span<std::int32_t> index, std::span<float> dist2, NearestShape s) {
  for (std::size_t t = 0; t < s.frames; ++t)
    nearest_row(frames.data(), codes.data(), index.data(), dist2.empty() ? nullptr : dist2.data(), s, t);
}

}  // namespace serial

namespace parallel {

void gemm_nn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate) {
  const auto rows = static_cast<std::int64_t>(s.m);
#pragma omp parallel for schedule(static) if (s.m * s.k * s.n >= kParallelWork)
  for (std::int64_t i = 0; i < rows; ++i)
    gemm_nn_row(a.data(), b.data(), c.data(), s, static_cast<std::size_t>(i), accumulate);
}

void gemm_tn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate) {
  const auto rows = static_cast<std::int64_t>(s.m);
#pragma omp parallel for schedule(static) if (s.m * s.k * s.n >= kParallelWork)
  for (std::int64_t i = 0; i < rows; ++i)
    gemm_tn_row(a.data(), b.data(), c.data(), s, static_cast<std::size_t>(i), accumulate);
}

void nearest_code(std::span<const float> frames, std::span<const float> codes,
                  std::span<std::int32_t> index, std::span<float> dist2, NearestShape s) {
  const auto rows = static_cast<std::int64_t>(s.frames);
#pragma omp parallel for schedule(static) if (s.frames * s.codes * s.dim >= kParallelWork)
  for (std::int64_t t = 0; t < rows; ++t)
    nearest_row(frames.data(), codes.data(), index.data(), dist2.empty() ? nullptr : dist2.data(), s,
                static_cast<std::size_t>(t));
}

}  // namespace parallel

void gemm_nn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate) {
  if (backend() == Backend::parallel)
    parallel::gemm_nn(a, b, c, s, accumulate);
  else
    serial::gemm_nn(a, b, c, s, accumulate);
}

void gemm_tn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate) {
  if (backend() == Backend::parallel)
    parallel::gemm_tn(a, b, c, s, accumulate);
  else
    serial::gemm_tn(a, b, c, s, accumulate);
}

void gemm_nt(std::span<const float> a, std::span<const float> b, std::span<float> c,
             GemmShape s, bool accumulate) {
  // b is [N, K]; transpose to [K, N].
  std::vector<float> bt(s.k * s.n);
  for (std::size_t j = 0; j < s.n; ++j)
    for (std::size_t p = 0; p < s.k; ++p) bt[p * s.n + j] = b[j * s.k + p];
  gemm_nn(a, bt, c, s, accumulate);
}

void nearest_code(std::span<const float> frames, std::span<const float> codes,
                  std::span<std::int32_t> index, std::span<float> dist2, NearestShape s) {
  if (backend() == Backend::parallel)
    parallel::nearest_code(frames, codes, index, dist2, s);
  else
    serial::nearest_code(frames, codes, index, dist2, s);
}

}  // namespace mgct::kernels
