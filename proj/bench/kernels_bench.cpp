// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels against their OpenMP row-parallel variants.

#include <benchmark/benchmark.h>

#include <vector>

#include "mgct/numerics/kernels.hpp"
#include "mgct/numerics/rng.hpp"

namespace k = mgct::kernels;

namespace {

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  mgct::Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.normal());
  return v;
}

template <auto Gemm>
void gemm(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const k::GemmShape s{n, n, n};
  const auto a = noise(n * n, 1), b = noise(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : st) {
    Gemm(a, b, c, s, false);
    benchmark::DoNotOptimize(c.data());
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * 2 * n * n * n));
}

template <auto Nearest>
void nearest(benchmark::State& st) {
  const k::NearestShape s{static_cast<std::size_t>(st.range(0)),
                          static_cast<std::size_t>(st.range(1)), 8};
  const auto frames = noise(s.frames * s.dim, 3), codes = noise(s.codes * s.dim, 4);
  std::vector<std::int32_t> idx(s.frames);
  std::vector<float> d2(s.frames);
  for (auto _ : st) {
    Nearest(frames, codes, idx, d2, s);
    benchmark::DoNotOptimize(idx.data());
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * s.frames));
}

}  // namespace

BENCHMARK(gemm<k::serial::gemm_nn>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(gemm<k::parallel::gemm_nn>)->Name("gemm_nn/parallel")->Arg(64)->Arg(256)->UseRealTime();
BENCHMARK(gemm<k::serial::gemm_tn>)->Name("gemm_tn/serial")->Arg(64)->Arg(256);
BENCHMARK(gemm<k::parallel::gemm_tn>)->Name("gemm_tn/parallel")->Arg(64)->Arg(256)->UseRealTime();
BENCHMARK(nearest<k::serial::nearest_code>)->Name("nearest_code/serial")->Args({4096, 64})->Args({4096, 1024});
BENCHMARK(nearest<k::parallel::nearest_code>)
    ->Name("nearest_code/parallel")
    ->Args({4096, 64})
    ->Args({4096, 1024})
    ->UseRealTime();

BENCHMARK_MAIN();
