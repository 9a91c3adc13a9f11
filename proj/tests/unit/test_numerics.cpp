// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "mgct/errors.hpp"
#include "mgct/numerics/adamw.hpp"
#include "mgct/numerics/kernels.hpp"
#include "mgct/numerics/ops.hpp"
#include "mgct/numerics/rng.hpp"
#include "mgct/numerics/tensor.hpp"

using namespace mgct;
using mgct::testing::gradcheck;
using mgct::testing::project;
using mgct::testing::random_tensor;

TEST_CASE("grad_of on linear and quadratic sums") {
  Tensor p = Tensor::from({3}, {1, 2, 3}, true);
  auto g = grad_of(ops::sum(p), std::vector{p});
  CHECK(g[0] == std::vector<float>{1, 1, 1});
  g = grad_of(ops::sum(ops::square(p)), std::vector{p});
  CHECK(g[0] == std::vector<float>{2, 4, 6});
}

TEST_CASE("grad_of gives zeros to untouched params and rejects non-scalars") {
  Tensor p = Tensor::from({2}, {1, 2}, true);
  Tensor q = Tensor::from({2}, {5, 6}, true);
  auto g = grad_of(ops::sum(p), std::vector{p, q});
  CHECK(g[1] == std::vector<float>{0, 0});
  CHECK_THROWS_AS(grad_of(ops::square(p), std::vector{p}), ContractViolation);
}

TEST_CASE("grad_of does not accumulate across calls") {
  Tensor p = Tensor::from({2}, {1, 2}, true);
  grad_of(ops::sum(p), std::vector{p});
  auto g = grad_of(ops::sum(p), std::vector{p});
  CHECK(g[0] == std::vector<float>{1, 1});
}

TEST_CASE("non-finite backward names the op") {
  Tensor x = Tensor::from({1}, {1e30f}, true);
  Tensor z = Tensor::from({1}, {1e-30f}, true);
  Tensor loss = ops::scale(ops::sum(ops::mul(x, z)), 1e10f);
  REQUIRE(std::isfinite(loss.item()));
  try {
    grad_of(loss, std::vector{x, z});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("'mul'") != std::string::npos);
  }
}

TEST_CASE("no-grad mode records nothing") {
  Tensor p = Tensor::from({2}, {1, 2}, true);
  NoGradGuard ng;
  Tensor y = ops::square(p);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("rng is a pure function of (seed, position)") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42, 5);
  Rng d(42);
  for (int i = 0; i < 5; ++i) d.next_u64();
  CHECK(c.next_u64() == d.next_u64());
  // Splitting does not advance the parent and children differ.
  Rng parent(7);
  const auto before = parent.position();
  Rng s1 = parent.split(1), s2 = parent.split(2), s1b = parent.split(1);
  CHECK(parent.position() == before);
  CHECK(s1.next_u64() == s1b.next_u64());
  CHECK(s1.next_u64() != s2.next_u64());
}

TEST_CASE("rng distributions have the right moments") {
  Rng r(3);
  const int n = 200000;
  double s = 0, s2 = 0, u = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
    u += r.uniform();
  }
  CHECK(std::fabs(s / n) < 0.01);
  CHECK(std::fabs(s2 / n - 1.0) < 0.02);
  CHECK(std::fabs(u / n - 0.5) < 0.005);
  std::vector<double> w{1, 0, 3};
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 40000; ++i) counts[r.categorical(w)]++;
  CHECK(counts[1] == 0);
  CHECK(std::fabs(counts[2] / 40000.0 - 0.75) < 0.015);
}

TEST_CASE("lr_schedule") {
  CHECK(lr_schedule(1000, 1e-3, 1000) == doctest::Approx(1e-3));
  CHECK(lr_schedule(500, 1e-3, 1000) == doctest::Approx(5e-4));
  CHECK(lr_schedule(4000, 1e-3, 1000) == doctest::Approx(5e-4));
  CHECK_THROWS_AS(lr_schedule(0, 1e-3, 1000), ContractViolation);
  // Continuous at the peak and strictly decreasing afterwards.
  CHECK(lr_schedule(999, 1.0, 1000) == doctest::Approx(lr_schedule(1001, 1.0, 1000)).epsilon(2e-3));
  double prev = lr_schedule(1000, 1.0, 1000);
  for (std::int64_t s = 1001; s < 3000; ++s) {
    const double cur = lr_schedule(s, 1.0, 1000);
    REQUIRE(cur < prev);
    prev = cur;
  }
}

TEST_CASE("adamw with zero gradient and no decay is a no-op") {
  Tensor p = Tensor::from({3}, {1, -2, 3}, true);
  OptimizerState st(AdamWConfig{.lr = 0.1, .warmup = 1, .weight_decay = 0.0});
  std::vector<Tensor> ps{p};
  adamw_step(st, ps, Gradients{{0, 0, 0}});
  CHECK(std::vector<float>(p.data().begin(), p.data().end()) == std::vector<float>{1, -2, 3});
  CHECK(st.step == 1);
}

TEST_CASE("adamw descends") {
  Tensor x = Tensor::from({1}, {1.0f}, true);
  OptimizerState st(AdamWConfig{.lr = 0.1, .warmup = 1});
  std::vector<Tensor> ps{x};
  adamw_step(st, ps, grad_of(ops::sum(ops::square(x)), ps));
  CHECK(x.item() < 1.0f);
  CHECK(x.item() > 0.0f);

  // f(a,b) = (a-1)^2 + 3(b+2)^2 with minimum 0 at (1,-2).
  Tensor v = Tensor::from({2}, {-2.0f, 2.0f}, true);
  std::vector<Tensor> vs{v};
  OptimizerState st2(AdamWConfig{.lr = 0.3, .warmup = 10, .weight_decay = 0.0});
  const Tensor target = Tensor::from({2}, {1.0f, -2.0f});
  const Tensor w = Tensor::from({2}, {1.0f, 3.0f});
  auto f = [&] { return ops::sum(ops::mul(w, ops::square(ops::sub(v, target)))); };
  for (int i = 0; i < 200; ++i) adamw_step(st2, vs, grad_of(f(), vs));
  CHECK(f().item() < 1e-4f);
}

TEST_CASE("adamw rejects mismatched shapes") {
  Tensor p = Tensor::from({2}, {1, 2}, true);
  OptimizerState st;
  std::vector<Tensor> ps{p};
  CHECK_THROWS_AS(adamw_step(st, ps, Gradients{{1, 2, 3}}), ContractViolation);
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
  Rng rng(11);
  for (auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1}, {7, 13, 5}, {64, 64, 256}, {300, 64, 64}}) {
    auto a = random_tensor({m, k}, rng, 1.0f, false);
    auto b = random_tensor({k, n}, rng, 1.0f, false);
    auto at = random_tensor({k, m}, rng, 1.0f, false);
    std::vector<float> c1(m * n), c2(m * n), c3(m * n), c4(m * n);
    kernels::serial::gemm_nn(a.data(), b.data(), c1, {m, k, n}, false);
    kernels::parallel::gemm_nn(a.data(), b.data(), c2, {m, k, n}, false);
    CHECK(c1 == c2);
    kernels::serial::gemm_tn(at.data(), b.data(), c3, {m, k, n}, false);
    kernels::parallel::gemm_tn(at.data(), b.data(), c4, {m, k, n}, false);
    CHECK(c3 == c4);
    // And both match a plain triple loop.
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double ref = 0.0;
        for (std::size_t p = 0; p < k; ++p) ref += static_cast<double>(a.at(i * k + p)) * b.at(p * n + j);
        worst = std::max(worst, std::fabs(ref - c1[i * n + j]));
      }
    CHECK(worst < 1e-3);
  }
  const std::size_t t = 500, kc = 64, dim = 8;
  auto frames = random_tensor({t, dim}, rng, 1.0f, false);
  auto codes = random_tensor({kc, dim}, rng, 1.0f, false);
  std::vector<std::int32_t> i1(t), i2(t);
  std::vector<float> d1(t), d2(t);
  kernels::serial::nearest_code(frames.data(), codes.data(), i1, d1, {t, kc, dim});
  kernels::parallel::nearest_code(frames.data(), codes.data(), i2, d2, {t, kc, dim});
  CHECK(i1 == i2);
  CHECK(d1 == d2);
}

TEST_CASE("backend switch does not change training arithmetic") {
  Rng rng(5);
  auto x = random_tensor({40, 32}, rng);
  auto w = random_tensor({32, 48}, rng);
  auto run = [&] {
    auto g = grad_of(project(ops::linear(x, w)), std::vector{x, w});
    return g;
  };
  kernels::set_backend(kernels::Backend::serial);
  auto gs = run();
  kernels::set_backend(kernels::Backend::parallel);
  auto gp = run();
  CHECK(gs == gp);
}

TEST_CASE("finite-difference gradient checks per op") {
  Rng rng(2024);
  const double tol = 1e-2;
  auto x = random_tensor({5, 8}, rng);
  auto y = random_tensor({5, 8}, rng);
  auto w = random_tensor({8, 6}, rng, 0.5f);
  auto b = random_tensor({6}, rng);
  auto row = random_tensor({8}, rng);

  CHECK(gradcheck([&] { return project(ops::linear(x, w, b)); }, {x, w, b}).worst_rel < tol);
  CHECK(gradcheck([&] { return project(ops::mul(ops::add(x, y), ops::sub(x, y))); }, {x, y}).worst_rel < tol);
  CHECK(gradcheck([&] { return project(ops::add_row(x, row)); }, {x, row}).worst_rel < tol);
  CHECK(gradcheck([&] { return project(ops::silu(x)); }, {x}).worst_rel < tol);
  CHECK(gradcheck([&] { return project(ops::gelu(x)); }, {x}).worst_rel < tol);
  CHECK(gradcheck([&] { return project(ops::exp(ops::scale(x, 0.3f))); }, {x}).worst_rel < tol);
  CHECK(gradcheck([&] { return project(ops::rms_norm(x)); }, {x}).worst_rel < tol);
  CHECK(gradcheck([&] { return ops::mean(ops::abs(ops::add_scalar(x, 0.05f))); }, {x}).worst_rel < tol);

  const std::vector<std::size_t> offs{0, 2, 5};
  auto tb = random_tensor({2, 8}, rng);
  CHECK(gradcheck([&] { return project(ops::expand_rows(tb, offs)); }, {tb}).worst_rel < tol);

  auto table = random_tensor({7, 4}, rng);
  const std::vector<std::int32_t> ids{3, 0, 3, 6};
  CHECK(gradcheck([&] { return project(ops::embedding(table, ids)); }, {table}).worst_rel < tol);

  const std::vector<std::size_t> pick{4, 0, 4};
  CHECK(gradcheck([&] {
          return project(ops::concat_rows({ops::slice_rows(x, 1, 3), ops::gather_rows(y, pick)}));
        }, {x, y}).worst_rel < tol);

  const std::vector<float> pos{0, 1, 2, 7, 3};
  CHECK(gradcheck([&] { return project(ops::rope(x, pos, 2, 10000.0)); }, {x}).worst_rel < tol);

  auto q = random_tensor({5, 8}, rng), k = random_tensor({5, 8}, rng), v = random_tensor({5, 8}, rng);
  CHECK(gradcheck([&] { return project(ops::attention(q, k, v, 2, offs)); }, {q, k, v}).worst_rel < tol);

  auto logits = random_tensor({4, 6}, rng);
  const std::vector<std::int32_t> tgt{1, 5, 0, 2};
  const std::vector<float> wts{1, 0, 1, 1};
  CHECK(gradcheck([&] { return ops::weighted_nll(logits, tgt, wts, 3.0f); }, {logits}).worst_rel < tol);

  auto cw = random_tensor({3, 8}, rng, 0.5f);
  auto cb = random_tensor({8}, rng);
  CHECK(gradcheck([&] { return project(ops::depthwise_conv1d(x, cw, cb, offs)); }, {x, cw, cb}).worst_rel < tol);
  CHECK(gradcheck([&] { return project(ops::avg_pool_rows(x, 2)); }, {x}).worst_rel < tol);
}

TEST_CASE("straight-through routes the gradient unchanged") {
  Rng rng(1);
  auto route = random_tensor({3, 4}, rng);
  auto value = random_tensor({3, 4}, rng);
  Tensor st = ops::straight_through(value, route);
  CHECK(std::vector<float>(st.data().begin(), st.data().end()) ==
        std::vector<float>(value.data().begin(), value.data().end()));
  auto g = grad_of(project(st), std::vector{route, value});
  auto direct = grad_of(project(route), std::vector{route});
  CHECK(g[0] == direct[0]);
  CHECK(g[1] == std::vector<float>(12, 0.0f));
}

TEST_CASE("weighted_nll ignores zero-weight rows entirely") {
  auto logits = Tensor::from({2, 3}, {0, 0, 0, NAN, NAN, NAN}, true);
  const std::vector<std::int32_t> tgt{1, 2};
  const std::vector<float> w{1, 0};
  Tensor l = ops::weighted_nll(logits, tgt, w, 1.0f);
  CHECK(l.item() == doctest::Approx(std::log(3.0)));
}

TEST_CASE("same seed, same ops, identical tensors") {
  auto run = [] {
    Rng rng(77);
    auto x = random_tensor({6, 8}, rng);
    auto w = random_tensor({8, 8}, rng);
    auto y = ops::attention(x, ops::linear(x, w), x, 2, std::vector<std::size_t>{0, 6});
    auto g = grad_of(project(y), std::vector{x, w});
    return std::make_pair(std::vector<float>(y.data().begin(), y.data().end()), g);
  };
  CHECK(run() == run());
}
