// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "mgct/errors.hpp"
#include "mgct/masking/decode.hpp"
#include "mgct/masking/masking.hpp"
#include "oracles.hpp"

using namespace mgct;
using namespace mgct::masking;

namespace {

constexpr Token kMask = 99;

std::vector<float> random_logits(std::size_t n, Rng& rng, float scale = 2.0f) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
  return v;
}

double row_std(std::span<const float> row) {
  double m = 0;
  for (float x : row) m += x;
  m /= static_cast<double>(row.size());
  double v = 0;
  for (float x : row) v += (x - m) * (x - m);
  return std::sqrt(v / static_cast<double>(row.size()));
}

// Predictor that ignores its input and always returns the same logits.
TokenPredictor fixed_predictor(std::vector<float> logits) {
  return [logits = std::move(logits)](const MaskState&, bool want_uncond) {
    GuidedLogits g{logits, {}};
    if (want_uncond) g.uncond = logits;
    return g;
  };
}

DecodeConfig greedy_config(std::size_t steps) {
  DecodeConfig cfg;
  cfg.steps = steps;
  cfg.temp_start = 0.0;
  cfg.temp_end = 0.0;
  cfg.gumbel = false;
  return cfg;
}

}  // namespace

TEST_CASE("sine schedule endpoints and monotonicity") {
  MaskSchedule s;
  CHECK(s.gamma(1.0) == 1.0);
  CHECK(s.gamma(1.0 / 3.0) == doctest::Approx(0.5).epsilon(1e-12));
  double prev = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double g = s.gamma(i / 1000.0);
    CHECK(g > 0.0);
    CHECK(g >= prev);
    prev = g;
  }
}

TEST_CASE("apply_random_mask at t = T masks everything") {
  Rng rng(1);
  TokenSequence x(37);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<Token>(i % 7);
  for (int trial = 0; trial < 20; ++trial) {
    auto st = apply_random_mask(x, 1.0, MaskSchedule{}, rng, kMask);
    CHECK(st.masked_count() == x.size());
    for (Token tok : st.tokens) CHECK(tok == kMask);
  }
}

TEST_CASE("apply_random_mask at t = T/3 masks half the positions") {
  Rng rng(2);
  TokenSequence x(100, 3);
  std::size_t masked = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    auto st = apply_random_mask(x, 1.0 / 3.0, MaskSchedule{}, rng, kMask);
    for (std::size_t i = 0; i < x.size(); ++i) {
      REQUIRE((st.mask[i] == 1) == (st.tokens[i] == kMask));
      if (!st.mask[i]) REQUIRE(st.tokens[i] == x[i]);
    }
    masked += st.masked_count();
  }
  const double frac = static_cast<double>(masked) / 1e6;
  CHECK(std::fabs(frac - 0.5) <= 0.02);
}

TEST_CASE("apply_random_mask rejects t outside (0, T]") {
  Rng rng(3);
  TokenSequence x(4, 1);
  CHECK_THROWS_AS(apply_random_mask(x, 0.0, MaskSchedule{}, rng, kMask), ContractViolation);
  CHECK_THROWS_AS(apply_random_mask(x, 1.5, MaskSchedule{}, rng, kMask), ContractViolation);
}

TEST_CASE("masked_nll_loss examples") {
  SUBCASE("one-hot predictions give zero loss") {
    std::vector<float> l(3 * 4, -1e4f);
    const TokenSequence tgt{2, 0, 3};
    for (std::size_t i = 0; i < 3; ++i) l[i * 4 + static_cast<std::size_t>(tgt[i])] = 1e4f;
    auto r = masked_nll_loss(Tensor::from({3, 4}, l), tgt, std::vector<std::uint8_t>{1, 1, 0});
    CHECK(r.loss.item() == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(r.masked == 2);
  }
  SUBCASE("uniform predictions give log V") {
    auto r = masked_nll_loss(Tensor::zeros({5, 6}), TokenSequence{0, 1, 2, 3, 4},
                             std::vector<std::uint8_t>{1, 0, 1, 1, 0});
    CHECK(r.loss.item() == doctest::Approx(std::log(6.0)).epsilon(1e-6));
  }
  SUBCASE("hand-built three-token case") {
    const std::vector<float> l{1, 2, 0, 0.5f, -1, 3, 2, 2, 2};
    const TokenSequence tgt{1, 2, 0};
    auto r = masked_nll_loss(Tensor::from({3, 3}, l), tgt, std::vector<std::uint8_t>{1, 1, 0});
    const double a = -(2 - std::log(std::exp(1.0) + std::exp(2.0) + 1.0));
    const double b = -(3 - std::log(std::exp(0.5) + std::exp(-1.0) + std::exp(3.0)));
    CHECK(r.loss.item() == doctest::Approx((a + b) / 2).epsilon(1e-6));
  }
  SUBCASE("empty mask is degenerate and zero") {
    auto r = masked_nll_loss(Tensor::zeros({2, 3}), TokenSequence{0, 1},
                             std::vector<std::uint8_t>{0, 0});
    CHECK(r.degenerate);
    CHECK(r.loss.item() == 0.0f);
  }
}

TEST_CASE("masked_nll_loss ignores unmasked logits") {
  Rng rng(4);
  auto base = random_logits(6 * 5, rng);
  auto other = base;
  const std::vector<std::uint8_t> mask{1, 0, 1, 0, 0, 1};
  for (std::size_t i = 0; i < 6; ++i)
    if (!mask[i])
      for (std::size_t v = 0; v < 5; ++v) other[i * 5 + v] = std::nanf("");
  const TokenSequence tgt{0, 1, 2, 3, 4, 0};
  auto a = masked_nll_loss(Tensor::from({6, 5}, base), tgt, mask);
  auto b = masked_nll_loss(Tensor::from({6, 5}, other), tgt, mask);
  CHECK(a.loss.item() == b.loss.item());
}

TEST_CASE("masked_nll_loss gradient matches finite differences") {
  Rng rng(5);
  auto logits = testing::random_tensor({4, 6}, rng);
  const TokenSequence tgt{1, 5, 0, 2};
  const std::vector<std::uint8_t> mask{1, 0, 1, 1};
  auto r = testing::gradcheck([&] { return masked_nll_loss(logits, tgt, mask).loss; }, {logits});
  CHECK(r.worst_rel <= 1e-2);
}

TEST_CASE("remask_count examples") {
  MaskSchedule s;
  CHECK(remask_count(10, s, 5, 1) == 9);
  CHECK(remask_count(10, s, 5, 3) == 5);
  CHECK(remask_count(10, s, 3, 2) == 5);
  CHECK(remask_count(10, s, 5, 5) == 0);
  CHECK(remask_count(1, s, 1, 1) == 0);
  CHECK_THROWS_AS(remask_count(10, s, 5, 0), ContractViolation);
  CHECK_THROWS_AS(remask_count(10, s, 5, 6), ContractViolation);
}

TEST_CASE("remask_count agrees with the long-double oracle") {
  MaskSchedule s;
  for (std::size_t n = 1; n <= 64; ++n)
    for (std::size_t steps = 1; steps <= 64; ++steps)
      for (std::size_t i = 1; i <= steps; ++i)
        REQUIRE(remask_count(n, s, steps, i) == testing::remask_oracle(n, steps, i));
}

TEST_CASE("cfg_combine identities") {
  Rng rng(6);
  const std::size_t vocab = 11, rows = 7;
  for (int trial = 0; trial < 100; ++trial) {
    auto c = random_logits(rows * vocab, rng);
    auto u = random_logits(rows * vocab, rng);
    auto off = cfg_combine(c, u, vocab, 0.0, 0.75);
    CHECK(off == c);
    auto same = cfg_combine(c, c, vocab, 2.5, 0.75);
    CHECK(same == c);
    auto full = cfg_combine(c, u, vocab, 2.5, 1.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::span<const float> a(c.data() + r * vocab, vocab), b(full.data() + r * vocab, vocab);
      CHECK(std::fabs(row_std(a) - row_std(b)) <= 1e-5);
    }
  }
}

TEST_CASE("cfg_combine matches the three-equation chain") {
  const std::vector<float> c{1, 2, 3}, u{0, 2, 5};
  auto out = cfg_combine(c, u, 3, 2.0, 0.5);
  // cfg = c + 2(c - u) = (3, 2, -1); std(c) = sqrt(2/3); std(cfg) = sqrt(26/9)
  const double ratio = std::sqrt(2.0 / 3.0) / std::sqrt(26.0 / 9.0);
  const double cfg[3] = {3, 2, -1};
  for (int j = 0; j < 3; ++j)
    CHECK(out[j] == doctest::Approx(0.5 * cfg[j] * ratio + 0.5 * cfg[j]).epsilon(1e-6));
}

TEST_CASE("cfg_combine skips rescale for constant rows") {
  const std::vector<float> c{2, 2, 2}, u{1, 1, 1};
  auto out = cfg_combine(c, u, 3, 1.0, 0.75);
  for (float x : out) CHECK(x == 3.0f);
}

TEST_CASE("anneal_temperature examples") {
  CHECK(anneal_temperature(1, 50, 1.5, 0.0) == 1.5);
  CHECK(anneal_temperature(50, 50, 1.5, 0.0) == 0.0);
  CHECK(anneal_temperature(2, 3, 1.5, 0.0) == doctest::Approx(0.75));
  CHECK(anneal_temperature(1, 1, 1.5, 0.0) == 1.5);
}

TEST_CASE("sample_token honours top-k and temperature zero") {
  Rng rng(7);
  const std::vector<float> l{0.1f, 3.0f, 2.9f, -4.0f, 3.0f};
  CHECK(sample_token(l, 20, 0.0, rng) == 1);
  for (int i = 0; i < 2000; ++i) {
    const Token t = sample_token(l, 2, 5.0, rng);
    REQUIRE((t == 1 || t == 4));
  }
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 20000; ++i) ++hits[static_cast<std::size_t>(sample_token(l, 99, 1.0, rng))];
  CHECK(hits[3] > 0);
}

TEST_CASE("decode with one step is single-shot") {
  Rng rng(8);
  auto logits = random_logits(6 * 4, rng);
  DecodeTrace trace;
  DecodeConfig cfg;
  cfg.steps = 1;
  auto out = decode_iterative(fixed_predictor(logits), 6, 4, kMask, cfg, rng, &trace);
  REQUIRE(trace.masks.size() == 1);
  for (auto m : trace.masks[0]) CHECK(m == 0);
  CHECK(out == testing::enumerate_mode(logits, 6, 4));
}

TEST_CASE("greedy decode equals the enumeration mode") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(6), vocab = 2 + rng.below(5);
    const std::size_t steps = 1 + rng.below(8);
    auto logits = random_logits(n * vocab, rng);
    auto out = decode_iterative(fixed_predictor(logits), n, vocab, kMask, greedy_config(steps), rng);
    REQUIRE(out == testing::enumerate_mode(logits, n, vocab));
  }
}

TEST_CASE("decode commits monotonically with exact masked counts") {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(40), steps = 1 + rng.below(20), vocab = 8;
    // A predictor whose logits depend on the step, so ranking changes between steps.
    TokenPredictor pred = [&rng, n, vocab](const MaskState& st, bool want_uncond) {
      REQUIRE(st.tokens.size() == n);
      GuidedLogits g{random_logits(n * vocab, rng), {}};
      if (want_uncond) g.uncond = random_logits(n * vocab, rng);
      return g;
    };
    DecodeConfig cfg;
    cfg.steps = steps;
    cfg.gumbel = false;
    DecodeTrace trace;
    auto out = decode_iterative(pred, n, vocab, kMask, cfg, rng, &trace);
    REQUIRE(trace.masks.size() == steps);
    for (std::size_t i = 0; i < steps; ++i) {
      std::size_t count = 0;
      for (auto m : trace.masks[i]) count += m;
      REQUIRE(count == remask_count(n, cfg.schedule, steps, i + 1));
      if (i > 0)
        for (std::size_t p = 0; p < n; ++p)
          if (!trace.masks[i - 1][p]) REQUIRE(!trace.masks[i][p]);
    }
    for (Token t : out) REQUIRE((t >= 0 && t < static_cast<Token>(vocab)));
  }
}

TEST_CASE("committed tokens survive Gumbel noise") {
  Rng rng(11);
  const std::size_t n = 30, vocab = 6;
  TokenPredictor pred = [&rng](const MaskState&, bool want_uncond) {
    GuidedLogits g{random_logits(n * vocab, rng, 0.1f), {}};
    if (want_uncond) g.uncond = g.cond;
    return g;
  };
  DecodeConfig cfg;
  cfg.steps = 10;
  cfg.temp_start = 50.0;
  DecodeTrace trace;
  decode_iterative(pred, n, vocab, kMask, cfg, rng, &trace);
  for (std::size_t i = 1; i < trace.masks.size(); ++i)
    for (std::size_t p = 0; p < n; ++p)
      if (!trace.masks[i - 1][p]) REQUIRE(!trace.masks[i][p]);
}

TEST_CASE("decode is deterministic under a fixed seed") {
  Rng seed_rng(12);
  auto logits = random_logits(20 * 7, seed_rng);
  DecodeConfig cfg;
  cfg.steps = 6;
  Rng a(42), b(42);
  CHECK(decode_iterative(fixed_predictor(logits), 20, 7, kMask, cfg, a) ==
        decode_iterative(fixed_predictor(logits), 20, 7, kMask, cfg, b));
}

TEST_CASE("decode surfaces non-finite logits as numeric errors") {
  Rng rng(13);
  std::vector<float> logits(3 * 4, 0.0f);
  logits[5] = std::nanf("");
  CHECK_THROWS_AS(decode_iterative(fixed_predictor(logits), 3, 4, kMask, greedy_config(2), rng),
                  NumericError);
  CHECK_THROWS_AS(decode_iterative(fixed_predictor(logits), 0, 4, kMask, greedy_config(2), rng),
                  ContractViolation);
}
