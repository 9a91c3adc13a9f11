// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "mgct/errors.hpp"
#include "mgct/numerics/ops.hpp"
#include "mgct/t2s/t2s.hpp"

using namespace mgct;
using namespace mgct::t2s;

namespace {

T2sConfig tiny_config() {
  T2sConfig c;
  c.backbone = {1, 16, 32, 2, 10000.0};
  c.text_vocab = 8;
  c.semantic_codes = 12;
  return c;
}

// Each text symbol expands to two fixed codes.
std::vector<T2sExample> expansion_corpus(const T2sConfig& cfg, std::size_t count, Rng& rng) {
  std::vector<Token> perm(cfg.semantic_codes);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<T2sExample> out;
  for (std::size_t i = 0; i < count; ++i) {
    T2sExample ex;
    const std::size_t len = 2 + rng.below(4);
    for (std::size_t j = 0; j < len; ++j) {
      const auto sym = static_cast<Token>(rng.below(cfg.text_vocab));
      ex.text.push_back(sym);
      ex.semantic.push_back(perm[(2 * sym) % cfg.semantic_codes]);
      ex.semantic.push_back(perm[(2 * sym + 1) % cfg.semantic_codes]);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

masking::DecodeConfig quick_decode(std::size_t steps) {
  masking::DecodeConfig d;
  d.steps = steps;
  return d;
}

}  // namespace

TEST_CASE("prefix input layout") {
  const T2sConfig cfg = tiny_config();
  const TokenSequence text{1, 2, 3}, prompt{4, 5}, target{cfg.mask_id(), 7, cfg.mask_id()};
  const PrefixInput in = build_prefix_input(text, prompt, target, cfg);
  CHECK(in.size() == 3 + 1 + 2 + 3);
  CHECK(in.target_begin == 6);
  CHECK(in.target_size() == 3);
  CHECK(in.ids[3] == cfg.sep_id());
  CHECK(in.segments[3] == Segment::text);
  CHECK(in.segments[4] == Segment::prompt);
  CHECK(in.segments[8] == Segment::target);

  const auto m = loss_mask(in, cfg);
  CHECK(m == std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 1, 0, 1});

  const PrefixInput bare = build_prefix_input(text, {}, target, cfg);
  CHECK(bare.size() == 7);
  CHECK(bare.target_begin == 4);
}

TEST_CASE("prefix input rejects ids outside their tables") {
  const T2sConfig cfg = tiny_config();
  const TokenSequence ok{1};
  CHECK_THROWS_AS(build_prefix_input(TokenSequence{8}, ok, ok, cfg), ContractViolation);
  CHECK_THROWS_AS(build_prefix_input(ok, TokenSequence{cfg.mask_id()}, ok, cfg), ContractViolation);
  CHECK_THROWS_AS(build_prefix_input(ok, ok, TokenSequence{cfg.sep_id()}, cfg), ContractViolation);
  CHECK_THROWS_AS(build_prefix_input(ok, ok, TokenSequence{-1}, cfg), ContractViolation);
}

TEST_CASE("target logits shape and batch independence") {
  const T2sConfig cfg = tiny_config();
  const T2sModel model(cfg, 3);
  NoGradGuard ng;
  const TokenSequence text{0, 5}, target{cfg.mask_id(), 2, cfg.mask_id(), 4};
  const PrefixInput uncond = build_prefix_input(text, {}, target, cfg);
  const std::vector<float> t{0.7f, 0.7f};

  const std::vector<PrefixInput> a{build_prefix_input(text, TokenSequence{1, 9, 3}, target, cfg),
                                   uncond};
  const std::vector<PrefixInput> b{build_prefix_input(text, TokenSequence{11}, target, cfg),
                                   uncond};
  const Tensor la = model.target_logits(a, t);
  const Tensor lb = model.target_logits(b, t);
  REQUIRE(la.shape() == Shape{8, cfg.semantic_codes});

  // The unconditional rows never see the prompt of the conditional input.
  const std::size_t half = 4 * cfg.semantic_codes;
  for (std::size_t i = half; i < 2 * half; ++i) REQUIRE(la.data()[i] == lb.data()[i]);
  bool differs = false;
  for (std::size_t i = 0; i < half; ++i) differs |= la.data()[i] != lb.data()[i];
  CHECK(differs);

  const std::vector<PrefixInput> alone{uncond};
  const Tensor lu = model.target_logits(alone, std::vector<float>{0.7f});
  for (std::size_t i = 0; i < half; ++i) CHECK(lu.data()[i] == doctest::Approx(la.data()[half + i]).epsilon(1e-5));
}

TEST_CASE("training batch construction") {
  T2sConfig cfg = tiny_config();
  Rng rng(11);
  const auto corpus = expansion_corpus(cfg, 64, rng);
  const T2sBatch b = make_batch(corpus, cfg, rng);
  REQUIRE(b.inputs.size() == corpus.size());
  std::size_t rows = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const PrefixInput& in = b.inputs[i];
    const std::size_t len = corpus[i].semantic.size();
    CHECK(in.target_size() >= 1);
    CHECK(in.target_size() <= len);
    // At most half of the utterance (rounded as len+1) goes to the prompt.
    CHECK(len - in.target_size() <= (len + 1) / 2);
    for (std::size_t j = in.target_begin; j < in.size(); ++j, ++rows) {
      const Token truth = b.targets[rows];
      CHECK(truth == corpus[i].semantic[len - in.target_size() + (j - in.target_begin)]);
      CHECK((b.mask[rows] ? in.ids[j] == cfg.mask_id() : in.ids[j] == truth));
    }
    CHECK(b.t[i] > 0.0f);
    CHECK(b.t[i] <= 1.0f);
  }
  CHECK(rows == b.targets.size());
}

TEST_CASE("prompt drop of one removes every prompt") {
  T2sConfig cfg = tiny_config();
  cfg.prompt_drop = 1.0;
  Rng rng(12);
  const auto corpus = expansion_corpus(cfg, 40, rng);
  for (int rep = 0; rep < 5; ++rep) {
    const T2sBatch b = make_batch(corpus, cfg, rng);
    CHECK(b.prompts_dropped == corpus.size());
    for (const auto& in : b.inputs)
      for (Segment s : in.segments) REQUIRE(s != Segment::prompt);
  }
  cfg.prompt_drop = 0.0;
  CHECK(make_batch(corpus, cfg, rng).prompts_dropped == 0);
}

TEST_CASE("oracle-perfect logits give zero batch loss") {
  const T2sConfig cfg = tiny_config();
  Rng rng(13);
  const auto corpus = expansion_corpus(cfg, 8, rng);
  const T2sBatch b = make_batch(corpus, cfg, rng);
  std::vector<float> logits(b.targets.size() * cfg.semantic_codes, -1e4f);
  for (std::size_t i = 0; i < b.targets.size(); ++i)
    logits[i * cfg.semantic_codes + static_cast<std::size_t>(b.targets[i])] = 0.0f;
  const auto l = masking::masked_nll_loss(Tensor::from({b.targets.size(), cfg.semantic_codes}, logits),
                                          b.targets, b.mask);
  REQUIRE(!l.degenerate);
  CHECK(l.loss.item() == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("training lowers the loss on the expansion task") {
  T2sConfig cfg = tiny_config();
  cfg.backbone = {2, 32, 64, 2, 10000.0};
  Rng rng(14);
  const auto corpus = expansion_corpus(cfg, 256, rng);
  T2sModel model(cfg, 15);
  AdamWConfig opt;
  opt.lr = 3e-3;
  opt.warmup = 50;
  opt.clip_norm = 1.0;
  T2sTrainer trainer(model, opt);
  double first = 0, last = 0;
  for (int step = 0; step < 500; ++step) {
    std::vector<T2sExample> batch;
    for (int i = 0; i < 16; ++i) batch.push_back(corpus[rng.below(corpus.size())]);
    const double loss = trainer.step(batch, rng).loss;
    if (step < 20) first += loss / 20;
    if (step >= 480) last += loss / 20;
  }
  CHECK(first > 0.8 * std::log(12.0));
  CHECK(last < 0.5 * std::log(12.0));
}

TEST_CASE("generation respects the requested length") {
  const T2sConfig cfg = tiny_config();
  const T2sModel model(cfg, 4);
  const TokenSequence text{1, 2}, prompt{3, 4};
  std::vector<std::size_t> lengths;
  for (std::size_t n = 1; n <= 512; n += 37) lengths.push_back(n);
  lengths.push_back(512);
  for (std::size_t n : lengths) {
    Rng rng(n);
    const TokenSequence out = generate(model, text, prompt, n, quick_decode(3), rng);
    REQUIRE(out.size() == n);
    for (Token x : out) REQUIRE((x >= 0 && x < static_cast<Token>(cfg.semantic_codes)));
  }
}

TEST_CASE("generation is deterministic and validates N") {
  const T2sConfig cfg = tiny_config();
  const T2sModel model(cfg, 5);
  const TokenSequence text{6, 7, 1}, prompt{0};
  Rng r1(77), r2(77);
  CHECK(generate(model, text, prompt, 20, quick_decode(10), r1) ==
        generate(model, text, prompt, 20, quick_decode(10), r2));
  Rng r3(1);
  CHECK_THROWS_AS(generate(model, text, prompt, 0, quick_decode(10), r3), ContractViolation);
  // Empty prompt is a valid condition.
  CHECK(generate(model, text, {}, 5, quick_decode(4), r3).size() == 5);
}
