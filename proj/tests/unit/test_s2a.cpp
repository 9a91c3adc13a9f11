// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "mgct/errors.hpp"
#include "mgct/s2a/s2a.hpp"

using namespace mgct;
using namespace mgct::s2a;

namespace {

S2aConfig tiny_config() {
  S2aConfig c;
  c.backbone = {1, 16, 32, 2, 10000.0};
  c.semantic_codes = 10;
  c.layers = 3;
  c.codebook_size = 6;
  return c;
}

// Every semantic code fixes one acoustic column.
struct ColumnMap {
  std::vector<std::vector<Token>> col;

  ColumnMap(const S2aConfig& cfg, Rng& rng) : col(cfg.semantic_codes) {
    for (auto& c : col)
      for (std::size_t l = 0; l < cfg.layers; ++l)
        c.push_back(static_cast<Token>(rng.below(cfg.codebook_size)));
  }

  S2aExample example(std::size_t frames, Rng& rng) const {
    S2aExample e;
    e.acoustic = TokenGrid(col.front().size(), frames);
    for (std::size_t f = 0; f < frames; ++f) {
      const auto s = static_cast<Token>(rng.below(col.size()));
      e.semantic.push_back(s);
      for (std::size_t l = 0; l < e.acoustic.layers; ++l) e.acoustic.at(l, f) = col[s][l];
    }
    return e;
  }
};

S2aInput random_input(const S2aConfig& cfg, std::size_t frames, std::size_t prompt, std::size_t j,
                      Rng& rng) {
  S2aInput in;
  in.layer = j;
  in.prompt_frames = prompt;
  in.acoustic = TokenGrid(cfg.layers, frames);
  for (std::size_t f = 0; f < frames; ++f)
    in.semantic.push_back(static_cast<Token>(rng.below(cfg.semantic_codes)));
  for (auto& a : in.acoustic.codes) a = static_cast<Token>(rng.below(cfg.codebook_size));
  for (std::size_t f = prompt; f < frames; f += 2) in.acoustic.at(j - 1, f) = cfg.mask_id();
  return in;
}

bool same(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("layer distribution") {
  CHECK(layer_probability(1, 1) == 1.0);
  CHECK(layer_probability(1, 3) == doctest::Approx(1.0 / 2.0));
  CHECK(layer_probability(2, 3) == doctest::Approx(1.0 / 3.0));
  CHECK(layer_probability(3, 3) == doctest::Approx(1.0 / 6.0));
  for (std::size_t n = 1; n <= 24; ++n) {
    double total = 0;
    for (std::size_t j = 1; j <= n; ++j) {
      total += layer_probability(j, n);
      if (j > 1) CHECK(layer_probability(j, n) < layer_probability(j - 1, n));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(layer_probability(0, 3), ContractViolation);
  CHECK_THROWS_AS(layer_probability(4, 3), ContractViolation);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_layer(1, rng) == 1);
}

TEST_CASE("sampled layer frequencies stay within three sigma") {
  for (std::size_t n : {4u, 12u}) {
    Rng rng(n);
    const int draws = 100000;
    std::vector<int> count(n + 1, 0);
    for (int i = 0; i < draws; ++i) ++count[sample_layer(n, rng)];
    for (std::size_t j = 1; j <= n; ++j) {
      const double p = layer_probability(j, n);
      const double sigma = std::sqrt(draws * p * (1 - p));
      CHECK(std::abs(count[j] - draws * p) <= 3 * sigma);
    }
  }
}

TEST_CASE("layer step schedules") {
  CHECK(LayerStepSchedule::desk().steps == std::vector<std::size_t>{8, 4, 1, 1});
  const auto paper = LayerStepSchedule::paper(12);
  CHECK(paper.steps.size() == 12);
  CHECK(paper.steps[0] == 40);
  CHECK(paper.steps[1] == 16);
  CHECK(paper.steps[11] == 1);
  CHECK(LayerStepSchedule::fast(4).steps == std::vector<std::size_t>{10, 1, 1, 1});
  CHECK_THROWS_AS(LayerStepSchedule::desk().validate(3), ContractViolation);
  CHECK_THROWS_AS((LayerStepSchedule{{2, 0, 1}}.validate(3)), ContractViolation);
}

TEST_CASE("condition embeddings sum semantic and layers up to j") {
  const S2aConfig cfg = tiny_config();
  const S2aModel model(cfg, 2);
  NoGradGuard ng;
  Rng rng(3);

  S2aInput in = random_input(cfg, 7, 2, 1, rng);
  const Tensor x = model.embed(std::vector<S2aInput>{in});
  REQUIRE(x.shape() == Shape{7, cfg.backbone.model_dim});
  const Tensor sem = model.params().find("embed.semantic");
  const Tensor a0 = model.params().find("embed.acoustic0");
  const std::size_t d = cfg.backbone.model_dim;
  for (std::size_t f = 0; f < 7; ++f)
    for (std::size_t c = 0; c < d; ++c) {
      const float want = sem.data()[static_cast<std::size_t>(in.semantic[f]) * d + c] +
                         a0.data()[static_cast<std::size_t>(in.acoustic.at(0, f)) * d + c];
      REQUIRE(x.data()[f * d + c] == want);
    }

  for (std::size_t j = 1; j <= cfg.layers; ++j) {
    S2aInput base = random_input(cfg, 9, 3, j, rng);
    const Tensor ref = model.embed(std::vector<S2aInput>{base});
    S2aInput finer = base;
    for (std::size_t l = j; l < cfg.layers; ++l)
      for (auto& a : finer.acoustic.layer(l)) a = static_cast<Token>((a + 1) % cfg.codebook_size);
    CHECK(same(ref, model.embed(std::vector<S2aInput>{finer})));
    S2aInput coarser = base;
    coarser.acoustic.at(j - 1, 0) = static_cast<Token>((base.acoustic.at(j - 1, 0) + 1) % 6);
    CHECK_FALSE(same(ref, model.embed(std::vector<S2aInput>{coarser})));
  }
}

TEST_CASE("inputs violating alignment or layer rules are rejected") {
  const S2aConfig cfg = tiny_config();
  const S2aModel model(cfg, 2);
  NoGradGuard ng;
  Rng rng(4);
  auto embed_one = [&](const S2aInput& in) { return model.embed(std::vector<S2aInput>{in}); };

  S2aInput short_grid = random_input(cfg, 6, 1, 2, rng);
  short_grid.semantic.push_back(0);
  CHECK_THROWS_AS(embed_one(short_grid), ContractViolation);

  S2aInput masked_prompt = random_input(cfg, 6, 3, 2, rng);
  masked_prompt.acoustic.at(1, 0) = cfg.mask_id();
  CHECK_THROWS_AS(embed_one(masked_prompt), ContractViolation);

  S2aInput masked_coarse = random_input(cfg, 6, 1, 2, rng);
  masked_coarse.acoustic.at(0, 4) = cfg.mask_id();
  CHECK_THROWS_AS(embed_one(masked_coarse), ContractViolation);

  S2aInput all_prompt = random_input(cfg, 6, 6, 1, rng);
  CHECK_THROWS_AS(embed_one(all_prompt), ContractViolation);

  S2aInput bad_layer = random_input(cfg, 6, 1, 1, rng);
  bad_layer.layer = 4;
  CHECK_THROWS_AS(embed_one(bad_layer), ContractViolation);

  // Finer layers are not read, so MASK there is allowed.
  S2aInput finer_mask = random_input(cfg, 6, 1, 1, rng);
  finer_mask.acoustic.at(2, 0) = cfg.mask_id();
  CHECK_NOTHROW(embed_one(finer_mask));
}

TEST_CASE("training batches: targets, masks, prompt drop and layer frequencies") {
  S2aConfig cfg = tiny_config();
  Rng rng(5);
  const ColumnMap map(cfg, rng);
  std::vector<S2aExample> corpus;
  for (int i = 0; i < 50; ++i) corpus.push_back(map.example(3 + rng.below(10), rng));

  std::vector<int> layer_count(cfg.layers + 1, 0);
  int total = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const S2aBatch b = make_batch(corpus, cfg, rng);
    std::size_t row = 0;
    for (std::size_t i = 0; i < b.inputs.size(); ++i) {
      const S2aInput& in = b.inputs[i];
      const S2aExample& ex = corpus[i];
      REQUIRE(in.acoustic.frames == in.semantic.size());
      ++layer_count[in.layer];
      ++total;
      const std::size_t shift = ex.semantic.size() - in.frames();  // nonzero only after a drop
      for (std::size_t f = in.prompt_frames; f < in.frames(); ++f, ++row) {
        const Token truth = ex.acoustic.at(in.layer - 1, shift + f);
        REQUIRE(b.targets[row] == truth);
        REQUIRE(in.acoustic.at(in.layer - 1, f) == (b.mask[row] ? cfg.mask_id() : truth));
      }
    }
    REQUIRE(row == b.targets.size());
  }
  for (std::size_t j = 1; j <= cfg.layers; ++j) {
    const double p = layer_probability(j, cfg.layers);
    CHECK(std::abs(layer_count[j] - total * p) <= 3 * std::sqrt(total * p * (1 - p)));
  }

  cfg.prompt_drop = 1.0;
  const S2aBatch dropped = make_batch(corpus, cfg, rng);
  CHECK(dropped.prompts_dropped == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(dropped.inputs[i].prompt_frames == 0);
    const std::size_t k = corpus[i].semantic.size() - dropped.inputs[i].frames();
    CHECK(std::equal(dropped.inputs[i].semantic.begin(), dropped.inputs[i].semantic.end(),
                     corpus[i].semantic.begin() + static_cast<std::ptrdiff_t>(k)));
  }
}

TEST_CASE("oracle-perfect logits give zero loss and training learns the column map") {
  S2aConfig cfg = tiny_config();
  cfg.backbone = {1, 32, 64, 2, 10000.0};
  Rng rng(6);
  const ColumnMap map(cfg, rng);
  std::vector<S2aExample> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back(map.example(4 + rng.below(12), rng));

  const S2aBatch b = make_batch(corpus, cfg, rng);
  std::vector<float> logits(b.targets.size() * cfg.codebook_size, -1e4f);
  for (std::size_t i = 0; i < b.targets.size(); ++i)
    logits[i * cfg.codebook_size + static_cast<std::size_t>(b.targets[i])] = 0.0f;
  const auto perfect = masking::masked_nll_loss(
      Tensor::from({b.targets.size(), cfg.codebook_size}, logits), b.targets, b.mask);
  CHECK(perfect.loss.item() == doctest::Approx(0.0).epsilon(1e-6));

  S2aModel model(cfg, 7);
  AdamWConfig opt;
  opt.lr = 3e-3;
  opt.warmup = 50;
  opt.clip_norm = 1.0;
  S2aTrainer trainer(model, opt);
  double last = 0;
  for (int step = 0; step < 300; ++step) {
    std::vector<S2aExample> batch;
    for (int i = 0; i < 16; ++i) batch.push_back(corpus[rng.below(corpus.size())]);
    const double loss = trainer.step(batch, rng).loss;
    if (step >= 280) last += loss / 20;
  }
  CHECK(last < 0.5 * std::log(static_cast<double>(cfg.codebook_size)));
}

TEST_CASE("generation shape, determinism and single-shot layers") {
  const S2aConfig cfg = tiny_config();
  const S2aModel model(cfg, 8);
  Rng rng(9);
  const ColumnMap map(cfg, rng);
  const S2aExample ex = map.example(11, rng);
  TokenGrid prompt(cfg.layers, 4);
  for (std::size_t l = 0; l < cfg.layers; ++l)
    for (std::size_t f = 0; f < 4; ++f) prompt.at(l, f) = ex.acoustic.at(l, f);

  const LayerStepSchedule sched{{3, 2, 1}};
  masking::DecodeConfig dc;
  Rng r1(10), r2(10);
  const TokenGrid g1 = generate(model, ex.semantic, prompt, sched, dc, r1);
  CHECK(g1.layers == cfg.layers);
  CHECK(g1.frames == 7);
  for (Token a : g1.codes) CHECK((a >= 0 && a < static_cast<Token>(cfg.codebook_size)));
  CHECK(g1 == generate(model, ex.semantic, prompt, sched, dc, r2));

  // With one step per layer and temperature 0 the output no longer depends on the RNG.
  dc.temp_start = 0.0;
  Rng r3(1), r4(2);
  const LayerStepSchedule single{{1, 1, 1}};
  CHECK(generate(model, ex.semantic, prompt, single, dc, r3) ==
        generate(model, ex.semantic, prompt, single, dc, r4));

  CHECK_THROWS_AS(generate(model, ex.semantic, prompt, LayerStepSchedule::desk(), dc, r3),
                  ContractViolation);
  CHECK_THROWS_AS(generate(model, TokenSequence(ex.semantic.begin(), ex.semantic.begin() + 4),
                           prompt, sched, dc, r3),
                  ContractViolation);
}

TEST_CASE("a layer never depends on finer layers") {
  const S2aConfig cfg = tiny_config();
  const S2aModel model(cfg, 11);
  Rng rng(12);
  const ColumnMap map(cfg, rng);
  const S2aExample ex = map.example(10, rng);
  const TokenGrid prompt(cfg.layers, 0);
  masking::DecodeConfig dc;
  dc.steps = 4;
  for (std::size_t j = 1; j <= cfg.layers; ++j) {
    TokenGrid a(cfg.layers, 10), b(cfg.layers, 10);
    for (std::size_t l = 0; l < cfg.layers; ++l)
      for (std::size_t f = 0; f < 10; ++f) {
        a.at(l, f) = static_cast<Token>(rng.below(cfg.codebook_size));
        b.at(l, f) = l + 1 < j ? a.at(l, f) : static_cast<Token>(rng.below(cfg.codebook_size));
      }
    Rng r1(13), r2(13);
    CHECK(generate_layer(model, ex.semantic, prompt, a, j, dc, r1) ==
          generate_layer(model, ex.semantic, prompt, b, j, dc, r2));
  }
}
