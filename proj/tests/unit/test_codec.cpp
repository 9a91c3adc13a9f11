// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "mgct/codec/acoustic.hpp"
#include "mgct/codec/features.hpp"
#include "mgct/codec/semantic.hpp"
#include "mgct/codec/vq.hpp"
#include "mgct/errors.hpp"
#include "mgct/numerics/ops.hpp"
#include "oracles.hpp"

using namespace mgct;
using namespace mgct::codec;
using mgct::testing::gradcheck;
using mgct::testing::random_tensor;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mgct_test_" + name);
}

SemanticCodecConfig small_semantic() {
  SemanticCodecConfig c;
  c.feature_dim = 6;
  c.hidden = 16;
  c.blocks = 2;
  c.codebook_size = 8;
  c.code_dim = 3;
  return c;
}

}  // namespace

TEST_CASE("normalizer standardises and inverts") {
  MixtureSource src({.dim = 5, .clusters = 3, .spread = 4.0, .noise = 0.5}, 1);
  Rng rng(2);
  std::vector<FeatureSequence> data;
  for (int i = 0; i < 20; ++i) data.push_back(src.sample(rng));
  const Normalizer n = Normalizer::fit(data);
  std::vector<double> sum(5, 0), sq(5, 0);
  std::size_t count = 0;
  for (const auto& x : data) {
    const auto y = n.apply(x);
    for (std::size_t t = 0; t < y.frames; ++t)
      for (std::size_t j = 0; j < 5; ++j) {
        sum[j] += y.values[t * 5 + j];
        sq[j] += y.values[t * 5 + j] * y.values[t * 5 + j];
      }
    count += y.frames;
    const auto back = n.invert(y);
    for (std::size_t i = 0; i < x.values.size(); ++i)
      REQUIRE(back.values[i] == doctest::Approx(x.values[i]).epsilon(1e-5));
  }
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(std::fabs(sum[j] / count) < 1e-4);
    CHECK(sq[j] / count == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("mixture source is reproducible and sticky") {
  MixtureSpec spec;
  spec.stay = 0.9;
  MixtureSource a(spec, 7), b(spec, 7);
  Rng ra(3), rb(3);
  std::vector<int> la, lb;
  const auto xa = a.sample(ra, &la);
  CHECK(xa == b.sample(rb, &lb));
  CHECK(la == lb);
  CHECK(xa.frames >= spec.min_frames);
  CHECK(xa.frames <= spec.max_frames);
  std::size_t switches = 0, total = 0;
  Rng r(4);
  for (int i = 0; i < 200; ++i) {
    a.sample(r, &la);
    for (std::size_t t = 1; t < la.size(); ++t) switches += la[t] != la[t - 1];
    total += la.size() - 1;
  }
  // Switching needs a fresh draw (prob 0.1) that lands on another cluster (7/8).
  CHECK(static_cast<double>(switches) / total == doctest::Approx(0.1 * 7 / 8).epsilon(0.15));
}

TEST_CASE("feature files round-trip and reject bad input") {
  MixtureSource src({}, 5);
  Rng rng(6);
  std::vector<FeatureSequence> xs{src.sample(rng), src.sample(rng), src.sample(rng)};
  const auto p = temp_path("features.bin");
  write_features(p, xs);
  CHECK(read_features(p) == xs);

  std::ofstream(p, std::ios::binary) << "NOPE0000";
  CHECK_THROWS_AS(read_features(p), FormatError);
  write_features(p, xs);
  std::filesystem::resize_file(p, std::filesystem::file_size(p) - 3);
  CHECK_THROWS_AS(read_features(p), FormatError);
  CHECK_THROWS_AS(read_features(temp_path("does_not_exist")), IoError);
  std::filesystem::remove(p);
}

TEST_CASE("semantic encoder preserves frames and is deterministic") {
  SemanticCodec codec(small_semantic(), 1);
  Rng rng(2);
  const auto x = random_tensor({9, 6}, rng, 1.0f, false);
  const std::vector<std::size_t> offs{0, 9};
  const auto a = codec.encode(x, offs), b = codec.encode(x, offs);
  CHECK(a.rows() == 9);
  CHECK(a.cols() == 3);
  CHECK(std::vector<float>(a.data().begin(), a.data().end()) ==
        std::vector<float>(b.data().begin(), b.data().end()));
  const auto y = codec.decode(a, offs);
  CHECK(y.shape() == Shape{9, 6});
  CHECK_THROWS_AS(codec.encode(Tensor::zeros({0, 6}), std::vector<std::size_t>{0, 0}),
                  ContractViolation);
}

TEST_CASE("semantic encoder and decoder pass gradient checks") {
  auto cfg = small_semantic();
  cfg.hidden = 16;
  SemanticCodec codec(cfg, 3);
  Rng rng(4);
  auto x = random_tensor({7, 6}, rng);
  const std::vector<std::size_t> offs{0, 4, 7};
  auto& ps = codec.params().tensors();
  std::vector<Tensor> params(ps.begin(), ps.end());
  params.push_back(x);
  auto r = gradcheck([&] { return testing::project(codec.encode(x, offs), 11); }, params);
  CHECK(r.worst_rel <= 1e-2);
  auto codes = random_tensor({7, 3}, rng);
  params.back() = codes;
  r = gradcheck([&] { return testing::project(codec.decode(codes, offs), 12); }, params);
  CHECK(r.worst_rel <= 1e-2);
}

TEST_CASE("quantize: exact entries, ties, and brute-force agreement") {
  SemanticCodec codec(small_semantic(), 5);
  const Tensor& book = codec.codebook();
  SUBCASE("latent equal to an entry") {
    for (std::size_t k = 0; k < book.rows(); ++k) {
      auto lat = Tensor::from({1, 3}, {book.at(k * 3), book.at(k * 3 + 1), book.at(k * 3 + 2)});
      std::vector<float> d2;
      auto idx = nearest_codes(lat, book, &d2);
      CHECK(idx[0] == static_cast<Token>(k));
      CHECK(d2[0] == 0.0f);
      auto q = codec.quantize(lat);
      for (std::size_t j = 0; j < 3; ++j) CHECK(q.quantized.at(j) == lat.at(j));
    }
  }
  SUBCASE("equidistant tie picks the lowest index") {
    auto tie_book = Tensor::from({3, 2}, {1, 0, -1, 0, 0, 1});
    auto idx = nearest_codes(Tensor::from({1, 2}, {0, 0}), tie_book);
    CHECK(idx[0] == 0);
  }
  SUBCASE("random latents") {
    Rng rng(6);
    auto lat = random_tensor({500, 3}, rng, 1.5f, false);
    auto idx = nearest_codes(lat, book);
    for (std::size_t t = 0; t < 500; ++t)
      REQUIRE(static_cast<std::size_t>(idx[t]) ==
              testing::nearest_scan(lat.data().subspan(t * 3, 3), book.data(), 3));
  }
}

TEST_CASE("vqvae_loss examples and routing") {
  SUBCASE("zero when everything matches") {
    auto s = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto e = Tensor::from({2, 1}, {0.5f, -0.5f});
    auto l = vqvae_loss(s, s, e, e, {});
    CHECK(l.total.item() == 0.0f);
  }
  SUBCASE("hand-built one-frame two-dim case") {
    auto s = Tensor::from({1, 2}, {1.0f, -2.0f});
    auto sh = Tensor::from({1, 2}, {0.5f, 0.0f});
    auto enc = Tensor::from({1, 2}, {0.3f, 0.1f});
    auto e = Tensor::from({1, 2}, {0.0f, 0.5f});
    auto l = vqvae_loss(s, sh, enc, e, {1.0f, 1.0f, 0.25f});
    // rec = 0.5 + 2 = 2.5; sq = 0.09 + 0.16 = 0.25; total = (2.5 + 0.25 + 0.0625) / 2
    CHECK(l.total.item() == doctest::Approx(2.8125 / 2).epsilon(1e-6));
  }
  SUBCASE("codebook term reaches only E, commitment only enc") {
    Rng rng(7);
    auto enc = random_tensor({3, 2}, rng), e = random_tensor({3, 2}, rng);
    auto s = Tensor::zeros({3, 4});
    auto cb = vqvae_loss(s, s, enc, e, {0.0f, 1.0f, 0.0f});
    auto g = grad_of(cb.total, std::vector<Tensor>{enc, e});
    for (float v : g[0]) CHECK(v == 0.0f);
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(g[1][i] == doctest::Approx(2.0 * (e.at(i) - enc.at(i)) / 12).epsilon(1e-5));
    auto cm = vqvae_loss(s, s, enc, e, {0.0f, 0.0f, 1.0f});
    g = grad_of(cm.total, std::vector<Tensor>{enc, e});
    for (float v : g[1]) CHECK(v == 0.0f);
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(g[0][i] == doctest::Approx(2.0 * (enc.at(i) - e.at(i)) / 12).epsilon(1e-5));
  }
  SUBCASE("straight-through copies the decoder-input gradient to the encoder") {
    SemanticCodec codec(small_semantic(), 8);
    Rng rng(9);
    auto x = random_tensor({5, 6}, rng, 1.0f, false);
    const std::vector<std::size_t> offs{0, 5};
    auto enc = codec.encode(x, offs);
    auto q = codec.quantize(enc);
    auto dec_in = ops::straight_through(q.quantized, enc);
    auto l = vqvae_loss(x, codec.decode(dec_in, offs), enc, q.quantized, {1.0f, 0.0f, 0.0f});
    auto g = grad_of(l.total, std::vector<Tensor>{enc, dec_in});
    REQUIRE(g[0].size() == g[1].size());
    bool any_nonzero = false;
    for (std::size_t i = 0; i < g[0].size(); ++i) {
      CHECK(g[0][i] == g[1][i]);
      any_nonzero |= g[0][i] != 0.0f;
    }
    CHECK(any_nonzero);
    for (std::size_t i = 0; i < 5 * 3; ++i) CHECK(dec_in.at(i) == q.quantized.at(i));
  }
}

TEST_CASE("semantic training reduces the loss and revives dead codes") {
  MixtureSpec spec;
  spec.dim = 6;
  spec.clusters = 4;
  spec.min_frames = 16;
  spec.max_frames = 24;
  MixtureSource src(spec, 10);
  Rng data_rng(11);
  std::vector<FeatureSequence> raw;
  for (int i = 0; i < 8; ++i) raw.push_back(src.sample(data_rng));
  auto cfg = small_semantic();
  cfg.revive_after = 5;
  SemanticCodec codec(cfg, 12);
  codec.normalizer = Normalizer::fit(raw);
  std::vector<FeatureSequence> batch;
  for (const auto& x : raw) batch.push_back(codec.normalizer.apply(x));
  AdamWConfig opt;
  opt.lr = 3e-3;
  opt.warmup = 10;
  SemanticTrainer trainer(codec, opt);
  Rng rng(13);
  const double first = trainer.step(batch, rng).loss;
  std::size_t revived = 0;
  double last = first;
  for (int i = 0; i < 200; ++i) {
    const auto st = trainer.step(batch, rng);
    revived += st.revived;
    last = st.loss;
  }
  CHECK(last < 0.5 * first);
  CHECK(revived > 0);
  for (const auto& v : trainer.usage().last_used()) CHECK(trainer.optimizer().step - v < 5);
}

TEST_CASE("rvq: layer-1 exact input leaves zero residual") {
  auto b1 = Tensor::from({2, 2}, {1, 2, -3, 0.5f});
  RvqStack rvq({b1, Tensor::from({2, 2}, {0, 0, 1, 1}), Tensor::from({1, 2}, {0, 0})});
  auto enc = rvq.encode(std::vector<float>{-3, 0.5f, 1, 2}, 2);
  CHECK(enc.grid.at(0, 0) == 1);
  CHECK(enc.grid.at(0, 1) == 0);
  for (std::size_t j = 1; j < enc.residual_norms.size(); ++j) CHECK(enc.residual_norms[j] == 0.0);
  CHECK(rvq.decode(enc.grid, 1) == std::vector<float>{-3, 0.5f, 1, 2});
}

TEST_CASE("rvq: orthogonal codebooks give the rounding residual") {
  // Layer l holds t * e_l for t in {-2..2}; each layer rounds one coordinate.
  std::vector<Tensor> books;
  for (std::size_t l = 0; l < 3; ++l) {
    std::vector<float> v(5 * 4, 0.0f);
    for (int t = -2; t <= 2; ++t) v[static_cast<std::size_t>(t + 2) * 4 + l] = static_cast<float>(t);
    books.push_back(Tensor::from({5, 4}, v));
  }
  RvqStack rvq(books);
  Rng rng(14);
  std::vector<float> x(50 * 4);
  for (auto& v : x) v = static_cast<float>(rng.uniform() * 5.0 - 2.5);
  auto enc = rvq.encode(x, 50);
  for (std::size_t t = 0; t < 50; ++t)
    for (std::size_t j = 0; j < 4; ++j) {
      const float xi = x[t * 4 + j];
      const float expect = j < 3 ? xi - std::clamp(std::round(xi), -2.0f, 2.0f) : xi;
      REQUIRE(enc.residual[t * 4 + j] == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("rvq: nearest-neighbour layers, monotone fidelity, telescoping") {
  Rng rng(15);
  const std::size_t dim = 4, frames = 400;
  auto calib = random_tensor({frames, dim}, rng, 1.0f, false);
  std::vector<Tensor> books;
  Tensor r = calib;
  for (int l = 0; l < 4; ++l) {
    Tensor b = Tensor::zeros({16, dim});
    init_codebook_from(b, r, rng);
    books.push_back(b);
    r = ops::sub(r, ops::embedding(b, nearest_codes(r, b)));
  }
  RvqStack rvq(books);
  auto x = random_tensor({frames, dim}, rng, 1.0f, false);
  auto enc = rvq.encode(x.data(), frames);
  for (std::size_t j = 1; j < enc.residual_norms.size(); ++j)
    CHECK(enc.residual_norms[j] <= enc.residual_norms[j - 1] + 1e-6);
  double prev_err = 1e300;
  std::vector<float> residual(x.data().begin(), x.data().end());
  for (std::size_t j = 1; j <= rvq.layers(); ++j) {
    for (std::size_t t = 0; t < frames; ++t)
      REQUIRE(static_cast<std::size_t>(enc.grid.at(j - 1, t)) ==
              testing::nearest_scan(std::span<const float>(residual).subspan(t * dim, dim),
                                    books[j - 1].data(), dim));
    const auto rec = rvq.decode(enc.grid, j);
    double err = 0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
      residual[i] = x.at(i) - rec[i];
      err += residual[i] * residual[i];
    }
    CHECK(err <= prev_err + 1e-6);
    prev_err = err;
  }
  const auto full = rvq.decode(enc.grid, rvq.layers());
  CHECK(full == enc.reconstruction);
  for (std::size_t i = 0; i < full.size(); ++i)
    REQUIRE(std::fabs(full[i] + enc.residual[i] - x.at(i)) <= 1e-5);
  CHECK_THROWS_AS(rvq.decode(enc.grid, 0), ContractViolation);
  CHECK_THROWS_AS(rvq.decode(enc.grid, 5), ContractViolation);
}

TEST_CASE("acoustic_recon_loss examples") {
  const std::vector<std::size_t> windows{1, 4, 16};
  Rng rng(16);
  auto x = random_tensor({6, 3}, rng, 1.0f, false);
  SUBCASE("identical reconstruction has zero rec term") {
    auto l = acoustic_recon_loss(x, x, {}, {}, windows);
    CHECK(l.rec.item() == 0.0f);
  }
  SUBCASE("rec weight is linear") {
    auto xh = random_tensor({6, 3}, rng, 1.0f, false);
    auto a = acoustic_recon_loss(x, xh, {}, {10.0f, 1.0f, 0.25f}, windows);
    auto b = acoustic_recon_loss(x, xh, {}, {20.0f, 1.0f, 0.25f}, windows);
    CHECK(b.total.item() == doctest::Approx(2.0 * a.total.item()).epsilon(1e-6));
  }
  SUBCASE("two-frame hand case") {
    auto a = Tensor::from({2, 1}, {1.0f, 3.0f});
    auto b = Tensor::from({2, 1}, {2.0f, 1.0f});
    RvqTerms t;
    t.residuals = {Tensor::from({2, 1}, {0.5f, 0.0f})};
    t.entries = {Tensor::from({2, 1}, {0.0f, 1.0f})};
    auto l = acoustic_recon_loss(a, b, t, {10.0f, 1.0f, 0.25f}, std::vector<std::size_t>{1, 2});
    // w=1: (1 + 2) / 2 = 1.5; w=2: |2 - 1.5| = 0.5; rec = 2.0
    // codebook = commit = 0.25 + 1 = 1.25; total = 10*2 + (1.25 + 0.3125) / 2
    CHECK(l.rec.item() == doctest::Approx(2.0));
    CHECK(l.total.item() == doctest::Approx(20.0 + 1.5625 / 2).epsilon(1e-6));
  }
}

TEST_CASE("acoustic codec tokenises, reconstructs and trains") {
  AcousticCodecConfig cfg;
  cfg.feature_dim = 6;
  cfg.code_dim = 4;
  cfg.layers = 3;
  cfg.codebook_size = 8;
  AcousticCodec codec(cfg, 17);
  MixtureSpec spec;
  spec.dim = 6;
  spec.noise = 0.3;
  spec.min_frames = 16;
  spec.max_frames = 20;
  MixtureSource src(spec, 18);
  Rng rng(19);
  std::vector<FeatureSequence> raw;
  for (int i = 0; i < 6; ++i) raw.push_back(src.sample(rng));
  codec.normalizer = Normalizer::fit(raw);
  std::vector<FeatureSequence> batch;
  for (const auto& x : raw) batch.push_back(codec.normalizer.apply(x));

  AdamWConfig opt;
  opt.lr = 3e-3;
  opt.warmup = 10;
  AcousticTrainer trainer(codec, opt);
  const double first = trainer.step(batch, rng).loss;
  double last = first;
  for (int i = 0; i < 60; ++i) last = trainer.step(batch, rng).loss;
  CHECK(last < first);

  const auto grid = codec.tokenize(raw[0]);
  CHECK(grid.layers == 3);
  CHECK(grid.frames == raw[0].frames);
  for (std::size_t j = 1; j <= 3; ++j) {
    CHECK(codec.stack().decode(grid, j).size() == grid.frames * 4);
    CHECK(codec.reconstruct(grid, j).frames == raw[0].frames);
  }
}
