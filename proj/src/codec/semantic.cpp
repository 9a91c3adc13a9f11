// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/codec/semantic.hpp"

#include <cmath>

#include "mgct/errors.hpp"
#include "mgct/numerics/ops.hpp"

namespace mgct::codec {

void SemanticCodecConfig::validate() const {
  MGCT_EXPECT(feature_dim >= 1 && hidden >= 1 && code_dim >= 1 && codebook_size >= 1,
              "SemanticCodecConfig: sizes must be >= 1");
  MGCT_EXPECT(code_dim < hidden, "SemanticCodecConfig: code_dim must be below hidden");
  MGCT_EXPECT(kernel % 2 == 1, "SemanticCodecConfig: kernel must be odd");
  MGCT_EXPECT(lambda_rec >= 0 && lambda_codebook >= 0 && lambda_commit >= 0,
              "SemanticCodecConfig: loss weights must be nonnegative");
}

VqLossTerms vqvae_loss(const Tensor& s, const Tensor& s_hat, const Tensor& enc,
                       const Tensor& quantized, const VqWeights& w) {
  MGCT_EXPECT(s.shape() == s_hat.shape(), "vqvae_loss: S and S_hat differ in shape");
  MGCT_EXPECT(enc.shape() == quantized.shape() && enc.rows() == s.rows(),
              "vqvae_loss: latent shapes disagree");
  VqLossTerms out;
  out.rec = ops::sum(ops::abs(ops::sub(s, s_hat)));
  out.codebook = ops::sum(ops::square(ops::sub(ops::detach(enc), quantized)));
  out.commit = ops::sum(ops::square(ops::sub(ops::detach(quantized), enc)));
  const float inv = 1.0f / static_cast<float>(s.rows() * s.cols());
  out.total = ops::scale(ops::add(ops::add(ops::scale(out.rec, w.rec),
                                           ops::scale(out.codebook, w.codebook)),
                                  ops::scale(out.commit, w.commit)),
                         inv);
  return out;
}

SemanticCodec::SemanticCodec(const SemanticCodecConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  encoder_ = ConvStack(ps_, "encoder", cfg_.feature_dim, cfg_.hidden, cfg_.hidden, cfg_.blocks,
                       cfg_.kernel, rng);
  down_ = nn::Linear(ps_, "down", cfg_.hidden, cfg_.code_dim, rng);
  codebook_param_ = ps_.size();
  codebook_ = ps_.add_normal("codebook", {cfg_.codebook_size, cfg_.code_dim}, 1.0f, rng);
  up_ = nn::Linear(ps_, "up", cfg_.code_dim, cfg_.hidden, rng);
  decoder_ = ConvStack(ps_, "decoder", cfg_.hidden, cfg_.hidden, cfg_.feature_dim, cfg_.blocks,
                       cfg_.kernel, rng);
}

Tensor SemanticCodec::encode(const Tensor& x, std::span<const std::size_t> offsets) const {
  MGCT_EXPECT(x.rank() == 2 && x.rows() >= 1, "encode: empty feature sequence");
  MGCT_EXPECT(x.cols() == cfg_.feature_dim, "encode: expected " +
                                                std::to_string(cfg_.feature_dim) +
                                                "-dim features, got " + shape_str(x.shape()));
  return down_(encoder_(x, offsets));
}

Quantization SemanticCodec::quantize(const Tensor& latents) const {
  Quantization q;
  q.indices = nearest_codes(latents, codebook_);
  q.quantized = ops::embedding(codebook_, q.indices);
  return q;
}

Tensor SemanticCodec::decode(const Tensor& codes, std::span<const std::size_t> offsets) const {
  MGCT_EXPECT(codes.rank() == 2 && codes.cols() == cfg_.code_dim && codes.rows() >= 1,
              "decode: expected [T, " + std::to_string(cfg_.code_dim) + "] codes");
  return decoder_(up_(codes), offsets);
}

TokenSequence SemanticCodec::tokenize(const FeatureSequence& raw) const {
  NoGradGuard ng;
  const FeatureSequence x = normalizer.fitted() ? normalizer.apply(raw) : raw;
  const std::vector<std::size_t> offs{0, x.frames};
  return quantize(encode(x.tensor(), offs)).indices;
}

FeatureSequence SemanticCodec::reconstruct(std::span<const Token> tokens) const {
  NoGradGuard ng;
  MGCT_EXPECT(!tokens.empty(), "reconstruct: empty token sequence");
  for (Token k : tokens)
    MGCT_EXPECT(k >= 0 && static_cast<std::size_t>(k) < cfg_.codebook_size,
                "reconstruct: token " + std::to_string(k) + " outside the codebook");
  const std::vector<std::size_t> offs{0, tokens.size()};
  const Tensor y = decode(ops::embedding(codebook_, tokens), offs);
  FeatureSequence out{tokens.size(), cfg_.feature_dim,
                      std::vector<float>(y.data().begin(), y.data().end())};
  return normalizer.fitted() ? normalizer.invert(out) : out;
}

Tensor pack_features(std::span<const FeatureSequence> batch, std::vector<std::size_t>& offsets) {
  MGCT_EXPECT(!batch.empty(), "pack_features: empty batch");
  const std::size_t d = batch.front().dim;
  offsets.assign(1, 0);
  std::vector<float> v;
  for (const auto& x : batch) {
    MGCT_EXPECT(x.dim == d && x.frames >= 1, "pack_features: inconsistent utterance");
    v.insert(v.end(), x.values.begin(), x.values.end());
    offsets.push_back(offsets.back() + x.frames);
  }
  return Tensor::from({offsets.back(), d}, std::move(v));
}

SemanticTrainer::SemanticTrainer(SemanticCodec& codec, const AdamWConfig& opt)
    : codec_(codec), opt_(opt), usage_(codec.config().codebook_size) {}

CodecStepStats SemanticTrainer::step(std::span<const FeatureSequence> batch, Rng& rng) {
  const auto& cfg = codec_.config();
  std::vector<std::size_t> offs;
  const Tensor x = pack_features(batch, offs);

  if (opt_.step == 0) {
    NoGradGuard ng;
    init_codebook_from(codec_.codebook(), codec_.encode(x, offs), rng);
  }

  const Tensor enc = codec_.encode(x, offs);
  const Quantization q = codec_.quantize(enc);
  const Tensor s_hat = codec_.decode(ops::straight_through(q.quantized, enc), offs);
  const VqLossTerms loss =
      vqvae_loss(x, s_hat, enc, q.quantized,
                 {cfg.lambda_rec, cfg.lambda_codebook, cfg.lambda_commit});

  nn::minimize_step(codec_.params(), opt_, loss.total);

  CodecStepStats st;
  st.loss = loss.total.item();
  st.rec_l1 = loss.rec.item() / static_cast<double>(x.numel());
  st.codes_used = distinct_codes(q.indices);
  usage_.observe(q.indices, opt_.step);
  for (std::size_t k : usage_.stale(opt_.step, cfg.revive_after)) {
    const std::size_t row = rng.below(enc.rows());
    reseed_code(codec_.codebook(), k, enc.data().subspan(row * cfg.code_dim, cfg.code_dim), opt_,
                codec_.codebook_index());
    usage_.touch(k, opt_.step);
    ++st.revived;
  }
  return st;
}

}  // namespace mgct::codec
