// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/codec/acoustic.hpp"

#include "mgct/errors.hpp"
#include "mgct/numerics/ops.hpp"

namespace mgct::codec {

void AcousticCodecConfig::validate() const {
  MGCT_EXPECT(feature_dim >= 1 && hidden >= 1 && code_dim >= 1, "AcousticCodecConfig: bad sizes");
  MGCT_EXPECT(layers >= 1 && codebook_size >= 1, "AcousticCodecConfig: need >= 1 layer and code");
  MGCT_EXPECT(kernel % 2 == 1, "AcousticCodecConfig: kernel must be odd");
  MGCT_EXPECT(!windows.empty(), "AcousticCodecConfig: need at least one L1 window");
  for (std::size_t w : windows) MGCT_EXPECT(w >= 1, "AcousticCodecConfig: window must be >= 1");
}

VqLossTerms acoustic_recon_loss(const Tensor& x, const Tensor& x_hat, const RvqTerms& rvq,
                                const VqWeights& w, std::span<const std::size_t> windows) {
  MGCT_EXPECT(x.shape() == x_hat.shape(), "acoustic_recon_loss: x and x_hat differ in shape");
  MGCT_EXPECT(rvq.residuals.size() == rvq.entries.size(),
              "acoustic_recon_loss: residual/entry layer count mismatch");
  MGCT_EXPECT(!windows.empty(), "acoustic_recon_loss: no windows");
  VqLossTerms out;
  for (std::size_t win : windows) {
    const Tensor term = ops::mean(ops::abs(ops::sub(ops::avg_pool_rows(x, win),
                                                    ops::avg_pool_rows(x_hat, win))));
    out.rec = out.rec.defined() ? ops::add(out.rec, term) : term;
  }
  out.codebook = Tensor::scalar(0.0f);
  out.commit = Tensor::scalar(0.0f);
  for (std::size_t j = 0; j < rvq.residuals.size(); ++j) {
    const Tensor& r = rvq.residuals[j];
    const Tensor& e = rvq.entries[j];
    out.codebook = ops::add(out.codebook, ops::sum(ops::square(ops::sub(ops::detach(r), e))));
    out.commit = ops::add(out.commit, ops::sum(ops::square(ops::sub(r, ops::detach(e)))));
  }
  const float inv = 1.0f / static_cast<float>(x.rows() * x.cols());
  out.total = ops::add(
      ops::scale(out.rec, w.rec),
      ops::scale(ops::add(ops::scale(out.codebook, w.codebook), ops::scale(out.commit, w.commit)),
                 inv));
  return out;
}

AcousticCodec::AcousticCodec(const AcousticCodecConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  encoder_ = ConvStack(ps_, "encoder", cfg_.feature_dim, cfg_.hidden, cfg_.code_dim, cfg_.blocks,
                       cfg_.kernel, rng);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    book_params_.push_back(ps_.size());
    // Finer layers model smaller residuals.
    const float scale = 1.0f / static_cast<float>(1u << std::min<std::size_t>(l, 20));
    books_.push_back(ps_.add_normal("rvq.layer" + std::to_string(l), {cfg_.codebook_size,
                                                                      cfg_.code_dim},
                                    scale, rng));
  }
  decoder_ = ConvStack(ps_, "decoder", cfg_.code_dim, cfg_.hidden, cfg_.feature_dim, cfg_.blocks,
                       cfg_.kernel, rng);
}

Tensor AcousticCodec::encode(const Tensor& x, std::span<const std::size_t> offsets) const {
  MGCT_EXPECT(x.rank() == 2 && x.rows() >= 1 && x.cols() == cfg_.feature_dim,
              "encode: expected [T, " + std::to_string(cfg_.feature_dim) + "] features, got " +
                  shape_str(x.shape()));
  return encoder_(x, offsets);
}

RvqQuantization AcousticCodec::quantize(const Tensor& latents) const {
  MGCT_EXPECT(latents.rank() == 2 && latents.cols() == cfg_.code_dim,
              "quantize: latents must be [T, code_dim]");
  const std::size_t t = latents.rows();
  RvqQuantization q;
  q.grid = TokenGrid(cfg_.layers, t);
  Tensor residual = latents;
  Tensor total;
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const TokenSequence idx = nearest_codes(residual, books_[l]);
    std::copy(idx.begin(), idx.end(), q.grid.layer(l).begin());
    const Tensor e = ops::embedding(books_[l], idx);
    q.terms.residuals.push_back(residual);
    q.terms.entries.push_back(e);
    residual = ops::sub(residual, ops::detach(e));
    total = total.defined() ? ops::add(total, ops::detach(e)) : ops::detach(e);
  }
  q.quantized = total;
  return q;
}

Tensor AcousticCodec::decode(const Tensor& codes, std::span<const std::size_t> offsets) const {
  MGCT_EXPECT(codes.rank() == 2 && codes.cols() == cfg_.code_dim && codes.rows() >= 1,
              "decode: expected [T, " + std::to_string(cfg_.code_dim) + "] codes");
  return decoder_(codes, offsets);
}

TokenGrid AcousticCodec::tokenize(const FeatureSequence& raw) const {
  NoGradGuard ng;
  const FeatureSequence x = normalizer.fitted() ? normalizer.apply(raw) : raw;
  const std::vector<std::size_t> offs{0, x.frames};
  const Tensor z = encode(x.tensor(), offs);
  return stack().encode(z.data(), x.frames).grid;
}

FeatureSequence AcousticCodec::reconstruct(const TokenGrid& grid, std::size_t up_to) const {
  NoGradGuard ng;
  const std::vector<float> z = stack().decode(grid, up_to);
  const std::vector<std::size_t> offs{0, grid.frames};
  const Tensor y = decode(Tensor::from({grid.frames, cfg_.code_dim}, z), offs);
  FeatureSequence out{grid.frames, cfg_.feature_dim,
                      std::vector<float>(y.data().begin(), y.data().end())};
  return normalizer.fitted() ? normalizer.invert(out) : out;
}

AcousticTrainer::AcousticTrainer(AcousticCodec& codec, const AdamWConfig& opt)
    : codec_(codec), opt_(opt) {
  for (std::size_t l = 0; l < codec.config().layers; ++l)
    usage_.emplace_back(codec.config().codebook_size);
}

CodecStepStats AcousticTrainer::step(std::span<const FeatureSequence> batch, Rng& rng) {
  const auto& cfg = codec_.config();
  std::vector<std::size_t> offs;
  const Tensor x = pack_features(batch, offs);

  if (opt_.step == 0) {
    // Seed each layer from the residuals the previous layers leave behind.
    NoGradGuard ng;
    Tensor r = codec_.encode(x, offs);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      init_codebook_from(codec_.books()[l], r, rng);
      r = ops::sub(r, ops::embedding(codec_.books()[l], nearest_codes(r, codec_.books()[l])));
    }
  }

  const Tensor z = codec_.encode(x, offs);
  const RvqQuantization q = codec_.quantize(z);
  const Tensor x_hat = codec_.decode(ops::straight_through(q.quantized, z), offs);

  Tensor total;
  double rec = 0.0;
  const VqWeights w{cfg.lambda_rec, cfg.lambda_codebook, cfg.lambda_commit};
  const auto nseq = static_cast<float>(batch.size());
  for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
    RvqTerms terms;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      terms.residuals.push_back(ops::slice_rows(q.terms.residuals[l], offs[s], offs[s + 1]));
      terms.entries.push_back(ops::slice_rows(q.terms.entries[l], offs[s], offs[s + 1]));
    }
    const VqLossTerms l = acoustic_recon_loss(ops::slice_rows(x, offs[s], offs[s + 1]),
                                              ops::slice_rows(x_hat, offs[s], offs[s + 1]), terms,
                                              w, cfg.windows);
    const Tensor part = ops::scale(l.total, 1.0f / nseq);
    total = total.defined() ? ops::add(total, part) : part;
    rec += l.rec.item() / static_cast<double>(batch.size());
  }

  nn::minimize_step(codec_.params(), opt_, total);

  CodecStepStats st;
  st.loss = total.item();
  st.rec_l1 = rec;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto idx = q.grid.layer(l);
    st.codes_used += distinct_codes(idx);
    usage_[l].observe(idx, opt_.step);
    const Tensor& r = q.terms.residuals[l];
    for (std::size_t k : usage_[l].stale(opt_.step, cfg.revive_after)) {
      const std::size_t row = rng.below(r.rows());
      reseed_code(codec_.books()[l], k, r.data().subspan(row * cfg.code_dim, cfg.code_dim), opt_,
                  codec_.book_index(l));
      usage_[l].touch(k, opt_.step);
      ++st.revived;
    }
  }
  return st;
}

}  // namespace mgct::codec
