// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/s2a/s2a.hpp"

#include <algorithm>

#include "mgct/errors.hpp"
#include "mgct/numerics/ops.hpp"

namespace mgct::s2a {

double layer_probability(std::size_t j, std::size_t layers) {
  MGCT_EXPECT(layers >= 1 && j >= 1 && j <= layers, "layer_probability: j outside 1..N");
  const auto n = static_cast<double>(layers);
  return 2.0 * (n + 1.0 - static_cast<double>(j)) / (n * (n + 1.0));
}

std::size_t sample_layer(std::size_t layers, Rng& rng) {
  MGCT_EXPECT(layers >= 1, "sample_layer: need at least one layer");
  std::vector<double> w(layers);
  for (std::size_t j = 0; j < layers; ++j) w[j] = static_cast<double>(layers - j);
  return rng.categorical(w) + 1;
}

void LayerStepSchedule::validate(std::size_t layers) const {
  MGCT_EXPECT(steps.size() == layers, "LayerStepSchedule: " + std::to_string(steps.size()) +
                                          " entries for " + std::to_string(layers) + " layers");
  for (std::size_t s : steps) MGCT_EXPECT(s >= 1, "LayerStepSchedule: step counts must be >= 1");
}

LayerStepSchedule LayerStepSchedule::paper(std::size_t layers) {
  LayerStepSchedule s{std::vector<std::size_t>(layers, 1)};
  if (layers >= 1) s.steps[0] = 40;
  if (layers >= 2) s.steps[1] = 16;
  return s;
}

LayerStepSchedule LayerStepSchedule::fast(std::size_t layers) {
  LayerStepSchedule s{std::vector<std::size_t>(layers, 1)};
  if (layers >= 1) s.steps[0] = 10;
  return s;
}

void S2aConfig::validate() const {
  backbone.validate();
  MGCT_EXPECT(semantic_codes >= 1 && codebook_size >= 1 && layers >= 1,
              "S2aConfig: sizes must be >= 1");
  MGCT_EXPECT(prompt_drop >= 0.0 && prompt_drop <= 1.0, "S2aConfig: prompt_drop outside [0, 1]");
  MGCT_EXPECT(prompt_max_fraction >= 0.0 && prompt_max_fraction < 1.0,
              "S2aConfig: prompt_max_fraction outside [0, 1)");
}

S2aModel::S2aModel(const S2aConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t d = cfg_.backbone.model_dim;
  semantic_embed_ = ps_.add_normal("embed.semantic", {cfg_.semantic_codes, d}, 1.0f, rng);
  for (std::size_t l = 0; l < cfg_.layers; ++l)
    acoustic_embed_.push_back(ps_.add_normal("embed.acoustic" + std::to_string(l),
                                             {cfg_.codebook_size + 1, d}, 1.0f, rng));
  backbone_ = nn::Transformer(ps_, "backbone", cfg_.backbone, rng);
  for (std::size_t l = 0; l < cfg_.layers; ++l)
    heads_.emplace_back(ps_, "head" + std::to_string(l), d, cfg_.codebook_size, rng);
}

void S2aModel::check(const S2aInput& in) const {
  MGCT_EXPECT(in.layer >= 1 && in.layer <= cfg_.layers,
              "S2aInput: layer " + std::to_string(in.layer) + " outside 1.." +
                  std::to_string(cfg_.layers));
  MGCT_EXPECT(in.acoustic.layers == cfg_.layers, "S2aInput: grid has " +
                                                     std::to_string(in.acoustic.layers) +
                                                     " layers, model expects " +
                                                     std::to_string(cfg_.layers));
  MGCT_EXPECT(in.acoustic.frames == in.semantic.size(),
              "S2aInput: " + std::to_string(in.semantic.size()) + " semantic frames vs " +
                  std::to_string(in.acoustic.frames) + " acoustic frames");
  MGCT_EXPECT(in.prompt_frames < in.semantic.size(), "S2aInput: no target frames");
  for (Token s : in.semantic)
    MGCT_EXPECT(s >= 0 && static_cast<std::size_t>(s) < cfg_.semantic_codes,
                "S2aInput: semantic id " + std::to_string(s) + " out of range");
  const auto codes = static_cast<Token>(cfg_.codebook_size);
  for (std::size_t l = 0; l < in.layer; ++l)
    for (std::size_t f = 0; f < in.frames(); ++f) {
      const Token a = in.acoustic.at(l, f);
      const bool may_mask = l + 1 == in.layer && f >= in.prompt_frames;
      MGCT_EXPECT((a >= 0 && a < codes) || (may_mask && a == cfg_.mask_id()),
                  "S2aInput: acoustic id " + std::to_string(a) + " invalid at layer " +
                      std::to_string(l + 1) + " frame " + std::to_string(f));
    }
}

Tensor S2aModel::embed(std::span<const S2aInput> batch) const {
  MGCT_EXPECT(!batch.empty(), "S2aModel::embed: empty batch");
  TokenSequence sem;
  for (const auto& in : batch) {
    check(in);
    sem.insert(sem.end(), in.semantic.begin(), in.semantic.end());
  }
  Tensor x = ops::embedding(semantic_embed_, sem);
  const Tensor zero = Tensor::zeros({1, cfg_.backbone.model_dim});
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    TokenSequence ids;
    std::vector<std::size_t> pick;  // 0 selects the zero row
    for (const auto& in : batch)
      for (std::size_t f = 0; f < in.frames(); ++f) {
        if (l < in.layer) {
          ids.push_back(in.acoustic.at(l, f));
          pick.push_back(ids.size());
        } else {
          pick.push_back(0);
        }
      }
    if (ids.empty()) continue;
    const Tensor rows = ops::concat_rows({zero, ops::embedding(acoustic_embed_[l], ids)});
    x = ops::add(x, ops::gather_rows(rows, pick));
  }
  return x;
}

Tensor S2aModel::target_logits(std::span<const S2aInput> batch, std::span<const float> t) const {
  MGCT_EXPECT(t.size() == batch.size(), "S2aModel::target_logits: need one timestep per input");
  const Tensor x = embed(batch);
  nn::SequenceLayout layout;
  for (const auto& in : batch) layout.push(in.frames());
  const Tensor h = backbone_(x, t, layout);
  std::vector<Tensor> parts;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::vector<std::size_t> rows(batch[b].target_frames());
    for (std::size_t i = 0; i < rows.size(); ++i)
      rows[i] = layout.offsets[b] + batch[b].prompt_frames + i;
    parts.push_back(heads_[batch[b].layer - 1](ops::gather_rows(h, rows)));
  }
  return parts.size() == 1 ? parts.front() : ops::concat_rows(parts);
}

namespace {

TokenGrid slice_frames(const TokenGrid& g, std::size_t begin) {
  TokenGrid out(g.layers, g.frames - begin);
  for (std::size_t l = 0; l < g.layers; ++l)
    std::copy(g.layer(l).begin() + static_cast<std::ptrdiff_t>(begin), g.layer(l).end(),
              out.layer(l).begin());
  return out;
}

TokenGrid join_frames(const TokenGrid& a, const TokenGrid& b) {
  TokenGrid out(a.layers, a.frames + b.frames);
  for (std::size_t l = 0; l < a.layers; ++l) {
    std::copy(a.layer(l).begin(), a.layer(l).end(), out.layer(l).begin());
    std::copy(b.layer(l).begin(), b.layer(l).end(),
              out.layer(l).begin() + static_cast<std::ptrdiff_t>(a.frames));
  }
  return out;
}

}  // namespace

S2aBatch make_batch(std::span<const S2aExample> examples, const S2aConfig& cfg, Rng& rng) {
  S2aBatch b;
  for (const auto& ex : examples) {
    const std::size_t len = ex.semantic.size();
    MGCT_EXPECT(len >= 1 && ex.acoustic.frames == len && ex.acoustic.layers == cfg.layers,
                "make_batch: semantic and acoustic frames disagree");
    auto k = static_cast<std::size_t>(rng.uniform() * cfg.prompt_max_fraction *
                                      static_cast<double>(len + 1));
    k = std::min(k, len - 1);
    const std::size_t j = sample_layer(cfg.layers, rng);
    const double t = rng.uniform_open() * cfg.schedule.horizon;
    const auto layer = ex.acoustic.layer(j - 1);
    const TokenSequence target(layer.begin() + static_cast<std::ptrdiff_t>(k), layer.end());
    const masking::MaskState st =
        masking::apply_random_mask(target, t, cfg.schedule, rng, cfg.mask_id());
    const bool drop = rng.bernoulli(cfg.prompt_drop);
    b.prompts_dropped += drop;

    S2aInput in;
    in.layer = j;
    in.prompt_frames = k;
    in.semantic = ex.semantic;
    in.acoustic = ex.acoustic;
    std::copy(st.tokens.begin(), st.tokens.end(),
              in.acoustic.layer(j - 1).begin() + static_cast<std::ptrdiff_t>(k));
    if (drop) {
      in.semantic.erase(in.semantic.begin(), in.semantic.begin() + static_cast<std::ptrdiff_t>(k));
      in.acoustic = slice_frames(in.acoustic, k);
      in.prompt_frames = 0;
    }
    b.inputs.push_back(std::move(in));
    b.t.push_back(static_cast<float>(t));
    b.targets.insert(b.targets.end(), target.begin(), target.end());
    b.mask.insert(b.mask.end(), st.mask.begin(), st.mask.end());
  }
  return b;
}

masking::MaskedLoss batch_loss(const S2aModel& model, const S2aBatch& batch) {
  return masking::masked_nll_loss(model.target_logits(batch.inputs, batch.t), batch.targets,
                                  batch.mask);
}

S2aTrainer::S2aTrainer(S2aModel& model, const AdamWConfig& opt) : model_(model), opt_(opt) {}

S2aStepStats S2aTrainer::step(std::span<const S2aExample> examples, Rng& rng) {
  const S2aBatch batch = make_batch(examples, model_.config(), rng);
  const masking::MaskedLoss l = batch_loss(model_, batch);
  S2aStepStats st;
  st.masked = l.masked;
  st.prompts_dropped = batch.prompts_dropped;
  if (l.degenerate) return st;
  st.loss = nn::minimize_step(model_.params(), opt_, l.loss);
  return st;
}

TokenSequence generate_layer(const S2aModel& model, std::span<const Token> semantic,
                             const TokenGrid& prompt, const TokenGrid& target, std::size_t j,
                             masking::DecodeConfig cfg, Rng& rng) {
  const S2aConfig& mc = model.config();
  MGCT_EXPECT(j >= 1 && j <= mc.layers, "generate_layer: layer outside 1..N");
  MGCT_EXPECT(prompt.layers == mc.layers && target.layers == mc.layers,
              "generate_layer: grid layer count differs from the model");
  MGCT_EXPECT(target.frames >= 1, "generate_layer: no target frames");
  MGCT_EXPECT(prompt.frames + target.frames == semantic.size(),
              "generate_layer: |S| = " + std::to_string(semantic.size()) +
                  " but prompt + target frames = " +
                  std::to_string(prompt.frames + target.frames));
  const std::size_t n = target.frames;
  const std::size_t vocab = mc.codebook_size;
  const TokenSequence sem(semantic.begin(), semantic.end());
  const TokenSequence sem_target(semantic.begin() + static_cast<std::ptrdiff_t>(prompt.frames),
                                 semantic.end());

  masking::TokenPredictor predict = [&](const masking::MaskState& st, bool want_uncond) {
    NoGradGuard ng;
    TokenGrid current = target;
    std::copy(st.tokens.begin(), st.tokens.end(), current.layer(j - 1).begin());
    // Finer layers are never read; clear them so stale values cannot leak.
    for (std::size_t l = j; l < mc.layers; ++l) std::ranges::fill(current.layer(l), 0);
    std::vector<S2aInput> inputs{{sem, join_frames(prompt, current), prompt.frames, j}};
    std::vector<float> t{static_cast<float>(st.t)};
    if (want_uncond) {
      inputs.push_back({sem_target, current, 0, j});
      t.push_back(static_cast<float>(st.t));
    }
    const Tensor logits = model.target_logits(inputs, t);
    const auto d = logits.data();
    masking::GuidedLogits g;
    g.cond.assign(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(n * vocab));
    if (want_uncond) g.uncond.assign(d.begin() + static_cast<std::ptrdiff_t>(n * vocab), d.end());
    return g;
  };
  return masking::decode_iterative(predict, n, vocab, mc.mask_id(), cfg, rng);
}

TokenGrid generate(const S2aModel& model, std::span<const Token> semantic, const TokenGrid& prompt,
                   const LayerStepSchedule& schedule, const masking::DecodeConfig& cfg, Rng& rng) {
  const S2aConfig& mc = model.config();
  schedule.validate(mc.layers);
  MGCT_EXPECT(prompt.frames < semantic.size(), "s2a generate: prompt covers every frame");
  TokenGrid out(mc.layers, semantic.size() - prompt.frames);
  for (std::size_t j = 1; j <= mc.layers; ++j) {
    masking::DecodeConfig layer_cfg = cfg;
    layer_cfg.steps = schedule.steps[j - 1];
    const TokenSequence codes = generate_layer(model, semantic, prompt, out, j, layer_cfg, rng);
    std::ranges::copy(codes, out.layer(j - 1).begin());
  }
  return out;
}

}  // namespace mgct::s2a
