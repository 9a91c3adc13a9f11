// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/t2s/t2s.hpp"

#include <algorithm>
#include <cmath>

#include "mgct/errors.hpp"
#include "mgct/numerics/ops.hpp"

namespace mgct::t2s {

void T2sConfig::validate() const {
  backbone.validate();
  MGCT_EXPECT(text_vocab >= 1 && semantic_codes >= 1, "T2sConfig: empty vocabulary");
  MGCT_EXPECT(prompt_drop >= 0.0 && prompt_drop <= 1.0, "T2sConfig: prompt_drop outside [0, 1]");
  MGCT_EXPECT(prompt_max_fraction >= 0.0 && prompt_max_fraction < 1.0,
              "T2sConfig: prompt_max_fraction outside [0, 1)");
}

PrefixInput build_prefix_input(std::span<const Token> text, std::span<const Token> prompt,
                               std::span<const Token> target, const T2sConfig& cfg) {
  const auto codes = static_cast<Token>(cfg.semantic_codes);
  PrefixInput in;
  in.ids.reserve(text.size() + 1 + prompt.size() + target.size());
  for (Token x : text) {
    MGCT_EXPECT(x >= 0 && static_cast<std::size_t>(x) < cfg.text_vocab,
                "build_prefix_input: text id " + std::to_string(x) + " outside the text vocabulary");
    in.ids.push_back(x);
    in.segments.push_back(Segment::text);
  }
  in.ids.push_back(cfg.sep_id());
  in.segments.push_back(Segment::text);
  for (Token x : prompt) {
    MGCT_EXPECT(x >= 0 && x < codes, "build_prefix_input: prompt id " + std::to_string(x) +
                                         " is not a semantic code");
    in.ids.push_back(x);
    in.segments.push_back(Segment::prompt);
  }
  in.target_begin = in.ids.size();
  for (Token x : target) {
    MGCT_EXPECT((x >= 0 && x < codes) || x == cfg.mask_id(),
                "build_prefix_input: target id " + std::to_string(x) +
                    " is neither a semantic code nor MASK");
    in.ids.push_back(x);
    in.segments.push_back(Segment::target);
  }
  return in;
}

std::vector<std::uint8_t> loss_mask(const PrefixInput& in, const T2sConfig& cfg) {
  std::vector<std::uint8_t> m(in.size(), 0);
  for (std::size_t i = in.target_begin; i < in.size(); ++i) m[i] = in.ids[i] == cfg.mask_id();
  return m;
}

T2sModel::T2sModel(const T2sConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t d = cfg_.backbone.model_dim;
  text_embed_ = ps_.add_normal("embed.text", {cfg_.text_vocab, d}, 1.0f, rng);
  semantic_embed_ = ps_.add_normal("embed.semantic", {cfg_.semantic_codes + 2, d}, 1.0f, rng);
  segment_embed_ = ps_.add_normal("embed.segment", {3, d}, 1.0f, rng);
  backbone_ = nn::Transformer(ps_, "backbone", cfg_.backbone, rng);
  head_ = nn::Linear(ps_, "head", d, cfg_.semantic_codes, rng);
}

Tensor T2sModel::target_logits(std::span<const PrefixInput> batch, std::span<const float> t) const {
  MGCT_EXPECT(!batch.empty() && t.size() == batch.size(),
              "target_logits: need one timestep per input");
  TokenSequence text_ids, sem_ids, seg_ids;
  std::vector<std::size_t> text_rows, sem_rows;
  std::vector<std::size_t> target_rows;
  nn::SequenceLayout layout;
  std::size_t row = 0;
  for (const auto& in : batch) {
    MGCT_EXPECT(in.target_size() >= 1, "target_logits: input has no target rows");
    for (std::size_t i = 0; i < in.size(); ++i, ++row) {
      const bool is_text = in.segments[i] == Segment::text && in.ids[i] != cfg_.sep_id();
      (is_text ? text_ids : sem_ids).push_back(in.ids[i]);
      (is_text ? text_rows : sem_rows).push_back(row);
      seg_ids.push_back(static_cast<Token>(in.segments[i]));
      if (i >= in.target_begin) target_rows.push_back(row);
    }
    layout.push(in.size());
  }
  // Rows were split by table; put them back in sequence order.
  std::vector<std::size_t> order(row);
  for (std::size_t i = 0; i < text_rows.size(); ++i) order[text_rows[i]] = i;
  for (std::size_t i = 0; i < sem_rows.size(); ++i) order[sem_rows[i]] = text_rows.size() + i;
  std::vector<Tensor> parts;
  if (!text_ids.empty()) parts.push_back(ops::embedding(text_embed_, text_ids));
  parts.push_back(ops::embedding(semantic_embed_, sem_ids));
  Tensor x = ops::gather_rows(ops::concat_rows(parts), order);
  x = ops::add(x, ops::embedding(segment_embed_, seg_ids));
  const Tensor h = backbone_(x, t, layout);
  return head_(ops::gather_rows(h, target_rows));
}

T2sBatch make_batch(std::span<const T2sExample> examples, const T2sConfig& cfg, Rng& rng) {
  T2sBatch b;
  for (const auto& ex : examples) {
    const std::size_t len = ex.semantic.size();
    MGCT_EXPECT(len >= 1, "make_batch: empty semantic sequence");
    auto k = static_cast<std::size_t>(rng.uniform() * cfg.prompt_max_fraction *
                                       static_cast<double>(len + 1));
    k = std::min(k, len - 1);
    const std::span<const Token> sem(ex.semantic);
    const double t = rng.uniform_open() * cfg.schedule.horizon;
    const TokenSequence target(sem.begin() + static_cast<std::ptrdiff_t>(k), sem.end());
    const masking::MaskState st = masking::apply_random_mask(target, t, cfg.schedule, rng,
                                                             cfg.mask_id());
    const bool drop = rng.bernoulli(cfg.prompt_drop);
    b.prompts_dropped += drop;
    const std::span<const Token> prompt =
        drop ? std::span<const Token>{} : sem.subspan(0, k);
    b.inputs.push_back(build_prefix_input(ex.text, prompt, st.tokens, cfg));
    b.t.push_back(static_cast<float>(t));
    b.targets.insert(b.targets.end(), target.begin(), target.end());
    b.mask.insert(b.mask.end(), st.mask.begin(), st.mask.end());
  }
  return b;
}

masking::MaskedLoss batch_loss(const T2sModel& model, const T2sBatch& batch) {
  const Tensor logits = model.target_logits(batch.inputs, batch.t);
  return masking::masked_nll_loss(logits, batch.targets, batch.mask);
}

T2sTrainer::T2sTrainer(T2sModel& model, const AdamWConfig& opt) : model_(model), opt_(opt) {}

T2sStepStats T2sTrainer::step(std::span<const T2sExample> examples, Rng& rng) {
  const T2sBatch batch = make_batch(examples, model_.config(), rng);
  const masking::MaskedLoss l = batch_loss(model_, batch);
  T2sStepStats st;
  st.masked = l.masked;
  st.prompts_dropped = batch.prompts_dropped;
  if (l.degenerate) return st;
  st.loss = nn::minimize_step(model_.params(), opt_, l.loss);
  return st;
}

TokenSequence generate(const T2sModel& model, std::span<const Token> text,
                       std::span<const Token> prompt, std::size_t n,
                       const masking::DecodeConfig& cfg, Rng& rng) {
  MGCT_EXPECT(n >= 1, "generate: target length must be >= 1");
  const T2sConfig& mc = model.config();
  const std::size_t vocab = mc.semantic_codes;
  masking::TokenPredictor predict = [&](const masking::MaskState& st, bool want_uncond) {
    NoGradGuard ng;
    std::vector<PrefixInput> inputs{build_prefix_input(text, prompt, st.tokens, mc)};
    std::vector<float> t{static_cast<float>(st.t)};
    if (want_uncond) {
      inputs.push_back(build_prefix_input(text, {}, st.tokens, mc));
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

}  // namespace mgct::t2s
