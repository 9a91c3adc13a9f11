// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/pipeline/train.hpp"

#include <cmath>
#include <fstream>

#include "mgct/errors.hpp"
#include "mgct/pipeline/corpus.hpp"

namespace mgct::pipeline {

std::string_view kind_name(ModuleKind k) {
  switch (k) {
    case ModuleKind::semantic_codec: return "semantic_codec";
    case ModuleKind::acoustic_codec: return "acoustic_codec";
    case ModuleKind::t2s: return "t2s";
    case ModuleKind::s2a: return "s2a";
    case ModuleKind::duration: return "duration";
  }
  return "?";
}

ModuleKind parse_kind(std::string_view name) {
  for (ModuleKind k : {ModuleKind::semantic_codec, ModuleKind::acoustic_codec, ModuleKind::t2s,
                       ModuleKind::s2a, ModuleKind::duration})
    if (kind_name(k) == name) return k;
  throw ContractViolation("unknown module kind '" + std::string(name) + "'");
}

std::string checkpoint_name(ModuleKind k) { return std::string(kind_name(k)) + ".ckpt"; }

namespace {

// Config namespace of each module's training keys.
std::string prefix(ModuleKind k) {
  switch (k) {
    case ModuleKind::semantic_codec: return "semantic";
    case ModuleKind::acoustic_codec: return "acoustic";
    default: return std::string(kind_name(k));
  }
}

std::uint64_t init_seed(const Config& c, ModuleKind k) {
  return derive_seed(c.count("seed"), "init " + std::string(kind_name(k)));
}

template <class T>
std::vector<T> draw_batch(const std::vector<T>& data, std::size_t n, Rng& rng) {
  MGCT_EXPECT(!data.empty(), "training corpus is empty");
  std::vector<T> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(data[rng.below(data.size())]);
  return out;
}

void store_usage(Checkpoint& ck, const std::string& name, const codec::CodeUsage& u) {
  std::vector<float> v(u.last_used().begin(), u.last_used().end());
  ck.add(name, {v.size()}, v);
}

void restore_usage(const Checkpoint& ck, const std::string& name, codec::CodeUsage& u) {
  const NamedTensor* t = ck.find(name);
  if (t == nullptr) return;
  MGCT_EXPECT(t->values.size() == u.last_used().size(), "checkpoint usage table has wrong size");
  for (std::size_t i = 0; i < t->values.size(); ++i)
    u.last_used()[i] = static_cast<std::int64_t>(t->values[i]);
}

void store_normalizer(Checkpoint& ck, const codec::Normalizer& n) {
  if (!n.fitted()) return;
  ck.add("normalizer.mean", {n.mean.size()}, n.mean);
  ck.add("normalizer.stddev", {n.stddev.size()}, n.stddev);
}

void restore_normalizer(const Checkpoint& ck, codec::Normalizer& n) {
  const NamedTensor* m = ck.find("normalizer.mean");
  const NamedTensor* s = ck.find("normalizer.stddev");
  if (m == nullptr || s == nullptr) return;
  n.mean = m->values;
  n.stddev = s->values;
}

class Session {
 public:
  virtual ~Session() = default;
  virtual double step(Rng& rng) = 0;
  virtual nn::ParamStore& params() = 0;
  virtual OptimizerState& optimizer() = 0;
  virtual void store_extra(Checkpoint&) {}
  virtual void restore_extra(const Checkpoint&) {}
};

class SemanticSession final : public Session {
 public:
  SemanticSession(const Config& c, const CorpusLayout* corpus)
      : codec_(semantic_codec_config(c), init_seed(c, ModuleKind::semantic_codec)),
        trainer_(codec_, adamw_config(c, "semantic")),
        batch_(c.count("semantic.batch")) {
    if (corpus == nullptr) return;
    const auto raw = codec::read_features(corpus->features(true));
    codec_.normalizer = codec::Normalizer::fit(raw);
    for (const auto& x : raw) data_.push_back(codec_.normalizer.apply(x));
  }
  double step(Rng& rng) override { return trainer_.step(draw_batch(data_, batch_, rng), rng).loss; }
  nn::ParamStore& params() override { return codec_.params(); }
  OptimizerState& optimizer() override { return trainer_.optimizer(); }
  void store_extra(Checkpoint& ck) override {
    store_normalizer(ck, codec_.normalizer);
    store_usage(ck, "usage/codebook", trainer_.usage());
  }
  void restore_extra(const Checkpoint& ck) override {
    restore_normalizer(ck, codec_.normalizer);
    restore_usage(ck, "usage/codebook", trainer_.usage());
  }

 private:
  codec::SemanticCodec codec_;
  codec::SemanticTrainer trainer_;
  std::size_t batch_;
  std::vector<codec::FeatureSequence> data_;
};

class AcousticSession final : public Session {
 public:
  AcousticSession(const Config& c, const CorpusLayout* corpus)
      : codec_(acoustic_codec_config(c), init_seed(c, ModuleKind::acoustic_codec)),
        trainer_(codec_, adamw_config(c, "acoustic")),
        batch_(c.count("acoustic.batch")) {
    if (corpus == nullptr) return;
    const auto raw = codec::read_features(corpus->features(true));
    codec_.normalizer = codec::Normalizer::fit(raw);
    for (const auto& x : raw) data_.push_back(codec_.normalizer.apply(x));
  }
  double step(Rng& rng) override { return trainer_.step(draw_batch(data_, batch_, rng), rng).loss; }
  nn::ParamStore& params() override { return codec_.params(); }
  OptimizerState& optimizer() override { return trainer_.optimizer(); }
  void store_extra(Checkpoint& ck) override {
    store_normalizer(ck, codec_.normalizer);
    auto& usage = trainer_.usage();
    for (std::size_t l = 0; l < usage.size(); ++l)
      store_usage(ck, "usage/layer" + std::to_string(l), usage[l]);
  }
  void restore_extra(const Checkpoint& ck) override {
    restore_normalizer(ck, codec_.normalizer);
    auto& usage = trainer_.usage();
    for (std::size_t l = 0; l < usage.size(); ++l)
      restore_usage(ck, "usage/layer" + std::to_string(l), usage[l]);
  }

 private:
  codec::AcousticCodec codec_;
  codec::AcousticTrainer trainer_;
  std::size_t batch_;
  std::vector<codec::FeatureSequence> data_;
};

class T2sSession final : public Session {
 public:
  T2sSession(const Config& c, const CorpusLayout* corpus)
      : model_(t2s_config(c), init_seed(c, ModuleKind::t2s)),
        trainer_(model_, adamw_config(c, "t2s")),
        batch_(c.count("t2s.batch")) {
    if (corpus != nullptr) data_ = read_t2s_corpus(corpus->t2s(true));
  }
  double step(Rng& rng) override { return trainer_.step(draw_batch(data_, batch_, rng), rng).loss; }
  nn::ParamStore& params() override { return model_.params(); }
  OptimizerState& optimizer() override { return trainer_.optimizer(); }

 private:
  t2s::T2sModel model_;
  t2s::T2sTrainer trainer_;
  std::size_t batch_;
  std::vector<t2s::T2sExample> data_;
};

class S2aSession final : public Session {
 public:
  S2aSession(const Config& c, const CorpusLayout* corpus)
      : model_(s2a_config(c), init_seed(c, ModuleKind::s2a)),
        trainer_(model_, adamw_config(c, "s2a")),
        batch_(c.count("s2a.batch")) {
    if (corpus != nullptr) data_ = read_s2a_corpus(*corpus, true);
  }
  double step(Rng& rng) override { return trainer_.step(draw_batch(data_, batch_, rng), rng).loss; }
  nn::ParamStore& params() override { return model_.params(); }
  OptimizerState& optimizer() override { return trainer_.optimizer(); }

 private:
  s2a::S2aModel model_;
  s2a::S2aTrainer trainer_;
  std::size_t batch_;
  std::vector<s2a::S2aExample> data_;
};

class DurationSession final : public Session {
 public:
  DurationSession(const Config& c, const CorpusLayout* corpus)
      : model_(duration_config(c), init_seed(c, ModuleKind::duration)),
        trainer_(model_, adamw_config(c, "duration")),
        batch_(c.count("duration.batch")) {
    if (corpus != nullptr) data_ = read_duration_corpus(corpus->duration(true));
  }
  double step(Rng& rng) override { return trainer_.step(draw_batch(data_, batch_, rng), rng).loss; }
  nn::ParamStore& params() override { return model_.params(); }
  OptimizerState& optimizer() override { return trainer_.optimizer(); }

 private:
  duration::DurationModel model_;
  duration::DurationTrainer trainer_;
  std::size_t batch_;
  std::vector<duration::DurationSample> data_;
};

std::unique_ptr<Session> make_session(ModuleKind k, const Config& c, const CorpusLayout* corpus) {
  switch (k) {
    case ModuleKind::semantic_codec: return std::make_unique<SemanticSession>(c, corpus);
    case ModuleKind::acoustic_codec: return std::make_unique<AcousticSession>(c, corpus);
    case ModuleKind::t2s: return std::make_unique<T2sSession>(c, corpus);
    case ModuleKind::s2a: return std::make_unique<S2aSession>(c, corpus);
    case ModuleKind::duration: return std::make_unique<DurationSession>(c, corpus);
  }
  throw ContractViolation("unknown module kind");
}

Checkpoint snapshot(ModuleKind k, const Config& c, Session& s, const Rng& rng) {
  Checkpoint ck;
  ck.kind = std::string(kind_name(k));
  ck.config = c.dump();
  ck.rng_seed = rng.seed();
  ck.rng_position = rng.position();
  store_params(ck, s.params());
  store_optimizer(ck, s.optimizer(), s.params());
  s.store_extra(ck);
  return ck;
}

Checkpoint load_kind(const std::filesystem::path& path, ModuleKind k) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != kind_name(k))
    throw FormatError(path.string() + " holds a " + ck.kind + " checkpoint, expected " +
                      std::string(kind_name(k)));
  return ck;
}

}  // namespace

Checkpoint initial_checkpoint(ModuleKind kind, const Config& c) {
  auto s = make_session(kind, c, nullptr);
  return snapshot(kind, c, *s, Rng(derive_seed(c.count("seed"), "train " + std::string(kind_name(kind)))));
}

TrainResult train(ModuleKind kind, const Config& c, const TrainOptions& opt) {
  const CorpusLayout corpus{opt.corpus_dir};
  auto session = make_session(kind, c, &corpus);
  Rng rng(derive_seed(c.count("seed"), "train " + std::string(kind_name(kind))));

  if (opt.resume) {
    const Checkpoint ck = load_kind(*opt.resume, kind);
    restore_params(ck, session->params());
    restore_optimizer(ck, session->optimizer(), session->params());
    session->restore_extra(ck);
    rng = Rng(ck.rng_seed, ck.rng_position);
  }

  std::filesystem::create_directories(opt.out_dir);
  TrainResult res;
  res.checkpoint = opt.out_dir / checkpoint_name(kind);
  res.loss_curve = opt.out_dir / (std::string(kind_name(kind)) + ".loss.tsv");
  std::ofstream curve(res.loss_curve, opt.resume ? std::ios::app : std::ios::trunc);
  if (!curve) throw IoError("cannot write " + res.loss_curve.string());

  const auto total = static_cast<std::int64_t>(c.count(prefix(kind) + ".train_steps"));
  const auto every = static_cast<std::int64_t>(std::max<std::size_t>(1, c.count("train.checkpoint_every")));
  OptimizerState& state = session->optimizer();
  res.first_step = static_cast<std::uint64_t>(state.step);
  bool first = true;
  while (state.step < total) {
    const double loss = session->step(rng);
    if (first) res.first_loss = loss;
    first = false;
    res.last_loss = loss;
    curve << state.step << '\t' << loss << '\n';
    if (state.step % every == 0 || state.step == total) {
      curve.flush();
      save_checkpoint(res.checkpoint, snapshot(kind, c, *session, rng));
      if (opt.log)
        *opt.log << kind_name(kind) << " step " << state.step << "/" << total << " loss " << loss
                 << "\n";
    }
  }
  if (first) save_checkpoint(res.checkpoint, snapshot(kind, c, *session, rng));
  res.final_step = static_cast<std::uint64_t>(state.step);
  return res;
}

Loaded<codec::SemanticCodec> load_semantic_codec(const std::filesystem::path& path) {
  const Checkpoint ck = load_kind(path, ModuleKind::semantic_codec);
  Loaded<codec::SemanticCodec> out{config_from_dump(ck.config), nullptr, ck.step};
  out.model = std::make_unique<codec::SemanticCodec>(semantic_codec_config(out.config), 0);
  restore_params(ck, out.model->params());
  restore_normalizer(ck, out.model->normalizer);
  return out;
}

Loaded<codec::AcousticCodec> load_acoustic_codec(const std::filesystem::path& path) {
  const Checkpoint ck = load_kind(path, ModuleKind::acoustic_codec);
  Loaded<codec::AcousticCodec> out{config_from_dump(ck.config), nullptr, ck.step};
  out.model = std::make_unique<codec::AcousticCodec>(acoustic_codec_config(out.config), 0);
  restore_params(ck, out.model->params());
  restore_normalizer(ck, out.model->normalizer);
  return out;
}

Loaded<t2s::T2sModel> load_t2s(const std::filesystem::path& path) {
  const Checkpoint ck = load_kind(path, ModuleKind::t2s);
  Loaded<t2s::T2sModel> out{config_from_dump(ck.config), nullptr, ck.step};
  out.model = std::make_unique<t2s::T2sModel>(t2s_config(out.config), 0);
  restore_params(ck, out.model->params());
  return out;
}

Loaded<s2a::S2aModel> load_s2a(const std::filesystem::path& path) {
  const Checkpoint ck = load_kind(path, ModuleKind::s2a);
  Loaded<s2a::S2aModel> out{config_from_dump(ck.config), nullptr, ck.step};
  out.model = std::make_unique<s2a::S2aModel>(s2a_config(out.config), 0);
  restore_params(ck, out.model->params());
  return out;
}

Loaded<duration::DurationModel> load_duration(const std::filesystem::path& path) {
  const Checkpoint ck = load_kind(path, ModuleKind::duration);
  Loaded<duration::DurationModel> out{config_from_dump(ck.config), nullptr, ck.step};
  out.model = std::make_unique<duration::DurationModel>(duration_config(out.config), 0);
  restore_params(ck, out.model->params());
  return out;
}

}  // namespace mgct::pipeline
