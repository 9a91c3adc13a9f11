// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/pipeline/eval.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mgct/codec/vq.hpp"
#include "mgct/errors.hpp"
#include "mgct/pipeline/corpus.hpp"

namespace mgct::pipeline {

namespace {

std::string number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_number(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw FormatError("report line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

std::size_t prompt_length(std::size_t len, Rng& rng) { return rng.below(len / 2 + 1); }

Rng utterance_rng(std::uint64_t seed, std::string_view section, std::size_t i) {
  return Rng(derive_seed(seed, section)).split(i);
}

TokenGrid slice_frames(const TokenGrid& g, std::size_t begin, std::size_t end) {
  TokenGrid out(g.layers, end - begin);
  for (std::size_t l = 0; l < g.layers; ++l)
    for (std::size_t f = begin; f < end; ++f) out.at(l, f - begin) = g.at(l, f);
  return out;
}

double rate(std::size_t hits, std::size_t n) { return n == 0 ? 0.0 : static_cast<double>(hits) / n; }

}  // namespace

double EvalReport::at(const std::string& key) const {
  const auto it = metrics.find(key);
  MGCT_EXPECT(it != metrics.end(), "report has no metric '" + key + "'");
  return it->second;
}

bool EvalReport::same_results(const EvalReport& o) const {
  return config_hash == o.config_hash && metrics == o.metrics && sweep == o.sweep;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os << "config_hash=" << r.config_hash << "\n";
  os << "wall_clock=" << number(r.wall_clock) << "\n";
  for (const auto& [k, v] : r.metrics) os << k << "=" << number(v) << "\n";
  os << "[sweep]\n";
  os << "steps token_accuracy exact_match\n";
  for (const auto& row : r.sweep)
    os << row.steps << " " << number(row.token_accuracy) << " " << number(row.exact_match) << "\n";
  return os.str();
}

EvalReport parse_report(std::string_view text) {
  EvalReport r;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t n = 0;
  bool in_table = false, header_seen = false, hash_seen = false;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    if (line == "[sweep]") {
      in_table = true;
      continue;
    }
    if (in_table) {
      if (!header_seen) {
        if (line != "steps token_accuracy exact_match")
          throw FormatError("report line " + std::to_string(n) + ": unexpected sweep header");
        header_seen = true;
        continue;
      }
      std::istringstream row(line);
      std::string a, b, c, extra;
      if (!(row >> a >> b >> c) || (row >> extra))
        throw FormatError("report line " + std::to_string(n) + ": sweep rows have three columns");
      SweepRow s;
      s.steps = static_cast<std::size_t>(parse_number(a, n));
      s.token_accuracy = parse_number(b, n);
      s.exact_match = parse_number(c, n);
      r.sweep.push_back(s);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("report line " + std::to_string(n) + ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string_view value = std::string_view(line).substr(eq + 1);
    if (key == "config_hash") {
      r.config_hash = std::string(value);
      hash_seen = true;
    } else if (key == "wall_clock") {
      r.wall_clock = parse_number(value, n);
    } else if (!r.metrics.emplace(key, parse_number(value, n)).second) {
      throw FormatError("report line " + std::to_string(n) + ": duplicate key " + key);
    }
  }
  if (!hash_seen) throw FormatError("report has no config_hash");
  return r;
}

void write_report(const std::filesystem::path& path, const EvalReport& r) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << format_report(r);
  if (!os.flush()) throw IoError("short write to " + path.string());
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_report(ss.str());
}

T2sScore eval_t2s(const SemanticGenerator& gen, std::span<const t2s::T2sExample> held,
                  std::size_t steps, std::uint64_t seed) {
  std::size_t exact = 0, right = 0, total = 0;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const auto& ex = held[i];
    Rng rng = utterance_rng(seed, "eval t2s", i);
    const std::size_t k = prompt_length(ex.semantic.size(), rng);
    const std::span<const Token> truth = std::span(ex.semantic).subspan(k);
    const TokenSequence out =
        gen(ex.text, std::span(ex.semantic).first(k), truth.size(), steps, rng);
    MGCT_EXPECT(out.size() == truth.size(), "semantic generator returned the wrong length");
    std::size_t hits = 0;
    for (std::size_t p = 0; p < truth.size(); ++p) hits += out[p] == truth[p];
    right += hits;
    total += truth.size();
    exact += hits == truth.size();
  }
  return {rate(right, total), rate(exact, held.size())};
}

S2aScore eval_s2a(const AcousticGenerator& gen, std::span<const s2a::S2aExample> held,
                  std::uint64_t seed) {
  S2aScore s;
  std::vector<std::size_t> right;
  std::size_t frames = 0, exact = 0;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const auto& ex = held[i];
    const std::size_t layers = ex.acoustic.layers;
    if (right.empty()) right.assign(layers, 0);
    MGCT_EXPECT(right.size() == layers, "held-out grids disagree on the layer count");
    Rng rng = utterance_rng(seed, "eval s2a", i);
    const std::size_t k = prompt_length(ex.semantic.size(), rng);
    const TokenGrid out = gen(ex.semantic, slice_frames(ex.acoustic, 0, k), rng);
    const TokenGrid truth = slice_frames(ex.acoustic, k, ex.acoustic.frames);
    MGCT_EXPECT(out.layers == truth.layers && out.frames == truth.frames,
                "acoustic generator returned the wrong shape");
    for (std::size_t l = 0; l < layers; ++l)
      for (std::size_t f = 0; f < truth.frames; ++f) right[l] += out.at(l, f) == truth.at(l, f);
    frames += truth.frames;
    exact += out == truth;
  }
  for (std::size_t hits : right) s.layer_accuracy.push_back(rate(hits, frames));
  s.exact_match = rate(exact, held.size());
  return s;
}

double eval_e2e(const SemanticGenerator& sem, const AcousticGenerator& ac,
                std::span<const t2s::T2sExample> held, std::span<const TokenGrid> truth,
                std::size_t steps, std::uint64_t seed) {
  MGCT_EXPECT(held.size() == truth.size(), "eval_e2e: one truth grid per utterance");
  std::size_t exact = 0;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const auto& ex = held[i];
    const TokenGrid& grid = truth[i];
    MGCT_EXPECT(grid.frames == ex.semantic.size(), "eval_e2e: truth grid does not match |S|");
    Rng rng = utterance_rng(seed, "eval e2e", i);
    const std::size_t k = prompt_length(ex.semantic.size(), rng);
    const std::span<const Token> prompt = std::span(ex.semantic).first(k);
    TokenSequence full(prompt.begin(), prompt.end());
    const TokenSequence gen = sem(ex.text, prompt, ex.semantic.size() - k, steps, rng);
    full.insert(full.end(), gen.begin(), gen.end());
    exact += ac(full, slice_frames(grid, 0, k), rng) == slice_frames(grid, k, grid.frames);
  }
  return rate(exact, held.size());
}

PredictedChainScore eval_predicted_chain(const SemanticGenerator& sem, const AcousticGenerator& ac,
                                         const TotalPredictor& total,
                                         std::span<const t2s::T2sExample> held,
                                         std::span<const TokenGrid> truth,
                                         std::span<const duration::DurationSample> phones,
                                         std::size_t steps, std::uint64_t seed) {
  MGCT_EXPECT(held.size() == truth.size(), "eval_predicted_chain: one truth grid per utterance");
  const std::size_t n_utt = std::min(held.size(), phones.size());
  double rel = 0.0;
  std::size_t within = 0, completed = 0;
  for (std::size_t i = 0; i < n_utt; ++i) {
    const auto& ex = held[i];
    const auto& d = phones[i];
    Rng rng = utterance_rng(seed, "eval predicted chain", i);
    const std::size_t kp = prompt_length(d.phones.size(), rng);
    double want = 0.0;
    for (std::size_t p = kp; p < d.phones.size(); ++p) want += d.durations[p];
    const double got = total(std::span(d.phones).subspan(kp), std::span(d.phones).first(kp),
                             std::span(d.durations).first(kp), rng);
    const double e = std::fabs(got - want) / want;
    rel += e;
    within += e <= 0.1;

    const std::size_t n = static_cast<std::size_t>(std::max(1.0, got));
    const std::size_t k = prompt_length(ex.semantic.size(), rng);
    const std::span<const Token> prompt = std::span(ex.semantic).first(k);
    TokenSequence full(prompt.begin(), prompt.end());
    const TokenSequence gen = sem(ex.text, prompt, n, steps, rng);
    full.insert(full.end(), gen.begin(), gen.end());
    const TokenGrid grid = ac(full, slice_frames(truth[i], 0, k), rng);
    completed += gen.size() == n && grid.frames == n;
  }
  if (n_utt == 0) return {};
  const auto count = static_cast<double>(n_utt);
  return {rel / count, rate(within, n_utt), rate(completed, n_utt)};
}

DurationScore eval_duration(const TotalPredictor& pred,
                            std::span<const duration::DurationSample> held, std::uint64_t seed) {
  double rel = 0.0;
  std::size_t within = 0;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const auto& ex = held[i];
    Rng rng = utterance_rng(seed, "eval duration", i);
    const std::size_t k = prompt_length(ex.phones.size(), rng);
    double truth = 0.0;
    for (std::size_t p = k; p < ex.phones.size(); ++p) truth += ex.durations[p];
    const double got = pred(std::span(ex.phones).subspan(k), std::span(ex.phones).first(k),
                            std::span(ex.durations).first(k), rng);
    const double e = std::fabs(got - truth) / truth;
    rel += e;
    within += e <= 0.1;
  }
  return {held.empty() ? 0.0 : rel / static_cast<double>(held.size()), rate(within, held.size())};
}

CodecScore eval_semantic_codec(const codec::SemanticCodec& codec,
                               std::span<const codec::FeatureSequence> raw) {
  NoGradGuard ng;
  CodecScore s;
  TokenSequence all;
  double l1 = 0.0;
  std::size_t count = 0;
  for (const auto& r : raw) {
    const codec::FeatureSequence x = codec.normalizer.apply(r);
    const std::vector<std::size_t> offsets{0, x.frames};
    const auto q = codec.quantize(codec.encode(x.tensor(), offsets));
    const Tensor y = codec.decode(q.quantized, offsets);
    const auto yd = y.data();
    for (std::size_t i = 0; i < yd.size(); ++i) l1 += std::fabs(yd[i] - x.values[i]);
    count += yd.size();
    all.insert(all.end(), q.indices.begin(), q.indices.end());
  }
  s.codes_used.push_back(codec::distinct_codes(all));
  s.utilization.push_back(rate(s.codes_used[0], codec.config().codebook_size));
  s.recon_l1 = count == 0 ? 0.0 : l1 / static_cast<double>(count);
  return s;
}

CodecScore eval_acoustic_codec(const codec::AcousticCodec& codec,
                               std::span<const codec::FeatureSequence> raw) {
  NoGradGuard ng;
  CodecScore s;
  const std::size_t layers = codec.config().layers;
  std::vector<TokenSequence> per_layer(layers);
  double l1 = 0.0;
  std::size_t count = 0;
  for (const auto& r : raw) {
    const codec::FeatureSequence x = codec.normalizer.apply(r);
    const std::vector<std::size_t> offsets{0, x.frames};
    const auto q = codec.quantize(codec.encode(x.tensor(), offsets));
    const Tensor y = codec.decode(q.quantized, offsets);
    const auto yd = y.data();
    for (std::size_t i = 0; i < yd.size(); ++i) l1 += std::fabs(yd[i] - x.values[i]);
    count += yd.size();
    for (std::size_t l = 0; l < layers; ++l) {
      const auto row = q.grid.layer(l);
      per_layer[l].insert(per_layer[l].end(), row.begin(), row.end());
    }
  }
  for (const auto& codes : per_layer) {
    s.codes_used.push_back(codec::distinct_codes(codes));
    s.utilization.push_back(rate(s.codes_used.back(), codec.config().codebook_size));
  }
  s.recon_l1 = count == 0 ? 0.0 : l1 / static_cast<double>(count);
  return s;
}

EvalReport evaluate(const Config& run, const EvalOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed = run.count("seed");
  const CorpusLayout corpus{opt.corpus_dir};
  const auto has = [&](ModuleKind k) {
    return std::filesystem::exists(opt.checkpoint_dir / checkpoint_name(k));
  };
  const auto note = [&](const std::string& s) {
    if (opt.log) *opt.log << s << "\n";
  };
  EvalReport r;
  r.config_hash = run.hash();
  auto& m = r.metrics;

  if (has(ModuleKind::semantic_codec)) {
    const auto codec = load_semantic_codec(opt.checkpoint_dir / checkpoint_name(ModuleKind::semantic_codec));
    const auto s = eval_semantic_codec(*codec.model, codec::read_features(corpus.features(false)));
    m["semantic_codec.codes_used"] = static_cast<double>(s.codes_used[0]);
    m["semantic_codec.utilization"] = s.utilization[0];
    m["semantic_codec.recon_l1"] = s.recon_l1;
    note("evaluated semantic_codec");
  }
  if (has(ModuleKind::acoustic_codec)) {
    const auto codec = load_acoustic_codec(opt.checkpoint_dir / checkpoint_name(ModuleKind::acoustic_codec));
    const auto s = eval_acoustic_codec(*codec.model, codec::read_features(corpus.features(false)));
    for (std::size_t l = 0; l < s.codes_used.size(); ++l) {
      const std::string p = "acoustic_codec.layer" + std::to_string(l + 1);
      m[p + ".codes_used"] = static_cast<double>(s.codes_used[l]);
      m[p + ".utilization"] = s.utilization[l];
    }
    m["acoustic_codec.recon_l1"] = s.recon_l1;
    note("evaluated acoustic_codec");
  }

  std::optional<Loaded<duration::DurationModel>> dur;
  TotalPredictor total;
  if (has(ModuleKind::duration)) {
    dur = load_duration(opt.checkpoint_dir / checkpoint_name(ModuleKind::duration));
    const duration::DurationModel& model = *dur->model;
    total = [&model](std::span<const Token> phones, std::span<const Token> pp,
                     std::span<const float> pd, Rng& rng) {
      return static_cast<double>(duration::predict_total_duration(model, phones, pp, pd, rng));
    };
    const auto held = read_duration_corpus(corpus.duration(false));
    const auto s = eval_duration(total, held, seed);
    m["duration.utterances"] = static_cast<double>(held.size());
    m["duration.mean_rel_error"] = s.mean_rel_error;
    m["duration.within10"] = s.within10;
    note("evaluated duration");
  }

  const bool t2s_ok = has(ModuleKind::t2s), s2a_ok = has(ModuleKind::s2a);
  std::optional<Loaded<t2s::T2sModel>> t2s_model;
  std::optional<Loaded<s2a::S2aModel>> s2a_model;
  SemanticGenerator sem;
  AcousticGenerator ac;
  const masking::DecodeConfig t2s_decode = decode_config(run, "t2s");
  if (t2s_ok) {
    t2s_model = load_t2s(opt.checkpoint_dir / checkpoint_name(ModuleKind::t2s));
    const t2s::T2sModel& model = *t2s_model->model;
    sem = [&model, t2s_decode](std::span<const Token> text, std::span<const Token> prompt,
                               std::size_t n, std::size_t steps, Rng& rng) {
      masking::DecodeConfig d = t2s_decode;
      d.steps = steps;
      return t2s::generate(model, text, prompt, n, d, rng);
    };
    const auto held = read_t2s_corpus(corpus.t2s(false));
    m["t2s.utterances"] = static_cast<double>(held.size());
    std::vector<std::size_t> steps = opt.sweep;
    if (std::ranges::find(steps, t2s_decode.steps) == steps.end()) steps.push_back(t2s_decode.steps);
    for (std::size_t st : steps) {
      const T2sScore s = eval_t2s(sem, held, st, seed);
      if (std::ranges::find(opt.sweep, st) != opt.sweep.end())
        r.sweep.push_back({st, s.token_accuracy, s.exact_match});
      if (st == t2s_decode.steps) {
        m["t2s.steps"] = static_cast<double>(st);
        m["t2s.token_accuracy"] = s.token_accuracy;
        m["t2s.exact_match"] = s.exact_match;
      }
      note("evaluated t2s at " + std::to_string(st) + " steps");
    }
  }
  if (s2a_ok) {
    s2a_model = load_s2a(opt.checkpoint_dir / checkpoint_name(ModuleKind::s2a));
    const s2a::S2aModel& model = *s2a_model->model;
    const masking::DecodeConfig d = decode_config(run, "s2a");
    const s2a::LayerStepSchedule schedule = s2a_schedule(run);
    schedule.validate(model.config().layers);
    ac = [&model, d, schedule](std::span<const Token> semantic, const TokenGrid& prompt, Rng& rng) {
      return s2a::generate(model, semantic, prompt, schedule, d, rng);
    };
    const auto held = read_s2a_corpus(corpus, false);
    const S2aScore s = eval_s2a(ac, held, seed);
    m["s2a.utterances"] = static_cast<double>(held.size());
    for (std::size_t l = 0; l < s.layer_accuracy.size(); ++l)
      m["s2a.layer" + std::to_string(l + 1) + ".accuracy"] = s.layer_accuracy[l];
    m["s2a.exact_match"] = s.exact_match;
    note("evaluated s2a");
  }
  if (t2s_ok && s2a_ok) {
    const auto held = read_t2s_corpus(corpus.t2s(false));
    const auto truth = read_grids(corpus.e2e_grid());
    m["e2e.utterances"] = static_cast<double>(held.size());
    m["e2e.exact_match"] = eval_e2e(sem, ac, held, truth, t2s_decode.steps, seed);
    note("evaluated e2e");
    if (dur) {
      const auto phones = read_duration_corpus(corpus.duration(false));
      const PredictedChainScore p =
          eval_predicted_chain(sem, ac, total, held, truth, phones, t2s_decode.steps, seed);
      m["e2e.predicted.utterances"] = static_cast<double>(std::min(held.size(), phones.size()));
      m["e2e.predicted.mean_rel_error"] = p.mean_rel_error;
      m["e2e.predicted.within10"] = p.within10;
      m["e2e.predicted.completed"] = p.completed;
      note("evaluated predicted-length chain");
    }
  }
  r.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace mgct::pipeline
