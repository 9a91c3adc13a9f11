// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/pipeline/corpus.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "mgct/errors.hpp"

namespace mgct::pipeline {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return Rng(h).next_u64();
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return is;
}

[[noreturn]] void bad_line(const std::filesystem::path& path, std::size_t line,
                           const std::string& what) {
  throw FormatError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::string join(std::span<const Token> xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(xs[i]);
  }
  return s;
}

bool parse_ints(std::string_view s, TokenSequence& out) {
  std::size_t pos = 0;
  while (true) {
    pos = s.find_first_not_of(" \t\r", pos);
    if (pos == std::string_view::npos) return true;
    const auto end = std::min(s.find_first_of(" \t\r", pos), s.size());
    Token v = 0;
    const auto r = std::from_chars(s.data() + pos, s.data() + end, v);
    if (r.ec != std::errc{} || r.ptr != s.data() + end) return false;
    out.push_back(v);
    pos = end;
  }
}

// Splits "A | B" into two integer lists.
bool parse_pair(std::string_view line, TokenSequence& a, TokenSequence& b) {
  const auto bar = line.find('|');
  if (bar == std::string_view::npos || line.find('|', bar + 1) != std::string_view::npos) return false;
  return parse_ints(line.substr(0, bar), a) && parse_ints(line.substr(bar + 1), b);
}

bool blank(std::string_view line) { return line.find_first_not_of(" \t\r") == std::string_view::npos; }

}  // namespace

void write_t2s_corpus(const std::filesystem::path& path, std::span<const t2s::T2sExample> records) {
  auto os = open_out(path);
  for (const auto& r : records) os << join(r.text) << " | " << join(r.semantic) << '\n';
  if (!os) throw IoError("short write to " + path.string());
}

std::vector<t2s::T2sExample> read_t2s_corpus(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::vector<t2s::T2sExample> out;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    if (blank(line)) continue;
    t2s::T2sExample r;
    if (!parse_pair(line, r.text, r.semantic)) bad_line(path, n, "expected TEXT_IDS | SEMANTIC_IDS");
    if (r.text.empty() || r.semantic.empty()) bad_line(path, n, "empty text or semantic sequence");
    out.push_back(std::move(r));
  }
  return out;
}

void write_duration_corpus(const std::filesystem::path& path,
                           std::span<const duration::DurationSample> records) {
  auto os = open_out(path);
  for (const auto& r : records) {
    TokenSequence d;
    for (float x : r.durations) {
      MGCT_EXPECT(x >= 1.0f && x == std::round(x), "duration corpus: durations must be whole frames");
      d.push_back(static_cast<Token>(x));
    }
    os << join(r.phones) << " | " << join(d) << '\n';
  }
  if (!os) throw IoError("short write to " + path.string());
}

std::vector<duration::DurationSample> read_duration_corpus(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::vector<duration::DurationSample> out;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    if (blank(line)) continue;
    duration::DurationSample r;
    TokenSequence d;
    if (!parse_pair(line, r.phones, d)) bad_line(path, n, "expected PHONE_IDS | DURATIONS");
    if (r.phones.empty() || r.phones.size() != d.size())
      bad_line(path, n, "need one duration per phone");
    for (Token x : d) {
      if (x < 1) bad_line(path, n, "durations must be >= 1 frame");
      r.durations.push_back(static_cast<float>(x));
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_sequences(const std::filesystem::path& path, std::span<const TokenSequence> seqs) {
  auto os = open_out(path);
  for (const auto& s : seqs) os << join(s) << '\n';
  if (!os) throw IoError("short write to " + path.string());
}

std::vector<TokenSequence> read_sequences(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::vector<TokenSequence> out;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    if (blank(line)) continue;
    TokenSequence s;
    if (!parse_ints(line, s)) bad_line(path, n, "expected space-separated integers");
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_grid(const TokenGrid& g) {
  std::string s = "layers=" + std::to_string(g.layers) + " frames=" + std::to_string(g.frames) + "\n";
  for (std::size_t l = 0; l < g.layers; ++l) s += join(g.layer(l)) + "\n";
  return s;
}

void write_grids(const std::filesystem::path& path, std::span<const TokenGrid> grids) {
  auto os = open_out(path);
  for (const auto& g : grids) os << format_grid(g);
  if (!os) throw IoError("short write to " + path.string());
}

std::vector<TokenGrid> read_grids(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::vector<TokenGrid> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (blank(line)) continue;
    unsigned long long layers = 0, frames = 0;
    char tail = 0;
    if (std::sscanf(line.c_str(), " layers=%llu frames=%llu %c", &layers, &frames, &tail) != 2)
      bad_line(path, n, "expected header 'layers=N frames=F'");
    if (layers == 0 || layers > 4096) bad_line(path, n, "implausible layer count");
    TokenGrid g(layers, frames);
    for (std::size_t l = 0; l < layers; ++l) {
      ++n;
      if (!std::getline(is, line)) bad_line(path, n, "grid ends before layer " + std::to_string(l + 1));
      TokenSequence row;
      if (!parse_ints(line, row) || row.size() != frames)
        bad_line(path, n, "expected " + std::to_string(frames) + " codes");
      std::ranges::copy(row, g.layer(l).begin());
    }
    out.push_back(std::move(g));
  }
  return out;
}

SyntheticTask::SyntheticTask(const Config& c)
    : stochastic_(c.raw("task.mapping") == "stochastic"),
      text_vocab_(c.count("task.text_vocab")),
      per_symbol_(c.count("task.tokens_per_symbol")),
      text_min_(c.count("task.text_min")),
      text_max_(c.count("task.text_max")),
      semantic_codes_(c.count("semantic.codebook_size")),
      s2a_min_(c.count("task.s2a_min_frames")),
      s2a_max_(c.count("task.s2a_max_frames")),
      phones_min_(c.count("task.phones_min")),
      phones_max_(c.count("task.phones_max")),
      durations_(c.count("task.phones"), c.real("task.duration_median_min"),
                 c.real("task.duration_median_max"), c.real("task.duration_sigma"),
                 derive_seed(c.count("seed"), "durations")),
      features_(mixture_spec(c), derive_seed(c.count("seed"), "features")) {
  const std::string& kind = c.raw("task.mapping");
  MGCT_EXPECT(kind == "deterministic" || kind == "stochastic",
              "task.mapping must be deterministic or stochastic");
  MGCT_EXPECT(per_symbol_ >= 1 && text_vocab_ >= 1, "task: empty mapping");
  MGCT_EXPECT(text_min_ >= 1 && text_max_ >= text_min_, "task: bad text length range");
  MGCT_EXPECT(s2a_min_ >= 2 && s2a_max_ >= s2a_min_, "task: bad s2a frame range");
  MGCT_EXPECT(phones_min_ >= 2 && phones_max_ >= phones_min_, "task: bad phone count range");

  Rng rng(derive_seed(c.count("seed"), "mapping"));
  std::vector<Token> perm(semantic_codes_);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::size_t next = 0;
  auto draw = [&] { return perm[next++ % perm.size()]; };
  primary_.resize(text_vocab_);
  alternate_.resize(text_vocab_);
  for (auto& p : primary_)
    for (std::size_t k = 0; k < per_symbol_; ++k) p.push_back(draw());
  for (auto& a : alternate_)
    for (std::size_t k = 0; k < per_symbol_; ++k) a.push_back(draw());

  const std::size_t layers = c.count("acoustic.layers");
  const std::size_t book = c.count("acoustic.codebook_size");
  columns_.resize(semantic_codes_);
  for (auto& col : columns_)
    for (std::size_t l = 0; l < layers; ++l) col.push_back(static_cast<Token>(rng.below(book)));
}

TokenSequence SyntheticTask::expand(std::span<const Token> text, Rng& rng) const {
  TokenSequence out;
  for (Token s : text) {
    MGCT_EXPECT(s >= 0 && static_cast<std::size_t>(s) < text_vocab_, "expand: bad text symbol");
    const bool alt = stochastic_ && rng.bernoulli(0.2);
    const auto& e = alt ? alternate_[s] : primary_[s];
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

TokenSequence SyntheticTask::expand(std::span<const Token> text) const {
  TokenSequence out;
  for (Token s : text) {
    MGCT_EXPECT(s >= 0 && static_cast<std::size_t>(s) < text_vocab_, "expand: bad text symbol");
    out.insert(out.end(), primary_[s].begin(), primary_[s].end());
  }
  return out;
}

TokenGrid SyntheticTask::acoustic(std::span<const Token> semantic) const {
  const std::size_t layers = columns_.front().size();
  TokenGrid g(layers, semantic.size());
  for (std::size_t f = 0; f < semantic.size(); ++f) {
    MGCT_EXPECT(semantic[f] >= 0 && static_cast<std::size_t>(semantic[f]) < semantic_codes_,
                "acoustic: bad semantic token");
    for (std::size_t l = 0; l < layers; ++l) g.at(l, f) = columns_[semantic[f]][l];
  }
  return g;
}

t2s::T2sExample SyntheticTask::t2s_example(Rng& rng) const {
  t2s::T2sExample ex;
  const std::size_t len = text_min_ + rng.below(text_max_ - text_min_ + 1);
  for (std::size_t i = 0; i < len; ++i) ex.text.push_back(static_cast<Token>(rng.below(text_vocab_)));
  ex.semantic = expand(ex.text, rng);
  return ex;
}

s2a::S2aExample SyntheticTask::s2a_example(Rng& rng) const {
  s2a::S2aExample ex;
  const std::size_t len = s2a_min_ + rng.below(s2a_max_ - s2a_min_ + 1);
  for (std::size_t i = 0; i < len; ++i)
    ex.semantic.push_back(static_cast<Token>(rng.below(semantic_codes_)));
  ex.acoustic = acoustic(ex.semantic);
  return ex;
}

duration::DurationSample SyntheticTask::duration_example(Rng& rng) const {
  return durations_.sample(phones_min_ + rng.below(phones_max_ - phones_min_ + 1), rng);
}

std::filesystem::path CorpusLayout::t2s(bool train) const {
  return dir / (train ? "t2s_train.txt" : "t2s_heldout.txt");
}
std::filesystem::path CorpusLayout::s2a_semantic(bool train) const {
  return dir / (train ? "s2a_train.semantic" : "s2a_heldout.semantic");
}
std::filesystem::path CorpusLayout::s2a_grid(bool train) const {
  return dir / (train ? "s2a_train.grid" : "s2a_heldout.grid");
}
std::filesystem::path CorpusLayout::e2e_grid() const { return dir / "e2e_heldout.grid"; }
std::filesystem::path CorpusLayout::duration(bool train) const {
  return dir / (train ? "duration_train.txt" : "duration_heldout.txt");
}
std::filesystem::path CorpusLayout::features(bool train) const {
  return dir / (train ? "features_train.mgft" : "features_heldout.mgft");
}

namespace {

std::size_t train_count(const Config& c, std::size_t total) {
  const double f = c.real("task.train_fraction");
  MGCT_EXPECT(f > 0.0 && f < 1.0, "task.train_fraction must be in (0, 1)");
  const auto n = static_cast<std::size_t>(std::llround(f * static_cast<double>(total)));
  MGCT_EXPECT(n >= 1 && n < total, "corpus too small for a train/held-out split");
  return n;
}

}  // namespace

void gen_corpus(const Config& c, const std::filesystem::path& dir) {
  const SyntheticTask task(c);
  const CorpusLayout out{dir};
  const std::uint64_t seed = c.count("seed");
  const std::size_t total = c.count("task.utterances");
  const std::size_t n_train = train_count(c, total);

  {
    Rng rng(derive_seed(seed, "t2s corpus"));
    std::vector<t2s::T2sExample> train, held;
    std::set<TokenSequence> seen;
    while (train.size() < n_train) {
      train.push_back(task.t2s_example(rng));
      seen.insert(train.back().text);
    }
    std::size_t attempts = 0;
    while (held.size() < total - n_train) {
      MGCT_EXPECT(++attempts < 1000 * total, "gen_corpus: cannot find unseen held-out texts");
      t2s::T2sExample ex = task.t2s_example(rng);
      if (seen.insert(ex.text).second) held.push_back(std::move(ex));
    }
    write_t2s_corpus(out.t2s(true), train);
    write_t2s_corpus(out.t2s(false), held);
    std::vector<TokenGrid> truth;
    for (const auto& ex : held) truth.push_back(task.acoustic(ex.semantic));
    write_grids(out.e2e_grid(), truth);
  }
  {
    Rng rng(derive_seed(seed, "s2a corpus"));
    for (bool train : {true, false}) {
      const std::size_t n = train ? n_train : total - n_train;
      std::vector<TokenSequence> sem;
      std::vector<TokenGrid> grids;
      for (std::size_t i = 0; i < n; ++i) {
        s2a::S2aExample ex = task.s2a_example(rng);
        sem.push_back(std::move(ex.semantic));
        grids.push_back(std::move(ex.acoustic));
      }
      write_sequences(out.s2a_semantic(train), sem);
      write_grids(out.s2a_grid(train), grids);
    }
  }
  {
    Rng rng(derive_seed(seed, "duration corpus"));
    std::vector<duration::DurationSample> all;
    for (std::size_t i = 0; i < total; ++i) all.push_back(task.duration_example(rng));
    write_duration_corpus(out.duration(true), std::span(all).first(n_train));
    write_duration_corpus(out.duration(false), std::span(all).subspan(n_train));
  }
  {
    Rng rng(derive_seed(seed, "feature corpus"));
    const std::size_t n = c.count("features.utterances");
    const std::size_t nf = train_count(c, n);
    std::vector<codec::FeatureSequence> all;
    for (std::size_t i = 0; i < n; ++i) all.push_back(task.features().sample(rng));
    codec::write_features(out.features(true), std::span(all).first(nf));
    codec::write_features(out.features(false), std::span(all).subspan(nf));
  }
}

std::vector<s2a::S2aExample> read_s2a_corpus(const CorpusLayout& layout, bool train) {
  const auto sem = read_sequences(layout.s2a_semantic(train));
  auto grids = read_grids(layout.s2a_grid(train));
  if (sem.size() != grids.size())
    throw FormatError(layout.s2a_semantic(train).string() + " has " + std::to_string(sem.size()) +
                      " records, " + layout.s2a_grid(train).string() + " has " +
                      std::to_string(grids.size()));
  std::vector<s2a::S2aExample> out;
  for (std::size_t i = 0; i < sem.size(); ++i) {
    if (grids[i].frames != sem[i].size())
      throw FormatError("s2a record " + std::to_string(i + 1) + ": |S| = " +
                        std::to_string(sem[i].size()) + " but the grid has " +
                        std::to_string(grids[i].frames) + " frames");
    out.push_back({sem[i], std::move(grids[i])});
  }
  return out;
}

}  // namespace mgct::pipeline
