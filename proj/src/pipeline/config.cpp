// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/pipeline/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mgct/errors.hpp"

namespace mgct::pipeline {

namespace {

struct KeySpec {
  const char* key;
  ValueType type;
  const char* desk;
  const char* paper;
};

// clang-format off
const KeySpec kKeys[] = {
    {"seed", ValueType::integer, "1", "1"},

    {"adamw.beta1", ValueType::real, "0.9", "0.9"},
    {"adamw.beta2", ValueType::real, "0.999", "0.999"},
    {"adamw.eps", ValueType::real, "1e-8", "1e-8"},
    {"adamw.weight_decay", ValueType::real, "0.01", "0.01"},
    {"adamw.clip_norm", ValueType::real, "1.0", "1.0"},

    {"mask.horizon", ValueType::real, "1.0", "1.0"},
    {"mask.schedule", ValueType::text, "sine", "sine"},
    {"decode.temp_start", ValueType::real, "1.5", "1.5"},
    {"decode.temp_end", ValueType::real, "0.0", "0.0"},
    {"decode.gumbel", ValueType::boolean, "true", "true"},
    {"cfg.w", ValueType::real, "1.0", "2.5"},
    {"cfg.rescale", ValueType::real, "0.75", "0.75"},

    {"task.mapping", ValueType::text, "deterministic", "deterministic"},
    {"task.text_vocab", ValueType::integer, "16", "16"},
    {"task.text_min", ValueType::integer, "2", "2"},
    {"task.text_max", ValueType::integer, "6", "6"},
    {"task.tokens_per_symbol", ValueType::integer, "2", "2"},
    {"task.utterances", ValueType::integer, "2000", "2000"},
    {"task.s2a_min_frames", ValueType::integer, "4", "4"},
    {"task.s2a_max_frames", ValueType::integer, "24", "24"},
    {"task.phones", ValueType::integer, "16", "16"},
    {"task.phones_min", ValueType::integer, "8", "8"},
    {"task.phones_max", ValueType::integer, "16", "16"},
    {"task.duration_median_min", ValueType::real, "3", "3"},
    {"task.duration_median_max", ValueType::real, "12", "12"},
    {"task.duration_sigma", ValueType::real, "0.1", "0.1"},
    {"task.train_fraction", ValueType::real, "0.9", "0.9"},

    {"features.dim", ValueType::integer, "16", "1024"},
    {"features.clusters", ValueType::integer, "8", "8"},
    {"features.spread", ValueType::real, "1.0", "1.0"},
    {"features.noise", ValueType::real, "0.02", "0.02"},
    {"features.stay", ValueType::real, "0.85", "0.85"},
    {"features.min_frames", ValueType::integer, "32", "32"},
    {"features.max_frames", ValueType::integer, "64", "64"},
    {"features.utterances", ValueType::integer, "400", "400"},

    {"semantic.hidden", ValueType::integer, "32", "384"},
    {"semantic.blocks", ValueType::integer, "2", "12"},
    {"semantic.kernel", ValueType::integer, "7", "7"},
    {"semantic.codebook_size", ValueType::integer, "64", "8192"},
    {"semantic.code_dim", ValueType::integer, "4", "8"},
    {"semantic.lambda_rec", ValueType::real, "1.0", "1.0"},
    {"semantic.lambda_codebook", ValueType::real, "1.0", "1.0"},
    {"semantic.lambda_commit", ValueType::real, "0.25", "0.25"},
    {"semantic.revive_after", ValueType::integer, "200", "200"},
    {"semantic.train_steps", ValueType::integer, "2000", "2000"},
    {"semantic.batch", ValueType::integer, "8", "8"},
    {"semantic.lr", ValueType::real, "3e-3", "1e-4"},
    {"semantic.warmup", ValueType::integer, "100", "32000"},

    {"acoustic.hidden", ValueType::integer, "32", "32"},
    {"acoustic.blocks", ValueType::integer, "1", "1"},
    {"acoustic.kernel", ValueType::integer, "7", "7"},
    {"acoustic.code_dim", ValueType::integer, "8", "8"},
    {"acoustic.layers", ValueType::integer, "4", "12"},
    {"acoustic.codebook_size", ValueType::integer, "32", "1024"},
    {"acoustic.lambda_rec", ValueType::real, "10.0", "10.0"},
    {"acoustic.lambda_codebook", ValueType::real, "1.0", "1.0"},
    {"acoustic.lambda_commit", ValueType::real, "0.25", "0.25"},
    {"acoustic.windows", ValueType::list, "1,4,16", "1,4,16"},
    {"acoustic.revive_after", ValueType::integer, "200", "200"},
    {"acoustic.sample_rate", ValueType::integer, "24000", "24000"},
    {"acoustic.hop", ValueType::integer, "480", "480"},
    {"acoustic.train_steps", ValueType::integer, "1000", "1000"},
    {"acoustic.batch", ValueType::integer, "8", "8"},
    {"acoustic.lr", ValueType::real, "3e-3", "1e-4"},
    {"acoustic.warmup", ValueType::integer, "100", "32000"},

    {"t2s.depth", ValueType::integer, "2", "16"},
    {"t2s.model_dim", ValueType::integer, "64", "1024"},
    {"t2s.ffn_dim", ValueType::integer, "256", "4096"},
    {"t2s.heads", ValueType::integer, "4", "16"},
    {"t2s.rope_theta", ValueType::real, "10000", "10000"},
    {"t2s.prompt_drop", ValueType::real, "0.15", "0.15"},
    {"t2s.prompt_max_fraction", ValueType::real, "0.5", "0.5"},
    {"t2s.steps", ValueType::integer, "50", "50"},
    {"t2s.top_k", ValueType::integer, "20", "20"},
    {"t2s.train_steps", ValueType::integer, "2000", "2000"},
    {"t2s.batch", ValueType::integer, "64", "64"},
    {"t2s.lr", ValueType::real, "2e-3", "1e-4"},
    {"t2s.warmup", ValueType::integer, "100", "32000"},

    {"s2a.depth", ValueType::integer, "2", "16"},
    {"s2a.model_dim", ValueType::integer, "64", "1024"},
    {"s2a.ffn_dim", ValueType::integer, "256", "4096"},
    {"s2a.heads", ValueType::integer, "4", "16"},
    {"s2a.rope_theta", ValueType::real, "10000", "10000"},
    {"s2a.prompt_drop", ValueType::real, "0.15", "0.15"},
    {"s2a.prompt_max_fraction", ValueType::real, "0.5", "0.5"},
    {"s2a.schedule", ValueType::list, "8,4,1,1", "40,16,1,1,1,1,1,1,1,1,1,1"},
    {"s2a.top_k", ValueType::integer, "20", "20"},
    {"s2a.train_steps", ValueType::integer, "1000", "1000"},
    {"s2a.batch", ValueType::integer, "32", "32"},
    {"s2a.lr", ValueType::real, "2e-3", "1e-4"},
    {"s2a.warmup", ValueType::integer, "100", "32000"},

    {"duration.depth", ValueType::integer, "2", "12"},
    {"duration.model_dim", ValueType::integer, "64", "768"},
    {"duration.ffn_dim", ValueType::integer, "256", "3072"},
    {"duration.heads", ValueType::integer, "4", "12"},
    {"duration.rope_theta", ValueType::real, "10000", "10000"},
    {"duration.prompt_drop", ValueType::real, "0.15", "0.15"},
    {"duration.prompt_max_fraction", ValueType::real, "0.5", "0.5"},
    {"duration.solver_steps", ValueType::integer, "4", "4"},
    {"duration.cfg_w", ValueType::real, "1.0", "1.0"},
    {"duration.train_steps", ValueType::integer, "3000", "3000"},
    {"duration.batch", ValueType::integer, "64", "32"},
    {"duration.lr", ValueType::real, "1e-3", "1e-4"},
    {"duration.warmup", ValueType::integer, "100", "32000"},

    {"train.checkpoint_every", ValueType::integer, "250", "1000"},
    {"eval.sweep", ValueType::list, "5,10,25,50", "5,10,25,50"},
};
// clang-format on

const KeySpec* find_key(std::string_view key) {
  for (const auto& k : kKeys)
    if (key == k.key) return &k;
  return nullptr;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_int(std::string_view s, std::int64_t& out) {
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc{} && r.ptr == end;
}

bool parse_real(std::string_view s, double& out) {
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc{} && r.ptr == end && std::isfinite(out);
}

bool parse_list(std::string_view s, std::vector<std::size_t>* out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = std::min(s.find(',', pos), s.size());
    std::int64_t v = 0;
    if (!parse_int(trim(s.substr(pos, comma - pos)), v) || v < 0) return false;
    if (out) out->push_back(static_cast<std::size_t>(v));
    pos = comma + 1;
  }
  return true;
}

void check_value(const KeySpec& k, std::string_view v) {
  std::int64_t i = 0;
  double d = 0;
  bool ok = false;
  switch (k.type) {
    case ValueType::integer: ok = parse_int(v, i); break;
    case ValueType::real: ok = parse_real(v, d); break;
    case ValueType::boolean: ok = v == "true" || v == "false"; break;
    case ValueType::text: ok = !v.empty() && v.find_first_of(" \t\n#=") == std::string_view::npos; break;
    case ValueType::list: ok = parse_list(v, nullptr); break;
  }
  MGCT_EXPECT(ok, "config: bad value '" + std::string(v) + "' for " + k.key);
}

nn::TransformerConfig backbone(const Config& c, std::string_view m) {
  const std::string p(m);
  return {c.count(p + ".depth"), c.count(p + ".model_dim"), c.count(p + ".ffn_dim"),
          c.count(p + ".heads"), c.real(p + ".rope_theta")};
}

masking::MaskSchedule mask_schedule(const Config& c) {
  masking::MaskSchedule s;
  s.horizon = c.real("mask.horizon");
  const std::string& kind = c.raw("mask.schedule");
  MGCT_EXPECT(kind == "sine" || kind == "linear", "config: mask.schedule must be sine or linear");
  s.kind = kind == "sine" ? masking::ScheduleKind::sine : masking::ScheduleKind::linear;
  return s;
}

}  // namespace

Config Config::preset(std::string_view name) {
  MGCT_EXPECT(name == "desk" || name == "paper",
              "config: unknown preset '" + std::string(name) + "' (desk or paper)");
  Config c;
  for (const auto& k : kKeys) c.values_[k.key] = name == "desk" ? k.desk : k.paper;
  return c;
}

const std::vector<std::string>& Config::preset_names() {
  static const std::vector<std::string> names{"desk", "paper"};
  return names;
}

void Config::set(std::string_view key, std::string_view value) {
  const KeySpec* k = find_key(key);
  MGCT_EXPECT(k != nullptr, "config: unknown key '" + std::string(key) + "'");
  value = trim(value);
  check_value(*k, value);
  values_[k->key] = std::string(value);
}

void Config::merge_text(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const auto nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    line = trim(line.substr(0, std::min(line.find('#'), line.size())));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    MGCT_EXPECT(eq != std::string_view::npos, std::string(origin) + ":" +
                                                  std::to_string(line_no) +
                                                  ": expected key = value");
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

const std::string& Config::raw(std::string_view key) const {
  const auto it = values_.find(key);
  MGCT_EXPECT(it != values_.end(), "config: unknown key '" + std::string(key) + "'");
  return it->second;
}

std::int64_t Config::integer(std::string_view key) const {
  std::int64_t v = 0;
  MGCT_EXPECT(parse_int(raw(key), v), "config: " + std::string(key) + " is not an integer");
  return v;
}

std::size_t Config::count(std::string_view key) const {
  const std::int64_t v = integer(key);
  MGCT_EXPECT(v >= 0, "config: " + std::string(key) + " must be >= 0");
  return static_cast<std::size_t>(v);
}

double Config::real(std::string_view key) const {
  double v = 0;
  MGCT_EXPECT(parse_real(raw(key), v), "config: " + std::string(key) + " is not a real");
  return v;
}

bool Config::boolean(std::string_view key) const {
  const std::string& v = raw(key);
  MGCT_EXPECT(v == "true" || v == "false", "config: " + std::string(key) + " is not a boolean");
  return v == "true";
}

std::vector<std::size_t> Config::list(std::string_view key) const {
  std::vector<std::size_t> out;
  MGCT_EXPECT(parse_list(raw(key), &out), "config: " + std::string(key) + " is not a list");
  return out;
}

std::string Config::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string Config::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Config config_from_dump(std::string_view text) {
  Config c = Config::preset("desk");
  Config seen;
  seen.merge_text(text, "config snapshot");
  for (const auto& [k, v] : seen.values()) c.set(k, v);
  MGCT_EXPECT(seen.values().size() == c.values().size(),
              "config snapshot: " + std::to_string(seen.values().size()) + " of " +
                  std::to_string(c.values().size()) + " keys present");
  return c;
}

AdamWConfig adamw_config(const Config& c, std::string_view module) {
  const std::string m(module);
  AdamWConfig a;
  a.lr = c.real(m + ".lr");
  a.warmup = c.integer(m + ".warmup");
  a.beta1 = c.real("adamw.beta1");
  a.beta2 = c.real("adamw.beta2");
  a.eps = c.real("adamw.eps");
  a.weight_decay = c.real("adamw.weight_decay");
  a.clip_norm = c.real("adamw.clip_norm");
  return a;
}

masking::DecodeConfig decode_config(const Config& c, std::string_view module) {
  const std::string m(module);
  masking::DecodeConfig d;
  if (m == "t2s") d.steps = c.count("t2s.steps");
  d.top_k = c.count(m + ".top_k");
  d.temp_start = c.real("decode.temp_start");
  d.temp_end = c.real("decode.temp_end");
  d.gumbel = c.boolean("decode.gumbel");
  d.w_cfg = c.real("cfg.w");
  d.w_rescale = c.real("cfg.rescale");
  d.schedule = mask_schedule(c);
  d.validate();
  return d;
}

codec::MixtureSpec mixture_spec(const Config& c) {
  codec::MixtureSpec s;
  s.dim = c.count("features.dim");
  s.clusters = c.count("features.clusters");
  s.spread = c.real("features.spread");
  s.noise = c.real("features.noise");
  s.stay = c.real("features.stay");
  s.min_frames = c.count("features.min_frames");
  s.max_frames = c.count("features.max_frames");
  s.validate();
  return s;
}

codec::SemanticCodecConfig semantic_codec_config(const Config& c) {
  codec::SemanticCodecConfig s;
  s.feature_dim = c.count("features.dim");
  s.hidden = c.count("semantic.hidden");
  s.blocks = c.count("semantic.blocks");
  s.kernel = c.count("semantic.kernel");
  s.codebook_size = c.count("semantic.codebook_size");
  s.code_dim = c.count("semantic.code_dim");
  s.lambda_rec = static_cast<float>(c.real("semantic.lambda_rec"));
  s.lambda_codebook = static_cast<float>(c.real("semantic.lambda_codebook"));
  s.lambda_commit = static_cast<float>(c.real("semantic.lambda_commit"));
  s.revive_after = c.integer("semantic.revive_after");
  s.validate();
  return s;
}

codec::AcousticCodecConfig acoustic_codec_config(const Config& c) {
  codec::AcousticCodecConfig a;
  a.feature_dim = c.count("features.dim");
  a.hidden = c.count("acoustic.hidden");
  a.blocks = c.count("acoustic.blocks");
  a.kernel = c.count("acoustic.kernel");
  a.code_dim = c.count("acoustic.code_dim");
  a.layers = c.count("acoustic.layers");
  a.codebook_size = c.count("acoustic.codebook_size");
  a.lambda_rec = static_cast<float>(c.real("acoustic.lambda_rec"));
  a.lambda_codebook = static_cast<float>(c.real("acoustic.lambda_codebook"));
  a.lambda_commit = static_cast<float>(c.real("acoustic.lambda_commit"));
  a.windows = c.list("acoustic.windows");
  a.revive_after = c.integer("acoustic.revive_after");
  a.sample_rate = c.count("acoustic.sample_rate");
  a.hop = c.count("acoustic.hop");
  a.validate();
  return a;
}

t2s::T2sConfig t2s_config(const Config& c) {
  t2s::T2sConfig t;
  t.backbone = backbone(c, "t2s");
  t.text_vocab = c.count("task.text_vocab");
  t.semantic_codes = c.count("semantic.codebook_size");
  t.prompt_drop = c.real("t2s.prompt_drop");
  t.prompt_max_fraction = c.real("t2s.prompt_max_fraction");
  t.schedule = mask_schedule(c);
  t.validate();
  return t;
}

s2a::S2aConfig s2a_config(const Config& c) {
  s2a::S2aConfig s;
  s.backbone = backbone(c, "s2a");
  s.semantic_codes = c.count("semantic.codebook_size");
  s.layers = c.count("acoustic.layers");
  s.codebook_size = c.count("acoustic.codebook_size");
  s.prompt_drop = c.real("s2a.prompt_drop");
  s.prompt_max_fraction = c.real("s2a.prompt_max_fraction");
  s.schedule = mask_schedule(c);
  s.validate();
  return s;
}

s2a::LayerStepSchedule s2a_schedule(const Config& c) {
  s2a::LayerStepSchedule s{c.list("s2a.schedule")};
  s.validate(c.count("acoustic.layers"));
  return s;
}

duration::DurationConfig duration_config(const Config& c) {
  duration::DurationConfig d;
  d.backbone = backbone(c, "duration");
  d.phones = c.count("task.phones");
  d.prompt_drop = c.real("duration.prompt_drop");
  d.prompt_max_fraction = c.real("duration.prompt_max_fraction");
  d.solver_steps = c.count("duration.solver_steps");
  d.w_cfg = c.real("duration.cfg_w");
  d.validate();
  return d;
}

}  // namespace mgct::pipeline
