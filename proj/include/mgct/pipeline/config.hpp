// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mgct/codec/acoustic.hpp"
#include "mgct/codec/features.hpp"
#include "mgct/codec/semantic.hpp"
#include "mgct/duration/duration.hpp"
#include "mgct/masking/decode.hpp"
#include "mgct/numerics/adamw.hpp"
#include "mgct/s2a/s2a.hpp"
#include "mgct/t2s/t2s.hpp"

namespace mgct::pipeline {

enum class ValueType { integer, real, boolean, text, list };

/// Flat `module.param = value` settings. Every key exists in both presets;
/// setting a key that is not known, or a value of the wrong type, throws
/// ContractViolation.
class Config {
 public:
  static Config preset(std::string_view name);  // "desk" or "paper"
  static const std::vector<std::string>& preset_names();

  void set(std::string_view key, std::string_view value);
  /// Applies "key = value" lines; '#' starts a comment.
  void merge_text(std::string_view text, std::string_view origin = "config");
  void merge_file(const std::filesystem::path& path);

  const std::string& raw(std::string_view key) const;
  std::int64_t integer(std::string_view key) const;
  std::size_t count(std::string_view key) const;  // integer >= 0
  double real(std::string_view key) const;
  bool boolean(std::string_view key) const;
  std::vector<std::size_t> list(std::string_view key) const;

  /// Resolved config, one sorted "key = value" line per key.
  std::string dump() const;
  /// FNV-1a of dump(), printed as 16 hex digits.
  std::string hash() const;

  const std::map<std::string, std::string, std::less<>>& values() const noexcept { return values_; }
  bool operator==(const Config&) const = default;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Parses a resolved dump back into a Config (every key must be present).
Config config_from_dump(std::string_view text);

AdamWConfig adamw_config(const Config& c, std::string_view module);
masking::DecodeConfig decode_config(const Config& c, std::string_view module);
codec::MixtureSpec mixture_spec(const Config& c);
codec::SemanticCodecConfig semantic_codec_config(const Config& c);
codec::AcousticCodecConfig acoustic_codec_config(const Config& c);
t2s::T2sConfig t2s_config(const Config& c);
s2a::S2aConfig s2a_config(const Config& c);
s2a::LayerStepSchedule s2a_schedule(const Config& c);
duration::DurationConfig duration_config(const Config& c);

}  // namespace mgct::pipeline
