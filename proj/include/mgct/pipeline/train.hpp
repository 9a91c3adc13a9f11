// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string_view>

#include "mgct/codec/acoustic.hpp"
#include "mgct/codec/semantic.hpp"
#include "mgct/duration/duration.hpp"
#include "mgct/pipeline/checkpoint.hpp"
#include "mgct/pipeline/config.hpp"
#include "mgct/s2a/s2a.hpp"
#include "mgct/t2s/t2s.hpp"

namespace mgct::pipeline {

enum class ModuleKind { semantic_codec, acoustic_codec, t2s, s2a, duration };

std::string_view kind_name(ModuleKind k);
ModuleKind parse_kind(std::string_view name);
/// "<kind>.ckpt"
std::string checkpoint_name(ModuleKind k);

struct TrainOptions {
  std::filesystem::path corpus_dir;
  std::filesystem::path out_dir;
  /// Continue from this checkpoint (parameters, optimizer, step and RNG).
  std::optional<std::filesystem::path> resume;
  /// Progress lines go here when set.
  std::ostream* log = nullptr;
};

struct TrainResult {
  std::uint64_t first_step = 0;  // optimizer step the run started from
  std::uint64_t final_step = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  std::filesystem::path checkpoint;
  std::filesystem::path loss_curve;
};

/// Trains one module up to `<module>.train_steps` optimizer steps, writing
/// `<kind>.ckpt` every train.checkpoint_every steps and at the end, and
/// appending "step<TAB>loss" lines to `<kind>.loss.tsv`. A non-finite loss
/// aborts with NumericError; the last checkpoint on disk is left as it was.
TrainResult train(ModuleKind kind, const Config& c, const TrainOptions& opt);

/// Checkpoint of an untrained module (what train() writes after 0 steps).
Checkpoint initial_checkpoint(ModuleKind kind, const Config& c);

/// Reads a checkpoint, checks its kind and rebuilds the module from the
/// stored config snapshot.
template <class Model>
struct Loaded {
  Config config;
  std::unique_ptr<Model> model;
  std::uint64_t step = 0;
};

Loaded<codec::SemanticCodec> load_semantic_codec(const std::filesystem::path& path);
Loaded<codec::AcousticCodec> load_acoustic_codec(const std::filesystem::path& path);
Loaded<t2s::T2sModel> load_t2s(const std::filesystem::path& path);
Loaded<s2a::S2aModel> load_s2a(const std::filesystem::path& path);
Loaded<duration::DurationModel> load_duration(const std::filesystem::path& path);

}  // namespace mgct::pipeline
