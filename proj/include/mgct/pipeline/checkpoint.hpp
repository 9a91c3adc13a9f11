// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mgct/nn/params.hpp"
#include "mgct/numerics/adamw.hpp"
#include "mgct/numerics/rng.hpp"

namespace mgct::pipeline {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;

  bool operator==(const NamedTensor&) const = default;
};

/// File layout: "MGCT", u32 version, kind, config snapshot, u64 step, RNG
/// (seed, position), tensor index (name, shape, payload byte offset), then
/// the little-endian f32 payloads in index order.
struct Checkpoint {
  std::string kind;
  std::string config;  // Config::dump() of the run
  std::uint64_t step = 0;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_position = 0;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  void add(std::string name, const Shape& shape, std::span<const float> values);
  bool operator==(const Checkpoint&) const = default;
};

/// Writes to a temporary sibling and renames, so an interrupted save never
/// replaces a good file.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters are stored as "param/<name>".
void store_params(Checkpoint& ck, const nn::ParamStore& ps);
/// Every parameter must be present with its exact shape.
void restore_params(const Checkpoint& ck, nn::ParamStore& ps);

/// Adam moments as "adam.m/<name>" and "adam.v/<name>"; the step counter
/// goes to ck.step.
void store_optimizer(Checkpoint& ck, const OptimizerState& opt, const nn::ParamStore& ps);
void restore_optimizer(const Checkpoint& ck, OptimizerState& opt, const nn::ParamStore& ps);

}  // namespace mgct::pipeline
