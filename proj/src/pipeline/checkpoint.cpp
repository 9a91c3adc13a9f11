// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/pipeline/checkpoint.hpp"

#include <fstream>

#include "mgct/binary_io.hpp"
#include "mgct/errors.hpp"

namespace mgct::pipeline {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'C', 'T'};
constexpr std::uint32_t kMaxRank = 8;

void put_string(std::ostream& os, std::string_view s) {
  io::put_u64(os, s.size());
  io::put_bytes(os, s);
}

std::string get_string(std::istream& is, std::uint64_t limit, const char* what) {
  const std::uint64_t n = io::get_u64(is, what);
  if (n > limit) throw FormatError(std::string("implausible length for ") + what);
  return io::get_bytes(is, n, what);
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void Checkpoint::add(std::string name, const Shape& shape, std::span<const float> values) {
  MGCT_EXPECT(numel(shape) == values.size(), "Checkpoint::add: shape does not match values");
  MGCT_EXPECT(find(name) == nullptr, "Checkpoint::add: duplicate tensor '" + name + "'");
  tensors.push_back({std::move(name), shape, std::vector<float>(values.begin(), values.end())});
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint " + tmp.string());
    io::put_bytes(os, std::string_view(kMagic, 4));
    io::put_u32(os, kCheckpointVersion);
    put_string(os, ck.kind);
    put_string(os, ck.config);
    io::put_u64(os, ck.step);
    io::put_u64(os, ck.rng_seed);
    io::put_u64(os, ck.rng_position);
    io::put_u64(os, ck.tensors.size());
    std::uint64_t offset = 0;
    for (const auto& t : ck.tensors) {
      put_string(os, t.name);
      io::put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
      for (std::size_t d : t.shape) io::put_u64(os, d);
      io::put_u64(os, offset);
      offset += 4 * t.values.size();
    }
    for (const auto& t : ck.tensors) io::put_f32s(os, t.values);
    if (!os.flush()) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  const std::uint64_t file_size = std::filesystem::file_size(path);
  if (io::get_bytes(is, 4, "checkpoint magic") != std::string_view(kMagic, 4))
    throw FormatError(path.string() + " is not an mgct checkpoint");
  const std::uint32_t version = io::get_u32(is, "checkpoint version");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint " + path.string() + " has format version " +
                      std::to_string(version) + ", this build reads version " +
                      std::to_string(kCheckpointVersion));
  Checkpoint ck;
  ck.kind = get_string(is, file_size, "checkpoint kind");
  ck.config = get_string(is, file_size, "checkpoint config");
  ck.step = io::get_u64(is, "checkpoint step");
  ck.rng_seed = io::get_u64(is, "checkpoint rng");
  ck.rng_position = io::get_u64(is, "checkpoint rng");
  const std::uint64_t count = io::get_u64(is, "tensor count");
  if (count > file_size) throw FormatError("implausible tensor count in " + path.string());
  std::vector<std::uint64_t> offsets;
  std::uint64_t expected = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = get_string(is, file_size, "tensor name");
    const std::uint32_t rank = io::get_u32(is, "tensor rank");
    if (rank > kMaxRank) throw FormatError("tensor '" + t.name + "' has rank " + std::to_string(rank));
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.shape.push_back(io::get_u64(is, "tensor shape"));
      n *= t.shape.back();
      if (n > file_size) throw FormatError("tensor '" + t.name + "' larger than the file");
    }
    if (io::get_u64(is, "tensor offset") != expected)
      throw FormatError("tensor '" + t.name + "' payload offset out of order");
    expected += 4 * n;
    ck.tensors.push_back(std::move(t));
  }
  if (static_cast<std::uint64_t>(is.tellg()) + expected != file_size)
    throw FormatError("checkpoint " + path.string() + " payload size mismatch");
  for (auto& t : ck.tensors) t.values = io::get_f32s(is, numel(t.shape), "tensor payload");
  return ck;
}

void store_params(Checkpoint& ck, const nn::ParamStore& ps) {
  for (std::size_t i = 0; i < ps.size(); ++i)
    ck.add("param/" + ps.names()[i], ps.tensors()[i].shape(), ps.tensors()[i].data());
}

void restore_params(const Checkpoint& ck, nn::ParamStore& ps) {
  std::size_t stored = 0;
  for (const auto& t : ck.tensors) stored += t.name.starts_with("param/");
  MGCT_EXPECT(stored == ps.size(), "checkpoint holds " + std::to_string(stored) +
                                       " parameters, model has " + std::to_string(ps.size()));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const NamedTensor* t = ck.find("param/" + ps.names()[i]);
    MGCT_EXPECT(t != nullptr, "checkpoint lacks parameter '" + ps.names()[i] + "'");
    Tensor& p = ps.tensors()[i];
    MGCT_EXPECT(t->shape == p.shape(), "parameter '" + ps.names()[i] + "' is " +
                                           shape_str(t->shape) + " in the checkpoint, " +
                                           shape_str(p.shape()) + " in the model");
    std::ranges::copy(t->values, p.mutable_data().begin());
  }
}

void store_optimizer(Checkpoint& ck, const OptimizerState& opt, const nn::ParamStore& ps) {
  ck.step = static_cast<std::uint64_t>(opt.step);
  if (opt.m.empty()) return;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ck.add("adam.m/" + ps.names()[i], ps.tensors()[i].shape(), opt.m[i]);
    ck.add("adam.v/" + ps.names()[i], ps.tensors()[i].shape(), opt.v[i]);
  }
}

void restore_optimizer(const Checkpoint& ck, OptimizerState& opt, const nn::ParamStore& ps) {
  opt.step = static_cast<std::int64_t>(ck.step);
  opt.m.clear();
  opt.v.clear();
  if (ps.size() == 0 || ck.find("adam.m/" + ps.names()[0]) == nullptr) return;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const NamedTensor* m = ck.find("adam.m/" + ps.names()[i]);
    const NamedTensor* v = ck.find("adam.v/" + ps.names()[i]);
    MGCT_EXPECT(m && v && m->shape == ps.tensors()[i].shape() && v->shape == m->shape,
                "checkpoint optimizer state incomplete for '" + ps.names()[i] + "'");
    opt.m.push_back(m->values);
    opt.v.push_back(v->values);
  }
}

}  // namespace mgct::pipeline
