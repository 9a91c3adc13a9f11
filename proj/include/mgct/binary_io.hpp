// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Little-endian primitives for the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mgct/errors.hpp"

namespace mgct::io {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof v);
  }
  return v;
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_f32s(std::ostream& os, std::span<const float> xs) {
  for (float x : xs) put_u32(os, std::bit_cast<std::uint32_t>(x));
}

inline void put_bytes(std::ostream& os, std::string_view s) {
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& is, void* dst, std::size_t n, const char* what) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw FormatError(std::string("truncated ") + what);
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  std::uint32_t v;
  read_exact(is, &v, sizeof v, what);
  return to_little(v);
}

inline std::uint64_t get_u64(std::istream& is, const char* what) {
  std::uint64_t v;
  read_exact(is, &v, sizeof v, what);
  return to_little(v);
}

inline std::vector<float> get_f32s(std::istream& is, std::size_t n, const char* what) {
  std::vector<float> out(n);
  for (auto& x : out) x = std::bit_cast<float>(get_u32(is, what));
  return out;
}

inline std::string get_bytes(std::istream& is, std::size_t n, const char* what) {
  std::string s(n, '\0');
  read_exact(is, s.data(), n, what);
  return s;
}

}  // namespace mgct::io
