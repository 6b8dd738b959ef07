// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fwqa/common.hpp"
#include "fwqa/params.hpp"

namespace fwqa {

// Checkpoint layout (little-endian):
//   magic "FWCK", u32 version = 1, u32 parameter count, then per parameter
//   u16 name length, UTF-8 name, u8 rank, u32 dim..., float64 data row-major.
// Values are stored as float64 regardless of the in-memory scalar type.

namespace detail {

inline void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double v) {
  static_assert(sizeof(double) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

/// Write a checkpoint atomically (temp file + rename).
template <typename Scalar>
void save_checkpoint(const ParamRegistry<Scalar>& params, const std::string& path) {
  namespace fs = std::filesystem;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + tmp);
    os.write("FWCK", 4);
    detail::put_u32(os, 1);
    detail::put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto* p : params) {
      if (p->name.size() > 0xffff) throw ArgumentError("parameter name too long: " + p->name);
      detail::put_u16(os, static_cast<std::uint16_t>(p->name.size()));
      os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
      const unsigned char rank = p->rank == 1 ? 1 : 2;
      os.write(reinterpret_cast<const char*>(&rank), 1);
      if (rank == 1) {
        detail::put_u32(os, static_cast<std::uint32_t>(p->value.rows()));
      } else {
        detail::put_u32(os, static_cast<std::uint32_t>(p->value.rows()));
        detail::put_u32(os, static_cast<std::uint32_t>(p->value.cols()));
      }
      for (Eigen::Index i = 0; i < p->value.rows(); ++i)
        for (Eigen::Index j = 0; j < p->value.cols(); ++j)
          detail::put_f64(os, static_cast<double>(p->value(i, j)));
    }
    if (!os) throw IoError("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

/// Load a checkpoint into an existing registry; every stored parameter must
/// match a registered one by name and shape, and vice versa.
template <typename Scalar>
void load_checkpoint(ParamRegistry<Scalar>& params, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "FWCK")
    throw IoError("not a checkpoint file (bad magic): " + path);
  const std::uint32_t version = detail::get_u32(is);
  if (version != 1)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = detail::get_u32(is);
  if (count != params.size())
    throw InvariantError("checkpoint has " + std::to_string(count) +
                         " parameters, model expects " + std::to_string(params.size()));
  std::size_t restored = 0;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint16_t name_len = detail::get_u16(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    unsigned char rank = 0;
    is.read(reinterpret_cast<char*>(&rank), 1);
    std::uint32_t rows = detail::get_u32(is);
    std::uint32_t cols = rank == 1 ? 1u : detail::get_u32(is);
    if (!is) throw IoError("truncated checkpoint: " + path);
    Parameter<Scalar>* p = params.find(name);
    if (p == nullptr) throw InvariantError("checkpoint parameter not in model: " + name);
    if (p->value.rows() != static_cast<Eigen::Index>(rows) ||
        p->value.cols() != static_cast<Eigen::Index>(cols))
      throw InvariantError("checkpoint shape of " + name + " is " +
                           shape_str(rows, cols) + ", model expects " +
                           shape_str(p->value));
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j)
        p->value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            static_cast<Scalar>(detail::get_f64(is));
    ++restored;
  }
  if (!is) throw IoError("truncated checkpoint: " + path);
  if (restored != params.size())
    throw InvariantError("checkpoint restored " + std::to_string(restored) +
                         " of " + std::to_string(params.size()) + " parameters");
}

}  // namespace fwqa
