#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "smoke/params.hpp"

namespace smoke {

// Model snapshot format (documented in docs/checkpoint-format.md):
//
//   8 bytes   magic "SMOKSNP1"
//   u32       parameter count P
//   P records:
//     u32     id length L
//     L bytes id (UTF-8)
//     u8      dtype: 1 = float32, 2 = float64
//     u32 x4  shape n, c, h, w
//   P payloads, in record order:
//     numel * sizeof(dtype) raw little-endian values
//
// All integers little-endian.

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

template <class T>
constexpr std::uint8_t dtype_code() {
  if constexpr (sizeof(T) == 4)
    return 1;
  else
    return 2;
}

}  // namespace detail

inline constexpr char kSnapshotMagic[8] = {'S', 'M', 'O', 'K',
                                           'S', 'N', 'P', '1'};

template <class T>
void save_snapshot(const ParamStore<T>& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw std::runtime_error("save_snapshot: cannot open " + path);
  os.write(kSnapshotMagic, 8);
  detail::write_u32(os, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    detail::write_u32(os, static_cast<std::uint32_t>(p.id.size()));
    os.write(p.id.data(), static_cast<std::streamsize>(p.id.size()));
    const std::uint8_t dt = detail::dtype_code<T>();
    os.write(reinterpret_cast<const char*>(&dt), 1);
    const Shape s = p.tensor.shape();
    detail::write_u32(os, static_cast<std::uint32_t>(s.n));
    detail::write_u32(os, static_cast<std::uint32_t>(s.c));
    detail::write_u32(os, static_cast<std::uint32_t>(s.h));
    detail::write_u32(os, static_cast<std::uint32_t>(s.w));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params[i].tensor.values();
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  if (!os)
    throw std::runtime_error("save_snapshot: write failed for " + path);
}

/// Loads a snapshot into an existing store. Every parameter in the file must
/// exist with an identical shape and dtype; ids present in the store but not
/// in the file are an error (the snapshot is a full model image).
template <class T>
void load_snapshot(ParamStore<T>& params, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw std::runtime_error("load_snapshot: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kSnapshotMagic, 8) != 0)
    throw std::runtime_error("load_snapshot: bad magic in " + path);
  const std::uint32_t count = detail::read_u32(is);
  if (count != params.size())
    throw std::runtime_error(
        "load_snapshot: snapshot has " + std::to_string(count) +
        " parameters, model has " + std::to_string(params.size()));
  struct Rec {
    std::string id;
    Shape shape;
  };
  std::vector<Rec> recs(count);
  for (auto& r : recs) {
    const std::uint32_t len = detail::read_u32(is);
    r.id.resize(len);
    is.read(r.id.data(), len);
    std::uint8_t dt = 0;
    is.read(reinterpret_cast<char*>(&dt), 1);
    if (dt != detail::dtype_code<T>())
      throw std::runtime_error("load_snapshot: dtype mismatch for '" + r.id +
                               "'");
    r.shape.n = static_cast<int>(detail::read_u32(is));
    r.shape.c = static_cast<int>(detail::read_u32(is));
    r.shape.h = static_cast<int>(detail::read_u32(is));
    r.shape.w = static_cast<int>(detail::read_u32(is));
  }
  for (const auto& r : recs) {
    if (!params.contains(r.id))
      throw std::runtime_error("load_snapshot: model has no parameter '" +
                               r.id + "'");
    auto& p = params.at(r.id);
    if (!(p.tensor.shape() == r.shape))
      throw std::runtime_error("load_snapshot: shape mismatch for '" + r.id +
                               "': file " + r.shape.str() + ", model " +
                               p.tensor.shape().str());
    is.read(reinterpret_cast<char*>(p.tensor.data()),
            static_cast<std::streamsize>(p.tensor.numel() * sizeof(T)));
  }
  if (!is)
    throw std::runtime_error("load_snapshot: truncated file " + path);
}

}  // namespace smoke
