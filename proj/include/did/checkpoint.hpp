#pragma once

// DIDC checkpoint container, all integers little-endian:
//   magic "DIDC" | u32 version=1 | u64 step | u32 config-length | config text
//   | entries until EOF: u32 name-length, name, u32 rank, u32 dims..., f64 payload
// The config text is stored verbatim so a rewrite is byte-identical.

#include <did/data.hpp>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace did {

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

struct Checkpoint {
  std::uint64_t step = 0;
  std::string config_text;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

namespace detail {

inline void put_f64_le(std::string& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_le<std::uint64_t>(buf, bits);
}

template <typename T>
T get_le_cp(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw FormatError("didc: size mismatch, truncated file");
  return get_le<T>(buf, pos);
}

inline double get_f64_le(const std::string& buf, std::size_t& pos) {
  if (pos + 8 > buf.size()) throw FormatError("didc: size mismatch, truncated payload");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
  pos += 8;
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const Checkpoint& cp) {
  std::string buf;
  buf += "DIDC";
  detail::put_le<std::uint32_t>(buf, 1);
  detail::put_le<std::uint64_t>(buf, cp.step);
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(cp.config_text.size()));
  buf += cp.config_text;
  for (const auto& t : cp.tensors) {
    if (t.data.size() != t.numel()) throw FormatError("didc: size mismatch for tensor " + t.name);
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(t.name.size()));
    buf += t.name;
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) detail::put_le<std::uint32_t>(buf, d);
    for (double v : t.data) detail::put_f64_le(buf, v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("didc: cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("didc: write failed: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("didc: cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 4 || buf.compare(0, 4, "DIDC") != 0) throw FormatError("didc: bad magic");
  std::size_t pos = 4;
  const auto version = detail::get_le_cp<std::uint32_t>(buf, pos);
  if (version != 1) throw FormatError("didc: unsupported version " + std::to_string(version));
  Checkpoint cp;
  cp.step = detail::get_le_cp<std::uint64_t>(buf, pos);
  const auto clen = detail::get_le_cp<std::uint32_t>(buf, pos);
  if (pos + clen > buf.size()) throw FormatError("didc: size mismatch, truncated config");
  cp.config_text = buf.substr(pos, clen);
  pos += clen;
  while (pos < buf.size()) {
    NamedTensor t;
    const auto nlen = detail::get_le_cp<std::uint32_t>(buf, pos);
    if (pos + nlen > buf.size()) throw FormatError("didc: size mismatch, truncated name");
    t.name = buf.substr(pos, nlen);
    pos += nlen;
    const auto rank = detail::get_le_cp<std::uint32_t>(buf, pos);
    for (std::uint32_t i = 0; i < rank; ++i)
      t.dims.push_back(detail::get_le_cp<std::uint32_t>(buf, pos));
    t.data.resize(t.numel());
    for (auto& v : t.data) v = detail::get_f64_le(buf, pos);
    for (const auto& existing : cp.tensors)
      if (existing.name == t.name) throw FormatError("didc: duplicate tensor name " + t.name);
    cp.tensors.push_back(std::move(t));
  }
  return cp;
}

}  // namespace did
