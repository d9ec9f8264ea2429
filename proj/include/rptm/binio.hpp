#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string_view>

#include "rptm/common.hpp"

namespace rptm {

// Little-endian primitives for the binary file formats; explicit byte
// order so files are identical on any host.

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u16(std::ostream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  write_bytes(out, b, 2);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(out, b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(out, b, 8);
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  __builtin_memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

inline void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  __builtin_memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

inline bool read_bytes(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

inline std::uint16_t read_u16(std::istream& in, const char* what) {
  unsigned char b[2];
  if (!read_bytes(in, b, 2)) throw CorruptError(std::string("truncated ") + what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!read_bytes(in, b, 4)) throw CorruptError(std::string("truncated ") + what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!read_bytes(in, b, 8)) throw CorruptError(std::string("truncated ") + what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double read_f64(std::istream& in, const char* what) {
  std::uint64_t bits = read_u64(in, what);
  double v;
  __builtin_memcpy(&v, &bits, 8);
  return v;
}

inline float read_f32(std::istream& in, const char* what) {
  std::uint32_t bits = read_u32(in, what);
  float v;
  __builtin_memcpy(&v, &bits, 4);
  return v;
}

inline void expect_magic(std::istream& in, std::string_view magic, const char* what) {
  char buf[16];
  if (magic.size() > sizeof(buf) || !read_bytes(in, buf, magic.size()) ||
      std::string_view(buf, magic.size()) != magic)
    throw CorruptError(std::string("bad magic in ") + what);
}

}  // namespace rptm
