#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "skelsplit/errors.hpp"

// Little-endian primitives shared by the stack, sequence and checkpoint formats.
namespace skelsplit::binary {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw ParseError("unexpected end of binary data");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline void write_f32(std::ostream& out, float v) { write_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline float read_f32(std::istream& in) { return std::bit_cast<float>(read_u32(in)); }

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& what) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) throw ParseError("not a " + what + " file (bad magic)");
}

/// FNV-1a 64-bit, used for manifest checksums.
inline std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t hash = 0xcbf29ce484222325ull) {
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

}  // namespace skelsplit::binary
