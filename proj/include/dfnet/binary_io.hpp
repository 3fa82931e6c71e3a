#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "dfnet/error.hpp"

namespace dfnet::binio {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

inline void put_i32(std::ostream& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

/// Returns false on clean EOF before any byte; throws on a partial read.
inline bool try_get_u32(std::istream& in, std::uint32_t& v, const char* what) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  const auto got = in.gcount();
  if (got == 0) return false;
  if (got != 4) throw DataError(std::string("truncated ") + what);
  v = std::uint32_t(bytes[0]) | (std::uint32_t(bytes[1]) << 8) | (std::uint32_t(bytes[2]) << 16) |
      (std::uint32_t(bytes[3]) << 24);
  return true;
}

inline std::uint32_t get_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  if (!try_get_u32(in, v, what)) throw DataError(std::string("truncated ") + what);
  return v;
}

inline std::int32_t get_i32(std::istream& in, const char* what) {
  return static_cast<std::int32_t>(get_u32(in, what));
}

inline float get_f32(std::istream& in, const char* what) { return std::bit_cast<float>(get_u32(in, what)); }

inline std::string get_bytes(std::istream& in, std::size_t n, const char* what) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw DataError(std::string("truncated ") + what);
  return s;
}

}  // namespace dfnet::binio
