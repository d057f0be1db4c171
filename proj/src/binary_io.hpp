#pragma once

// Little-endian field readers/writers shared by the on-disk formats.

#include "imgseek/core.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace imgseek::detail {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

template <typename T>
void writePod(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T readPod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::Io, "unexpected end of file");
  return value;
}

inline void writeString(std::ostream& out, const std::string& s) {
  writePod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string readString(std::istream& in) {
  const auto n = readPod<std::uint32_t>(in);
  if (n > (1u << 24)) throw Error(ErrorCode::Io, "string field too long");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw Error(ErrorCode::Io, "unexpected end of file");
  return s;
}

inline void expectMagic(std::istream& in, const char (&magic)[5], const std::string& what) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0) throw Error(ErrorCode::Io, what + ": bad magic bytes");
}

}  // namespace imgseek::detail
