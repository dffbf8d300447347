#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace sharpseg::io {

/// Appends values to `out` as little-endian bytes.
template <class T>
void append_le(std::vector<unsigned char>& out, std::span<const T> values) {
  static_assert(std::is_arithmetic_v<T>);
  const std::size_t start = out.size();
  out.resize(start + values.size() * sizeof(T));
  unsigned char* dst = out.data() + start;
  for (const T& v : values) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    std::memcpy(dst, bytes, sizeof(T));
    dst += sizeof(T);
  }
}

template <class T>
std::vector<T> read_le(const unsigned char* src, std::size_t count) {
  std::vector<T> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, src + k * sizeof(T), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    std::memcpy(&out[k], bytes, sizeof(T));
  }
  return out;
}

/// Whole-file helpers; throw Error(Io) on failure.
std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace sharpseg::io
