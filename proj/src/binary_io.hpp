#pragma once

// Little-endian primitives shared by the feature and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "ptmvqa/errors.hpp"

namespace ptmvqa::detail {

template <typename U>
void put_le(std::ostream& out, U value) {
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  out.write(buf, sizeof(U));
}

inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_str16(std::ostream& out, std::string_view s) {
  if (s.size() > UINT16_MAX) throw ValidationError("string too long for u16 length prefix: " + std::string(s.substr(0, 32)));
  put_le(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

// Bounds-checked cursor over an in-memory file image.
class Reader {
 public:
  Reader(const std::string& bytes, std::string context) : bytes_(bytes), context_(std::move(context)) {}

  template <typename U>
  U le(const char* field) {
    need(sizeof(U), field);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }

  float f32(const char* field) { return std::bit_cast<float>(le<std::uint32_t>(field)); }
  double f64(const char* field) { return std::bit_cast<double>(le<std::uint64_t>(field)); }

  std::string str16(const char* field) {
    const auto n = le<std::uint16_t>(field);
    need(n, field);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string raw(std::size_t n, const char* field) {
    need(n, field);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t size() const { return bytes_.size(); }
  const std::string& context() const { return context_; }

  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(FormatError::Kind::kTruncated,
                        context_ + ": truncated " + field + " at byte " + std::to_string(pos_));
    }
  }

 private:
  const std::string& bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::string& path);

}  // namespace ptmvqa::detail
