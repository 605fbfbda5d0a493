#pragma once

// Little-endian primitive encoding shared by the on-disk formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "bier/errors.hpp"

namespace bier::detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& os) : os_(os) {}

  void raw(std::string_view bytes) { os_.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); }
  void u8(std::uint8_t v) { put(v, 1); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(std::string_view s) {
    u64(s.size());
    raw(s);
  }

  bool ok() const { return static_cast<bool>(os_); }

 private:
  void put(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os_.write(buf, n);
  }
  std::ostream& os_;
};

class ByteReader {
 public:
  ByteReader(std::istream& is, std::string context) : is_(is), context_(std::move(context)) {}

  std::uint64_t offset() const { return offset_; }

  std::string raw(std::size_t n, std::string_view what) {
    std::string s(n, '\0');
    is_.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) truncated(what);
    offset_ += n;
    return s;
  }
  std::uint8_t u8(std::string_view what) { return static_cast<std::uint8_t>(get(1, what)); }
  std::uint32_t u32(std::string_view what) { return static_cast<std::uint32_t>(get(4, what)); }
  std::uint64_t u64(std::string_view what) { return get(8, what); }
  float f32(std::string_view what) { return std::bit_cast<float>(static_cast<std::uint32_t>(get(4, what))); }
  double f64(std::string_view what) { return std::bit_cast<double>(get(8, what)); }
  std::string str(std::string_view what, std::size_t max_len = 1u << 20) {
    const std::uint64_t n = u64(what);
    if (n > max_len) fail(std::string(what) + " length " + std::to_string(n) + " is implausible");
    return raw(static_cast<std::size_t>(n), what);
  }

  bool at_eof() { return is_.peek() == std::char_traits<char>::eof(); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(context_ + ": " + msg + " at byte offset " + std::to_string(offset_), offset_);
  }

 private:
  [[noreturn]] void truncated(std::string_view what) const {
    fail("truncated while reading " + std::string(what));
  }
  std::uint64_t get(int n, std::string_view what) {
    unsigned char buf[8];
    is_.read(reinterpret_cast<char*>(buf), n);
    if (is_.gcount() != n) truncated(what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    offset_ += static_cast<std::uint64_t>(n);
    return v;
  }

  std::istream& is_;
  std::string context_;
  std::uint64_t offset_ = 0;
};

}  // namespace bier::detail
