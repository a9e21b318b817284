#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace came {

/// Little-endian append-only byte buffer.
class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf_.append(reinterpret_cast<const char*>(raw), sizeof(T));
  }
  void put_u64(std::uint64_t v) { put(v); }
  void put_string(std::string_view s) {
    put_u64(s.size());
    buf_.append(s);
  }
  void put_doubles(std::span<const double> v) {
    put_u64(v.size());
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void put_raw(std::string_view bytes) { buf_.append(bytes); }

  const std::string& bytes() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

/// Bounds-checked reader; every short read throws std::runtime_error naming `context`.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string context) : bytes_(bytes), context_(std::move(context)) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::uint64_t get_u64() { return get<std::uint64_t>(); }
  std::string get_string() {
    const std::uint64_t n = get_u64();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<double> get_doubles() {
    const std::uint64_t n = get_u64();
    if (n > (bytes_.size() - pos_) / sizeof(double)) fail("array length exceeds remaining bytes");
    std::vector<double> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  void expect_raw(std::string_view magic) {
    need(magic.size());
    if (bytes_.substr(pos_, magic.size()) != magic) fail("bad magic, expected '" + std::string(magic) + "'");
    pos_ += magic.size();
  }
  bool done() const { return pos_ == bytes_.size(); }
  void expect_done() {
    if (!done()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw std::runtime_error(context_ + ": " + why + " (offset " + std::to_string(pos_) + ")");
  }

 private:
  void need(std::uint64_t n) {
    if (n > bytes_.size() - pos_) fail("truncated");
  }

  std::string_view bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace came
