#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace acl::io {

// Little-endian byte sink.
class ByteWriter {
 public:
  void magic(std::string_view tag) { bytes_.append(tag); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }

  const std::string& bytes() const { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string bytes_;
};

// Little-endian byte source. Every read names the section it belongs to so
// truncation errors point at the damaged part of the file.
class ByteReader {
 public:
  explicit ByteReader(std::span<const char> bytes) : bytes_(bytes) {}

  void section(std::string name) { section_ = std::move(name); }
  const std::string& section() const { return section_; }

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  // Throws unless `count * width` bytes are still available.
  void require(std::uint64_t count, std::uint64_t width);
  void expect_end();

 private:
  std::uint64_t take(int n);
  std::span<const char> bytes_;
  std::size_t pos_ = 0;
  std::string section_ = "header";
};

std::vector<char> read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace acl::io
