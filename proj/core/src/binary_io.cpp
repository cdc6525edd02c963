#include "acl/binary_io.hpp"

#include <fstream>
#include <system_error>

#include <fmt/format.h>

#include "acl/errors.hpp"

namespace acl::io {

void ByteReader::expect_magic(std::string_view tag) {
  require(tag.size(), 1);
  const std::string_view found(bytes_.data() + pos_, tag.size());
  if (found != tag) {
    throw FormatError(fmt::format("{}: bad magic, expected \"{}\"", section_, tag));
  }
  pos_ += tag.size();
}

std::uint32_t ByteReader::u32() { return static_cast<std::uint32_t>(take(4)); }
std::uint64_t ByteReader::u64() { return take(8); }

void ByteReader::require(std::uint64_t count, std::uint64_t width) {
  if (width != 0 && count > remaining() / width) {
    throw FormatError(fmt::format("{}: truncated (needs {} x {} bytes, {} left)", section_, count,
                                  width, remaining()));
  }
}

void ByteReader::expect_end() {
  if (remaining() != 0) {
    throw FormatError(fmt::format("{}: {} unexpected trailing bytes", section_, remaining()));
  }
}

std::uint64_t ByteReader::take(int n) {
  require(static_cast<std::uint64_t>(n), 1);
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
  }
  pos_ += n;
  return v;
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError(fmt::format("error reading {}", path.string()));
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write {}", tmp.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw DataError(fmt::format("error writing {}", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError(fmt::format("cannot move {} into place", path.string()));
  }
}

}  // namespace acl::io
