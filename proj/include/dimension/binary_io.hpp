#pragma once

// Little-endian byte packing for the on-disk formats, independent of host
// byte order.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "dimension/error.hpp"
#include "dimension/volume.hpp"

namespace dimension {

inline constexpr std::uint32_t kEndianTag = 0x01020304u;

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    c = crc32(c, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(c);
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void text(const std::string& s) {
    u64(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void f64s(std::span<const double> v) {
    for (double d : v) f64(d);
  }
  void complex_volume(const ComplexVolume& v) {
    for (const auto& z : v.data()) {
      f64(z.real());
      f64(z.imag());
    }
  }

  /// Appends CRC32 of everything written since `mark`.
  void crc_since(std::size_t mark) {
    u32(crc32_of(std::span<const std::uint8_t>(buf_).subspan(mark)));
  }

  std::size_t size() const { return buf_.size(); }
  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string what) : data_(data), what_(std::move(what)) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> bytes(std::size_t n) { return take(n); }
  std::string text() {
    const auto n = u64();
    auto b = take(n);
    return std::string(b.begin(), b.end());
  }
  std::vector<double> f64s(std::size_t n) {
    require(n * 8);
    std::vector<double> v(n);
    for (auto& d : v) d = f64();
    return v;
  }
  ComplexVolume complex_volume(const Dims& d) {
    require(d.count() * 16);
    ComplexVolume v(d);
    for (auto& z : v.data()) {
      const double re = f64();
      const double im = f64();
      z = cplx(re, im);
    }
    return v;
  }

  /// Reads a CRC32 and checks it against the bytes from `mark` to here.
  void check_crc_since(std::size_t mark, const std::string& section) {
    const auto computed = crc32_of(data_.subspan(mark, pos_ - mark));
    const auto stored = u32();
    if (stored != computed) throw FormatError(what_ + ": CRC mismatch in " + section);
  }

  void require(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError(what_ + ": truncated file (CRC cannot be verified)");
  }

  std::size_t position() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    require(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> data_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline void expect_magic(ByteReader& r, const char (&magic)[5], const std::string& what) {
  auto b = r.bytes(4);
  if (std::memcmp(b.data(), magic, 4) != 0) throw FormatError(what + ": bad magic (expected " + magic + ")");
}

}  // namespace dimension
