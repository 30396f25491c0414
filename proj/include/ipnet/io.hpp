#pragma once

// Binary serialization primitives shared by the dataset and checkpoint
// formats: explicit little-endian encoding (portable across hosts),
// CRC-64/XZ for file integrity, and SHA-1 for content-addressing files
// in run manifests (git blob convention).

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ipnet/errors.hpp"

namespace ipnet {

// ---------------------------------------------------------------------------
// CRC-64/XZ (reflected poly 0xC96C5795D7870F42, init/xorout all-ones).
// Check value: crc64("123456789") == 0x995DC9BBDF1939FA.
// ---------------------------------------------------------------------------

namespace detail {
inline const std::uint64_t* crc64_table() {
  static const auto table = [] {
    static std::uint64_t t[256];
    for (std::uint64_t i = 0; i < 256; ++i) {
      std::uint64_t c = i;
      for (int b = 0; b < 8; ++b)
        c = (c & 1) ? (c >> 1) ^ 0xC96C5795D7870F42ULL : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  return table;
}
}  // namespace detail

inline std::uint64_t crc64(std::span<const std::uint8_t> data) {
  const std::uint64_t* table = detail::crc64_table();
  std::uint64_t crc = ~0ULL;
  for (std::uint8_t byte : data)
    crc = table[(crc ^ byte) & 0xFF] ^ (crc >> 8);
  return ~crc;
}

// ---------------------------------------------------------------------------
// SHA-1 and the git blob content hash.
// ---------------------------------------------------------------------------

class Sha1 {
 public:
  void update(std::span<const std::uint8_t> data) {
    total_bytes_ += data.size();
    for (std::uint8_t byte : data) {
      block_[block_len_++] = byte;
      if (block_len_ == 64) {
        process_block();
        block_len_ = 0;
      }
    }
  }

  /// Finalizes and returns the 40-char lowercase hex digest.
  std::string hex_digest() {
    std::uint64_t bit_len = total_bytes_ * 8;
    std::uint8_t pad = 0x80;
    update({&pad, 1});
    std::uint8_t zero = 0;
    while (block_len_ != 56) update({&zero, 1});
    std::uint8_t len_be[8];
    for (int i = 0; i < 8; ++i)
      len_be[i] = static_cast<std::uint8_t>(bit_len >> (56 - 8 * i));
    update({len_be, 8});
    char out[41];
    for (int i = 0; i < 5; ++i)
      std::snprintf(out + 8 * i, 9, "%08x", h_[i]);
    return std::string(out, 40);
  }

 private:
  void process_block() {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(block_[4 * i]) << 24) |
             (std::uint32_t(block_[4 * i + 1]) << 16) |
             (std::uint32_t(block_[4 * i + 2]) << 8) |
             std::uint32_t(block_[4 * i + 3]);
    for (int i = 16; i < 80; ++i)
      w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5A827999;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDC;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6;
      }
      std::uint32_t tmp = rotl(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rotl(b, 30);
      b = a;
      a = tmp;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
  }

  static std::uint32_t rotl(std::uint32_t x, int k) {
    return (x << k) | (x >> (32 - k));
  }

  std::uint32_t h_[5] = {0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476,
                         0xC3D2E1F0};
  std::uint8_t block_[64];
  std::size_t block_len_ = 0;
  std::uint64_t total_bytes_ = 0;
};

/// Git-style content hash: sha1("blob <size>\0" + bytes).
inline std::string git_blob_sha1(std::span<const std::uint8_t> data) {
  Sha1 h;
  std::string header = "blob " + std::to_string(data.size());
  header.push_back('\0');
  h.update({reinterpret_cast<const std::uint8_t*>(header.data()),
            header.size()});
  h.update(data);
  return h.hex_digest();
}

// ---------------------------------------------------------------------------
// Little-endian byte buffer codec.
// ---------------------------------------------------------------------------

class ByteWriter {
 public:
  void put_u8(std::uint8_t v) { buf_.push_back(v); }

  void put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
      buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
      buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void put_i64(std::int64_t v) { put_u64(static_cast<std::uint64_t>(v)); }

  void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

  void put_bytes(std::span<const std::uint8_t> b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
  }

  void put_magic(const char (&magic)[9]) {
    buf_.insert(buf_.end(), magic, magic + 8);
  }

  const std::vector<std::uint8_t>& bytes() const { return buf_; }

  /// Appends CRC-64 of everything written so far.
  void finish_with_crc() { put_u64(crc64(buf_)); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t get_u8() {
    need(1);
    return data_[pos_++];
  }

  std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t get_u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::int64_t get_i64() { return static_cast<std::int64_t>(get_u64()); }

  double get_f64() { return std::bit_cast<double>(get_u64()); }

  void get_magic(char out[8]) {
    need(8);
    std::memcpy(out, data_.data() + pos_, 8);
    pos_ += 8;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size())
      throw FormatError("file truncated: need " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_));
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Whole-file helpers. Files carry a trailing CRC-64 over all preceding bytes
// (header included), so any single corrupted byte is detected on load.
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw IoError("cannot open for reading: " + path.string());
  std::fseek(f, 0, SEEK_END);
  long size = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<std::uint8_t> data(static_cast<std::size_t>(size < 0 ? 0 : size));
  if (!data.empty() && std::fread(data.data(), 1, data.size(), f) != data.size()) {
    std::fclose(f);
    throw IoError("short read: " + path.string());
  }
  std::fclose(f);
  return data;
}

inline void write_file(const std::filesystem::path& path,
                       std::span<const std::uint8_t> data) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw IoError("cannot open for writing: " + path.string());
  if (!data.empty() && std::fwrite(data.data(), 1, data.size(), f) != data.size()) {
    std::fclose(f);
    throw IoError("short write: " + path.string());
  }
  std::fclose(f);
}

/// Verifies the trailing CRC-64 and returns the covered bytes.
inline std::span<const std::uint8_t> check_crc_trailer(
    std::span<const std::uint8_t> file) {
  if (file.size() < 8) throw FormatError("file too small for CRC trailer");
  auto payload = file.subspan(0, file.size() - 8);
  ByteReader tail(file.subspan(file.size() - 8));
  std::uint64_t stored = tail.get_u64();
  std::uint64_t actual = crc64(payload);
  if (stored != actual) throw ChecksumError("CRC-64 mismatch");
  return payload;
}

inline std::string file_sha1(const std::filesystem::path& path) {
  auto data = read_file(path);
  return git_blob_sha1(data);
}

}  // namespace ipnet
