#pragma once

// Little-endian binary containers.
//
//   FRG1 matrix:   "FRG1" | u16 version=1 | u32 dim | u64 count | count*dim f32
//   FRGW weights:  "FRGW" | u16 version=1 | u32 d_visual | u32 d_token
//                  | d_token*d_visual f32 | d_token f32
//
// All multi-byte fields are little-endian regardless of host order.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairrag/error.hpp"

namespace fairrag::io {

inline constexpr std::array<char, 4> kMatrixMagic{'F', 'R', 'G', '1'};
inline constexpr std::uint16_t kMatrixVersion = 1;
inline constexpr std::size_t kMatrixHeaderBytes = 4 + 2 + 4 + 8;

namespace detail {

template <class T>
void put_le(std::vector<char>& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.insert(out.end(), bytes.begin(), bytes.end());
}

template <class T>
T get_le(const char* in) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), in, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

/// Sequential reader over an in-memory byte buffer; short reads raise TruncatedFile.
class ByteReader {
 public:
  ByteReader(std::span<const char> bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  template <class T>
  T read() {
    require(sizeof(T));
    T value = detail::get_le<T>(bytes_.data() + pos_);
    pos_ += sizeof(T);
    return value;
  }

  std::span<const char> take(std::size_t n) {
    require(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  void read_floats(std::span<float> out) {
    const std::size_t n = out.size() * sizeof(float);
    require(n);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), bytes_.data() + pos_, n);
    } else {
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = detail::get_le<float>(bytes_.data() + pos_ + i * sizeof(float));
    }
    pos_ += n;
  }

  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }
  [[nodiscard]] const std::string& source() const { return source_; }

 private:
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorCode::TruncatedFile,
                  source_ + ": needed " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ", file has " + std::to_string(bytes_.size()));
  }

  std::span<const char> bytes_;
  std::size_t pos_ = 0;
  std::string source_;
};

inline void append_floats(std::vector<char>& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    const auto* p = reinterpret_cast<const char*>(values.data());
    out.insert(out.end(), p, p + values.size_bytes());
  } else {
    for (float v : values) detail::put_le(out, v);
  }
}

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(size);
  if (size > 0 && !in.read(bytes.data(), static_cast<std::streamsize>(size)))
    throw Error(ErrorCode::Io, "failed reading " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

/// Row-major f32 matrix as stored in an FRG1 file.
struct Matrix {
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  std::vector<float> data;

  [[nodiscard]] std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data).subspan(i * dim, dim);
  }
};

inline std::vector<char> encode_matrix(std::uint32_t dim, std::uint64_t count,
                                       std::span<const float> data) {
  if (data.size() != dim * count)
    throw Error(ErrorCode::DimensionMismatch, "matrix payload does not match dim*count");
  std::vector<char> out;
  out.reserve(kMatrixHeaderBytes + data.size_bytes());
  out.insert(out.end(), kMatrixMagic.begin(), kMatrixMagic.end());
  detail::put_le(out, kMatrixVersion);
  detail::put_le(out, dim);
  detail::put_le(out, count);
  append_floats(out, data);
  return out;
}

inline Matrix decode_matrix(std::span<const char> bytes, const std::string& source) {
  ByteReader reader(bytes, source);
  auto magic = reader.take(4);
  if (!std::equal(magic.begin(), magic.end(), kMatrixMagic.begin()))
    throw Error(ErrorCode::BadMagic, source + ": expected FRG1 header");
  const auto version = reader.read<std::uint16_t>();
  if (version != kMatrixVersion)
    throw Error(ErrorCode::VersionMismatch,
                source + ": unsupported version " + std::to_string(version));
  Matrix m;
  m.dim = reader.read<std::uint32_t>();
  m.count = reader.read<std::uint64_t>();
  if (m.dim == 0) throw Error(ErrorCode::Parse, source + ": dim must be positive");
  if (m.count > reader.remaining() / sizeof(float) / m.dim)
    throw Error(ErrorCode::TruncatedFile,
                source + ": header declares " + std::to_string(m.count) + "x" +
                    std::to_string(m.dim) + " floats but only " +
                    std::to_string(reader.remaining()) + " payload bytes remain");
  m.data.resize(static_cast<std::size_t>(m.count) * m.dim);
  reader.read_floats(m.data);
  if (reader.remaining() != 0)
    throw Error(ErrorCode::Parse, source + ": trailing bytes after matrix payload");
  return m;
}

inline void write_matrix(const std::filesystem::path& path, std::uint32_t dim, std::uint64_t count,
                         std::span<const float> data) {
  write_file(path, encode_matrix(dim, count, data));
}

inline Matrix read_matrix(const std::filesystem::path& path) {
  return decode_matrix(read_file(path), path.string());
}

}  // namespace fairrag::io
