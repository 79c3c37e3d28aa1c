// SPDX-License-Identifier: Apache-2.0
//
// EMB1 binary tensor files.
//
//   offset  size        field
//   0       4           ASCII "EMB1"
//   4       1           version (1)
//   5       1           dtype code (1 = float32 little-endian)
//   6       2           reserved, zero
//   8       4           ndim, uint32 little-endian
//   12      8 * ndim    dims, uint64 little-endian
//   ...     4 * prod    row-major float32 little-endian payload
#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>
#include <vector>

#include "hn3d/error.hpp"
#include "hn3d/numkit.hpp"

namespace hn3d {

namespace fs = std::filesystem;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  std::uint64_t element_count() const {
    return std::accumulate(dims.begin(), dims.end(), std::uint64_t{1},
                           [](std::uint64_t a, std::uint64_t b) { return a * b; });
  }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

using Point3 = std::array<Real, 3>;

struct PointCloud {
  std::vector<Point3> points;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

inline constexpr std::size_t kMinCloudPoints = 8;
inline constexpr Real kEmbeddingNormTolerance = 1e-4;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline std::string encode_tensor(const Tensor& t) {
  if (t.dims.empty()) fail(ErrorCode::DimMismatch, "tensor has no dimensions");
  for (auto d : t.dims)
    if (d == 0) fail(ErrorCode::DimMismatch, "tensor has a zero-length dimension");
  if (t.element_count() != t.data.size()) fail(ErrorCode::DimMismatch, "payload does not match dims");
  for (float x : t.data)
    if (!std::isfinite(x)) fail(ErrorCode::NonFinitePayload, "refusing to write non-finite value");

  std::string out = "EMB1";
  out.push_back(1);
  out.push_back(1);
  out.push_back(0);
  out.push_back(0);
  detail::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) detail::put_u64(out, d);
  out.reserve(out.size() + 4 * t.data.size());
  for (float x : t.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

inline Tensor decode_tensor(const std::string& bytes, const std::string& origin = "<memory>") {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4 || std::memcmp(p, "EMB1", 4) != 0) fail(ErrorCode::BadMagic, origin);
  if (bytes.size() < 12) fail(ErrorCode::TruncatedFile, origin + ": header");
  if (p[4] != 1) fail(ErrorCode::BadMagic, origin + ": unsupported version " + std::to_string(p[4]));
  if (p[5] != 1) fail(ErrorCode::BadMagic, origin + ": unsupported dtype " + std::to_string(p[5]));
  const std::uint32_t ndim = detail::get_u32(p + 8);
  if (ndim == 0) fail(ErrorCode::DimMismatch, origin + ": ndim is zero");
  const std::size_t header = 12 + 8 * static_cast<std::size_t>(ndim);
  if (bytes.size() < header) fail(ErrorCode::TruncatedFile, origin + ": dims");

  Tensor t;
  t.dims.resize(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i) {
    t.dims[i] = detail::get_u64(p + 12 + 8 * i);
    if (t.dims[i] == 0) fail(ErrorCode::DimMismatch, origin + ": zero-length dimension");
  }
  const std::uint64_t count = t.element_count();
  const std::uint64_t payload = bytes.size() - header;
  if (payload < 4 * count)
    fail(ErrorCode::TruncatedFile, origin + ": declared " + std::to_string(count) + " floats, found " +
                                       std::to_string(payload / 4));
  if (payload != 4 * count)
    fail(ErrorCode::DimMismatch, origin + ": trailing bytes after payload");

  t.data.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    t.data[i] = std::bit_cast<float>(detail::get_u32(p + header + 4 * i));
    if (!std::isfinite(t.data[i])) fail(ErrorCode::NonFinitePayload, origin);
  }
  return t;
}

inline Tensor load_tensor(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::IoError, "missing file " + path.string());
  return decode_tensor(detail::read_file_bytes(path), path.string());
}

inline void save_tensor(const Tensor& t, const fs::path& path) {
  const std::string bytes = encode_tensor(t);
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

/// Narrow a double matrix to an (rows, cols) float32 tensor.
inline Tensor to_tensor(const Matrix& m) {
  Tensor t{{m.rows(), m.cols()}, {}};
  t.data.reserve(m.rows() * m.cols());
  for (Real x : m.data()) t.data.push_back(static_cast<float>(x));
  return t;
}

inline Matrix to_matrix(const Tensor& t) {
  if (t.dims.size() != 2) fail(ErrorCode::DimMismatch, "expected a 2-d tensor");
  Matrix m(t.dims[0], t.dims[1]);
  auto out = m.data();
  for (std::size_t i = 0; i < t.data.size(); ++i) out[i] = t.data[i];
  return m;
}

inline void save_matrix(const Matrix& m, const fs::path& path) { save_tensor(to_tensor(m), path); }

/// Embedding rows are checked to be unit norm within 1e-4 and then
/// re-normalized in double precision.
inline Matrix to_embeddings(const Tensor& t, const std::string& origin = "<tensor>") {
  Matrix m = to_matrix(t);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const Real n = norm(m.row(r));
    if (std::abs(n - 1.0) > kEmbeddingNormTolerance)
      fail(ErrorCode::NotUnitNorm, origin + ": row " + std::to_string(r) + " has norm " + std::to_string(n));
  }
  l2_normalize_rows(m);
  return m;
}

inline Matrix load_embeddings(const fs::path& path) { return to_embeddings(load_tensor(path), path.string()); }

inline PointCloud to_cloud(const Tensor& t, const std::string& origin = "<tensor>") {
  if (t.dims.size() != 2 || t.dims[1] != 3) fail(ErrorCode::DimMismatch, origin + ": cloud must be (P, 3)");
  if (t.dims[0] < kMinCloudPoints)
    fail(ErrorCode::DimMismatch, origin + ": cloud needs at least 8 points");
  PointCloud c;
  c.points.resize(t.dims[0]);
  for (std::size_t i = 0; i < c.points.size(); ++i)
    for (int k = 0; k < 3; ++k) c.points[i][k] = t.data[3 * i + k];
  return c;
}

inline Tensor cloud_tensor(const PointCloud& c) {
  Tensor t{{c.size(), 3}, {}};
  t.data.reserve(3 * c.size());
  for (const auto& p : c.points)
    for (Real x : p) t.data.push_back(static_cast<float>(x));
  return t;
}

inline PointCloud load_cloud(const fs::path& path) { return to_cloud(load_tensor(path), path.string()); }
inline void save_cloud(const PointCloud& c, const fs::path& path) { save_tensor(cloud_tensor(c), path); }

/// Centre on the centroid and scale so the farthest point has norm 1.
inline PointCloud normalize_unit_sphere(PointCloud c) {
  if (c.empty()) fail(ErrorCode::EmptyCloud, "cannot normalize empty cloud");
  Point3 centre{0, 0, 0};
  for (const auto& p : c.points)
    for (int k = 0; k < 3; ++k) centre[k] += p[k];
  for (auto& x : centre) x /= static_cast<Real>(c.size());
  Real max_norm = 0.0;
  for (auto& p : c.points) {
    for (int k = 0; k < 3; ++k) p[k] -= centre[k];
    max_norm = std::max(max_norm, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
  }
  if (max_norm > kZeroNorm)
    for (auto& p : c.points)
      for (auto& x : p) x /= max_norm;
  return c;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t file_digest(const fs::path& path) { return fnv1a(detail::read_file_bytes(path)); }

}  // namespace hn3d
