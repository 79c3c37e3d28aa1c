// SPDX-License-Identifier: Apache-2.0
//
// Numeric substrate: dense containers, stable reductions and a deterministic
// random stream. Everything here computes in double precision; single
// precision exists only on disk.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hn3d/error.hpp"

namespace hn3d {

using Real = double;

/// Dense feature vector.
class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t n, Real fill = 0.0) : values_(n, fill) {}
  Vec(std::initializer_list<Real> xs) : values_(xs) {}
  explicit Vec(std::vector<Real> xs) : values_(std::move(xs)) {}
  explicit Vec(std::span<const Real> xs) : values_(xs.begin(), xs.end()) {}

  std::size_t size() const noexcept { return values_.size(); }
  Real& operator[](std::size_t i) { return values_[i]; }
  Real operator[](std::size_t i) const { return values_[i]; }
  std::span<Real> span() noexcept { return values_; }
  std::span<const Real> span() const noexcept { return values_; }
  const std::vector<Real>& values() const noexcept { return values_; }
  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  friend bool operator==(const Vec&, const Vec&) = default;

 private:
  std::vector<Real> values_;
};

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<Real> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) fail(ErrorCode::DimMismatch, "matrix payload size");
  }
  Matrix(std::initializer_list<std::initializer_list<Real>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) fail(ErrorCode::DimMismatch, "ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

inline Real dot(std::span<const Real> a, std::span<const Real> b) {
  Real s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Real norm(std::span<const Real> v) { return std::sqrt(dot(v, v)); }

inline bool all_finite(std::span<const Real> v) {
  return std::all_of(v.begin(), v.end(), [](Real x) { return std::isfinite(x); });
}

inline constexpr Real kZeroNorm = 1e-12;

inline Vec l2_normalize(const Vec& v) {
  const Real n = norm(v.span());
  if (!(n > kZeroNorm)) fail(ErrorCode::ZeroVector, "cannot normalize vector with norm <= 1e-12");
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

/// In-place row normalization; throws ZeroVector on a null row.
inline void l2_normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const Real n = norm(row);
    if (!(n > kZeroNorm)) fail(ErrorCode::ZeroVector, "row " + std::to_string(r) + " has zero norm");
    for (Real& x : row) x /= n;
  }
}

inline Real logsumexp(std::span<const Real> xs) {
  if (xs.empty()) fail(ErrorCode::EmptyInput, "logsumexp of empty sequence");
  if (!all_finite(xs)) fail(ErrorCode::NonFinitePayload, "logsumexp input not finite");
  const Real m = *std::max_element(xs.begin(), xs.end());
  Real s = 0.0;
  for (Real x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline Real logsumexp(std::initializer_list<Real> xs) {
  return logsumexp(std::span<const Real>(xs.begin(), xs.size()));
}

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace detail

/// Derive a stream id from a tuple of integers (e.g. epoch, object, purpose).
template <class... Ts>
constexpr std::uint64_t stream_id(Ts... parts) {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  ((h = detail::rotl(h ^ (static_cast<std::uint64_t>(parts) * 0x9E3779B97F4A7C15ULL), 27) *
        0xBF58476D1CE4E5B9ULL),
   ...);
  return h;
}

/// xoshiro256** seeded by splitmix64 over (seed, stream). All derived draws
/// (uniform reals, normals, shuffles) are implemented here so the sequence is
/// identical on every platform; std::*_distribution is never used.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
    std::uint64_t sm = seed;
    const std::uint64_t mix = detail::splitmix64(sm) ^ stream;
    std::uint64_t st = mix;
    for (auto& s : state_) s = detail::splitmix64(st);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  Real uniform() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }
  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (no cached second draw).
  Real normal() {
    Real u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const Real u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_[4]{};
};

}  // namespace hn3d
