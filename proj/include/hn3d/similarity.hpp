// SPDX-License-Identifier: Apache-2.0
//
// Object-to-object similarities used for hard negative mining, plus the
// geometric point-set distances kept as baselines.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "hn3d/dataset.hpp"
#include "hn3d/error.hpp"
#include "hn3d/numkit.hpp"
#include "hn3d/tensor_io.hpp"

namespace hn3d {

/// View embeddings of one object, shape (R, F), rows unit norm. Views are
/// matched by index across objects (fixed camera poses).
struct ViewSet {
  std::string id;
  std::string category;
  Matrix views;
};

/// View-to-landmark cosines of one object, shape (R, L).
struct DescriptorSet {
  std::string id;
  std::string category;
  Matrix descriptors;
};

/// Mean cosine over index-matched views, mapped to [0, 1] by (x + 1) / 2.
inline Real i2i_similarity(const ViewSet& a, const ViewSet& b) {
  if (a.views.rows() != b.views.rows() || a.views.rows() == 0)
    fail(ErrorCode::ViewCountMismatch, a.id + " has " + std::to_string(a.views.rows()) + " views, " + b.id +
                                           " has " + std::to_string(b.views.rows()));
  if (a.views.cols() != b.views.cols()) fail(ErrorCode::DimMismatch, "feature dims differ");
  Real sum = 0.0;
  for (std::size_t r = 0; r < a.views.rows(); ++r) sum += dot(a.views.row(r), b.views.row(r));
  const Real mean = sum / static_cast<Real>(a.views.rows());
  return std::clamp((mean + 1.0) / 2.0, 0.0, 1.0);
}

inline DescriptorSet build_descriptors(const ViewSet& a, const LandmarkSet& landmarks) {
  if (a.category != landmarks.category)
    fail(ErrorCode::CategoryMismatch, a.id + " is '" + a.category + "', landmarks are '" + landmarks.category + "'");
  if (a.views.cols() != landmarks.matrix.cols())
    fail(ErrorCode::DimMismatch, "view dim " + std::to_string(a.views.cols()) + " vs landmark dim " +
                                     std::to_string(landmarks.matrix.cols()));
  DescriptorSet d{a.id, a.category, Matrix(a.views.rows(), landmarks.size())};
  for (std::size_t r = 0; r < a.views.rows(); ++r)
    for (std::size_t l = 0; l < landmarks.size(); ++l)
      d.descriptors(r, l) = dot(a.views.row(r), landmarks.matrix.row(l));
  return d;
}

/// Mean Euclidean distance between index-matched descriptor rows, mapped to
/// (0, 1] by 1 / (1 + x).
inline Real i2l2_similarity(const DescriptorSet& da, const DescriptorSet& db) {
  if (da.category != db.category) fail(ErrorCode::CategoryMismatch, da.id + " vs " + db.id);
  if (da.descriptors.rows() != db.descriptors.rows() || da.descriptors.cols() != db.descriptors.cols() ||
      da.descriptors.rows() == 0)
    fail(ErrorCode::ShapeMismatch, "descriptor shapes differ for " + da.id + " and " + db.id);
  Real sum = 0.0;
  for (std::size_t r = 0; r < da.descriptors.rows(); ++r) {
    const auto x = da.descriptors.row(r);
    const auto y = db.descriptors.row(r);
    Real sq = 0.0;
    for (std::size_t l = 0; l < x.size(); ++l) {
      const Real diff = x[l] - y[l];
      sq += diff * diff;
    }
    sum += std::sqrt(sq);
  }
  return 1.0 / (1.0 + sum / static_cast<Real>(da.descriptors.rows()));
}

namespace detail {
inline Real squared_distance(const Point3& p, const Point3& q) {
  const Real dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
  return dx * dx + dy * dy + dz * dz;
}

inline Real directed_chamfer(const PointCloud& from, const PointCloud& to) {
  Real total = 0.0;
  for (const auto& p : from.points) {
    Real best = std::numeric_limits<Real>::infinity();
    for (const auto& q : to.points) best = std::min(best, squared_distance(p, q));
    total += best;
  }
  return total / static_cast<Real>(from.size());
}
}  // namespace detail

/// Sum of the two directed mean squared nearest-neighbour distances.
inline Real chamfer_distance(const PointCloud& p, const PointCloud& q) {
  if (p.empty() || q.empty()) fail(ErrorCode::EmptyCloud, "chamfer distance of empty cloud");
  return detail::directed_chamfer(p, q) + detail::directed_chamfer(q, p);
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with row/column potentials, O(n^3)). Returns assignment[row] = column.
inline std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) fail(ErrorCode::ShapeMismatch, "assignment needs a square cost matrix");
  constexpr Real inf = std::numeric_limits<Real>::infinity();
  // 1-based potentials; column 0 is a virtual start.
  std::vector<Real> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      Real delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Real cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

inline constexpr std::size_t kEmdExactLimit = 256;
inline constexpr std::size_t kEmdMaxPoints = 4096;
inline constexpr std::uint64_t kEmdSubsampleSeed = 0x454D44;  // "EMD"

/// Deterministic uniform subsample of `count` points, original order kept.
inline PointCloud subsample(const PointCloud& c, std::size_t count, std::uint64_t seed = kEmdSubsampleSeed) {
  if (count >= c.size()) return c;
  std::vector<std::size_t> idx(c.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  RngStream rng(seed, c.size());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(c.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  PointCloud out;
  out.points.reserve(count);
  for (auto i : idx) out.points.push_back(c.points[i]);
  return out;
}

/// Mean matched Euclidean distance under the optimal one-to-one matching.
/// The larger cloud is subsampled to the smaller size; both are capped at 256.
inline Real emd(const PointCloud& p, const PointCloud& q) {
  if (p.empty() || q.empty()) fail(ErrorCode::EmptyCloud, "EMD of empty cloud");
  if (p.size() > kEmdMaxPoints || q.size() > kEmdMaxPoints)
    fail(ErrorCode::ShapeMismatch, "EMD supports at most 4096 points per cloud");
  const std::size_t n = std::min({p.size(), q.size(), kEmdExactLimit});
  const PointCloud a = subsample(p, n);
  const PointCloud b = subsample(q, n);
  Matrix cost(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = std::sqrt(detail::squared_distance(a.points[i], b.points[j]));
  const auto assignment = solve_assignment(cost);
  Real total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost(i, assignment[i]);
  return total / static_cast<Real>(n);
}

}  // namespace hn3d
