// SPDX-License-Identifier: Apache-2.0
//
// Symmetric image/shape InfoNCE with optional hard-negative importance
// weights on the normalizing sums, and its analytic gradients.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hn3d/error.hpp"
#include "hn3d/numkit.hpp"
#include "hn3d/simstore.hpp"

namespace hn3d {

/// N x N batch similarities S[i][s] = sim(shape i, shape s).
struct BatchSim {
  Matrix s;
  std::size_t size() const noexcept { return s.rows(); }
};

/// row(i, s): weight of negative s in the image-to-shape term of anchor i,
/// normalized over s != i. col(i, s): weight of negative i in the
/// shape-to-image term of anchor s, normalized over i != s. Diagonals are 1.
struct BatchWeights {
  Matrix row;
  Matrix col;
  std::size_t size() const noexcept { return row.rows(); }
};

inline constexpr Real kDefaultTau = 0.07;
inline constexpr Real kMinLogitScale = 1.0;
inline constexpr Real kMaxLogitScale = 100.0;

/// Temperature stored as log(1 / tau); the logit scale is exp(log_inv_tau).
struct TemperatureParam {
  Real log_inv_tau = std::log(1.0 / kDefaultTau);

  static TemperatureParam from_tau(Real tau) { return {std::log(1.0 / tau)}; }
  Real scale() const { return std::exp(log_inv_tau); }
  void clamp() {
    log_inv_tau = std::clamp(log_inv_tau, std::log(kMinLogitScale), std::log(kMaxLogitScale));
  }
};

struct LossOutput {
  Real value = 0.0;
  Matrix grad_img;
  Matrix grad_shape;
  Real grad_log_inv_tau = 0.0;
};

inline BatchSim batch_sim(const SimStore& store, std::span<const std::string> ids) {
  BatchSim bs{Matrix(ids.size(), ids.size())};
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t s = 0; s < ids.size(); ++s) bs.s(i, s) = store.lookup(ids[i], ids[s]);
  return bs;
}

inline BatchWeights uniform_weights(std::size_t n) { return {Matrix(n, n, 1.0), Matrix(n, n, 1.0)}; }

inline BatchWeights batch_weights(const BatchSim& bs) {
  const std::size_t n = bs.size();
  if (n == 0 || bs.s.cols() != n) fail(ErrorCode::ShapeMismatch, "batch similarity must be square and non-empty");
  for (Real x : bs.s.data())
    if (!(x > 0.0) || !std::isfinite(x)) fail(ErrorCode::NonPositiveSim, "batch similarities must be positive");
  BatchWeights w = uniform_weights(n);
  if (n == 1) return w;
  const Real scale = static_cast<Real>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    Real row_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) row_sum += bs.s(i, k);
    for (std::size_t s = 0; s < n; ++s)
      if (s != i) w.row(i, s) = scale * bs.s(i, s) / row_sum;
  }
  for (std::size_t s = 0; s < n; ++s) {
    Real col_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != s) col_sum += bs.s(k, s);
    for (std::size_t i = 0; i < n; ++i)
      if (i != s) w.col(i, s) = scale * bs.s(i, s) / col_sum;
  }
  return w;
}

/// Elementwise mean of the weights derived from each similarity.
inline BatchWeights avg_weights(const BatchSim& a, const BatchSim& b) {
  if (a.size() != b.size()) fail(ErrorCode::ShapeMismatch, "batch sizes differ");
  BatchWeights wa = batch_weights(a);
  const BatchWeights wb = batch_weights(b);
  auto ra = wa.row.data();
  auto ca = wa.col.data();
  const auto rb = wb.row.data();
  const auto cb = wb.col.data();
  for (std::size_t k = 0; k < ra.size(); ++k) {
    ra[k] = 0.5 * (ra[k] + rb[k]);
    ca[k] = 0.5 * (ca[k] + cb[k]);
  }
  return wa;
}

/// Largest deviation of any off-diagonal row sum (row weights) or column sum
/// (column weights) from N - 1.
inline Real weight_sum_error(const BatchWeights& w) {
  const std::size_t n = w.size();
  if (n < 2) return 0.0;
  Real worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Real r = 0.0, c = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      r += w.row(i, k);
      c += w.col(k, i);
    }
    worst = std::max({worst, std::abs(r - (n - 1.0)), std::abs(c - (n - 1.0))});
  }
  return worst;
}

namespace detail {

inline void check_embedding_pair(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0)
    fail(ErrorCode::ShapeMismatch, "embedding batches must share a non-empty (N, F) shape");
}

inline LossOutput contrastive_core(const Matrix& img, const Matrix& shape, const BatchWeights* w,
                                   const TemperatureParam& temp) {
  check_embedding_pair(img, shape);
  const std::size_t n = img.rows();
  if (w && (w->row.rows() != n || w->row.cols() != n || w->col.rows() != n || w->col.cols() != n))
    fail(ErrorCode::ShapeMismatch, "weights do not match batch size");
  const Real scale = temp.scale();

  Matrix z(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < n; ++s) z(i, s) = scale * dot(img.row(i), shape.row(s));

  // Image-to-shape: softmax over s of z(i, s) + log row(i, s).
  // Shape-to-image: softmax over i of z(i, s) + log col(i, s).
  Matrix dz(n, n, 0.0);
  std::vector<Real> a(n);
  Real total = 0.0;
  const Real inv = 1.0 / (2.0 * static_cast<Real>(n));

  auto accumulate = [&](bool by_row) {
    for (std::size_t anchor = 0; anchor < n; ++anchor) {
      Real m = -std::numeric_limits<Real>::infinity();
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = by_row ? anchor : k;
        const std::size_t s = by_row ? k : anchor;
        a[k] = z(i, s);
        if (w) a[k] += std::log(by_row ? w->row(i, s) : w->col(i, s));
        m = std::max(m, a[k]);
      }
      Real sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) sum += std::exp(a[k] - m);
      const Real lse = m + std::log(sum);
      total += lse - z(anchor, anchor);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = by_row ? anchor : k;
        const std::size_t s = by_row ? k : anchor;
        dz(i, s) += inv * std::exp(a[k] - lse);
      }
      dz(anchor, anchor) -= inv;
    }
  };
  accumulate(true);
  accumulate(false);

  LossOutput out;
  out.value = total * inv;
  out.grad_img = Matrix(n, img.cols(), 0.0);
  out.grad_shape = Matrix(n, img.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < n; ++s) {
      const Real g = dz(i, s);
      out.grad_log_inv_tau += g * z(i, s);
      const Real gs = g * scale;
      auto gi = out.grad_img.row(i);
      auto gsh = out.grad_shape.row(s);
      const auto xi = img.row(i);
      const auto ys = shape.row(s);
      for (std::size_t f = 0; f < gi.size(); ++f) {
        gi[f] += gs * ys[f];
        gsh[f] += gs * xi[f];
      }
    }
  }
  return out;
}

}  // namespace detail

/// Symmetric InfoNCE, both directions weighted 1/2.
inline LossOutput plain_contrastive_loss(const Matrix& e1, const Matrix& e2, const TemperatureParam& temp) {
  return detail::contrastive_core(e1, e2, nullptr, temp);
}

/// Hard-negative weighted InfoNCE: row weights enter the image-to-shape
/// denominators, column weights the shape-to-image denominators.
inline LossOutput hn_weighted_loss(const Matrix& e_img, const Matrix& e_shape, const BatchWeights& w,
                                   const TemperatureParam& temp) {
  for (Real x : w.row.data())
    if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorCode::NonPositiveSim, "negative or non-finite weight");
  for (Real x : w.col.data())
    if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorCode::NonPositiveSim, "negative or non-finite weight");
  return detail::contrastive_core(e_img, e_shape, &w, temp);
}

}  // namespace hn3d
