// SPDX-License-Identifier: Apache-2.0
//
// Permutation-invariant point encoder: shared per-point MLP (3 -> H1 -> H2,
// ReLU), feature-wise max-pool, linear projection H2 -> F, L2 normalization.
// Also hosts the optimizer, learning-rate schedule, augmentation and
// checkpoint I/O that train it.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hn3d/error.hpp"
#include "hn3d/loss.hpp"
#include "hn3d/numkit.hpp"
#include "hn3d/tensor_io.hpp"

namespace hn3d {

struct EncoderDims {
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 128;
  std::size_t feat = 64;
  friend bool operator==(const EncoderDims&, const EncoderDims&) = default;
};

/// Weight tensors, stored (inputs x outputs) row-major so a row of the
/// previous activation streams across contiguous memory.
struct ParamTensors {
  std::vector<Real> w1, b1, w2, b2, wp, bp;

  static ParamTensors zeros(const EncoderDims& d) {
    return {std::vector<Real>(3 * d.hidden1, 0.0),      std::vector<Real>(d.hidden1, 0.0),
            std::vector<Real>(d.hidden1 * d.hidden2, 0.0), std::vector<Real>(d.hidden2, 0.0),
            std::vector<Real>(d.hidden2 * d.feat, 0.0),    std::vector<Real>(d.feat, 0.0)};
  }

  struct View {
    const char* name;
    std::vector<Real>* values;
    std::size_t rows;
    std::size_t cols;
  };

  std::array<View, 6> views(const EncoderDims& d) {
    return {{{"w1", &w1, 3, d.hidden1},
             {"b1", &b1, 1, d.hidden1},
             {"w2", &w2, d.hidden1, d.hidden2},
             {"b2", &b2, 1, d.hidden2},
             {"wp", &wp, d.hidden2, d.feat},
             {"bp", &bp, 1, d.feat}}};
  }

  friend bool operator==(const ParamTensors&, const ParamTensors&) = default;
};

struct EncoderParams {
  EncoderDims dims;
  ParamTensors weights;
  TemperatureParam temp;

  std::size_t weight_count() const {
    return weights.w1.size() + weights.b1.size() + weights.w2.size() + weights.b2.size() + weights.wp.size() +
           weights.bp.size();
  }
};

struct ParamGrads {
  ParamTensors weights;
  Real log_inv_tau = 0.0;

  static ParamGrads zeros(const EncoderDims& d) { return {ParamTensors::zeros(d), 0.0}; }

  ParamGrads& operator+=(const ParamGrads& o) {
    auto add = [](std::vector<Real>& a, const std::vector<Real>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(weights.w1, o.weights.w1);
    add(weights.b1, o.weights.b1);
    add(weights.w2, o.weights.w2);
    add(weights.b2, o.weights.b2);
    add(weights.wp, o.weights.wp);
    add(weights.bp, o.weights.bp);
    log_inv_tau += o.log_inv_tau;
    return *this;
  }
};

/// He-uniform weights, zero biases, tau = 0.07.
inline EncoderParams init_encoder(const EncoderDims& dims, std::uint64_t seed, Real tau = kDefaultTau) {
  EncoderParams p{dims, ParamTensors::zeros(dims), TemperatureParam::from_tau(tau)};
  RngStream rng(seed, stream_id(0xE1C0DE));
  auto fill = [&](std::vector<Real>& w, std::size_t fan_in) {
    const Real bound = std::sqrt(6.0 / static_cast<Real>(fan_in));
    for (Real& x : w) x = rng.uniform(-bound, bound);
  };
  fill(p.weights.w1, 3);
  fill(p.weights.w2, dims.hidden1);
  fill(p.weights.wp, dims.hidden2);
  return p;
}

/// Activations retained by the forward pass for the backward pass.
struct EncoderCache {
  EncoderDims dims;
  std::vector<Point3> points;
  std::vector<Real> h1;                 // (P, H1) post-ReLU
  std::vector<Real> pooled;             // (H2)
  std::vector<std::size_t> winner;      // (H2) argmax point, lowest index on ties
  std::vector<Real> out;                // (F) unit embedding
  Real y_norm = 0.0;
};

inline Vec encode_points(const EncoderParams& params, const PointCloud& cloud, EncoderCache* cache = nullptr) {
  const auto& d = params.dims;
  const auto& w = params.weights;
  if (cloud.empty()) fail(ErrorCode::EmptyCloud, "cannot encode an empty cloud");
  const std::size_t P = cloud.size(), H1 = d.hidden1, H2 = d.hidden2, F = d.feat;

  std::vector<Real> h1(P * H1);
  std::vector<Real> pooled(H2, -std::numeric_limits<Real>::infinity());
  std::vector<std::size_t> winner(H2, 0);
  std::vector<Real> h2(H2);

  for (std::size_t p = 0; p < P; ++p) {
    const auto& x = cloud.points[p];
    Real* a = h1.data() + p * H1;
    for (std::size_t k = 0; k < H1; ++k) {
      const Real v = w.b1[k] + x[0] * w.w1[k] + x[1] * w.w1[H1 + k] + x[2] * w.w1[2 * H1 + k];
      a[k] = v > 0.0 ? v : 0.0;
    }
    std::copy(w.b2.begin(), w.b2.end(), h2.begin());
    for (std::size_t k = 0; k < H1; ++k) {
      const Real ak = a[k];
      if (ak == 0.0) continue;
      const Real* row = w.w2.data() + k * H2;
      for (std::size_t j = 0; j < H2; ++j) h2[j] += ak * row[j];
    }
    for (std::size_t j = 0; j < H2; ++j) {
      const Real v = h2[j] > 0.0 ? h2[j] : 0.0;
      if (v > pooled[j]) {
        pooled[j] = v;
        winner[j] = p;
      }
    }
  }

  std::vector<Real> y(w.bp);
  for (std::size_t j = 0; j < H2; ++j) {
    const Real pj = pooled[j];
    if (pj == 0.0) continue;
    const Real* row = w.wp.data() + j * F;
    for (std::size_t f = 0; f < F; ++f) y[f] += pj * row[f];
  }
  const Real n = norm(y);
  if (!(n > kZeroNorm) || !std::isfinite(n))
    fail(ErrorCode::DegenerateCloud, "pooled features project to a zero embedding");
  Vec out(F);
  for (std::size_t f = 0; f < F; ++f) out[f] = y[f] / n;

  if (cache) {
    cache->dims = d;
    cache->points = cloud.points;
    cache->h1 = std::move(h1);
    cache->pooled = std::move(pooled);
    cache->winner = std::move(winner);
    cache->out.assign(out.begin(), out.end());
    cache->y_norm = n;
  }
  return out;
}

/// Gradients of all encoder weights given dLoss/dEmbedding. Max-pool routes
/// each feature's gradient to its recorded winner point only.
inline ParamGrads encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                                   std::span<const Real> grad_embedding) {
  const auto& d = params.dims;
  const auto& w = params.weights;
  if (!(cache.dims == d) || cache.out.size() != d.feat || cache.pooled.size() != d.hidden2 ||
      cache.h1.size() != cache.points.size() * d.hidden1 || grad_embedding.size() != d.feat)
    fail(ErrorCode::CacheMismatch, "cache was not produced by a forward pass with these parameters");
  const std::size_t H1 = d.hidden1, H2 = d.hidden2, F = d.feat;
  ParamGrads g = ParamGrads::zeros(d);

  // Through y / ||y||.
  const Real og = dot(cache.out, grad_embedding);
  std::vector<Real> dy(F);
  for (std::size_t f = 0; f < F; ++f) dy[f] = (grad_embedding[f] - cache.out[f] * og) / cache.y_norm;

  std::vector<Real> dpool(H2, 0.0);
  for (std::size_t j = 0; j < H2; ++j) {
    const Real pj = cache.pooled[j];
    const Real* row = w.wp.data() + j * F;
    Real* grow = g.weights.wp.data() + j * F;
    Real acc = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      grow[f] = pj * dy[f];
      acc += row[f] * dy[f];
    }
    dpool[j] = pj > 0.0 ? acc : 0.0;
  }
  g.weights.bp = dy;

  std::vector<Real> dh1(cache.points.size() * H1, 0.0);
  std::vector<char> touched(cache.points.size(), 0);
  for (std::size_t j = 0; j < H2; ++j) {
    const Real dj = dpool[j];
    if (dj == 0.0) continue;
    const std::size_t p = cache.winner[j];
    touched[p] = 1;
    g.weights.b2[j] += dj;
    const Real* a = cache.h1.data() + p * H1;
    Real* da = dh1.data() + p * H1;
    for (std::size_t k = 0; k < H1; ++k) {
      g.weights.w2[k * H2 + j] += a[k] * dj;
      da[k] += w.w2[k * H2 + j] * dj;
    }
  }

  for (std::size_t p = 0; p < cache.points.size(); ++p) {
    if (!touched[p]) continue;
    const Real* a = cache.h1.data() + p * H1;
    const Real* da = dh1.data() + p * H1;
    const auto& x = cache.points[p];
    for (std::size_t k = 0; k < H1; ++k) {
      if (a[k] <= 0.0) continue;
      g.weights.b1[k] += da[k];
      g.weights.w1[k] += x[0] * da[k];
      g.weights.w1[H1 + k] += x[1] * da[k];
      g.weights.w1[2 * H1 + k] += x[2] * da[k];
    }
  }
  return g;
}

struct AugmentConfig {
  Real rotate_max = 2.0 * std::numbers::pi;  // about the vertical (z) axis
  Real translate = 0.1;
  Real jitter_sigma = 0.01;
  Real jitter_clip = 0.05;
};

/// normalize -> rotate about z by U[0, rotate_max) -> translate by
/// U[-t, t]^3 -> clipped Gaussian jitter per coordinate.
inline PointCloud augment(const PointCloud& cloud, RngStream& rng, const AugmentConfig& cfg) {
  PointCloud c = normalize_unit_sphere(cloud);
  const Real angle = rng.uniform(0.0, cfg.rotate_max);
  const Real cs = std::cos(angle), sn = std::sin(angle);
  Point3 shift;
  for (auto& s : shift) s = rng.uniform(-cfg.translate, cfg.translate);
  for (auto& p : c.points) {
    const Real x = cs * p[0] - sn * p[1];
    const Real y = sn * p[0] + cs * p[1];
    p[0] = x;
    p[1] = y;
    for (int k = 0; k < 3; ++k) {
      const Real j = std::clamp(cfg.jitter_sigma * rng.normal(), -cfg.jitter_clip, cfg.jitter_clip);
      p[k] += shift[k] + j;
    }
  }
  return c;
}

struct AdamConfig {
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
  Real weight_decay = 0.01;
};

struct AdamState {
  ParamTensors m, v;
  Real tau_m = 0.0, tau_v = 0.0;

  static AdamState zeros(const EncoderDims& d) { return {ParamTensors::zeros(d), ParamTensors::zeros(d)}; }
};

/// One AdamW step (step >= 1). Decoupled decay p *= (1 - lr * wd) precedes
/// the bias-corrected adaptive update; the temperature is not decayed and is
/// clamped to a logit scale in [1, 100] afterwards.
inline void adamw_step(EncoderParams& params, const ParamGrads& grads, AdamState& state, std::size_t step, Real lr,
                       const AdamConfig& cfg) {
  if (step < 1) fail(ErrorCode::ConfigInvalid, "optimizer step counts from 1");
  const Real c1 = 1.0 - std::pow(cfg.beta1, static_cast<Real>(step));
  const Real c2 = 1.0 - std::pow(cfg.beta2, static_cast<Real>(step));
  const Real decay = 1.0 - lr * cfg.weight_decay;

  auto update = [&](std::vector<Real>& p, const std::vector<Real>& g, std::vector<Real>& m, std::vector<Real>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] *= decay;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  };
  auto& P = params.weights;
  const auto& G = grads.weights;
  update(P.w1, G.w1, state.m.w1, state.v.w1);
  update(P.b1, G.b1, state.m.b1, state.v.b1);
  update(P.w2, G.w2, state.m.w2, state.v.w2);
  update(P.b2, G.b2, state.m.b2, state.v.b2);
  update(P.wp, G.wp, state.m.wp, state.v.wp);
  update(P.bp, G.bp, state.m.bp, state.v.bp);

  const Real gt = grads.log_inv_tau;
  state.tau_m = cfg.beta1 * state.tau_m + (1.0 - cfg.beta1) * gt;
  state.tau_v = cfg.beta2 * state.tau_v + (1.0 - cfg.beta2) * gt * gt;
  params.temp.log_inv_tau -= lr * (state.tau_m / c1) / (std::sqrt(state.tau_v / c2) + cfg.eps);
  params.temp.clamp();
}

struct ScheduleConfig {
  Real base_lr = 1e-3;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;
  Real min_lr = 0.0;
};

/// Linear warmup from 0, then cosine annealing down to min_lr.
inline Real lr_schedule(std::size_t step, const ScheduleConfig& cfg) {
  if (step < cfg.warmup_steps)
    return cfg.base_lr * static_cast<Real>(step) / static_cast<Real>(cfg.warmup_steps);
  if (cfg.total_steps <= cfg.warmup_steps) return cfg.base_lr;
  const Real t = static_cast<Real>(std::min(step, cfg.total_steps) - cfg.warmup_steps) /
                 static_cast<Real>(cfg.total_steps - cfg.warmup_steps);
  return std::max(cfg.min_lr, cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

/// Checkpoint directory: one EMB1 file per weight tensor, temperature.emb
/// holding log(1/tau), and meta.json with caller-supplied metadata.
inline void save_checkpoint(const EncoderParams& params, const nlohmann::json& meta, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  auto p = params;
  for (const auto& v : p.weights.views(p.dims)) {
    Tensor t{{v.rows, v.cols}, {}};
    for (Real x : *v.values) t.data.push_back(static_cast<float>(x));
    save_tensor(t, dir / (std::string(v.name) + ".emb"));
  }
  save_tensor(Tensor{{1, 1}, {static_cast<float>(p.temp.log_inv_tau)}}, dir / "temperature.emb");
  nlohmann::json j = meta;
  j["encoder"] = {{"hidden1", p.dims.hidden1}, {"hidden2", p.dims.hidden2}, {"feat", p.dims.feat}};
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write checkpoint metadata");
  out << j.dump(2) << '\n';
}

inline nlohmann::json load_checkpoint_meta(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) fail(ErrorCode::IoError, "no checkpoint metadata in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ManifestInvalid, e.what());
  }
  return j;
}

inline EncoderParams load_checkpoint(const fs::path& dir) {
  const auto meta = load_checkpoint_meta(dir);
  EncoderParams p;
  try {
    p.dims = {meta.at("encoder").at("hidden1").get<std::size_t>(), meta.at("encoder").at("hidden2").get<std::size_t>(),
              meta.at("encoder").at("feat").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ManifestInvalid, e.what());
  }
  p.weights = ParamTensors::zeros(p.dims);
  for (const auto& v : p.weights.views(p.dims)) {
    const Tensor t = load_tensor(dir / (std::string(v.name) + ".emb"));
    if (t.dims != std::vector<std::uint64_t>{v.rows, v.cols})
      fail(ErrorCode::DimMismatch, std::string("checkpoint tensor ") + v.name + " has the wrong shape");
    for (std::size_t i = 0; i < t.data.size(); ++i) (*v.values)[i] = t.data[i];
  }
  const Tensor t = load_tensor(dir / "temperature.emb");
  if (t.data.size() != 1) fail(ErrorCode::DimMismatch, "temperature tensor must hold one value");
  p.temp.log_inv_tau = t.data[0];
  return p;
}

}  // namespace hn3d
