// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic datasets with planted structure.
//
// Feature space R^F is split by a random orthonormal basis into a content
// subspace (first F - T basis vectors) and a texture subspace (last T).
// Category centroids are content basis vectors; subtype, object, pose,
// noise and landmark vectors live in the content subspace; texture lives
// only in the texture subspace and has a fixed norm per object, so it is
// exactly orthogonal to every landmark.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hn3d/dataset.hpp"
#include "hn3d/error.hpp"
#include "hn3d/numkit.hpp"
#include "hn3d/similarity.hpp"
#include "hn3d/tensor_io.hpp"

namespace hn3d {

struct SynthConfig {
  std::size_t categories = 8;
  std::size_t subtypes = 4;
  std::size_t per_category = 25;
  std::size_t views = 6;
  std::size_t feat = 64;
  std::size_t landmarks = 16;
  std::size_t points = 256;
  std::size_t texture_dim = 8;

  Real subtype_scale = 0.25;   // norm of the subtype offset in view space
  Real object_scale = 0.08;    // per unit of object shape jitter
  Real pose_scale = 0.05;      // per-view-index offset shared by all objects
  Real view_noise = 0.03;      // typical norm of per-view noise (clipped at 2x)
  Real texture_scale = 0.3;    // norm of the per-object texture component
  Real landmark_noise = 0.3;
  Real subtype_spread = 0.2;   // relative shape change between subtypes
  Real object_spread = 0.08;   // relative shape jitter between objects
  Real cloud_noise = 0.005;
  Real test_fraction = 0.2;
  std::uint64_t seed = 0;

  std::size_t content_dim() const { return feat - texture_dim; }
};

inline void validate(const SynthConfig& c) {
  auto bad = [](const std::string& m) { fail(ErrorCode::ConfigInvalid, m); };
  if (c.categories < 1 || c.subtypes < 1 || c.per_category < 1 || c.views < 1) bad("counts must be positive");
  if (c.landmarks < 1) bad("need at least one landmark");
  if (c.points < kMinCloudPoints) bad("clouds need at least 8 points");
  if (c.feat < c.landmarks + c.texture_dim) bad("feat must be >= landmarks + texture_dim");
  if (c.content_dim() < c.categories) bad("content subspace too small for orthogonal centroids");
  if (c.categories * c.per_category < 2) bad("need at least two objects");
  if (!(c.test_fraction >= 0.0 && c.test_fraction < 1.0)) bad("test_fraction must be in [0, 1)");
  for (Real s : {c.subtype_scale, c.object_scale, c.pose_scale, c.view_noise, c.texture_scale, c.landmark_noise,
                 c.subtype_spread, c.object_spread, c.cloud_noise})
    if (!(s >= 0.0) || !std::isfinite(s)) bad("noise scales must be finite and non-negative");
  if (c.subtype_spread >= 0.5 || c.object_spread >= 0.5) bad("shape spreads must be < 0.5");
}

/// Upper bound on the non-centroid content norm of any view; when the margin
/// 1 - 2 * bound is positive, every view is closest to its own centroid.
inline Real planted_margin(const SynthConfig& c) {
  const Real bound = c.subtype_scale + 3.0 * c.object_scale + c.pose_scale + 2.0 * c.view_noise;
  return 1.0 - 2.0 * bound;
}

inline nlohmann::json to_json(const SynthConfig& c) {
  return {{"categories", c.categories},     {"subtypes", c.subtypes},
          {"per_category", c.per_category}, {"views", c.views},
          {"feat", c.feat},                 {"landmarks", c.landmarks},
          {"points", c.points},             {"texture_dim", c.texture_dim},
          {"subtype_scale", c.subtype_scale}, {"object_scale", c.object_scale},
          {"pose_scale", c.pose_scale},     {"view_noise", c.view_noise},
          {"texture_scale", c.texture_scale}, {"landmark_noise", c.landmark_noise},
          {"subtype_spread", c.subtype_spread}, {"object_spread", c.object_spread},
          {"cloud_noise", c.cloud_noise},   {"test_fraction", c.test_fraction},
          {"seed", c.seed}};
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig c = {}) {
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "categories") c.categories = v.get<std::size_t>();
      else if (k == "subtypes") c.subtypes = v.get<std::size_t>();
      else if (k == "per_category") c.per_category = v.get<std::size_t>();
      else if (k == "views") c.views = v.get<std::size_t>();
      else if (k == "feat") c.feat = v.get<std::size_t>();
      else if (k == "landmarks") c.landmarks = v.get<std::size_t>();
      else if (k == "points") c.points = v.get<std::size_t>();
      else if (k == "texture_dim") c.texture_dim = v.get<std::size_t>();
      else if (k == "subtype_scale") c.subtype_scale = v.get<Real>();
      else if (k == "object_scale") c.object_scale = v.get<Real>();
      else if (k == "pose_scale") c.pose_scale = v.get<Real>();
      else if (k == "view_noise") c.view_noise = v.get<Real>();
      else if (k == "texture_scale") c.texture_scale = v.get<Real>();
      else if (k == "landmark_noise") c.landmark_noise = v.get<Real>();
      else if (k == "subtype_spread") c.subtype_spread = v.get<Real>();
      else if (k == "object_spread") c.object_spread = v.get<Real>();
      else if (k == "cloud_noise") c.cloud_noise = v.get<Real>();
      else if (k == "test_fraction") c.test_fraction = v.get<Real>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else fail(ErrorCode::ConfigInvalid, "unknown synthetic config key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigInvalid, e.what());
  }
  return c;
}

enum class SurfaceKind { Ellipsoid, Box, Cylinder };

struct ShapeSpec {
  SurfaceKind kind;
  std::array<Real, 3> extent;  // half-extents along x, y, z (z vertical)
};

/// Base shape of a category. The first eight differ in surface type and in
/// vertical-versus-horizontal proportions, which survive rotation about z.
inline ShapeSpec category_shape(std::size_t c, RngStream& rng) {
  static constexpr std::array<ShapeSpec, 8> table{{
      {SurfaceKind::Ellipsoid, {1.0, 1.0, 1.0}},
      {SurfaceKind::Ellipsoid, {1.0, 1.0, 0.3}},
      {SurfaceKind::Ellipsoid, {0.35, 0.35, 1.0}},
      {SurfaceKind::Box, {1.0, 1.0, 1.0}},
      {SurfaceKind::Box, {1.0, 0.25, 0.25}},
      {SurfaceKind::Box, {1.0, 1.0, 0.15}},
      {SurfaceKind::Cylinder, {0.4, 0.4, 1.0}},
      {SurfaceKind::Cylinder, {1.0, 1.0, 0.5}},
  }};
  if (c < table.size()) return table[c];
  ShapeSpec s{static_cast<SurfaceKind>(c % 3), {}};
  for (auto& e : s.extent) e = rng.uniform(0.25, 1.0);
  return s;
}

inline Point3 sample_surface(const ShapeSpec& s, RngStream& rng) {
  const auto [a, b, h] = s.extent;
  switch (s.kind) {
    case SurfaceKind::Ellipsoid: {
      Real x = rng.normal(), y = rng.normal(), z = rng.normal();
      Real n = std::sqrt(x * x + y * y + z * z);
      while (n < 1e-12) {
        x = rng.normal(), y = rng.normal(), z = rng.normal();
        n = std::sqrt(x * x + y * y + z * z);
      }
      return {a * x / n, b * y / n, h * z / n};
    }
    case SurfaceKind::Box: {
      const std::array<Real, 3> area{b * h, a * h, a * b};  // faces normal to x, y, z
      const Real pick = rng.uniform(0.0, area[0] + area[1] + area[2]);
      const int axis = pick < area[0] ? 0 : (pick < area[0] + area[1] ? 1 : 2);
      Point3 p{rng.uniform(-a, a), rng.uniform(-b, b), rng.uniform(-h, h)};
      p[axis] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * s.extent[axis];
      return p;
    }
    case SurfaceKind::Cylinder: {
      const Real r = 0.5 * (a + b);
      const Real side = 2.0 * std::numbers::pi * r * 2.0 * h;
      const Real caps = 2.0 * std::numbers::pi * r * r;
      const Real theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      if (rng.uniform(0.0, side + caps) < side)
        return {a * std::cos(theta), b * std::sin(theta), rng.uniform(-h, h)};
      const Real rho = std::sqrt(rng.uniform());
      return {a * rho * std::cos(theta), b * rho * std::sin(theta), rng.uniform() < 0.5 ? -h : h};
    }
  }
  return {0, 0, 0};
}

namespace detail {

/// Rows form an orthonormal basis of R^n (Gram-Schmidt, twice, on Gaussians).
inline Matrix random_orthonormal_basis(std::size_t n, RngStream& rng) {
  Matrix q(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = q.row(i);
    for (;;) {
      for (Real& x : row) x = rng.normal();
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t k = 0; k < i; ++k) {
          const Real d = dot(row, q.row(k));
          for (std::size_t f = 0; f < n; ++f) row[f] -= d * q(k, f);
        }
      const Real nr = norm(row);
      if (nr > 1e-6) {
        for (Real& x : row) x /= nr;
        break;
      }
    }
  }
  return q;
}

/// Random unit vector in the span of basis rows [lo, hi).
inline std::vector<Real> random_in_span(const Matrix& basis, std::size_t lo, std::size_t hi, RngStream& rng) {
  std::vector<Real> v(basis.cols(), 0.0);
  for (std::size_t k = lo; k < hi; ++k) {
    const Real c = rng.normal();
    for (std::size_t f = 0; f < v.size(); ++f) v[f] += c * basis(k, f);
  }
  const Real n = norm(v);
  if (n > 0)
    for (Real& x : v) x /= n;
  return v;
}

inline void axpy(std::vector<Real>& y, Real a, std::span<const Real> x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace detail

/// In-memory synthetic world; generate() writes it to disk.
struct SynthWorld {
  SynthConfig cfg;
  Matrix basis;                                          // (F, F)
  std::vector<std::vector<std::vector<Real>>> subtype_dir;  // [c][k] unit
  std::vector<std::array<std::vector<Real>, 3>> object_dir;  // [c][j] unit
  std::vector<std::vector<Real>> pose_dir;               // [r] unit
  std::vector<Matrix> landmarks;                         // [c] (L, F)
  std::vector<ShapeSpec> shapes;                         // [c]
  std::vector<std::vector<std::array<Real, 3>>> subtype_factor;  // [c][k]

  std::span<const Real> centroid(std::size_t c) const { return basis.row(c); }
};

inline SynthWorld build_world(const SynthConfig& cfg) {
  validate(cfg);
  SynthWorld w;
  w.cfg = cfg;
  const std::size_t F = cfg.feat, content = cfg.content_dim();
  RngStream basis_rng(cfg.seed, stream_id(1));
  w.basis = detail::random_orthonormal_basis(F, basis_rng);

  RngStream pose_rng(cfg.seed, stream_id(2));
  for (std::size_t r = 0; r < cfg.views; ++r) w.pose_dir.push_back(detail::random_in_span(w.basis, 0, content, pose_rng));

  for (std::size_t c = 0; c < cfg.categories; ++c) {
    RngStream rng(cfg.seed, stream_id(3, c));
    w.shapes.push_back(category_shape(c, rng));
    std::vector<std::vector<Real>> sub;
    std::vector<std::array<Real, 3>> factors;
    for (std::size_t k = 0; k < cfg.subtypes; ++k) {
      sub.push_back(detail::random_in_span(w.basis, 0, content, rng));
      std::array<Real, 3> f;
      for (auto& x : f) x = 1.0 + rng.uniform(-cfg.subtype_spread, cfg.subtype_spread);
      factors.push_back(f);
    }
    w.subtype_dir.push_back(std::move(sub));
    w.subtype_factor.push_back(factors);
    std::array<std::vector<Real>, 3> od;
    for (auto& d : od) d = detail::random_in_span(w.basis, 0, content, rng);
    w.object_dir.push_back(std::move(od));

    // Landmarks: category direction plus random mixtures of the structural
    // (subtype and object) directions, plus content-space noise.
    Matrix lm(cfg.landmarks, F);
    for (std::size_t l = 0; l < cfg.landmarks; ++l) {
      std::vector<Real> v(F, 0.0);
      detail::axpy(v, 0.5, w.centroid(c));
      for (std::size_t k = 0; k < cfg.subtypes; ++k) detail::axpy(v, rng.normal(), w.subtype_dir[c][k]);
      for (const auto& d : w.object_dir[c]) detail::axpy(v, rng.normal(), d);
      detail::axpy(v, cfg.landmark_noise, detail::random_in_span(w.basis, 0, content, rng));
      const Real n = norm(v);
      for (std::size_t f = 0; f < F; ++f) lm(l, f) = v[f] / n;
    }
    w.landmarks.push_back(std::move(lm));
  }
  return w;
}

struct SynthObject {
  std::string id;
  std::size_t category = 0;
  std::size_t subtype = 0;
  std::array<Real, 3> jitter{};
  Matrix raw_views;   // (R, F) before normalization
  Matrix views;       // (R, F) normalized
  std::vector<Real> texture;
  PointCloud cloud;   // normalized to the unit sphere
};

/// Builds the views of an object from its planted components. `noise_rng`
/// may be null for noise-free views.
inline Matrix object_raw_views(const SynthWorld& w, std::size_t c, std::size_t k, const std::array<Real, 3>& jitter,
                               std::span<const Real> texture, RngStream* noise_rng) {
  const auto& cfg = w.cfg;
  const std::size_t F = cfg.feat, content = cfg.content_dim();
  Matrix raw(cfg.views, F);
  for (std::size_t r = 0; r < cfg.views; ++r) {
    std::vector<Real> v(w.centroid(c).begin(), w.centroid(c).end());
    detail::axpy(v, cfg.subtype_scale, w.subtype_dir[c][k]);
    for (int j = 0; j < 3; ++j) detail::axpy(v, cfg.object_scale * jitter[j], w.object_dir[c][j]);
    detail::axpy(v, cfg.pose_scale, w.pose_dir[r]);
    if (noise_rng && cfg.view_noise > 0.0) {
      std::vector<Real> noise(F, 0.0);
      const Real sigma = cfg.view_noise / std::sqrt(static_cast<Real>(content));
      for (std::size_t b = 0; b < content; ++b) detail::axpy(noise, sigma * noise_rng->normal(), w.basis.row(b));
      const Real nn = norm(noise);
      const Real cap = 2.0 * cfg.view_noise;
      detail::axpy(v, nn > cap ? cap / nn : 1.0, noise);
    }
    detail::axpy(v, 1.0, texture);
    std::copy(v.begin(), v.end(), raw.row(r).begin());
  }
  return raw;
}

inline std::vector<Real> random_texture(const SynthWorld& w, RngStream& rng) {
  std::vector<Real> t(w.cfg.feat, 0.0);
  if (w.cfg.texture_dim == 0 || w.cfg.texture_scale == 0.0) return t;
  t = detail::random_in_span(w.basis, w.cfg.content_dim(), w.cfg.feat, rng);
  for (Real& x : t) x *= w.cfg.texture_scale;
  return t;
}

inline PointCloud object_cloud(const SynthWorld& w, std::size_t c, std::size_t k, const std::array<Real, 3>& jitter,
                               RngStream& rng) {
  ShapeSpec s = w.shapes[c];
  for (int a = 0; a < 3; ++a) s.extent[a] *= w.subtype_factor[c][k][a] * (1.0 + w.cfg.object_spread * jitter[a]);
  PointCloud cloud;
  cloud.points.reserve(w.cfg.points);
  for (std::size_t i = 0; i < w.cfg.points; ++i) {
    Point3 p = sample_surface(s, rng);
    for (auto& x : p) x += w.cfg.cloud_noise * rng.normal();
    cloud.points.push_back(p);
  }
  return normalize_unit_sphere(std::move(cloud));
}

inline std::string synth_object_id(std::size_t c, std::size_t m) {
  std::ostringstream os;
  os << "c" << c << "_o" << std::setw(3) << std::setfill('0') << m;
  return os.str();
}
inline std::string synth_category_id(std::size_t c) { return "cat" + std::to_string(c); }

inline SynthObject make_object(const SynthWorld& w, std::size_t c, std::size_t m) {
  RngStream rng(w.cfg.seed, stream_id(4, c, m));
  SynthObject o;
  o.id = synth_object_id(c, m);
  o.category = c;
  o.subtype = m % w.cfg.subtypes;
  for (auto& j : o.jitter) j = rng.uniform(-1.0, 1.0);
  o.texture = random_texture(w, rng);
  o.raw_views = object_raw_views(w, c, o.subtype, o.jitter, o.texture, &rng);
  o.views = o.raw_views;
  l2_normalize_rows(o.views);
  o.cloud = object_cloud(w, c, o.subtype, o.jitter, rng);
  return o;
}

/// Writes manifest.json, views/, clouds/, landmarks/, prompts/ and
/// synth_config.json under `out`. Output bytes depend only on the config.
inline DatasetManifest generate(const SynthConfig& cfg, const fs::path& out) {
  const SynthWorld w = build_world(cfg);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + out.string());

  DatasetManifest m;
  m.feat_dim = cfg.feat;
  m.views_per_object = cfg.views;
  m.base_dir = out;
  for (std::size_t c = 0; c < cfg.categories; ++c) {
    const std::string cid = synth_category_id(c);
    save_matrix(w.landmarks[c], out / "landmarks" / (cid + ".emb"));
    Matrix prompt(1, cfg.feat);
    std::copy(w.centroid(c).begin(), w.centroid(c).end(), prompt.row(0).begin());
    save_matrix(prompt, out / "prompts" / (cid + ".emb"));
    m.categories.push_back({cid, "landmarks/" + cid + ".emb", "prompts/" + cid + ".emb"});
  }
  const auto n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<Real>(cfg.per_category)));
  for (std::size_t c = 0; c < cfg.categories; ++c) {
    for (std::size_t i = 0; i < cfg.per_category; ++i) {
      const SynthObject o = make_object(w, c, i);
      save_matrix(o.views, out / "views" / (o.id + ".emb"));
      save_cloud(o.cloud, out / "clouds" / (o.id + ".emb"));
      m.objects.push_back({o.id, synth_category_id(c), "views/" + o.id + ".emb", "clouds/" + o.id + ".emb",
                           i + n_test >= cfg.per_category ? Split::Test : Split::Train});
    }
  }
  save_manifest(m, out / "manifest.json");
  std::ofstream sc(out / "synth_config.json", std::ios::trunc);
  sc << to_json(cfg).dump(2) << '\n';
  return m;
}

/// Two objects identical except for their texture components, with the
/// category's landmarks; raw (un-normalized) views kept alongside.
struct TextureTwins {
  ViewSet a, b;
  Matrix raw_a, raw_b;
  LandmarkSet landmarks;
};

inline TextureTwins make_texture_twins(const SynthConfig& cfg, std::size_t category = 0, std::size_t subtype = 0) {
  const SynthWorld w = build_world(cfg);
  RngStream rng(cfg.seed, stream_id(5, category, subtype));
  std::array<Real, 3> jitter;
  for (auto& j : jitter) j = rng.uniform(-1.0, 1.0);
  const auto ta = random_texture(w, rng);
  const auto tb = random_texture(w, rng);
  TextureTwins t;
  const std::string cid = synth_category_id(category);
  t.raw_a = object_raw_views(w, category, subtype, jitter, ta, nullptr);
  t.raw_b = object_raw_views(w, category, subtype, jitter, tb, nullptr);
  Matrix na = t.raw_a, nb = t.raw_b;
  l2_normalize_rows(na);
  l2_normalize_rows(nb);
  t.a = ViewSet{"twin_a", cid, std::move(na)};
  t.b = ViewSet{"twin_b", cid, std::move(nb)};
  t.landmarks = LandmarkSet{cid, w.landmarks[category]};
  return t;
}

}  // namespace hn3d
