// SPDX-License-Identifier: Apache-2.0
//
// Zero-shot classification, linear probing and cross-modal retrieval.
// Rankings are by cosine descending; equal scores rank by ascending index.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hn3d/dataset.hpp"
#include "hn3d/encoder.hpp"
#include "hn3d/error.hpp"
#include "hn3d/numkit.hpp"
#include "hn3d/parallel.hpp"
#include "hn3d/trainer.hpp"

namespace hn3d {

struct CategoryScore {
  std::string category;
  std::size_t count = 0;
  Real top1 = 0.0;
};

struct MetricsReport {
  std::string task;
  std::vector<std::size_t> ks;
  std::vector<Real> accuracy;  // aligned with ks
  std::vector<CategoryScore> per_category;
  std::size_t count = 0;

  Real top(std::size_t k) const {
    for (std::size_t i = 0; i < ks.size(); ++i)
      if (ks[i] == k) return accuracy[i];
    fail(ErrorCode::ConfigInvalid, "top-" + std::to_string(k) + " was not evaluated");
  }
};

/// Zero-based rank of `target` among `scores` (higher is better, ties by
/// lower index first).
inline std::size_t rank_of(std::span<const Real> scores, std::size_t target) {
  const Real t = scores[target];
  std::size_t rank = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] > t || (scores[i] == t && i < target)) ++rank;
  return rank;
}

namespace detail {

inline MetricsReport report_from_ranks(std::string task, const std::vector<std::size_t>& ranks,
                                       const std::vector<std::size_t>& group, const std::vector<std::string>& group_names,
                                       std::vector<std::size_t> ks) {
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  MetricsReport r{std::move(task), ks, std::vector<Real>(ks.size(), 0.0), {}, ranks.size()};
  for (std::size_t i = 0; i < ks.size(); ++i) {
    std::size_t hits = 0;
    for (auto rank : ranks)
      if (rank < ks[i]) ++hits;
    r.accuracy[i] = ranks.empty() ? 0.0 : static_cast<Real>(hits) / static_cast<Real>(ranks.size());
  }
  for (std::size_t g = 0; g < group_names.size(); ++g) {
    CategoryScore cs{group_names[g], 0, 0.0};
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i)
      if (group[i] == g) {
        ++cs.count;
        if (ranks[i] == 0) ++hits;
      }
    if (cs.count == 0) continue;
    cs.top1 = static_cast<Real>(hits) / static_cast<Real>(cs.count);
    r.per_category.push_back(cs);
  }
  return r;
}

}  // namespace detail

/// Predicts each shape's category by the most similar prompt embedding.
inline MetricsReport zero_shot_classify(const Matrix& shapes, const std::vector<std::size_t>& labels,
                                        const Matrix& prompts, const std::vector<std::string>& category_names,
                                        std::vector<std::size_t> ks = {1, 5}) {
  if (prompts.rows() != category_names.size() || prompts.rows() == 0)
    fail(ErrorCode::CategorySetMismatch, "one prompt embedding per category is required");
  if (shapes.rows() != labels.size()) fail(ErrorCode::ShapeMismatch, "one label per shape embedding");
  if (shapes.cols() != prompts.cols()) fail(ErrorCode::DimMismatch, "shape and prompt dims differ");
  std::vector<std::size_t> ranks(shapes.rows());
  std::vector<Real> scores(prompts.rows());
  for (std::size_t i = 0; i < shapes.rows(); ++i) {
    if (labels[i] >= prompts.rows())
      fail(ErrorCode::CategorySetMismatch, "label " + std::to_string(labels[i]) + " has no prompt");
    for (std::size_t c = 0; c < prompts.rows(); ++c) scores[c] = dot(shapes.row(i), prompts.row(c));
    ranks[i] = rank_of(scores, labels[i]);
  }
  return detail::report_from_ranks("zeroshot", ranks, labels, category_names, std::move(ks));
}

/// Zero-based rank of each query's ground-truth gallery item.
inline std::vector<std::size_t> retrieval_ranks(const Matrix& queries, const Matrix& gallery,
                                                const std::vector<std::size_t>& truth) {
  if (truth.size() != queries.rows())
    fail(ErrorCode::MissingGroundTruth, "every query needs exactly one ground-truth item");
  if (queries.cols() != gallery.cols()) fail(ErrorCode::DimMismatch, "query and gallery dims differ");
  for (auto t : truth)
    if (t >= gallery.rows()) fail(ErrorCode::MissingGroundTruth, "ground truth index outside the gallery");
  std::vector<std::size_t> ranks(queries.rows());
  parallel_for(queries.rows(), [&](std::size_t q) {
    std::vector<Real> scores(gallery.rows());
    for (std::size_t g = 0; g < gallery.rows(); ++g) scores[g] = dot(queries.row(q), gallery.row(g));
    ranks[q] = rank_of(scores, truth[q]);
  });
  return ranks;
}

inline MetricsReport cross_modal_retrieval(const Matrix& queries, const Matrix& gallery,
                                           const std::vector<std::size_t>& truth, std::vector<std::size_t> ks = {1, 5},
                                           std::string task = "retrieval",
                                           const std::vector<std::size_t>& group = {},
                                           const std::vector<std::string>& group_names = {}) {
  const auto ranks = retrieval_ranks(queries, gallery, truth);
  return detail::report_from_ranks(std::move(task), ranks, group.empty() ? std::vector<std::size_t>(ranks.size(), 0) : group,
                                   group_names, std::move(ks));
}

struct ProbeConfig {
  std::size_t epochs = 200;
  Real lr = 0.05;
  Real weight_decay = 0.0;
  Real init_scale = 0.01;
  bool finetune = false;
  Real encoder_lr = 1e-4;
  std::uint64_t seed = 0;
};

/// Linear softmax head (F -> C) trained full-batch with Adam.
struct LinearHead {
  std::size_t classes = 0, feat = 0;
  std::vector<Real> w;  // (C, F)
  std::vector<Real> b;  // (C)

  std::vector<Real> logits(std::span<const Real> x) const {
    std::vector<Real> z(b);
    for (std::size_t c = 0; c < classes; ++c) z[c] += dot(std::span<const Real>(w.data() + c * feat, feat), x);
    return z;
  }
};

namespace detail {

struct HeadAdam {
  std::vector<Real> mw, vw, mb, vb;
  std::size_t t = 0;

  void step(LinearHead& h, const std::vector<Real>& gw, const std::vector<Real>& gb, Real lr, Real wd) {
    if (mw.empty()) mw.assign(gw.size(), 0), vw.assign(gw.size(), 0), mb.assign(gb.size(), 0), vb.assign(gb.size(), 0);
    ++t;
    const Real c1 = 1.0 - std::pow(0.9, static_cast<Real>(t));
    const Real c2 = 1.0 - std::pow(0.999, static_cast<Real>(t));
    auto upd = [&](std::vector<Real>& p, const std::vector<Real>& g, std::vector<Real>& m, std::vector<Real>& v,
                   bool decay) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (decay) p[i] *= 1.0 - lr * wd;
        m[i] = 0.9 * m[i] + 0.1 * g[i];
        v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + 1e-8);
      }
    };
    upd(h.w, gw, mw, vw, true);
    upd(h.b, gb, mb, vb, false);
  }
};

/// Mean cross-entropy gradient of the head; fills dX (N, F) when non-null.
inline Real head_gradients(const LinearHead& h, const Matrix& x, const std::vector<std::size_t>& y,
                           std::vector<Real>& gw, std::vector<Real>& gb, Matrix* dx) {
  gw.assign(h.w.size(), 0.0);
  gb.assign(h.b.size(), 0.0);
  if (dx) *dx = Matrix(x.rows(), x.cols(), 0.0);
  Real loss = 0.0;
  const Real inv = 1.0 / static_cast<Real>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto z = h.logits(x.row(i));
    const Real lse = logsumexp(z);
    loss += (lse - z[y[i]]) * inv;
    for (std::size_t c = 0; c < h.classes; ++c) {
      const Real g = (std::exp(z[c] - lse) - (c == y[i] ? 1.0 : 0.0)) * inv;
      gb[c] += g;
      const auto xi = x.row(i);
      for (std::size_t f = 0; f < h.feat; ++f) gw[c * h.feat + f] += g * xi[f];
      if (dx)
        for (std::size_t f = 0; f < h.feat; ++f) (*dx)(i, f) += g * h.w[c * h.feat + f];
    }
  }
  return loss;
}

inline LinearHead init_head(std::size_t classes, std::size_t feat, const ProbeConfig& cfg) {
  LinearHead h{classes, feat, std::vector<Real>(classes * feat), std::vector<Real>(classes, 0.0)};
  RngStream rng(cfg.seed, stream_id(0x9E4D));
  for (Real& x : h.w) x = cfg.init_scale * rng.normal();
  return h;
}

inline MetricsReport evaluate_head(const LinearHead& h, const Matrix& x, const std::vector<std::size_t>& y,
                                   const std::vector<std::string>& names) {
  std::vector<std::size_t> ranks(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) ranks[i] = rank_of(h.logits(x.row(i)), y[i]);
  return report_from_ranks("linear-probe", ranks, y, names, {1, std::min<std::size_t>(5, h.classes)});
}

inline void check_probe_inputs(const std::vector<std::string>& train_ids, const std::vector<std::string>& test_ids,
                               std::size_t classes) {
  if (classes < 2) fail(ErrorCode::ConfigInvalid, "linear probe needs at least two categories");
  const std::set<std::string> train(train_ids.begin(), train_ids.end());
  for (const auto& id : test_ids)
    if (train.contains(id)) fail(ErrorCode::SplitLeakage, "object '" + id + "' is in both splits");
}

}  // namespace detail

/// Linear probe on fixed embeddings.
inline MetricsReport linear_probe(const Matrix& train_x, const std::vector<std::size_t>& train_y,
                                  const std::vector<std::string>& train_ids, const Matrix& test_x,
                                  const std::vector<std::size_t>& test_y, const std::vector<std::string>& test_ids,
                                  const std::vector<std::string>& category_names, const ProbeConfig& cfg) {
  detail::check_probe_inputs(train_ids, test_ids, category_names.size());
  if (train_x.rows() != train_y.size() || test_x.rows() != test_y.size() || train_x.cols() != test_x.cols())
    fail(ErrorCode::ShapeMismatch, "probe inputs disagree in size");
  for (auto y : train_y)
    if (y >= category_names.size()) fail(ErrorCode::CategorySetMismatch, "label out of range");
  for (auto y : test_y)
    if (y >= category_names.size()) fail(ErrorCode::CategorySetMismatch, "label out of range");
  LinearHead head = detail::init_head(category_names.size(), train_x.cols(), cfg);
  detail::HeadAdam opt;
  std::vector<Real> gw, gb;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    detail::head_gradients(head, train_x, train_y, gw, gb, nullptr);
    opt.step(head, gw, gb, cfg.lr, cfg.weight_decay);
  }
  return detail::evaluate_head(head, test_x, test_y, category_names);
}

/// Linear probe over a dataset's train/test split using the encoder. With
/// cfg.finetune the encoder weights are updated jointly with the head.
inline MetricsReport linear_probe(const EncoderParams& encoder, const Dataset& data, const ProbeConfig& cfg) {
  const auto tr = data.split_indices(Split::Train);
  const auto te = data.split_indices(Split::Test);
  std::vector<std::string> names, tr_ids, te_ids;
  for (const auto& c : data.manifest.categories) names.push_back(c.id);
  std::vector<std::size_t> tr_y, te_y;
  for (auto i : tr) tr_ids.push_back(data.manifest.objects[i].id), tr_y.push_back(data.category_of[i]);
  for (auto i : te) te_ids.push_back(data.manifest.objects[i].id), te_y.push_back(data.category_of[i]);
  if (!cfg.finetune)
    return linear_probe(encode_objects(encoder, data, tr), tr_y, tr_ids, encode_objects(encoder, data, te), te_y,
                        te_ids, names, cfg);

  detail::check_probe_inputs(tr_ids, te_ids, names.size());
  EncoderParams params = encoder;
  LinearHead head = detail::init_head(names.size(), params.dims.feat, cfg);
  detail::HeadAdam head_opt;
  AdamState enc_opt = AdamState::zeros(params.dims);
  AdamConfig adam;
  adam.weight_decay = cfg.weight_decay;
  std::vector<Real> gw, gb;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    Matrix x(tr.size(), params.dims.feat);
    std::vector<EncoderCache> caches(tr.size());
    parallel_for(tr.size(), [&](std::size_t q) {
      const Vec v = encode_points(params, data.clouds[tr[q]], &caches[q]);
      std::copy(v.begin(), v.end(), x.row(q).begin());
    });
    Matrix dx;
    detail::head_gradients(head, x, tr_y, gw, gb, &dx);
    std::vector<ParamGrads> per(tr.size());
    parallel_for(tr.size(), [&](std::size_t q) { per[q] = encoder_backward(params, caches[q], dx.row(q)); });
    ParamGrads g = ParamGrads::zeros(params.dims);
    for (const auto& p : per) g += p;
    head_opt.step(head, gw, gb, cfg.lr, cfg.weight_decay);
    adamw_step(params, g, enc_opt, e + 1, cfg.encoder_lr, adam);
  }
  return detail::evaluate_head(head, encode_objects(params, data, te), te_y, names);
}

/// Zero-shot over a split of the dataset using its category prompts.
inline MetricsReport zero_shot_dataset(const EncoderParams& encoder, const Dataset& data, Split split,
                                       std::vector<std::size_t> ks = {1, 5}) {
  Matrix prompts(data.category_count(), data.manifest.feat_dim);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < data.category_count(); ++c) {
    if (!data.prompts[c])
      fail(ErrorCode::CategorySetMismatch, "category '" + data.manifest.categories[c].id + "' has no prompt embedding");
    std::copy(data.prompts[c]->begin(), data.prompts[c]->end(), prompts.row(c).begin());
    names.push_back(data.manifest.categories[c].id);
  }
  const auto idx = data.split_indices(split);
  std::vector<std::size_t> labels;
  for (auto i : idx) labels.push_back(data.category_of[i]);
  return zero_shot_classify(encode_objects(encoder, data, idx), labels, prompts, names, std::move(ks));
}

struct RetrievalPair {
  MetricsReport image_to_shape;
  MetricsReport shape_to_image;

  Real mean_top1() const { return 0.5 * (image_to_shape.top(1) + shape_to_image.top(1)); }
};

/// Identity-paired retrieval over a split: each object's shape against one
/// of its views, the view drawn per object from `seed`.
inline RetrievalPair retrieval_dataset(const EncoderParams& encoder, const Dataset& data, Split split,
                                       std::uint64_t seed, std::vector<std::size_t> ks = {1, 5}) {
  const auto idx = data.split_indices(split);
  Matrix shapes = encode_objects(encoder, data, idx);
  Matrix images(idx.size(), data.manifest.feat_dim);
  std::vector<std::size_t> truth(idx.size()), group(idx.size());
  for (std::size_t q = 0; q < idx.size(); ++q) {
    RngStream rng(seed, stream_id(20, idx[q]));
    const auto r = static_cast<std::size_t>(rng.below(data.manifest.views_per_object));
    std::copy(data.views[idx[q]].row(r).begin(), data.views[idx[q]].row(r).end(), images.row(q).begin());
    truth[q] = q;
    group[q] = data.category_of[idx[q]];
  }
  std::vector<std::string> names;
  for (const auto& c : data.manifest.categories) names.push_back(c.id);
  return {cross_modal_retrieval(images, shapes, truth, ks, "image-to-shape", group, names),
          cross_modal_retrieval(shapes, images, truth, ks, "shape-to-image", group, names)};
}

/// CSV with one overall row per report and one row per category.
inline void write_reports_csv(const std::vector<MetricsReport>& reports, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
  std::set<std::size_t> all_ks;
  for (const auto& r : reports) all_ks.insert(r.ks.begin(), r.ks.end());
  out << "task,category,count";
  for (auto k : all_ks) out << ",top" << k;
  out << '\n' << std::setprecision(6) << std::fixed;
  for (const auto& r : reports) {
    out << r.task << ",all," << r.count;
    for (auto k : all_ks) {
      out << ',';
      if (std::find(r.ks.begin(), r.ks.end(), k) != r.ks.end()) out << r.top(k);
    }
    out << '\n';
    for (const auto& c : r.per_category) {
      out << r.task << ',' << c.category << ',' << c.count;
      for (auto k : all_ks) {
        out << ',';
        if (k == 1) out << c.top1;
      }
      out << '\n';
    }
  }
}

inline void print_reports(const std::vector<MetricsReport>& reports, std::ostream& os) {
  os << std::left << std::setw(16) << "task" << std::setw(12) << "category" << std::right << std::setw(8) << "count";
  std::set<std::size_t> all_ks;
  for (const auto& r : reports) all_ks.insert(r.ks.begin(), r.ks.end());
  for (auto k : all_ks) os << std::setw(10) << ("top" + std::to_string(k));
  os << '\n' << std::fixed << std::setprecision(4);
  for (const auto& r : reports) {
    os << std::left << std::setw(16) << r.task << std::setw(12) << "all" << std::right << std::setw(8) << r.count;
    for (auto k : all_ks) {
      if (std::find(r.ks.begin(), r.ks.end(), k) != r.ks.end()) os << std::setw(10) << r.top(k);
      else os << std::setw(10) << "-";
    }
    os << '\n';
  }
  os << std::defaultfloat;
}

}  // namespace hn3d
