// SPDX-License-Identifier: Apache-2.0
//
// Per-category similarity precomputation and lookup.
//
// On-disk layout of a store directory:
//   index.json        {"format": "hn3d-simstore", "version": 1, "kind": "i2i"|"i2l2",
//                      "alpha": <real>, "fingerprint": <16 hex digits>,
//                      "categories": [{"category": <id>, "file": <name>, "ids": [...]}, ...]}
//   block_NNN.emb     EMB1 float32 (|c|, |c|) symmetric matrix, rows/cols in "ids" order
#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hn3d/dataset.hpp"
#include "hn3d/error.hpp"
#include "hn3d/parallel.hpp"
#include "hn3d/similarity.hpp"
#include "hn3d/tensor_io.hpp"

namespace hn3d {

enum class SimKind { I2I, I2L2 };

inline std::string to_string(SimKind k) { return k == SimKind::I2I ? "i2i" : "i2l2"; }

inline SimKind parse_sim_kind(const std::string& s) {
  if (s == "i2i") return SimKind::I2I;
  if (s == "i2l2") return SimKind::I2L2;
  fail(ErrorCode::ConfigInvalid, "unknown similarity kind '" + s + "'");
}

inline constexpr Real kDefaultAlpha = 0.25;

struct SimMatrix {
  std::string category;
  std::vector<std::string> ids;
  Matrix values;  // float32-representable entries
};

class SimStore {
 public:
  SimStore() = default;
  SimStore(SimKind kind, Real alpha, std::string fingerprint, std::vector<SimMatrix> matrices)
      : kind_(kind), alpha_(alpha), fingerprint_(std::move(fingerprint)), matrices_(std::move(matrices)) {
    check_alpha(alpha_);
    for (std::size_t b = 0; b < matrices_.size(); ++b)
      for (std::size_t i = 0; i < matrices_[b].ids.size(); ++i) {
        if (!slot_.emplace(matrices_[b].ids[i], Slot{b, i}).second)
          fail(ErrorCode::ManifestInvalid, "object '" + matrices_[b].ids[i] + "' appears in two blocks");
      }
  }

  static void check_alpha(Real alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorCode::BadAlpha, "alpha must lie in (0, 1]");
  }

  SimKind kind() const noexcept { return kind_; }
  Real alpha() const noexcept { return alpha_; }
  const std::string& fingerprint() const noexcept { return fingerprint_; }
  const std::vector<SimMatrix>& matrices() const noexcept { return matrices_; }
  bool contains(const std::string& id) const { return slot_.contains(id); }

  /// Stored value within a category, alpha across categories.
  Real lookup(const std::string& a, const std::string& b) const {
    const auto ia = slot_.find(a);
    if (ia == slot_.end()) fail(ErrorCode::UnknownObject, "'" + a + "' not in store");
    const auto ib = slot_.find(b);
    if (ib == slot_.end()) fail(ErrorCode::UnknownObject, "'" + b + "' not in store");
    if (ia->second.block != ib->second.block) return alpha_;
    return matrices_[ia->second.block].values(ia->second.pos, ib->second.pos);
  }

  friend bool operator==(const SimStore& x, const SimStore& y) {
    if (x.kind_ != y.kind_ || x.alpha_ != y.alpha_ || x.fingerprint_ != y.fingerprint_ ||
        x.matrices_.size() != y.matrices_.size())
      return false;
    for (std::size_t b = 0; b < x.matrices_.size(); ++b) {
      const auto& p = x.matrices_[b];
      const auto& q = y.matrices_[b];
      if (p.category != q.category || p.ids != q.ids || !(p.values == q.values)) return false;
    }
    return true;
  }

 private:
  struct Slot {
    std::size_t block;
    std::size_t pos;
  };
  SimKind kind_ = SimKind::I2I;
  Real alpha_ = kDefaultAlpha;
  std::string fingerprint_;
  std::vector<SimMatrix> matrices_;
  std::unordered_map<std::string, Slot> slot_;
};

struct PrecomputeStats {
  std::size_t similarity_calls = 0;
};

/// Computes every within-category pair once (upper triangle), mirrors it, and
/// pins the diagonal to 1. Cross-category pairs are never evaluated.
inline SimStore precompute(const Dataset& data, SimKind kind, Real alpha,
                           std::span<const std::optional<LandmarkSet>> landmarks,
                           PrecomputeStats* stats = nullptr, std::size_t threads = thread_count()) {
  SimStore::check_alpha(alpha);
  const auto& m = data.manifest;
  if (kind == SimKind::I2L2) {
    if (landmarks.size() != m.categories.size())
      fail(ErrorCode::MissingLandmarks, "landmark list does not cover the categories");
    for (std::size_t c = 0; c < m.categories.size(); ++c)
      if (!landmarks[c]) fail(ErrorCode::MissingLandmarks, "category '" + m.categories[c].id + "' has no landmarks");
  }

  std::vector<std::vector<std::size_t>> members(m.categories.size());
  for (std::size_t i = 0; i < data.size(); ++i) members[data.category_of[i]].push_back(i);

  std::vector<ViewSet> views(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    views[i] = ViewSet{m.objects[i].id, m.objects[i].category, data.views[i]};
  std::vector<DescriptorSet> desc;
  if (kind == SimKind::I2L2) {
    desc.resize(data.size());
    parallel_for(
        data.size(), [&](std::size_t i) { desc[i] = build_descriptors(views[i], *landmarks[data.category_of[i]]); },
        threads);
  }

  std::vector<SimMatrix> blocks;
  struct Pair {
    std::size_t block, i, j;
  };
  std::vector<Pair> pairs;
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty()) continue;
    SimMatrix sm{m.categories[c].id, {}, Matrix(members[c].size(), members[c].size(), 0.0)};
    for (auto idx : members[c]) sm.ids.push_back(m.objects[idx].id);
    for (std::size_t i = 0; i < members[c].size(); ++i) {
      sm.values(i, i) = 1.0;
      for (std::size_t j = i + 1; j < members[c].size(); ++j) pairs.push_back({blocks.size(), i, j});
    }
    blocks.push_back(std::move(sm));
  }
  std::vector<std::size_t> block_category;
  for (std::size_t c = 0; c < members.size(); ++c)
    if (!members[c].empty()) block_category.push_back(c);

  std::vector<Real> results(pairs.size());
  parallel_for(
      pairs.size(),
      [&](std::size_t k) {
        const auto& pr = pairs[k];
        const auto& mem = members[block_category[pr.block]];
        const std::size_t a = mem[pr.i], b = mem[pr.j];
        const Real s = kind == SimKind::I2I ? i2i_similarity(views[a], views[b]) : i2l2_similarity(desc[a], desc[b]);
        results[k] = static_cast<Real>(static_cast<float>(s));
      },
      threads);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    auto& v = blocks[pairs[k].block].values;
    v(pairs[k].i, pairs[k].j) = results[k];
    v(pairs[k].j, pairs[k].i) = results[k];
  }
  if (stats) stats->similarity_calls = pairs.size();
  return SimStore(kind, alpha, dataset_fingerprint(m), std::move(blocks));
}

inline SimStore precompute(const Dataset& data, SimKind kind, Real alpha = kDefaultAlpha,
                           PrecomputeStats* stats = nullptr, std::size_t threads = thread_count()) {
  return precompute(data, kind, alpha, data.landmarks, stats, threads);
}

inline void save_store(const SimStore& store, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string());
  nlohmann::json index{{"format", "hn3d-simstore"},
                       {"version", 1},
                       {"kind", to_string(store.kind())},
                       {"alpha", store.alpha()},
                       {"fingerprint", store.fingerprint()}};
  index["categories"] = nlohmann::json::array();
  for (std::size_t b = 0; b < store.matrices().size(); ++b) {
    const auto& sm = store.matrices()[b];
    std::ostringstream name;
    name << "block_" << std::setw(3) << std::setfill('0') << b << ".emb";
    save_matrix(sm.values, dir / name.str());
    index["categories"].push_back({{"category", sm.category}, {"file", name.str()}, {"ids", sm.ids}});
  }
  std::ofstream out(dir / "index.json", std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + (dir / "index.json").string());
  out << index.dump(2) << '\n';
}

/// Loads a store; when a manifest is given its fingerprint must match.
inline SimStore load_store(const fs::path& dir, const DatasetManifest* expected = nullptr) {
  std::ifstream in(dir / "index.json");
  if (!in) fail(ErrorCode::IoError, "no simstore index in " + dir.string());
  nlohmann::json index;
  std::vector<SimMatrix> blocks;
  SimKind kind;
  Real alpha;
  std::string fingerprint;
  try {
    in >> index;
    if (index.at("format") != "hn3d-simstore" || index.at("version") != 1)
      fail(ErrorCode::ManifestInvalid, dir.string() + " is not an hn3d simstore");
    kind = parse_sim_kind(index.at("kind").get<std::string>());
    alpha = index.at("alpha").get<Real>();
    fingerprint = index.at("fingerprint").get<std::string>();
    for (const auto& c : index.at("categories")) {
      SimMatrix sm{c.at("category").get<std::string>(), c.at("ids").get<std::vector<std::string>>(),
                   to_matrix(load_tensor(dir / c.at("file").get<std::string>()))};
      if (sm.values.rows() != sm.ids.size() || sm.values.cols() != sm.ids.size())
        fail(ErrorCode::DimMismatch, "block for '" + sm.category + "' does not match its id list");
      blocks.push_back(std::move(sm));
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::ManifestInvalid, dir.string() + ": " + ex.what());
  }
  if (expected) {
    const auto want = dataset_fingerprint(*expected);
    if (want != fingerprint)
      fail(ErrorCode::FingerprintMismatch, "store " + fingerprint + " vs dataset " + want);
  }
  return SimStore(kind, alpha, std::move(fingerprint), std::move(blocks));
}

}  // namespace hn3d
