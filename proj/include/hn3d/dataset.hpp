// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hn3d/error.hpp"
#include "hn3d/numkit.hpp"
#include "hn3d/tensor_io.hpp"

namespace hn3d {

struct CategoryEntry {
  std::string id;
  std::optional<std::string> landmark_file;
  std::optional<std::string> prompt_embedding_file;
};

enum class Split { Train, Test };

struct ObjectEntry {
  std::string id;
  std::string category;
  std::string views_file;
  std::string cloud_file;
  Split split = Split::Train;
};

/// Parsed manifest.json. File paths are kept as written; resolve() joins them
/// with the manifest directory.
struct DatasetManifest {
  int version = 1;
  std::size_t feat_dim = 0;
  std::size_t views_per_object = 0;
  std::vector<CategoryEntry> categories;
  std::vector<ObjectEntry> objects;
  fs::path base_dir;

  fs::path resolve(const std::string& rel) const {
    fs::path p(rel);
    return p.is_absolute() ? p : base_dir / p;
  }

  std::optional<std::size_t> category_index(const std::string& id) const {
    for (std::size_t i = 0; i < categories.size(); ++i)
      if (categories[i].id == id) return i;
    return std::nullopt;
  }
};

/// Per-category landmark embeddings, shape (L, F).
struct LandmarkSet {
  std::string category;
  Matrix matrix;

  std::size_t size() const noexcept { return matrix.rows(); }
};

inline DatasetManifest parse_manifest(const nlohmann::json& j, fs::path base_dir) {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  try {
    m.version = j.at("version").get<int>();
    m.feat_dim = j.at("feat_dim").get<std::size_t>();
    m.views_per_object = j.at("views_per_object").get<std::size_t>();
    for (const auto& c : j.at("categories")) {
      CategoryEntry e;
      e.id = c.at("id").get<std::string>();
      if (c.contains("landmark_file") && !c["landmark_file"].is_null())
        e.landmark_file = c["landmark_file"].get<std::string>();
      if (c.contains("prompt_embedding_file") && !c["prompt_embedding_file"].is_null())
        e.prompt_embedding_file = c["prompt_embedding_file"].get<std::string>();
      m.categories.push_back(std::move(e));
    }
    for (const auto& o : j.at("objects")) {
      ObjectEntry e;
      e.id = o.at("id").get<std::string>();
      e.category = o.at("category").get<std::string>();
      e.views_file = o.at("views_file").get<std::string>();
      e.cloud_file = o.at("cloud_file").get<std::string>();
      if (o.contains("split")) {
        const auto s = o["split"].get<std::string>();
        if (s == "train") e.split = Split::Train;
        else if (s == "test") e.split = Split::Test;
        else fail(ErrorCode::ManifestInvalid, "object " + e.id + ": unknown split '" + s + "'");
      }
      m.objects.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::ManifestInvalid, ex.what());
  }
  if (m.version != 1) fail(ErrorCode::ManifestInvalid, "unsupported manifest version");
  if (m.feat_dim < 2) fail(ErrorCode::ManifestInvalid, "feat_dim must be >= 2");
  if (m.views_per_object < 1) fail(ErrorCode::ManifestInvalid, "views_per_object must be >= 1");
  return m;
}

inline DatasetManifest load_manifest(const fs::path& path) {
  fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream in(file);
  if (!in) fail(ErrorCode::IoError, "cannot open manifest " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::ManifestInvalid, file.string() + ": " + ex.what());
  }
  return parse_manifest(j, file.parent_path());
}

inline nlohmann::json manifest_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["feat_dim"] = m.feat_dim;
  j["views_per_object"] = m.views_per_object;
  j["categories"] = nlohmann::json::array();
  for (const auto& c : m.categories) {
    nlohmann::json e{{"id", c.id}};
    e["landmark_file"] = c.landmark_file ? nlohmann::json(*c.landmark_file) : nlohmann::json(nullptr);
    e["prompt_embedding_file"] =
        c.prompt_embedding_file ? nlohmann::json(*c.prompt_embedding_file) : nlohmann::json(nullptr);
    j["categories"].push_back(std::move(e));
  }
  j["objects"] = nlohmann::json::array();
  for (const auto& o : m.objects)
    j["objects"].push_back({{"id", o.id},
                            {"category", o.category},
                            {"views_file", o.views_file},
                            {"cloud_file", o.cloud_file},
                            {"split", o.split == Split::Train ? "train" : "test"}});
  return j;
}

inline void save_manifest(const DatasetManifest& m, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
  out << manifest_json(m).dump(2) << '\n';
}

struct Violation {
  std::string object_id;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;

  void add(std::string id, std::string message) {
    ok = false;
    violations.push_back({std::move(id), std::move(message)});
  }
};

namespace detail {
inline std::string dims_str(const std::vector<std::uint64_t>& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? ", " : "") + std::to_string(dims[i]);
  return s + ")";
}
}  // namespace detail

/// Checks every object and category file against the manifest. Never throws
/// for data problems; each one becomes a report entry.
inline ValidationReport validate_dataset(const DatasetManifest& m) {
  ValidationReport report;
  std::set<std::string> seen;
  const auto F = m.feat_dim;
  const auto R = m.views_per_object;

  auto check_tensor = [&](const std::string& owner, const fs::path& path,
                          auto&& expect) {
    try {
      Tensor t = load_tensor(path);
      expect(t);
    } catch (const Error& e) {
      report.add(owner, path.filename().string() + ": " + e.what());
    }
  };

  for (const auto& c : m.categories) {
    if (c.landmark_file)
      check_tensor("category:" + c.id, m.resolve(*c.landmark_file), [&](const Tensor& t) {
        if (t.dims.size() != 2 || t.dims[1] != F)
          report.add("category:" + c.id, "landmarks shape " + detail::dims_str(t.dims) + ", expected (L, " +
                                             std::to_string(F) + ")");
        else
          to_embeddings(t);
      });
    if (c.prompt_embedding_file)
      check_tensor("category:" + c.id, m.resolve(*c.prompt_embedding_file), [&](const Tensor& t) {
        if (t.dims.size() != 2 || t.dims[0] != 1 || t.dims[1] != F)
          report.add("category:" + c.id, "prompt shape " + detail::dims_str(t.dims) + ", expected (1, " +
                                             std::to_string(F) + ")");
        else
          to_embeddings(t);
      });
  }

  for (const auto& o : m.objects) {
    if (!seen.insert(o.id).second) report.add(o.id, "duplicate object id");
    if (!m.category_index(o.category)) report.add(o.id, "unknown category '" + o.category + "'");
    check_tensor(o.id, m.resolve(o.views_file), [&](const Tensor& t) {
      if (t.dims.size() != 2 || t.dims[0] != R || t.dims[1] != F)
        report.add(o.id, "views shape " + detail::dims_str(t.dims) + ", expected (" + std::to_string(R) +
                             ", " + std::to_string(F) + ")");
      else
        to_embeddings(t);
    });
    check_tensor(o.id, m.resolve(o.cloud_file), [&](const Tensor& t) {
      if (t.dims.size() != 2 || t.dims[1] != 3 || t.dims[0] < kMinCloudPoints)
        report.add(o.id, "cloud shape " + detail::dims_str(t.dims) + ", expected (P >= 8, 3)");
    });
  }
  return report;
}

/// Hash over object ids, categories and the bytes of every referenced file.
inline std::string dataset_fingerprint(const DatasetManifest& m) {
  std::uint64_t h = fnv1a("hn3d-dataset");
  auto mix_u64 = [&](std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    h = fnv1a(std::string_view(buf, 8), h);
  };
  auto mix_str = [&](const std::string& s) {
    mix_u64(s.size());
    h = fnv1a(s, h);
  };
  for (const auto& c : m.categories) {
    mix_str(c.id);
    mix_u64(c.landmark_file ? file_digest(m.resolve(*c.landmark_file)) : 0);
  }
  for (const auto& o : m.objects) {
    mix_str(o.id);
    mix_str(o.category);
    mix_u64(file_digest(m.resolve(o.views_file)));
    mix_u64(file_digest(m.resolve(o.cloud_file)));
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// Fully loaded dataset; immutable once built.
struct Dataset {
  DatasetManifest manifest;
  std::vector<Matrix> views;
  std::vector<PointCloud> clouds;
  std::vector<std::size_t> category_of;
  std::vector<std::optional<LandmarkSet>> landmarks;
  std::vector<std::optional<Vec>> prompts;
  std::unordered_map<std::string, std::size_t> index_of;

  std::size_t size() const noexcept { return manifest.objects.size(); }
  std::size_t category_count() const noexcept { return manifest.categories.size(); }

  std::vector<std::size_t> split_indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (manifest.objects[i].split == s) out.push_back(i);
    return out;
  }
};

/// Validates, then loads everything. Throws ManifestInvalid listing the
/// first violations if the dataset is inconsistent.
inline Dataset load_dataset(const DatasetManifest& m) {
  const auto report = validate_dataset(m);
  if (!report.ok) {
    std::string msg = std::to_string(report.violations.size()) + " violation(s)";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, report.violations.size()); ++i)
      msg += "; " + report.violations[i].object_id + ": " + report.violations[i].message;
    fail(ErrorCode::ManifestInvalid, msg);
  }
  Dataset d;
  d.manifest = m;
  d.views.reserve(m.objects.size());
  d.clouds.reserve(m.objects.size());
  for (std::size_t i = 0; i < m.objects.size(); ++i) {
    const auto& o = m.objects[i];
    d.views.push_back(load_embeddings(m.resolve(o.views_file)));
    d.clouds.push_back(normalize_unit_sphere(load_cloud(m.resolve(o.cloud_file))));
    d.category_of.push_back(*m.category_index(o.category));
    d.index_of.emplace(o.id, i);
  }
  for (const auto& c : m.categories) {
    if (c.landmark_file)
      d.landmarks.push_back(LandmarkSet{c.id, load_embeddings(m.resolve(*c.landmark_file))});
    else
      d.landmarks.push_back(std::nullopt);
    if (c.prompt_embedding_file) {
      Matrix p = load_embeddings(m.resolve(*c.prompt_embedding_file));
      d.prompts.push_back(Vec(p.row(0)));
    } else {
      d.prompts.push_back(std::nullopt);
    }
  }
  return d;
}

inline Dataset load_dataset(const fs::path& path) { return load_dataset(load_manifest(path)); }

}  // namespace hn3d
