#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "hn3d/synthdata.hpp"

namespace testing_support {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "hn3d") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

/// A small but complete synthetic dataset.
inline hn3d::SynthConfig small_config(std::uint64_t seed = 1) {
  hn3d::SynthConfig c;
  c.categories = 3;
  c.subtypes = 2;
  c.per_category = 6;
  c.views = 3;
  c.feat = 16;
  c.landmarks = 4;
  c.points = 32;
  c.texture_dim = 4;
  c.seed = seed;
  return c;
}

struct ObjectSpec {
  std::string id;
  std::string category;
  hn3d::Matrix views;
  hn3d::PointCloud cloud;
  hn3d::Split split = hn3d::Split::Train;
};

struct CategorySpec {
  std::string id;
  std::optional<hn3d::Matrix> landmarks;
  std::optional<hn3d::Matrix> prompt;
};

/// Writes a dataset directory from in-memory parts and returns its manifest.
inline hn3d::DatasetManifest write_dataset(const fs::path& dir, const std::vector<CategorySpec>& cats,
                                           const std::vector<ObjectSpec>& objs) {
  hn3d::DatasetManifest m;
  m.base_dir = dir;
  m.feat_dim = objs.front().views.cols();
  m.views_per_object = objs.front().views.rows();
  for (const auto& c : cats) {
    hn3d::CategoryEntry e{c.id, std::nullopt, std::nullopt};
    if (c.landmarks) {
      e.landmark_file = "landmarks/" + c.id + ".emb";
      hn3d::save_matrix(*c.landmarks, dir / *e.landmark_file);
    }
    if (c.prompt) {
      e.prompt_embedding_file = "prompts/" + c.id + ".emb";
      hn3d::save_matrix(*c.prompt, dir / *e.prompt_embedding_file);
    }
    m.categories.push_back(e);
  }
  for (const auto& o : objs) {
    hn3d::save_matrix(o.views, dir / "views" / (o.id + ".emb"));
    hn3d::save_cloud(o.cloud, dir / "clouds" / (o.id + ".emb"));
    m.objects.push_back({o.id, o.category, "views/" + o.id + ".emb", "clouds/" + o.id + ".emb", o.split});
  }
  hn3d::save_manifest(m, dir / "manifest.json");
  return hn3d::load_manifest(dir);
}

/// Random rows of unit norm.
inline hn3d::Matrix unit_rows(std::size_t rows, std::size_t cols, hn3d::RngStream& rng) {
  hn3d::Matrix m(rows, cols);
  for (auto& x : m.data()) x = rng.normal();
  hn3d::l2_normalize_rows(m);
  return m;
}

inline hn3d::PointCloud blob(std::size_t n, hn3d::RngStream& rng) {
  hn3d::PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({rng.normal(), rng.normal(), rng.normal()});
  return c;
}

inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing_support
