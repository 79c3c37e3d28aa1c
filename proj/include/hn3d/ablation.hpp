// SPDX-License-Identifier: Apache-2.0
//
// Sweep over the number of landmarks per category: regenerate the dataset,
// rebuild the (I2L)^2 store, retrain with hn-i2l2, evaluate.
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "hn3d/eval.hpp"
#include "hn3d/simstore.hpp"
#include "hn3d/synthdata.hpp"
#include "hn3d/trainer.hpp"

namespace hn3d {

struct AblationRow {
  std::size_t landmarks = 0;
  Real zero_shot = 0.0;
  Real fine_tuned = 0.0;
  Real retrieval = 0.0;  // top-1 averaged over both retrieval directions
  std::vector<Real> zero_shot_per_seed;
};

struct AblationConfig {
  SynthConfig data;     // landmarks and seed are overridden per cell
  TrainConfig train;    // mode forced to hn-i2l2, seed offset per repeat
  ProbeConfig probe;
  Real alpha = kDefaultAlpha;
  std::vector<std::size_t> grid{32, 64, 128, 256, 512};
  std::size_t seeds = 3;
  fs::path work_dir;
};

inline std::vector<std::size_t> dedupe_grid(const std::vector<std::size_t>& grid, std::vector<std::string>* warnings) {
  std::vector<std::size_t> out;
  std::set<std::size_t> seen;
  for (auto l : grid) {
    if (seen.insert(l).second) out.push_back(l);
    else if (warnings) warnings->push_back("duplicate L=" + std::to_string(l) + " ignored");
  }
  return out;
}

inline Real median(std::vector<Real> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline std::vector<AblationRow> ablate_landmarks(const AblationConfig& cfg, std::vector<std::string>* warnings = nullptr,
                                                 std::ostream* progress = nullptr) {
  if (cfg.seeds < 1) fail(ErrorCode::ConfigInvalid, "need at least one seed");
  if (cfg.work_dir.empty()) fail(ErrorCode::ConfigInvalid, "ablation needs a work directory");
  const auto grid = dedupe_grid(cfg.grid, warnings);
  std::vector<AblationRow> rows;
  for (auto L : grid) {
    AblationRow row;
    row.landmarks = L;
    std::vector<Real> zs, ft, rt;
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
      SynthConfig sc = cfg.data;
      sc.landmarks = L;
      sc.seed = cfg.data.seed + s;
      const fs::path dir = cfg.work_dir / ("L" + std::to_string(L) + "_s" + std::to_string(s));
      generate(sc, dir);
      const Dataset data = load_dataset(dir);
      const SimStore store = precompute(data, SimKind::I2L2, cfg.alpha);
      TrainConfig tc = cfg.train;
      tc.mode = LossMode::HnI2L2;
      tc.seed = cfg.train.seed + s;
      const TrainResult trained = train(data, tc, {nullptr, &store}, {dir / "run", false});
      ProbeConfig pc = cfg.probe;
      pc.seed = cfg.probe.seed + s;
      zs.push_back(zero_shot_dataset(trained.params, data, Split::Test).top(1));
      ft.push_back(linear_probe(trained.params, data, pc).top(1));
      rt.push_back(retrieval_dataset(trained.params, data, Split::Test, tc.seed).mean_top1());
      if (progress)
        *progress << "L=" << L << " seed=" << s << " zero-shot=" << zs.back() << " probe=" << ft.back()
                  << " retrieval=" << rt.back() << std::endl;
    }
    row.zero_shot = median(zs);
    row.fine_tuned = median(ft);
    row.retrieval = median(rt);
    row.zero_shot_per_seed = zs;
    rows.push_back(row);
  }
  return rows;
}

inline void write_ablation_csv(const std::vector<AblationRow>& rows, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
  out << "L,zero_shot,fine_tuned,retrieval\n" << std::fixed << std::setprecision(6);
  for (const auto& r : rows) out << r.landmarks << ',' << r.zero_shot << ',' << r.fine_tuned << ',' << r.retrieval << '\n';
}

inline void print_ablation(const std::vector<AblationRow>& rows, std::ostream& os) {
  os << std::setw(6) << "L" << std::setw(12) << "Zero Shot" << std::setw(12) << "Fine Tuned" << std::setw(12)
     << "Retrieval" << '\n'
     << std::fixed << std::setprecision(1);
  for (const auto& r : rows)
    os << std::setw(6) << r.landmarks << std::setw(12) << 100.0 * r.zero_shot << std::setw(12) << 100.0 * r.fine_tuned
       << std::setw(12) << 100.0 * r.retrieval << '\n';
  os << std::defaultfloat;
}

}  // namespace hn3d
