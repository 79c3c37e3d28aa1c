// SPDX-License-Identifier: Apache-2.0
//
// Contrastive training of the point encoder against frozen view embeddings.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hn3d/dataset.hpp"
#include "hn3d/encoder.hpp"
#include "hn3d/error.hpp"
#include "hn3d/loss.hpp"
#include "hn3d/parallel.hpp"
#include "hn3d/simstore.hpp"

namespace hn3d {

enum class LossMode { Plain, HnI2I, HnI2L2, HnAvg };

inline std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::Plain: return "plain";
    case LossMode::HnI2I: return "hn-i2i";
    case LossMode::HnI2L2: return "hn-i2l2";
    case LossMode::HnAvg: return "hn-avg";
  }
  return "plain";
}

inline LossMode parse_loss_mode(const std::string& s) {
  if (s == "plain") return LossMode::Plain;
  if (s == "hn-i2i") return LossMode::HnI2I;
  if (s == "hn-i2l2") return LossMode::HnI2L2;
  if (s == "hn-avg") return LossMode::HnAvg;
  fail(ErrorCode::ConfigInvalid, "unknown loss mode '" + s + "'");
}

struct TrainConfig {
  std::size_t batch = 64;
  std::size_t epochs = 30;
  Real base_lr = 1e-3;
  Real warmup_frac = 0.1;
  Real min_lr = 0.0;
  AdamConfig adam;
  AugmentConfig augment;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 128;
  Real init_tau = kDefaultTau;
  std::uint64_t seed = 0;
  LossMode mode = LossMode::Plain;
  std::size_t threads = 0;  // 0: thread_count()
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch", c.batch},
          {"epochs", c.epochs},
          {"base_lr", c.base_lr},
          {"warmup_frac", c.warmup_frac},
          {"min_lr", c.min_lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"eps", c.adam.eps},
          {"weight_decay", c.adam.weight_decay},
          {"rotate_max", c.augment.rotate_max},
          {"translate", c.augment.translate},
          {"jitter_sigma", c.augment.jitter_sigma},
          {"jitter_clip", c.augment.jitter_clip},
          {"hidden1", c.hidden1},
          {"hidden2", c.hidden2},
          {"init_tau", c.init_tau},
          {"seed", c.seed},
          {"mode", to_string(c.mode)}};
}

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  Real loss = 0.0;
  Real lr = 0.0;
  Real logit_scale = 0.0;
  double wall_ms = 0.0;
  Real weight_sum_error = 0.0;
};

struct TrainResult {
  EncoderParams params;
  std::vector<StepLog> log;
  std::size_t total_steps = 0;
};

struct TrainStores {
  const SimStore* i2i = nullptr;
  const SimStore* i2l2 = nullptr;
};

struct TrainOutput {
  fs::path dir;                    // empty: keep everything in memory
  bool checkpoint_each_epoch = true;
};

inline constexpr Real kWeightSumTolerance = 1e-9;

namespace detail {

inline std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch) {
    const std::size_t hi = std::min(order.size(), i + batch);
    if (hi - i < 2) break;  // a single leftover sample has no negatives
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return out;
}

inline void write_metrics(const std::vector<StepLog>& log, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
  out << "step,epoch,loss,lr,logit_scale,wall_ms\n";
  out << std::setprecision(10);
  for (const auto& s : log)
    out << s.step << ',' << s.epoch << ',' << s.loss << ',' << s.lr << ',' << s.logit_scale << ','
        << std::fixed << std::setprecision(3) << s.wall_ms << std::defaultfloat << std::setprecision(10) << '\n';
}

}  // namespace detail

/// Trains on the dataset's train split. Hard-negative modes need the stores
/// of the matching kind, fingerprinted against this dataset.
inline TrainResult train(const Dataset& data, const TrainConfig& cfg, TrainStores stores = {},
                         const TrainOutput& output = {},
                         const std::function<void(const StepLog&)>& on_step = nullptr) {
  if (cfg.batch < 2) fail(ErrorCode::ConfigInvalid, "batch size must be >= 2");
  if (cfg.epochs < 1) fail(ErrorCode::ConfigInvalid, "need at least one epoch");
  if (!(cfg.warmup_frac >= 0.0 && cfg.warmup_frac < 1.0)) fail(ErrorCode::ConfigInvalid, "warmup_frac must be in [0, 1)");
  if (!(cfg.base_lr > 0.0)) fail(ErrorCode::ConfigInvalid, "learning rate must be positive");

  const bool need_i2i = cfg.mode == LossMode::HnI2I || cfg.mode == LossMode::HnAvg;
  const bool need_i2l2 = cfg.mode == LossMode::HnI2L2 || cfg.mode == LossMode::HnAvg;
  const std::string fingerprint = (need_i2i || need_i2l2) ? dataset_fingerprint(data.manifest) : std::string{};
  auto check_store = [&](const SimStore* s, SimKind kind) {
    if (!s) fail(ErrorCode::ConfigInvalid, "mode " + to_string(cfg.mode) + " needs a " + to_string(kind) + " simstore");
    if (s->kind() != kind)
      fail(ErrorCode::ConfigInvalid, "expected a " + to_string(kind) + " simstore, got " + to_string(s->kind()));
    if (s->fingerprint() != fingerprint)
      fail(ErrorCode::FingerprintMismatch, "simstore " + s->fingerprint() + " vs dataset " + fingerprint);
  };
  if (need_i2i) check_store(stores.i2i, SimKind::I2I);
  if (need_i2l2) check_store(stores.i2l2, SimKind::I2L2);

  const auto train_idx = data.split_indices(Split::Train);
  if (train_idx.size() < 2) fail(ErrorCode::ConfigInvalid, "train split needs at least two objects");
  const std::size_t steps_per_epoch = detail::make_batches(train_idx, cfg.batch).size();
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  const auto warmup = static_cast<std::size_t>(std::llround(cfg.warmup_frac * static_cast<Real>(total_steps)));
  if (warmup >= total_steps) fail(ErrorCode::ConfigInvalid, "warmup must be shorter than training");
  const ScheduleConfig sched{cfg.base_lr, warmup, total_steps, cfg.min_lr};
  const std::size_t threads = cfg.threads ? cfg.threads : thread_count();

  const EncoderDims dims{cfg.hidden1, cfg.hidden2, data.manifest.feat_dim};
  TrainResult result;
  result.params = init_encoder(dims, cfg.seed, cfg.init_tau);
  result.total_steps = total_steps;
  AdamState adam = AdamState::zeros(dims);
  const std::size_t R = data.manifest.views_per_object;
  const std::size_t F = dims.feat;

  nlohmann::json meta{{"config", to_json(cfg)},
                      {"dataset_fingerprint", dataset_fingerprint(data.manifest)},
                      {"total_steps", total_steps}};
  auto checkpoint = [&](const fs::path& dir, std::size_t step, std::size_t next_epoch) {
    nlohmann::json m = meta;
    m["step"] = step;
    m["rng"] = {{"seed", cfg.seed}, {"next_epoch", next_epoch}};
    save_checkpoint(result.params, m, dir);
  };

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    RngStream shuffle_rng(cfg.seed, stream_id(10, epoch));
    shuffle_rng.shuffle(order);
    const auto batches = detail::make_batches(order, cfg.batch);

    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto& members = batches[b];
      const std::size_t n = members.size();
      Matrix e_img(n, F), e_shape(n, F);
      std::vector<EncoderCache> caches(n);
      std::vector<std::string> ids(n);

      parallel_for(
          n,
          [&](std::size_t q) {
            const std::size_t obj = members[q];
            RngStream view_rng(cfg.seed, stream_id(11, epoch, obj));
            const auto r = static_cast<std::size_t>(view_rng.below(R));
            std::copy(data.views[obj].row(r).begin(), data.views[obj].row(r).end(), e_img.row(q).begin());
            RngStream aug_rng(cfg.seed, stream_id(12, epoch, obj));
            const PointCloud cloud = augment(data.clouds[obj], aug_rng, cfg.augment);
            const Vec e = encode_points(result.params, cloud, &caches[q]);
            std::copy(e.begin(), e.end(), e_shape.row(q).begin());
          },
          threads);
      for (std::size_t q = 0; q < n; ++q) ids[q] = data.manifest.objects[members[q]].id;

      BatchWeights w;
      switch (cfg.mode) {
        case LossMode::Plain: w = uniform_weights(n); break;
        case LossMode::HnI2I: w = batch_weights(batch_sim(*stores.i2i, ids)); break;
        case LossMode::HnI2L2: w = batch_weights(batch_sim(*stores.i2l2, ids)); break;
        case LossMode::HnAvg: w = avg_weights(batch_sim(*stores.i2i, ids), batch_sim(*stores.i2l2, ids)); break;
      }
      const Real sum_err = weight_sum_error(w);
      if (!(sum_err <= kWeightSumTolerance))
        fail(ErrorCode::NumericFailure, "batch weights lost normalization at epoch " + std::to_string(epoch) +
                                            " batch " + std::to_string(b));

      const LossOutput loss = hn_weighted_loss(e_img, e_shape, w, result.params.temp);
      if (!std::isfinite(loss.value) || !all_finite(loss.grad_shape.data()) || !std::isfinite(loss.grad_log_inv_tau))
        fail(ErrorCode::NumericFailure, "non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                            std::to_string(b) + " (first id " + ids.front() + ")");

      std::vector<ParamGrads> per_sample(n);
      parallel_for(
          n, [&](std::size_t q) { per_sample[q] = encoder_backward(result.params, caches[q], loss.grad_shape.row(q)); },
          threads);
      ParamGrads grads = ParamGrads::zeros(dims);
      for (const auto& g : per_sample) grads += g;
      grads.log_inv_tau = loss.grad_log_inv_tau;

      ++step;
      const Real lr = lr_schedule(step, sched);
      adamw_step(result.params, grads, adam, step, lr, cfg.adam);

      StepLog entry{step, epoch, loss.value, lr, result.params.temp.scale(),
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count(), sum_err};
      result.log.push_back(entry);
      if (on_step) on_step(entry);
    }
    if (!output.dir.empty() && output.checkpoint_each_epoch) {
      std::ostringstream name;
      name << "epoch_" << std::setw(3) << std::setfill('0') << epoch;
      checkpoint(output.dir / "checkpoints" / name.str(), step, epoch + 1);
    }
  }

  if (!output.dir.empty()) {
    checkpoint(output.dir / "final", step, cfg.epochs);
    detail::write_metrics(result.log, output.dir / "metrics.csv");
  }
  return result;
}

/// Encodes every object's un-augmented cloud; rows follow `indices`.
inline Matrix encode_objects(const EncoderParams& params, const Dataset& data, const std::vector<std::size_t>& indices,
                             std::size_t threads = thread_count()) {
  Matrix out(indices.size(), params.dims.feat);
  parallel_for(
      indices.size(),
      [&](std::size_t q) {
        const Vec e = encode_points(params, data.clouds[indices[q]]);
        std::copy(e.begin(), e.end(), out.row(q).begin());
      },
      threads);
  return out;
}

}  // namespace hn3d
