// SPDX-License-Identifier: Apache-2.0
//
// hn3d command-line front end. Every subcommand accepts --config FILE (a
// JSON object keyed by flag name); flags on the command line override it.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "hn3d/hn3d.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::size_t> parse_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      hn3d::fail(hn3d::ErrorCode::Usage, "bad " + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) hn3d::fail(hn3d::ErrorCode::Usage, what + " is empty");
  return out;
}

// Turns a JSON config object into command-line tokens.
std::vector<std::string> config_tokens(const json& cfg) {
  std::vector<std::string> tokens;
  for (const auto& [key, value] : cfg.items()) {
    if (key == "command") continue;
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back(flag);
    } else if (value.is_string()) {
      tokens.push_back(flag);
      tokens.push_back(value.get<std::string>());
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
      tokens.push_back(flag);
      tokens.push_back(joined);
    } else if (value.is_number()) {
      tokens.push_back(flag);
      tokens.push_back(value.dump());
    } else {
      hn3d::fail(hn3d::ErrorCode::Usage, "config key '" + key + "' has an unsupported value");
    }
  }
  return tokens;
}

// Splices --config contents in front of the user's own flags so the latter win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) hn3d::fail(hn3d::ErrorCode::Usage, "--config needs a file");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) hn3d::fail(hn3d::ErrorCode::Usage, "cannot read config " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    hn3d::fail(hn3d::ErrorCode::Usage, "config " + path + ": " + e.what());
  }
  if (!cfg.is_object()) hn3d::fail(hn3d::ErrorCode::Usage, "config must be a JSON object");

  std::size_t pos = 1;
  while (pos < args.size() && args[pos].rfind("-", 0) != 0) ++pos;
  if (pos == 1 && cfg.contains("command")) {
    std::stringstream ss(cfg["command"].get<std::string>());
    std::vector<std::string> words;
    for (std::string w; ss >> w;) words.push_back(w);
    args.insert(args.begin() + 1, words.begin(), words.end());
    pos += words.size();
  }
  const auto tokens = config_tokens(cfg);
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(pos), tokens.begin(), tokens.end());
  return args;
}

/// add_option with floating defaults recorded in shortest round-trip form.
template <class T>
CLI::Option* add_opt(CLI::App* app, const std::string& name, T& var, const std::string& desc) {
  CLI::Option* opt = app->add_option(name, var, desc);
  if constexpr (std::is_floating_point_v<T>) {
    opt->default_function([&var] {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, var);
      return std::string(buf, res.ptr);
    });
    opt->capture_default_str();
  }
  return opt;
}

std::string command_path(const CLI::App* app) {
  std::string path;
  for (const CLI::App* a = app; a && a->get_parent(); a = a->get_parent())
    path = a->get_name() + (path.empty() ? "" : " " + path);
  return path;
}

// "4" -> 4 and "0.25" -> 0.25; anything else stays a string.
json typed(const std::string& text) {
  const json parsed = json::parse(text, nullptr, false);
  return !parsed.is_discarded() && parsed.is_number() ? parsed : json(text);
}

json resolved_config(const CLI::App* app) {
  json j;
  j["command"] = command_path(app);
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->get_expected_min() == 0) {
      j[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      j[name] = typed(opt->results().back());
    } else if (!opt->get_default_str().empty()) {
      j[name] = typed(opt->get_default_str());
    }
  }
  return j;
}

void write_resolved(const CLI::App* app, const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) hn3d::fail(hn3d::ErrorCode::IoError, "cannot write " + file.string());
  out << resolved_config(app).dump(2) << '\n';
  std::cerr << "resolved config: " << file.string() << '\n';
}

fs::path sidecar(const fs::path& file) { return fs::path(file.string() + ".config.json"); }

struct GenArgs {
  hn3d::SynthConfig cfg;
  std::string out;
};

struct PrecomputeArgs {
  std::string data, sim = "i2i", out, landmarks_dir;
  double alpha = hn3d::kDefaultAlpha;
  bool from_manifest = false;
  std::size_t threads = 0;
};

struct TrainArgs {
  std::string data, mode = "plain", store, store2, out;
  hn3d::TrainConfig cfg;
  bool no_epoch_checkpoints = false;
};

struct EvalArgs {
  std::string ckpt, data, topk = "1,5", out, split = "test";
  std::uint64_t seed = 0;
  hn3d::ProbeConfig probe;
};

struct AblateArgs {
  std::string tmpl, grid = "32,64,128,256,512", out, work;
  std::size_t seeds = 3;
  hn3d::TrainConfig train;
  hn3d::ProbeConfig probe;
  double alpha = hn3d::kDefaultAlpha;
};

struct SimRankArgs {
  std::string data, query, sim = "i2i";
  std::size_t topk = 5;
  double alpha = hn3d::kDefaultAlpha;
};

hn3d::Split parse_split(const std::string& s) {
  if (s == "train") return hn3d::Split::Train;
  if (s == "test") return hn3d::Split::Test;
  hn3d::fail(hn3d::ErrorCode::Usage, "split must be train or test");
}

int run_gen(const GenArgs& a, const CLI::App* app) {
  const auto m = hn3d::generate(a.cfg, a.out);
  write_resolved(app, fs::path(a.out) / "resolved_config.json");
  std::cout << "wrote " << m.objects.size() << " objects in " << m.categories.size() << " categories to " << a.out
            << '\n';
  return 0;
}

int run_precompute(const PrecomputeArgs& a, const CLI::App* app) {
  const auto kind = hn3d::parse_sim_kind(a.sim);
  hn3d::SimStore::check_alpha(a.alpha);
  const hn3d::Dataset data = hn3d::load_dataset(fs::path(a.data));
  std::vector<std::optional<hn3d::LandmarkSet>> landmarks = data.landmarks;
  if (!a.landmarks_dir.empty()) {
    for (std::size_t c = 0; c < data.category_count(); ++c) {
      const auto& id = data.manifest.categories[c].id;
      const fs::path f = fs::path(a.landmarks_dir) / (id + ".emb");
      if (fs::exists(f)) landmarks[c] = hn3d::LandmarkSet{id, hn3d::load_embeddings(f)};
      else landmarks[c].reset();
    }
  }
  hn3d::PrecomputeStats stats;
  const std::size_t threads = a.threads ? a.threads : hn3d::thread_count();
  const auto store = hn3d::precompute(data, kind, a.alpha, landmarks, &stats, threads);
  hn3d::save_store(store, a.out);
  write_resolved(app, fs::path(a.out) / "resolved_config.json");
  std::cout << "precomputed " << stats.similarity_calls << " " << a.sim << " similarities over "
            << store.matrices().size() << " categories into " << a.out << '\n';
  return 0;
}

int run_train(TrainArgs a, const CLI::App* app) {
  a.cfg.mode = hn3d::parse_loss_mode(a.mode);
  const bool hn = a.cfg.mode != hn3d::LossMode::Plain;
  if (hn && a.store.empty()) hn3d::fail(hn3d::ErrorCode::Usage, "mode " + a.mode + " needs --simstore");
  if (a.cfg.mode == hn3d::LossMode::HnAvg && a.store2.empty())
    hn3d::fail(hn3d::ErrorCode::Usage, "mode hn-avg needs --simstore (i2i) and --simstore2 (i2l2)");
  if (a.cfg.mode != hn3d::LossMode::HnAvg && !a.store2.empty())
    hn3d::fail(hn3d::ErrorCode::Usage, "--simstore2 is only used by hn-avg");

  const hn3d::Dataset data = hn3d::load_dataset(fs::path(a.data));
  std::vector<hn3d::SimStore> stores;
  if (!a.store.empty()) stores.push_back(hn3d::load_store(a.store, &data.manifest));
  if (!a.store2.empty()) stores.push_back(hn3d::load_store(a.store2, &data.manifest));
  hn3d::TrainStores ts;
  for (const auto& s : stores) {
    auto& slot = s.kind() == hn3d::SimKind::I2I ? ts.i2i : ts.i2l2;
    if (slot) hn3d::fail(hn3d::ErrorCode::Usage, "two simstores of kind " + hn3d::to_string(s.kind()));
    slot = &s;
  }

  hn3d::TrainOutput out{a.out, !a.no_epoch_checkpoints};
  std::size_t last_epoch = static_cast<std::size_t>(-1);
  double epoch_loss = 0.0;
  std::size_t epoch_steps = 0;
  auto flush = [&] {
    if (epoch_steps)
      std::cout << "epoch " << last_epoch << " mean loss " << epoch_loss / static_cast<double>(epoch_steps) << '\n';
  };
  const auto result = hn3d::train(data, a.cfg, ts, out, [&](const hn3d::StepLog& s) {
    if (s.epoch != last_epoch) {
      flush();
      last_epoch = s.epoch;
      epoch_loss = 0.0;
      epoch_steps = 0;
    }
    epoch_loss += s.loss;
    ++epoch_steps;
  });
  flush();
  write_resolved(app, fs::path(a.out) / "resolved_config.json");
  std::cout << "trained " << result.total_steps << " steps; final logit scale " << result.params.temp.scale()
            << "; checkpoint " << (fs::path(a.out) / "final").string() << '\n';
  return 0;
}

int run_eval(const std::string& task, const EvalArgs& a, const CLI::App* app) {
  const auto ks = parse_list(a.topk, "--topk");
  const auto split = parse_split(a.split);
  const hn3d::Dataset data = hn3d::load_dataset(fs::path(a.data));
  const auto meta = hn3d::load_checkpoint_meta(a.ckpt);
  if (meta.contains("dataset_fingerprint") && meta["dataset_fingerprint"] != hn3d::dataset_fingerprint(data.manifest))
    std::cerr << "warning: checkpoint was trained on a different dataset\n";
  const hn3d::EncoderParams enc = hn3d::load_checkpoint(a.ckpt);
  if (enc.dims.feat != data.manifest.feat_dim)
    hn3d::fail(hn3d::ErrorCode::DimMismatch, "checkpoint feature dim differs from the dataset");

  std::vector<hn3d::MetricsReport> reports;
  if (task == "zeroshot") {
    reports.push_back(hn3d::zero_shot_dataset(enc, data, split, ks));
  } else if (task == "retrieval") {
    const auto pair = hn3d::retrieval_dataset(enc, data, split, a.seed, ks);
    reports = {pair.image_to_shape, pair.shape_to_image};
  } else {
    hn3d::ProbeConfig pc = a.probe;
    pc.seed = a.seed;
    reports.push_back(hn3d::linear_probe(enc, data, pc));
  }
  hn3d::print_reports(reports, std::cout);
  if (!a.out.empty()) {
    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    hn3d::write_reports_csv(reports, out);
    write_resolved(app, sidecar(out));
  }
  return 0;
}

hn3d::SynthConfig load_template(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "synth_config.json";
  std::ifstream in(p);
  if (!in) hn3d::fail(hn3d::ErrorCode::IoError, "cannot read data template " + p.string());
  try {
    return hn3d::synth_config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    hn3d::fail(hn3d::ErrorCode::ConfigInvalid, p.string() + ": " + e.what());
  }
}

int run_ablate(AblateArgs a, const CLI::App* app) {
  hn3d::AblationConfig cfg;
  cfg.data = load_template(a.tmpl);
  cfg.train = a.train;
  cfg.probe = a.probe;
  cfg.alpha = a.alpha;
  cfg.grid = parse_list(a.grid, "--grid");
  cfg.seeds = a.seeds;
  const fs::path out(a.out);
  cfg.work_dir = a.work.empty() ? fs::path(out.string() + ".work") : fs::path(a.work);
  std::vector<std::string> warnings;
  const auto rows = hn3d::ablate_landmarks(cfg, &warnings, &std::cerr);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  hn3d::print_ablation(rows, std::cout);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  hn3d::write_ablation_csv(rows, out);
  write_resolved(app, sidecar(out));
  return 0;
}

int run_sim_rank(const SimRankArgs& a) {
  const hn3d::Dataset data = hn3d::load_dataset(fs::path(a.data));
  const auto it = data.index_of.find(a.query);
  if (it == data.index_of.end()) hn3d::fail(hn3d::ErrorCode::UnknownObject, "no object '" + a.query + "'");
  const std::size_t q = it->second;
  const std::size_t c = data.category_of[q];
  const bool distance = a.sim == "chamfer" || a.sim == "emd";
  if (!distance && a.sim != "i2i" && a.sim != "i2l2" && a.sim != "avg")
    hn3d::fail(hn3d::ErrorCode::Usage, "unknown similarity '" + a.sim + "'");
  if ((a.sim == "i2l2" || a.sim == "avg") && !data.landmarks[c])
    hn3d::fail(hn3d::ErrorCode::MissingLandmarks, "category '" + data.manifest.categories[c].id + "' has no landmarks");

  auto view_set = [&](std::size_t i) {
    return hn3d::ViewSet{data.manifest.objects[i].id, data.manifest.objects[i].category, data.views[i]};
  };
  std::optional<hn3d::DescriptorSet> dq;
  if (data.landmarks[c]) dq = hn3d::build_descriptors(view_set(q), *data.landmarks[c]);

  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (i == q || data.category_of[i] != c) continue;
    double v = 0.0;
    if (a.sim == "i2i") {
      v = hn3d::i2i_similarity(view_set(q), view_set(i));
    } else if (a.sim == "i2l2") {
      v = hn3d::i2l2_similarity(*dq, hn3d::build_descriptors(view_set(i), *data.landmarks[c]));
    } else if (a.sim == "avg") {
      v = 0.5 * (hn3d::i2i_similarity(view_set(q), view_set(i)) +
                 hn3d::i2l2_similarity(*dq, hn3d::build_descriptors(view_set(i), *data.landmarks[c])));
    } else if (a.sim == "chamfer") {
      v = hn3d::chamfer_distance(data.clouds[q], data.clouds[i]);
    } else {
      v = hn3d::emd(data.clouds[q], data.clouds[i]);
    }
    scored.emplace_back(v, i);
  }
  std::stable_sort(scored.begin(), scored.end(), [&](const auto& x, const auto& y) {
    return distance ? x.first < y.first : x.first > y.first;
  });
  std::cout << "query " << a.query << " (" << data.manifest.categories[c].id << "), " << a.sim
            << (distance ? " distance" : " similarity") << "; other categories score alpha=" << a.alpha << '\n';
  for (std::size_t r = 0; r < std::min(a.topk, scored.size()); ++r)
    std::cout << std::setw(3) << r + 1 << "  " << std::left << std::setw(16)
              << data.manifest.objects[scored[r].second].id << std::right << std::fixed << std::setprecision(6)
              << scored[r].first << std::defaultfloat << '\n';
  return 0;
}

void add_train_options(CLI::App* sub, hn3d::TrainConfig& t) {
  add_opt(sub, "--batch", t.batch, "batch size");
  add_opt(sub, "--epochs", t.epochs, "training epochs");
  add_opt(sub, "--lr", t.base_lr, "peak learning rate");
  add_opt(sub, "--warmup-frac", t.warmup_frac, "fraction of steps spent in linear warmup");
  add_opt(sub, "--min-lr", t.min_lr, "learning-rate floor of the cosine phase");
  add_opt(sub, "--weight-decay", t.adam.weight_decay, "decoupled weight decay");
  add_opt(sub, "--tau", t.init_tau, "initial temperature");
  add_opt(sub, "--hidden1", t.hidden1, "first point-MLP width");
  add_opt(sub, "--hidden2", t.hidden2, "second point-MLP width");
  add_opt(sub, "--rotate-max", t.augment.rotate_max, "max rotation about the vertical axis (radians)");
  add_opt(sub, "--translate", t.augment.translate, "max absolute translation per axis");
  add_opt(sub, "--jitter-sigma", t.augment.jitter_sigma, "per-point jitter std");
  add_opt(sub, "--jitter-clip", t.augment.jitter_clip, "per-point jitter clip");
  add_opt(sub, "--threads", t.threads, "worker threads (0: HN3D_THREADS or all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hard-negative weighted 2D/3D contrastive alignment"};
  app.footer("Every subcommand also accepts --config FILE.json; command-line flags override it.");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-synthetic", "write a synthetic dataset");
  add_opt(g, "--categories", gen.cfg.categories, "categories C");
  add_opt(g, "--per-cat", gen.cfg.per_category, "objects per category M");
  add_opt(g, "--subtypes", gen.cfg.subtypes, "subtypes per category K");
  add_opt(g, "--views", gen.cfg.views, "views per object R");
  add_opt(g, "--feat", gen.cfg.feat, "feature dimension F");
  add_opt(g, "--landmarks", gen.cfg.landmarks, "landmarks per category L");
  add_opt(g, "--points", gen.cfg.points, "points per cloud P");
  add_opt(g, "--texture-dim", gen.cfg.texture_dim, "texture subspace dimension T");
  add_opt(g, "--test-fraction", gen.cfg.test_fraction, "held-out fraction per category");
  add_opt(g, "--seed", gen.cfg.seed, "generator seed");
  add_opt(g, "--out", gen.out, "output directory")->required();

  PrecomputeArgs pre;
  auto* p = app.add_subcommand("precompute", "build a per-category similarity store");
  add_opt(p, "--data", pre.data, "dataset directory or manifest")->required();
  add_opt(p, "--sim", pre.sim, "i2i or i2l2");
  add_opt(p, "--alpha", pre.alpha, "cross-category similarity");
  p->add_flag("--landmarks-from-manifest", pre.from_manifest, "take landmarks from the manifest (default)");
  add_opt(p, "--landmarks", pre.landmarks_dir, "directory of <category>.emb landmark files")
      ->excludes("--landmarks-from-manifest");
  add_opt(p, "--threads", pre.threads, "worker threads (0: HN3D_THREADS or all cores)");
  add_opt(p, "--out", pre.out, "store directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train the point encoder");
  add_opt(t, "--data", tr.data, "dataset directory or manifest")->required();
  add_opt(t, "--mode", tr.mode, "plain, hn-i2i, hn-i2l2 or hn-avg");
  add_opt(t, "--simstore", tr.store, "similarity store (i2i for hn-avg)");
  add_opt(t, "--simstore2", tr.store2, "second store (i2l2) for hn-avg");
  add_opt(t, "--seed", tr.cfg.seed, "training seed");
  t->add_flag("--no-epoch-checkpoints", tr.no_epoch_checkpoints, "only write the final checkpoint");
  add_train_options(t, tr.cfg);
  add_opt(t, "--out", tr.out, "run directory")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->require_subcommand(1);
  std::string eval_task;
  for (const char* name : {"zeroshot", "retrieval", "linear-probe"}) {
    auto* s = e->add_subcommand(name, std::string(name) + " evaluation");
    add_opt(s, "--ckpt", ev.ckpt, "checkpoint directory")->required();
    add_opt(s, "--data", ev.data, "dataset directory or manifest")->required();
    add_opt(s, "--topk", ev.topk, "comma-separated k values");
    add_opt(s, "--seed", ev.seed, "evaluation seed");
    add_opt(s, "--split", ev.split, "train or test");
    add_opt(s, "--out", ev.out, "report CSV");
    if (std::string(name) == "linear-probe") {
      add_opt(s, "--probe-epochs", ev.probe.epochs, "head training epochs");
      add_opt(s, "--probe-lr", ev.probe.lr, "head learning rate");
      s->add_flag("--finetune", ev.probe.finetune, "update the encoder jointly");
      add_opt(s, "--encoder-lr", ev.probe.encoder_lr, "encoder learning rate when fine-tuning");
    }
    s->callback([&eval_task, s] { eval_task = s->get_name(); });
  }

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate-landmarks", "sweep the number of landmarks");
  add_opt(a, "--data-template", ab.tmpl, "synth_config.json or a generated dataset directory")->required();
  add_opt(a, "--grid", ab.grid, "comma-separated L values");
  add_opt(a, "--seeds", ab.seeds, "repeats per L (median reported)");
  add_opt(a, "--seed", ab.train.seed, "base seed");
  add_opt(a, "--probe-epochs", ab.probe.epochs, "linear-probe epochs");
  add_opt(a, "--alpha", ab.alpha, "cross-category similarity");
  add_opt(a, "--work-dir", ab.work, "scratch directory (default: <out>.work)");
  add_train_options(a, ab.train);
  add_opt(a, "--out", ab.out, "table CSV")->required();

  SimRankArgs sr;
  auto* r = app.add_subcommand("sim-rank", "rank same-category objects by 3D similarity to a query");
  add_opt(r, "--data", sr.data, "dataset directory or manifest")->required();
  add_opt(r, "--query-id", sr.query, "query object id")->required();
  add_opt(r, "--sim", sr.sim, "i2i, i2l2, avg, chamfer or emd");
  add_opt(r, "--topk", sr.topk, "rows to print");
  add_opt(r, "--alpha", sr.alpha, "cross-category similarity (reported only)");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(std::move(args));
    args.erase(args.begin());
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  } catch (const hn3d::Error& err) {
    std::cerr << "error [" << hn3d::to_string(err.code()) << "]: " << err.what() << '\n';
    return hn3d::exit_code_for(err.code());
  }

  try {
    if (g->parsed()) return run_gen(gen, g);
    if (p->parsed()) return run_precompute(pre, p);
    if (t->parsed()) return run_train(tr, t);
    if (e->parsed()) return run_eval(eval_task, ev, e->get_subcommand(eval_task));
    if (a->parsed()) return run_ablate(ab, a);
    if (r->parsed()) return run_sim_rank(sr);
  } catch (const hn3d::Error& err) {
    std::cerr << "error [" << hn3d::to_string(err.code()) << "]: " << err.what() << '\n';
    return hn3d::exit_code_for(err.code());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 1;
}
