#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "graph_ceps/classify.hpp"
#include "graph_ceps/csv.hpp"
#include "graph_ceps/error.hpp"
#include "graph_ceps/features.hpp"
#include "graph_ceps/graph_topology.hpp"
#include "graph_ceps/parallel.hpp"
#include "graph_ceps/scene_sim.hpp"
#include "graph_ceps/seed.hpp"
#include "graph_ceps/spectral.hpp"

namespace graph_ceps {

namespace fs = std::filesystem;

struct ExperimentConfig {
  std::optional<std::string> topology_path;  // default_topology() when unset
  std::optional<std::string> layout_path;    // default_layout() when unset
  CorpusConfig corpus{default_scenes()};
  double frame_len_ms = 20.0;
  double hop_ms = 20.0;
  int fft_points = 2048;  // carried for reference; frame power is computed in the time domain
  std::vector<FeatureKind> kinds{FeatureKind::graph_cepstrum, FeatureKind::spatial_cepstrum};
  int order = 0;  // 0 keeps all N coefficients
  int gmm_components = 8;
  std::vector<double> sigma_grid_s{0.0, 0.01, 0.03, 0.1, 0.3, 1.0};
  int trials = 5;
  bool centered_covariance = false;
  unsigned threads = 0;
  std::string output_dir;
};

// --- JSON -----------------------------------------------------------------

namespace detail {

inline double db_from_json(const nlohmann::json& j) {
  return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

inline nlohmann::json db_to_json(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

inline ScenePlan scene_from_json(const nlohmann::json& j) {
  ScenePlan p;
  p.scene_id = j.at("id").get<std::string>();
  const auto pos = j.at("position").get<std::vector<double>>();
  if (pos.size() != 2) throw Error(ErrorKind::invalid_parameter, "scene position must be [x, y]");
  p.source_position = {pos[0], pos[1]};
  if (j.contains("band_hz")) {
    const auto band = j.at("band_hz").get<std::vector<double>>();
    if (band.size() != 2) throw Error(ErrorKind::invalid_parameter, "band_hz must be [low, high]");
    p.band_low_hz = band[0];
    p.band_high_hz = band[1];
  }
  if (j.contains("level_db")) p.level_db = detail::db_from_json(j.at("level_db"));
  if (j.contains("noise_floor_db")) p.noise_floor_db = detail::db_from_json(j.at("noise_floor_db"));
  p.modulation_db = j.value("modulation_db", p.modulation_db);
  p.modulation_s = j.value("modulation_s", p.modulation_s);
  return p;
}

inline nlohmann::json scene_to_json(const ScenePlan& p) {
  return {{"id", p.scene_id},
          {"position", {p.source_position.x, p.source_position.y}},
          {"band_hz", {p.band_low_hz, p.band_high_hz}},
          {"level_db", detail::db_to_json(p.level_db)},
          {"noise_floor_db", detail::db_to_json(p.noise_floor_db)},
          {"modulation_db", p.modulation_db},
          {"modulation_s", p.modulation_s}};
}

inline ArrayLayout layout_from_json(const nlohmann::json& j) {
  ArrayLayout l;
  try {
    for (const auto& p : j.at("mic_positions")) {
      const auto xy = p.get<std::vector<double>>();
      if (xy.size() != 2) throw Error(ErrorKind::invalid_topology, "microphone position must be [x, y]");
      l.mic_positions.push_back({xy[0], xy[1]});
    }
    for (const auto& grp : j.at("groups")) {
      std::vector<int> g;
      for (const auto& ch : grp) g.push_back(ch.get<int>() - 1);
      l.groups.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_topology, std::string("malformed layout: ") + e.what());
  }
  validate(l);
  return l;
}

inline nlohmann::json layout_to_json(const ArrayLayout& l) {
  nlohmann::json pos = nlohmann::json::array();
  for (auto p : l.mic_positions) pos.push_back({p.x, p.y});
  return {{"mic_positions", pos}, {"groups", topology_to_json({l.n_channels(), 0.0, l.groups, {}}).at("groups")}};
}

inline nlohmann::json read_json_file(const std::string& path, ErrorKind parse_kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(parse_kind, "cannot parse " + path + ": " + e.what());
  }
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw Error(ErrorKind::invalid_parameter, "trials must be >= 1");
  if (cfg.sigma_grid_s.empty()) throw Error(ErrorKind::invalid_parameter, "sigma grid is empty");
  for (double s : cfg.sigma_grid_s)
    if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorKind::invalid_parameter, "sigma values must be >= 0");
  if (cfg.kinds.empty()) throw Error(ErrorKind::invalid_parameter, "no feature kinds selected");
  if (cfg.order < 0) throw Error(ErrorKind::invalid_parameter, "order must be >= 0");
  if (cfg.gmm_components < 1) throw Error(ErrorKind::invalid_parameter, "gmm_components must be >= 1");
  if (!(cfg.frame_len_ms > 0.0) || !(cfg.hop_ms > 0.0))
    throw Error(ErrorKind::invalid_parameter, "frame length and hop must be positive");
  if (!(cfg.corpus.clip_length_s > 0.0)) throw Error(ErrorKind::invalid_parameter, "clip length must be positive");
  if (cfg.corpus.sample_rate <= 0) throw Error(ErrorKind::invalid_parameter, "sample rate must be positive");
}

// Keys absent from `j` keep the value already in `cfg`.
inline void apply_json(ExperimentConfig& cfg, const nlohmann::json& j) {
  static const std::set<std::string> known{
      "topology", "layout", "scenes", "clips_per_scene", "train_clips_per_scene", "clip_length_s", "sample_rate",
      "position_jitter_m", "level_jitter_db", "master_seed", "frame_len_ms", "hop_ms", "fft_points", "kinds",
      "order", "gmm_components", "sigma_grid_s", "trials", "centered_covariance", "threads", "output_dir"};
  if (!j.is_object()) throw Error(ErrorKind::invalid_parameter, "config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw Error(ErrorKind::invalid_parameter, "unknown config key '" + key + "'");
  try {
    if (j.contains("topology")) cfg.topology_path = j.at("topology").get<std::string>();
    if (j.contains("layout")) cfg.layout_path = j.at("layout").get<std::string>();
    if (j.contains("scenes")) {
      cfg.corpus.scenes.clear();
      for (const auto& s : j.at("scenes")) cfg.corpus.scenes.push_back(scene_from_json(s));
    }
    auto& c = cfg.corpus;
    c.clips_per_scene = j.value("clips_per_scene", c.clips_per_scene);
    c.train_clips_per_scene = j.value("train_clips_per_scene", c.train_clips_per_scene);
    c.clip_length_s = j.value("clip_length_s", c.clip_length_s);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.position_jitter_m = j.value("position_jitter_m", c.position_jitter_m);
    c.level_jitter_db = j.value("level_jitter_db", c.level_jitter_db);
    c.master_seed = j.value("master_seed", c.master_seed);
    cfg.frame_len_ms = j.value("frame_len_ms", cfg.frame_len_ms);
    cfg.hop_ms = j.value("hop_ms", cfg.hop_ms);
    cfg.fft_points = j.value("fft_points", cfg.fft_points);
    if (j.contains("kinds")) {
      cfg.kinds.clear();
      for (const auto& k : j.at("kinds")) cfg.kinds.push_back(parse_feature_kind(k.get<std::string>()));
    }
    cfg.order = j.value("order", cfg.order);
    cfg.gmm_components = j.value("gmm_components", cfg.gmm_components);
    if (j.contains("sigma_grid_s")) cfg.sigma_grid_s = j.at("sigma_grid_s").get<std::vector<double>>();
    cfg.trials = j.value("trials", cfg.trials);
    cfg.centered_covariance = j.value("centered_covariance", cfg.centered_covariance);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_parameter, std::string("malformed config: ") + e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  ExperimentConfig cfg;
  apply_json(cfg, read_json_file(path, ErrorKind::invalid_parameter));
  // Relative topology/layout paths are resolved against the config file.
  const fs::path base = fs::path(path).parent_path();
  for (auto* p : {&cfg.topology_path, &cfg.layout_path})
    if (*p && fs::path(**p).is_relative()) *p = (base / **p).string();
  return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& s : cfg.corpus.scenes) scenes.push_back(scene_to_json(s));
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : cfg.kinds) kinds.push_back(to_string(k));
  nlohmann::json j = {{"scenes", scenes},
                      {"clips_per_scene", cfg.corpus.clips_per_scene},
                      {"train_clips_per_scene", cfg.corpus.train_clips_per_scene},
                      {"clip_length_s", cfg.corpus.clip_length_s},
                      {"sample_rate", cfg.corpus.sample_rate},
                      {"position_jitter_m", cfg.corpus.position_jitter_m},
                      {"level_jitter_db", cfg.corpus.level_jitter_db},
                      {"master_seed", cfg.corpus.master_seed},
                      {"frame_len_ms", cfg.frame_len_ms},
                      {"hop_ms", cfg.hop_ms},
                      {"fft_points", cfg.fft_points},
                      {"kinds", kinds},
                      {"order", cfg.order},
                      {"gmm_components", cfg.gmm_components},
                      {"sigma_grid_s", cfg.sigma_grid_s},
                      {"trials", cfg.trials},
                      {"centered_covariance", cfg.centered_covariance}};
  if (cfg.topology_path) j["topology"] = *cfg.topology_path;
  if (cfg.layout_path) j["layout"] = *cfg.layout_path;
  return j;
}

inline TopologySpec resolve_topology(const ExperimentConfig& cfg) {
  return cfg.topology_path ? load_topology(*cfg.topology_path) : default_topology();
}

inline ArrayLayout resolve_layout(const ExperimentConfig& cfg) {
  return cfg.layout_path ? layout_from_json(read_json_file(*cfg.layout_path, ErrorKind::invalid_topology))
                         : default_layout();
}

inline bool same_partition(ChannelGroups a, ChannelGroups b) {
  for (auto* g : {&a, &b}) {
    for (auto& grp : *g) std::sort(grp.begin(), grp.end());
    std::sort(g->begin(), g->end());
  }
  return a == b;
}

// --- table output ---------------------------------------------------------

template <typename Derived>
void write_square_csv(std::ostream& os, const Eigen::MatrixBase<Derived>& m) {
  std::vector<std::string> header;
  for (Eigen::Index c = 0; c < m.cols(); ++c) header.push_back("col_" + std::to_string(c + 1));
  csv::write_row(os, header);
  csv::write_matrix(os, m);
}

// Header, then the eigenvalues, then U^T (row k = k-th eigenvector).
inline void write_basis_csv(std::ostream& os, const SpectralBasis& b) {
  Eigen::MatrixXd table(b.size() + 1, b.size());
  table.row(0) = b.eigenvalues.transpose();
  table.bottomRows(b.size()) = b.transposed();
  write_square_csv(os, table);
}

inline SpectralBasis dump_basis(const TopologySpec& topology, std::ostream& os) {
  const auto basis = gft_basis(laplacian(build_graph(topology)));
  write_basis_csv(os, basis);
  return basis;
}

// --- sweep ----------------------------------------------------------------

struct SweepTrialRow {
  FeatureKind kind = FeatureKind::graph_cepstrum;
  double sigma_s = 0.0;
  int trial = 0;
  double accuracy = 0.0;
};

struct SweepSummaryRow {
  FeatureKind kind = FeatureKind::graph_cepstrum;
  double sigma_s = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation; 0 for one trial
  int n_trials = 0;
};

struct SweepResult {
  std::vector<SweepTrialRow> trials;
  std::vector<SweepSummaryRow> summary;

  const SweepSummaryRow* find(FeatureKind kind, double sigma) const {
    for (const auto& r : summary)
      if (r.kind == kind && r.sigma_s == sigma) return &r;
    return nullptr;
  }
};

inline std::vector<SweepSummaryRow> summarize(const std::vector<SweepTrialRow>& rows) {
  std::map<std::tuple<std::string, double>, std::vector<double>> groups;
  std::map<std::string, FeatureKind> kinds;
  for (const auto& r : rows) {
    groups[{to_string(r.kind), r.sigma_s}].push_back(r.accuracy);
    kinds[to_string(r.kind)] = r.kind;
  }
  std::vector<SweepSummaryRow> out;
  for (const auto& [key, acc] : groups) {
    SweepSummaryRow s;
    s.kind = kinds[std::get<0>(key)];
    s.sigma_s = std::get<1>(key);
    s.n_trials = static_cast<int>(acc.size());
    double sum = 0.0;
    for (double a : acc) sum += a;
    s.mean_accuracy = sum / static_cast<double>(acc.size());
    // Identical trials report exactly zero spread.
    if (acc.size() > 1 && std::adjacent_find(acc.begin(), acc.end(), std::not_equal_to<>()) != acc.end()) {
      double ss = 0.0;
      for (double a : acc) ss += (a - s.mean_accuracy) * (a - s.mean_accuracy);
      s.std_accuracy = std::sqrt(ss / static_cast<double>(acc.size() - 1));
    }
    out.push_back(s);
  }
  return out;
}

inline void sort_rows(std::vector<SweepTrialRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::make_tuple(std::string(to_string(a.kind)), a.sigma_s, a.trial) <
           std::make_tuple(std::string(to_string(b.kind)), b.sigma_s, b.trial);
  });
}

inline void write_sweep_csv(std::ostream& os, std::vector<SweepTrialRow> rows) {
  sort_rows(rows);
  csv::write_row(os, {"record", "kind", "sigma_s", "trial", "accuracy", "std_accuracy", "n_trials"});
  for (const auto& r : rows)
    csv::write_row(os, {"trial", to_string(r.kind), csv::format_double(r.sigma_s), std::to_string(r.trial),
                        csv::format_double(r.accuracy), "", ""});
  for (const auto& s : summarize(rows))
    csv::write_row(os, {"summary", to_string(s.kind), csv::format_double(s.sigma_s), "",
                        csv::format_double(s.mean_accuracy), csv::format_double(s.std_accuracy),
                        std::to_string(s.n_trials)});
}

// Log-power frames of every clip: clean for training, and one misaligned
// copy per (sigma, trial) for testing.
struct PreparedCorpus {
  std::vector<ManifestEntry> manifest;
  std::vector<std::size_t> train_ids;  // indices into manifest
  std::vector<std::size_t> test_ids;
  std::vector<FrameSeries> train_frames;                         // [train clip]
  std::vector<std::vector<std::vector<FrameSeries>>> test_frames;  // [sigma][trial][test clip]
};

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage '") + stage + "': " + e.what());
  }
}

inline PreparedCorpus prepare_corpus(const ExperimentConfig& cfg, const ArrayLayout& layout) {
  PreparedCorpus pc;
  pc.manifest = build_corpus(cfg.corpus);
  for (std::size_t i = 0; i < pc.manifest.size(); ++i)
    (pc.manifest[i].split == Split::train ? pc.train_ids : pc.test_ids).push_back(i);
  pc.train_frames.resize(pc.train_ids.size());
  pc.test_frames.assign(cfg.sigma_grid_s.size(),
                        std::vector<std::vector<FrameSeries>>(static_cast<std::size_t>(cfg.trials),
                                                              std::vector<FrameSeries>(pc.test_ids.size())));
  const std::size_t n_train = pc.train_ids.size();

  parallel_for(pc.manifest.size(), cfg.threads, [&](std::size_t job) {
    const bool is_train = job < n_train;
    const std::size_t slot = is_train ? job : job - n_train;
    const ManifestEntry& e = pc.manifest[is_train ? pc.train_ids[slot] : pc.test_ids[slot]];
    MultichannelClip clip = synthesize_clip(plan_for(e, cfg.corpus), layout, cfg.corpus.sample_rate, e.seed);
    quantize_pcm16(clip);
    if (is_train) {
      pc.train_frames[slot] = frame_log_power(clip, cfg.frame_len_ms, cfg.hop_ms);
      return;
    }
    const FrameSeries clean = frame_log_power(clip, cfg.frame_len_ms, cfg.hop_ms);
    for (std::size_t si = 0; si < cfg.sigma_grid_s.size(); ++si) {
      for (int t = 0; t < cfg.trials; ++t) {
        auto& dst = pc.test_frames[si][static_cast<std::size_t>(t)][slot];
        if (cfg.sigma_grid_s[si] == 0.0) {
          dst = clean;
          continue;
        }
        SyncErrorSpec spec;
        spec.sigma_s = cfg.sigma_grid_s[si];
        spec.seed = derive_seed(cfg.corpus.master_seed, "sync",
                                {si, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(e.scene_index),
                                 static_cast<std::uint64_t>(e.clip_index)});
        dst = frame_log_power(inject_sync_error(clip, layout.groups, spec), cfg.frame_len_ms, cfg.hop_ms);
      }
    }
  });
  return pc;
}

// Projection for one feature kind, fitted on the clean training frames.
struct FeatureTransform {
  FeatureKind kind = FeatureKind::graph_cepstrum;
  SpectralBasis basis;
  Eigen::VectorXd mean;
  int order = 0;

  FeatureSeries apply(const FrameSeries& f) const {
    return kind == FeatureKind::graph_cepstrum ? graph_cepstrum(f, basis, order)
                                               : spatial_cepstrum(f, basis, mean, order);
  }
};

inline FeatureTransform make_transform(FeatureKind kind, const SpectralBasis& gft, std::span<const FrameSeries> train,
                                       int order, bool centered) {
  FeatureTransform t;
  t.kind = kind;
  t.order = order == 0 ? gft.size() : order;
  if (kind == FeatureKind::graph_cepstrum) {
    t.basis = gft;
    t.mean = Eigen::VectorXd::Zero(gft.size());
  } else {
    const auto cov = fit_covariance(train, centered);
    t.basis = pca_basis(cov);
    t.mean = cov.mean;
  }
  return t;
}

// Trains one model per scene. Scene models are ordered by scene id.
inline std::vector<GmmModel> train_scene_models(const std::vector<LabeledFeatures>& train, int k,
                                                std::uint64_t master_seed, std::uint64_t stream, unsigned threads) {
  std::map<SceneLabel, std::vector<FeatureSeries>> by_scene;
  for (const auto& item : train) by_scene[item.scene].push_back(item.features);
  std::vector<SceneLabel> scenes;
  for (const auto& [s, _] : by_scene) scenes.push_back(s);
  std::vector<GmmModel> models(scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t i) {
    const auto seed = derive_seed(master_seed, "gmm", {stream, hash_tag(scenes[i])});
    models[i] = train_gmm(by_scene[scenes[i]], k, seed, scenes[i]).model;
  });
  return models;
}

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<SweepTrialRow> rows;

  auto flush = [&] {
    if (cfg.output_dir.empty()) return;
    fs::create_directories(cfg.output_dir);
    auto out = csv::open_out((fs::path(cfg.output_dir) / "sweep.csv").string());
    write_sweep_csv(out, rows);
  };

  try {
    const TopologySpec topo = run_stage("topology", [&] { return resolve_topology(cfg); });
    const ArrayLayout layout = run_stage("topology", [&] { return resolve_layout(cfg); });
    if (layout.n_channels() != topo.n_channels || !same_partition(layout.groups, topo.groups))
      throw Error(ErrorKind::invalid_topology, "stage 'topology': layout groups differ from topology groups");
    const SpectralBasis gft = run_stage("basis", [&] { return gft_basis(laplacian(build_graph(topo))); });
    if (cfg.order > topo.n_channels) throw Error(ErrorKind::invalid_parameter, "order exceeds channel count");

    const PreparedCorpus pc = run_stage("simulate", [&] { return prepare_corpus(cfg, layout); });

    for (std::size_t ki = 0; ki < cfg.kinds.size(); ++ki) {
      const FeatureKind kind = cfg.kinds[ki];
      const auto transform = run_stage("features", [&] {
        return make_transform(kind, gft, pc.train_frames, cfg.order, cfg.centered_covariance);
      });
      std::vector<LabeledFeatures> train;
      for (std::size_t i = 0; i < pc.train_ids.size(); ++i)
        train.push_back({pc.manifest[pc.train_ids[i]].scene, transform.apply(pc.train_frames[i])});

      for (int t = 0; t < cfg.trials; ++t) {
        const auto models = run_stage("train", [&] {
          return train_scene_models(train, cfg.gmm_components, cfg.corpus.master_seed,
                                    hash_tag(to_string(kind)) ^ static_cast<std::uint64_t>(t), cfg.threads);
        });
        for (std::size_t si = 0; si < cfg.sigma_grid_s.size(); ++si) {
          const double acc = run_stage("evaluate", [&] {
            const auto& frames = pc.test_frames[si][static_cast<std::size_t>(t)];
            std::vector<LabeledFeatures> test;
            for (std::size_t i = 0; i < pc.test_ids.size(); ++i)
              test.push_back({pc.manifest[pc.test_ids[i]].scene, transform.apply(frames[i])});
            return evaluate(test, models).accuracy();
          });
          rows.push_back({kind, cfg.sigma_grid_s[si], t, acc});
        }
        flush();
      }
    }
  } catch (...) {
    flush();
    throw;
  }

  flush();
  SweepResult res;
  res.trials = rows;
  sort_rows(res.trials);
  res.summary = summarize(res.trials);
  return res;
}

// --- corpus on disk -------------------------------------------------------

inline std::vector<ManifestEntry> simulate_corpus(const ExperimentConfig& cfg, const std::string& out_dir) {
  validate(cfg);
  const ArrayLayout layout = resolve_layout(cfg);
  const auto manifest = build_corpus(cfg.corpus);
  fs::create_directories(fs::path(out_dir) / "clips");
  parallel_for(manifest.size(), cfg.threads, [&](std::size_t i) {
    const auto& e = manifest[i];
    const auto clip = synthesize_clip(plan_for(e, cfg.corpus), layout, cfg.corpus.sample_rate, e.seed);
    write_wav((fs::path(out_dir) / e.path).string(), clip);
  });
  auto out = csv::open_out((fs::path(out_dir) / "manifest.csv").string());
  write_manifest(out, manifest);
  return manifest;
}

// Feature directory layout: manifest.csv (paths relative to the directory),
// one CSV per clip, and features.json describing the transform.
struct FeatureDirOptions {
  FeatureKind kind = FeatureKind::graph_cepstrum;
  int order = 0;
  double frame_len_ms = 20.0;
  double hop_ms = 20.0;
  bool centered = false;
};

inline void extract_feature_directory(const std::string& corpus_manifest, const TopologySpec& topology,
                                      const FeatureDirOptions& opt, const std::string& out_dir) {
  const auto manifest = read_manifest(corpus_manifest);
  const fs::path corpus_dir = fs::path(corpus_manifest).parent_path();
  std::vector<FrameSeries> frames;
  frames.reserve(manifest.size());
  for (const auto& e : manifest)
    frames.push_back(frame_log_power(read_wav((corpus_dir / e.path).string()), opt.frame_len_ms, opt.hop_ms));

  std::vector<FrameSeries> train;
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (manifest[i].split == Split::train) train.push_back(frames[i]);
  if (opt.kind == FeatureKind::spatial_cepstrum && train.empty())
    throw Error(ErrorKind::invalid_input, "spatial cepstrum needs training clips to fit the covariance");

  const auto gft = gft_basis(laplacian(build_graph(topology)));
  const auto transform = make_transform(opt.kind, gft, train, opt.order, opt.centered);

  fs::create_directories(out_dir);
  std::vector<ManifestEntry> out_manifest;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    ManifestEntry e = manifest[i];
    e.path = fs::path(e.path).stem().string() + ".csv";
    write_features((fs::path(out_dir) / e.path).string(), transform.apply(frames[i]));
    out_manifest.push_back(std::move(e));
  }
  auto mf = csv::open_out((fs::path(out_dir) / "manifest.csv").string());
  write_manifest(mf, out_manifest);

  nlohmann::json meta = {{"kind", to_string(opt.kind)},
                         {"order", transform.order},
                         {"frame_len_ms", opt.frame_len_ms},
                         {"hop_ms", opt.hop_ms},
                         {"centered", opt.centered},
                         {"topology", topology_to_json(topology)}};
  std::ofstream(fs::path(out_dir) / "features.json") << meta.dump(2) << '\n';
}

inline std::vector<LabeledFeatures> load_feature_split(const std::string& dir, Split split) {
  std::vector<LabeledFeatures> out;
  for (const auto& e : read_manifest((fs::path(dir) / "manifest.csv").string()))
    if (e.split == split) out.push_back({e.scene, read_features((fs::path(dir) / e.path).string())});
  if (out.empty()) throw Error(ErrorKind::invalid_input, dir + " has no " + to_string(split) + " clips");
  return out;
}

inline std::vector<GmmModel> train_from_directory(const std::string& features_dir, int k, std::uint64_t seed,
                                                  const std::string& models_dir) {
  const auto train = load_feature_split(features_dir, Split::train);
  auto models = train_scene_models(train, k, seed, 0, 0);
  fs::create_directories(models_dir);
  for (const auto& m : models) save_model((fs::path(models_dir) / (file_stem(m.scene) + ".json")).string(), m);
  return models;
}

inline std::vector<GmmModel> load_models(const std::string& models_dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(models_dir)) throw Error(ErrorKind::io, models_dir + " is not a directory");
  for (const auto& entry : fs::directory_iterator(models_dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<GmmModel> models;
  for (const auto& f : files) models.push_back(load_model(f.string()));
  if (models.empty()) throw Error(ErrorKind::invalid_input, models_dir + " contains no models");
  return models;
}

}  // namespace graph_ceps
