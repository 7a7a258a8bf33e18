#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "graph_ceps/classify.hpp"
#include "graph_ceps/csv.hpp"
#include "graph_ceps/error.hpp"
#include "graph_ceps/graph_topology.hpp"
#include "graph_ceps/seed.hpp"
#include "graph_ceps/wav.hpp"

namespace graph_ceps {

inline constexpr double kSpeedOfSound = 343.0;   // m/s
inline constexpr double kMinSourceDistance = 0.3;  // m, guards the 1/r law

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// One sound source. The level is the source power in dB re full scale at 1 m;
// -inf silences it. The activity envelope is a log-normal level fluctuation
// with the given depth (dB, standard deviation) and correlation time.
struct ScenePlan {
  SceneLabel scene_id;
  Point2 source_position;
  double band_low_hz = 100.0;
  double band_high_hz = 4000.0;
  double level_db = -20.0;
  double duration_s = 8.0;
  double noise_floor_db = -65.0;  // per-channel sensor noise, -inf for none
  double modulation_db = 0.0;
  double modulation_s = 0.25;
};

struct ArrayLayout {
  std::vector<Point2> mic_positions;
  ChannelGroups groups;

  int n_channels() const { return static_cast<int>(mic_positions.size()); }
};

struct SyncErrorSpec {
  double sigma_s = 0.0;
  std::uint64_t seed = 0;
  // Bypasses the Gaussian draw: one offset per group, in seconds.
  std::optional<std::vector<double>> forced_offsets_s;
};

inline void validate(const ArrayLayout& layout) {
  if (layout.n_channels() < 2) throw Error(ErrorKind::invalid_topology, "layout needs at least two microphones");
  for (auto p : layout.mic_positions)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw Error(ErrorKind::invalid_topology, "microphone position is not finite");
  detail::validate_partition(layout.n_channels(), layout.groups);
}

inline void validate(const ScenePlan& plan, int sample_rate) {
  if (sample_rate <= 0) throw Error(ErrorKind::invalid_input, "sample rate must be positive");
  if (!(plan.duration_s > 0.0)) throw Error(ErrorKind::invalid_input, "duration must be positive");
  if (!(plan.band_low_hz >= 0.0 && plan.band_low_hz < plan.band_high_hz && plan.band_high_hz <= 0.5 * sample_rate))
    throw Error(ErrorKind::invalid_input, "band edges must satisfy 0 <= low < high <= Nyquist");
  if (std::isnan(plan.level_db) || plan.level_db == std::numeric_limits<double>::infinity())
    throw Error(ErrorKind::invalid_input, "source level must be finite or -inf");
  if (std::isnan(plan.noise_floor_db) || plan.noise_floor_db == std::numeric_limits<double>::infinity())
    throw Error(ErrorKind::invalid_input, "noise floor must be finite or -inf");
  if (!(plan.modulation_db >= 0.0) || !(plan.modulation_s > 0.0))
    throw Error(ErrorKind::invalid_input, "modulation depth must be >= 0 and time > 0");
  if (!std::isfinite(plan.source_position.x) || !std::isfinite(plan.source_position.y))
    throw Error(ErrorKind::invalid_input, "source position is not finite");
}

namespace detail {

// Direct form I biquad, RBJ cookbook coefficients.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  void run(std::vector<double>& x) const {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (auto& v : x) {
      const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }

  static Biquad make(double b0, double b1, double b2, double a0, double a1, double a2) {
    return {b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
  }

  static Biquad lowpass(double f, double sr) {
    const double w = 2 * std::numbers::pi * f / sr, cw = std::cos(w), al = std::sin(w) / std::numbers::sqrt2;
    return make((1 - cw) / 2, 1 - cw, (1 - cw) / 2, 1 + al, -2 * cw, 1 - al);
  }

  static Biquad highpass(double f, double sr) {
    const double w = 2 * std::numbers::pi * f / sr, cw = std::cos(w), al = std::sin(w) / std::numbers::sqrt2;
    return make((1 + cw) / 2, -(1 + cw), (1 + cw) / 2, 1 + al, -2 * cw, 1 - al);
  }

  static Biquad bandpass(double lo, double hi, double sr) {
    const double f0 = std::sqrt(lo * hi), q = f0 / (hi - lo);
    const double w = 2 * std::numbers::pi * f0 / sr, al = std::sin(w) / (2 * q);
    return make(al, 0, -al, 1 + al, -2 * std::cos(w), 1 - al);
  }
};

// Unit-power band-limited Gaussian noise.
inline std::vector<double> band_noise(std::size_t n, double lo, double hi, int sr, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = gauss(rng);
  const double nyq = 0.5 * sr;
  std::vector<Biquad> stages;
  if (lo <= 1.0 && hi >= 0.98 * nyq) {
    // Effectively white.
  } else if (lo <= 1.0) {
    stages = {Biquad::lowpass(hi, sr), Biquad::lowpass(hi, sr)};
  } else if (hi >= 0.98 * nyq) {
    stages = {Biquad::highpass(lo, sr), Biquad::highpass(lo, sr)};
  } else {
    stages = {Biquad::bandpass(lo, hi, sr), Biquad::bandpass(lo, hi, sr)};
  }
  for (const auto& s : stages) s.run(x);
  double ms = 0.0;
  for (double v : x) ms += v * v;
  ms /= static_cast<double>(n);
  if (ms > 0.0) {
    const double g = 1.0 / std::sqrt(ms);
    for (auto& v : x) v *= g;
  }
  return x;
}

// Log-normal amplitude envelope with unit mean-square, from an AR(1) level
// process sampled every 10 ms and linearly interpolated.
inline std::vector<double> activity_envelope(std::size_t n, double depth_db, double corr_s, int sr,
                                             std::mt19937_64& rng) {
  std::vector<double> env(n, 1.0);
  if (depth_db <= 0.0) return env;
  const double step_s = 0.01;
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(step_s * sr)));
  const std::size_t knots = n / step + 2;
  const double rho = std::exp(-step_s / corr_s);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> level(knots);
  level[0] = depth_db * gauss(rng);
  for (std::size_t k = 1; k < knots; ++k)
    level[k] = rho * level[k - 1] + std::sqrt(1.0 - rho * rho) * depth_db * gauss(rng);
  double ms = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i / step;
    const double frac = static_cast<double>(i - k * step) / static_cast<double>(step);
    const double db = (1.0 - frac) * level[k] + frac * level[k + 1];
    env[i] = std::pow(10.0, db / 20.0);
    ms += env[i] * env[i];
  }
  const double g = 1.0 / std::sqrt(ms / static_cast<double>(n));
  for (auto& v : env) v *= g;
  return env;
}

}  // namespace detail

// Free-field rendering: each microphone hears the source delayed by r/c and
// scaled by 1/max(r, r_min), plus independent white sensor noise.
inline MultichannelClip synthesize_clip(const ScenePlan& plan, const ArrayLayout& layout, int sample_rate,
                                        std::uint64_t seed) {
  validate(plan, sample_rate);
  validate(layout);
  const auto n = static_cast<std::size_t>(std::llround(plan.duration_s * sample_rate));
  if (n == 0) throw Error(ErrorKind::invalid_input, "clip shorter than one sample");

  const int n_ch = layout.n_channels();
  std::vector<double> gain(static_cast<std::size_t>(n_ch));
  std::vector<std::size_t> delay(static_cast<std::size_t>(n_ch));
  std::size_t max_delay = 0;
  for (int c = 0; c < n_ch; ++c) {
    const double r = distance(layout.mic_positions[static_cast<std::size_t>(c)], plan.source_position);
    gain[static_cast<std::size_t>(c)] = 1.0 / std::max(r, kMinSourceDistance);
    delay[static_cast<std::size_t>(c)] = static_cast<std::size_t>(std::llround(r / kSpeedOfSound * sample_rate));
    max_delay = std::max(max_delay, delay[static_cast<std::size_t>(c)]);
  }

  // The source is rendered long enough that every channel sees a full-length
  // window of it, so delays never introduce leading silence.
  std::vector<double> source;
  if (std::isfinite(plan.level_db)) {
    std::mt19937_64 src_rng(derive_seed(seed, "source"));
    std::mt19937_64 env_rng(derive_seed(seed, "envelope"));
    source = detail::band_noise(n + max_delay, plan.band_low_hz, plan.band_high_hz, sample_rate, src_rng);
    const auto env = detail::activity_envelope(n + max_delay, plan.modulation_db, plan.modulation_s, sample_rate, env_rng);
    const double amp = std::pow(10.0, plan.level_db / 20.0);
    for (std::size_t i = 0; i < source.size(); ++i) source[i] *= amp * env[i];
  }

  const double noise_std = std::isfinite(plan.noise_floor_db) ? std::pow(10.0, plan.noise_floor_db / 20.0) : 0.0;
  MultichannelClip clip;
  clip.sample_rate = sample_rate;
  clip.channels.assign(static_cast<std::size_t>(n_ch), std::vector<double>(n, 0.0));
  for (int c = 0; c < n_ch; ++c) {
    auto& out = clip.channels[static_cast<std::size_t>(c)];
    if (!source.empty()) {
      const std::size_t start = max_delay - delay[static_cast<std::size_t>(c)];
      const double g = gain[static_cast<std::size_t>(c)];
      for (std::size_t t = 0; t < n; ++t) out[t] = g * source[start + t];
    }
    if (noise_std > 0.0) {
      std::mt19937_64 rng(derive_seed(seed, "sensor-noise", {static_cast<std::uint64_t>(c)}));
      std::normal_distribution<double> gauss(0.0, noise_std);
      for (auto& v : out) v += gauss(rng);
    }
  }
  return clip;
}

// One offset per group, in whole samples.
inline std::vector<long long> draw_sync_offsets(std::size_t n_groups, const SyncErrorSpec& spec, int sample_rate) {
  if (!(spec.sigma_s >= 0.0)) throw Error(ErrorKind::invalid_parameter, "sigma must be non-negative");
  std::vector<long long> out(n_groups, 0);
  if (spec.forced_offsets_s) {
    if (spec.forced_offsets_s->size() != n_groups)
      throw Error(ErrorKind::invalid_parameter, "need one forced offset per group");
    for (std::size_t g = 0; g < n_groups; ++g) out[g] = std::llround((*spec.forced_offsets_s)[g] * sample_rate);
    return out;
  }
  if (spec.sigma_s == 0.0) return out;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, spec.sigma_s);
  for (auto& o : out) o = std::llround(gauss(rng) * sample_rate);
  return out;
}

// Shifts every channel of group g by offsets[g] samples (positive = later),
// zero-filling what enters at the boundary.
inline MultichannelClip apply_sync_offsets(const MultichannelClip& clip, const ChannelGroups& groups,
                                           const std::vector<long long>& offsets) {
  detail::validate_partition(clip.n_channels(), groups);
  if (offsets.size() != groups.size()) throw Error(ErrorKind::invalid_parameter, "need one offset per group");
  const auto len = static_cast<long long>(clip.n_samples());
  for (auto o : offsets)
    if (std::llabs(o) >= len) throw Error(ErrorKind::invalid_parameter, "sync offset is not shorter than the clip");

  MultichannelClip out;
  out.sample_rate = clip.sample_rate;
  out.channels.resize(clip.channels.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const long long o = offsets[g];
    for (int ch : groups[g]) {
      const auto& src = clip.channels[static_cast<std::size_t>(ch)];
      auto& dst = out.channels[static_cast<std::size_t>(ch)];
      if (o == 0) {
        dst = src;
        continue;
      }
      dst.assign(src.size(), 0.0);
      if (o > 0)
        std::copy(src.begin(), src.end() - o, dst.begin() + o);
      else
        std::copy(src.begin() - o, src.end(), dst.begin());
    }
  }
  return out;
}

inline MultichannelClip inject_sync_error(const MultichannelClip& clip, const ChannelGroups& groups,
                                          const SyncErrorSpec& spec) {
  return apply_sync_offsets(clip, groups, draw_sync_offsets(groups.size(), spec, clip.sample_rate));
}

// --- corpus ---------------------------------------------------------------

struct CorpusConfig {
  std::vector<ScenePlan> scenes;  // one template per scene
  int clips_per_scene = 20;
  int train_clips_per_scene = 15;
  double clip_length_s = 8.0;
  int sample_rate = 48000;
  double position_jitter_m = 0.25;
  double level_jitter_db = 3.0;
  std::uint64_t master_seed = 17;
};

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct ManifestEntry {
  std::string path;
  SceneLabel scene;
  Split split = Split::train;
  std::uint64_t seed = 0;
  int scene_index = 0;
  int clip_index = 0;
};

inline std::string file_stem(const SceneLabel& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

// Deterministic clip list: per scene, a seeded shuffle decides which clips
// are held out for testing.
inline std::vector<ManifestEntry> build_corpus(const CorpusConfig& cfg) {
  if (cfg.scenes.size() < 2) throw Error(ErrorKind::invalid_parameter, "corpus needs at least two scenes");
  if (cfg.clips_per_scene < 2) throw Error(ErrorKind::invalid_parameter, "corpus needs at least two clips per scene");
  if (cfg.train_clips_per_scene < 1 || cfg.train_clips_per_scene >= cfg.clips_per_scene)
    throw Error(ErrorKind::invalid_parameter, "train clips per scene must leave at least one test clip");
  std::vector<SceneLabel> ids;
  for (const auto& s : cfg.scenes) ids.push_back(s.scene_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw Error(ErrorKind::invalid_parameter, "duplicate scene id");

  std::vector<ManifestEntry> out;
  for (std::size_t s = 0; s < cfg.scenes.size(); ++s) {
    std::vector<int> order(static_cast<std::size_t>(cfg.clips_per_scene));
    for (int i = 0; i < cfg.clips_per_scene; ++i) order[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(derive_seed(cfg.master_seed, "split", {s}));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> is_train(order.size(), false);
    for (int i = 0; i < cfg.train_clips_per_scene; ++i) is_train[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

    for (int c = 0; c < cfg.clips_per_scene; ++c) {
      ManifestEntry e;
      e.scene = cfg.scenes[s].scene_id;
      e.scene_index = static_cast<int>(s);
      e.clip_index = c;
      e.split = is_train[static_cast<std::size_t>(c)] ? Split::train : Split::test;
      e.seed = derive_seed(cfg.master_seed, "clip", {s, static_cast<std::uint64_t>(c)});
      char idx[16];
      std::snprintf(idx, sizeof(idx), "%03d", c);
      e.path = "clips/" + file_stem(e.scene) + "_" + idx + ".wav";
      out.push_back(std::move(e));
    }
  }
  return out;
}

// Scene template perturbed per clip (source position and level), so clips of
// one scene are similar but not identical.
inline ScenePlan plan_for(const ManifestEntry& e, const CorpusConfig& cfg) {
  ScenePlan p = cfg.scenes.at(static_cast<std::size_t>(e.scene_index));
  p.duration_s = cfg.clip_length_s;
  std::mt19937_64 rng(derive_seed(e.seed, "jitter"));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double dx = unit(rng), dy = unit(rng), dl = unit(rng);
  p.source_position.x += cfg.position_jitter_m * dx;
  p.source_position.y += cfg.position_jitter_m * dy;
  if (std::isfinite(p.level_db)) p.level_db += cfg.level_jitter_db * dl;
  return p;
}

inline void write_manifest(std::ostream& os, const std::vector<ManifestEntry>& entries) {
  csv::write_row(os, {"path", "scene", "split", "seed"});
  for (const auto& e : entries) csv::write_row(os, {e.path, e.scene, to_string(e.split), std::to_string(e.seed)});
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open manifest " + path);
  auto rows = csv::read_rows(in);
  if (rows.empty() || rows.front() != std::vector<std::string>{"path", "scene", "split", "seed"})
    throw Error(ErrorKind::invalid_input, path + ": expected header path,scene,split,seed");
  std::vector<ManifestEntry> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 4) throw Error(ErrorKind::invalid_input, path + ": malformed manifest row");
    ManifestEntry e;
    e.path = r[0];
    e.scene = r[1];
    if (r[2] == "train")
      e.split = Split::train;
    else if (r[2] == "test")
      e.split = Split::test;
    else
      throw Error(ErrorKind::invalid_input, path + ": split must be train or test");
    try {
      e.seed = std::stoull(r[3]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_input, path + ": bad seed");
    }
    e.clip_index = static_cast<int>(i - 1);
    out.push_back(std::move(e));
  }
  return out;
}

// --- defaults -------------------------------------------------------------

// Representative 6 m x 5 m living room; groups match default_topology().
inline ArrayLayout default_layout() {
  ArrayLayout l;
  l.mic_positions = {
      {0.6, 0.6}, {1.6, 0.6}, {0.6, 1.6}, {1.6, 1.6},  // group I
      {4.4, 0.6}, {5.4, 0.6}, {4.9, 1.5},              // group II
      {0.6, 4.4}, {1.5, 4.4},                          // group III
      {4.5, 4.4}, {5.4, 4.4},                          // group IV
      {2.6, 2.5}, {3.4, 2.5},                          // group V
  };
  l.groups = default_topology().groups;
  return l;
}

inline std::vector<ScenePlan> default_scenes() {
  auto plan = [](const char* id, Point2 pos, double lo, double hi, double level) {
    ScenePlan p;
    p.scene_id = id;
    p.source_position = pos;
    p.band_low_hz = lo;
    p.band_high_hz = hi;
    p.level_db = level;
    return p;
  };
  return {
      plan("vacuuming", {3.0, 1.1}, 100, 8000, -14),
      plan("cooking", {5.5, 2.6}, 200, 6000, -22),
      plan("dishwashing", {5.0, 3.5}, 500, 10000, -20),
      plan("eating", {3.0, 3.6}, 300, 5000, -26),
      plan("reading a newspaper", {1.0, 2.7}, 1000, 12000, -28),
      plan("operating a PC", {0.4, 3.5}, 1500, 10000, -27),
      plan("chatting", {2.1, 3.4}, 150, 4000, -20),
      plan("watching TV", {3.8, 4.8}, 100, 8000, -21),
      plan("doing the laundry", {1.1, 0.2}, 60, 2000, -18),
  };
}

}  // namespace graph_ceps
