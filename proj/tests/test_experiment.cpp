#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "graph_ceps/experiment.hpp"

using namespace graph_ceps;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

// Three scenes at opposite corners of the default room; trivially separable.
ExperimentConfig small_config() {
  ExperimentConfig cfg;
  auto scene = [](const char* id, Point2 pos, double lo, double hi) {
    ScenePlan p;
    p.scene_id = id;
    p.source_position = pos;
    p.band_low_hz = lo;
    p.band_high_hz = hi;
    p.level_db = -20;
    return p;
  };
  cfg.corpus.scenes = {scene("a", {0.8, 0.8}, 100, 3000), scene("b", {5.2, 0.8}, 200, 3500),
                       scene("c", {1.0, 4.2}, 300, 2500)};
  cfg.corpus.clips_per_scene = 4;
  cfg.corpus.train_clips_per_scene = 3;
  cfg.corpus.clip_length_s = 1.0;
  cfg.corpus.sample_rate = 8000;
  cfg.gmm_components = 2;
  cfg.sigma_grid_s = {0.0, 0.01};
  cfg.trials = 2;
  cfg.threads = 1;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

csv::Table table_of(const std::ostringstream& os) {
  std::istringstream in(os.str());
  return csv::read_numeric(in);
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("graph_ceps_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("run_sweep: separable scenes are classified perfectly without sync error", "[sweep]") {
  const auto res = run_sweep(small_config());
  REQUIRE(res.trials.size() == 2 * 2 * 2);
  REQUIRE(res.summary.size() == 4);
  for (auto kind : {FeatureKind::graph_cepstrum, FeatureKind::spatial_cepstrum}) {
    const auto* s = res.find(kind, 0.0);
    REQUIRE(s != nullptr);
    CHECK(s->mean_accuracy == 1.0);
    CHECK(s->std_accuracy == 0.0);
    CHECK(s->n_trials == 2);
  }
}

TEST_CASE("run_sweep writes an identical sweep.csv for identical configs", "[sweep][io]") {
  auto cfg = small_config();
  cfg.kinds = {FeatureKind::graph_cepstrum};
  cfg.output_dir = scratch("sweep_a").string();
  run_sweep(cfg);
  const auto a = slurp(fs::path(cfg.output_dir) / "sweep.csv");
  cfg.output_dir = scratch("sweep_b").string();
  cfg.threads = 2;
  run_sweep(cfg);
  const auto b = slurp(fs::path(cfg.output_dir) / "sweep.csv");
  CHECK(a == b);
  CHECK(a.rfind("record,kind,sigma_s,trial,accuracy,std_accuracy,n_trials\n", 0) == 0);
  // Four trial rows and two summary rows.
  CHECK(std::count(a.begin(), a.end(), '\n') == 7);
}

TEST_CASE("run_sweep reports the failing stage", "[sweep][errors]") {
  auto cfg = small_config();
  cfg.order = 20;
  try {
    run_sweep(cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_parameter);
  }
  cfg = small_config();
  cfg.corpus.scenes[0].band_high_hz = 6000;  // above Nyquist at 8 kHz
  try {
    run_sweep(cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_input);
    CHECK(std::string(e.what()).find("stage 'simulate'") != std::string::npos);
  }
}

TEST_CASE("summary uses the sample standard deviation", "[sweep]") {
  const std::vector<SweepTrialRow> rows{{FeatureKind::graph_cepstrum, 0.1, 0, 0.5},
                                        {FeatureKind::graph_cepstrum, 0.1, 1, 0.7},
                                        {FeatureKind::graph_cepstrum, 0.1, 2, 0.9}};
  const auto s = summarize(rows);
  REQUIRE(s.size() == 1);
  CHECK_THAT(s[0].mean_accuracy, WithinAbs(0.7, 1e-15));
  CHECK_THAT(s[0].std_accuracy, WithinAbs(0.2, 1e-15));
}

TEST_CASE("config JSON round trip and path resolution", "[config]") {
  const auto dir = scratch("config");
  fs::create_directories(dir);
  auto cfg = small_config();
  cfg.topology_path = "topo.json";
  {
    std::ofstream(dir / "topo.json") << topology_to_json(default_topology()).dump();
    std::ofstream(dir / "cfg.json") << config_to_json(cfg).dump(2);
  }
  const auto back = load_experiment_config((dir / "cfg.json").string());
  CHECK(back.topology_path == (dir / "topo.json").string());
  CHECK(back.corpus.scenes.size() == 3);
  CHECK(back.corpus.scenes[1].source_position.x == 5.2);
  CHECK(back.corpus.clips_per_scene == 4);
  CHECK(back.sigma_grid_s == cfg.sigma_grid_s);
  CHECK(back.gmm_components == 2);
  CHECK(resolve_topology(back).groups == default_topology().groups);

  std::ofstream(dir / "bad.json") << R"({"trials": "five"})";
  CHECK_THROWS_AS(load_experiment_config((dir / "bad.json").string()), Error);
  std::ofstream(dir / "unknown.json") << R"({"trails": 5})";
  CHECK_THROWS_AS(load_experiment_config((dir / "unknown.json").string()), Error);
  std::ofstream(dir / "broken.json") << "{";
  CHECK_THROWS_AS(load_experiment_config((dir / "broken.json").string()), Error);
}

TEST_CASE("dump_basis: ring of four", "[basis]") {
  std::ostringstream os;
  const auto b = dump_basis({4, 0.0, {{0}, {1}, {2}, {3}}, std::vector<WeightedEdge>{{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 0, 1}}},
                            os);
  const auto table = table_of(os);
  REQUIRE(table.header == std::vector<std::string>{"col_1", "col_2", "col_3", "col_4"});
  REQUIRE(table.values.rows() == 5);
  CHECK_THAT(table.values(0, 0), WithinAbs(0.0, 1e-12));
  CHECK_THAT(table.values(0, 3), WithinAbs(4.0, 1e-12));
  for (int c = 0; c < 4; ++c) CHECK_THAT(table.values(1, c), WithinAbs(0.5, 1e-12));
  CHECK(b.ordering == Ordering::ascending);
}

TEST_CASE("dump_basis: connected pair", "[basis]") {
  std::ostringstream os;
  dump_basis({2, 0.0, {{0, 1}}, {}}, os);
  const auto t = table_of(os);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK_THAT(t.values(0, 0), WithinAbs(0.0, 1e-15));
  CHECK_THAT(t.values(0, 1), WithinAbs(2.0, 1e-15));
  CHECK_THAT(t.values(1, 0), WithinAbs(r, 1e-15));
  CHECK_THAT(t.values(1, 1), WithinAbs(r, 1e-15));
  CHECK_THAT(t.values(2, 0), WithinAbs(r, 1e-15));
  CHECK_THAT(t.values(2, 1), WithinAbs(-r, 1e-15));
}

TEST_CASE("dump_basis: default topology eigenvalues ascend", "[basis]") {
  std::ostringstream os;
  dump_basis(default_topology(), os);
  const auto t = table_of(os);
  REQUIRE(t.values.cols() == 13);
  // Degenerate eigenvalues are ordered by the tie-break, not by rounding noise.
  for (int c = 1; c < 13; ++c) CHECK(t.values(0, c) >= t.values(0, c - 1) - 1e-9 * t.values(0, 12));
  CHECK_THAT(t.values(0, 0), WithinAbs(0.0, 1e-12));
}

TEST_CASE("on-disk workflow: simulate, extract, train, evaluate", "[workflow]") {
  const auto dir = scratch("workflow");
  auto cfg = small_config();
  const auto manifest = simulate_corpus(cfg, (dir / "corpus").string());
  CHECK(manifest.size() == 12);
  CHECK(fs::exists(dir / "corpus" / manifest[0].path));
  for (auto kind : {FeatureKind::graph_cepstrum, FeatureKind::spatial_cepstrum}) {
    const auto fdir = dir / ("features_" + std::string(to_string(kind)));
    FeatureDirOptions opt;
    opt.kind = kind;
    extract_feature_directory((dir / "corpus" / "manifest.csv").string(), default_topology(), opt, fdir.string());
    const auto models = train_from_directory(fdir.string(), 2, 17, (dir / "models").string());
    CHECK(models.size() == 3);
    const auto loaded = load_models((dir / "models").string());
    const auto rep = evaluate(load_feature_split(fdir.string(), Split::test), loaded);
    CHECK(rep.total == 3);
    CHECK(rep.accuracy() == 1.0);
  }
}
