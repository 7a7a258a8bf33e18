// graph-ceps: command-line front end for the graph cepstrum toolkit.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graph_ceps/graph_ceps.hpp"

namespace gc = graph_ceps;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kInvalidConfig = 2, kDataError = 3, kNumericalFailure = 4 };

int exit_code_for(gc::ErrorKind kind) {
  switch (kind) {
    case gc::ErrorKind::invalid_topology:
    case gc::ErrorKind::invalid_parameter:
      return kInvalidConfig;
    case gc::ErrorKind::invalid_input:
    case gc::ErrorKind::io:
      return kDataError;
    case gc::ErrorKind::invalid_matrix:
    case gc::ErrorKind::numerical_failure:
      return kNumericalFailure;
  }
  return kDataError;
}

// Writes to `path`, or stdout for "-".
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path == "-") {
    fn(std::cout);
    return;
  }
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  auto out = gc::csv::open_out(path);
  fn(out);
}

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("GRAPH_CEPS_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw gc::Error(gc::ErrorKind::invalid_parameter, "GRAPH_CEPS_SEED is not an unsigned integer");
  }
}

gc::TopologySpec topology_or_default(const std::string& path) {
  return path.empty() ? gc::default_topology() : gc::load_topology(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph cepstrum features, scene classification and synchronization-error sweeps"};
  app.require_subcommand(1);

  // graph build
  auto* graph = app.add_subcommand("graph", "Microphone connection graphs");
  graph->require_subcommand(1);
  auto* graph_build = graph->add_subcommand("build", "Write the graph Laplacian of a topology as CSV");
  std::string topology_path;
  std::string out_path = "-";
  graph_build->add_option("--topology", topology_path, "Topology JSON (default: built-in 13-channel layout)");
  graph_build->add_option("--out", out_path, "Output CSV ('-' for stdout)");

  // basis
  auto* basis = app.add_subcommand("basis", "Write eigenvalues and U^T of the graph Laplacian");
  basis->add_option("--topology", topology_path, "Topology JSON (default: built-in 13-channel layout)");
  basis->add_option("--out", out_path, "Output CSV ('-' for stdout)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Render a synthetic labelled corpus to WAV files");
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  simulate->add_option("--config", config_path, "Experiment/simulation JSON (default: built-in)");
  simulate->add_option("--out", out_path, "Corpus directory")->required();
  simulate->add_option("--seed", seed_flag, "Master seed");

  // features
  auto* features = app.add_subcommand("features", "Extract graph or spatial cepstra");
  std::string wav_path, manifest_path, kind_name = "gc";
  int order = 0;
  double frame_ms = 20.0, hop_ms = 20.0;
  bool centered = false;
  auto* wav_opt = features->add_option("--wav", wav_path, "Single multichannel WAV");
  auto* manifest_opt = features->add_option("--manifest", manifest_path, "Corpus manifest.csv (batch mode)");
  wav_opt->excludes(manifest_opt);
  features->add_option("--topology", topology_path, "Topology JSON (default: built-in)");
  features->add_option("--kind", kind_name, "gc or sc")->check(CLI::IsMember({"gc", "sc"}));
  features->add_option("--order", order, "Retained coefficients (0 = all)");
  features->add_option("--frame-ms", frame_ms, "Frame length in ms");
  features->add_option("--hop-ms", hop_ms, "Hop in ms");
  features->add_flag("--centered", centered, "Mean-centre before fitting the spatial-cepstrum covariance");
  features->add_option("--out", out_path, "Feature CSV (single) or directory (batch)")->required();

  // train
  auto* train = app.add_subcommand("train", "Train one GMM per scene from a feature directory");
  std::string features_dir, models_dir;
  int k = 8;
  std::uint64_t train_seed = 17;
  train->add_option("--features", features_dir, "Feature directory")->required();
  train->add_option("--k", k, "Mixture components per scene");
  train->add_option("--seed", train_seed, "Training seed");
  train->add_option("--out", models_dir, "Model directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Classify the test split and report accuracy");
  eval->add_option("--features", features_dir, "Feature directory")->required();
  eval->add_option("--models", models_dir, "Model directory")->required();
  eval->add_option("--out", out_path, "Report CSV ('-' for stdout)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Accuracy versus synchronization error, GC against SC");
  std::optional<int> trials, clips_per_scene, gmm_k, sweep_order;
  std::optional<unsigned> threads;
  std::vector<double> sigma_grid;
  std::string sweep_out;
  sweep->add_option("--config", config_path, "Experiment JSON (default: built-in)");
  sweep->add_option("--out", sweep_out, "Output directory (sweep.csv)");
  sweep->add_option("--seed", seed_flag, "Master seed");
  sweep->add_option("--trials", trials, "Trials per sigma");
  sweep->add_option("--sigma-grid", sigma_grid, "Sigma values in seconds")->delimiter(',');
  sweep->add_option("--clips-per-scene", clips_per_scene, "Clips per scene");
  sweep->add_option("--k", gmm_k, "Mixture components per scene");
  sweep->add_option("--order", sweep_order, "Retained coefficients (0 = all)");
  sweep->add_option("--threads", threads, "Worker threads (0 = hardware)");

  // verify-ring
  auto* ring = app.add_subcommand("verify-ring", "Check ring-graph Fourier basis against the DFT");
  std::vector<int> ring_sizes{3, 4, 8, 16, 64};
  double tol = 1e-9;
  ring->add_option("--n", ring_sizes, "Ring sizes")->delimiter(',');
  ring->add_option("--tol", tol, "Tolerance");
  ring->add_option("--out", out_path, "Report CSV ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalidConfig;
  }

  try {
    if (graph_build->parsed()) {
      const auto l = gc::laplacian(gc::build_graph(topology_or_default(topology_path)));
      with_output(out_path, [&](std::ostream& os) { gc::write_square_csv(os, l.matrix()); });
    } else if (basis->parsed()) {
      const auto topo = topology_or_default(topology_path);
      with_output(out_path, [&](std::ostream& os) { gc::dump_basis(topo, os); });
    } else if (simulate->parsed()) {
      auto cfg = config_path.empty() ? gc::ExperimentConfig{} : gc::load_experiment_config(config_path);
      if (auto env = seed_from_env()) cfg.corpus.master_seed = *env;
      if (seed_flag) cfg.corpus.master_seed = *seed_flag;
      const auto manifest = gc::simulate_corpus(cfg, out_path);
      std::cerr << "wrote " << manifest.size() << " clips to " << out_path << '\n';
    } else if (features->parsed()) {
      const auto topo = topology_or_default(topology_path);
      const auto kind = gc::parse_feature_kind(kind_name);
      if (!manifest_path.empty()) {
        gc::extract_feature_directory(manifest_path, topo, {kind, order, frame_ms, hop_ms, centered}, out_path);
      } else if (!wav_path.empty()) {
        const auto frames = gc::frame_log_power(gc::read_wav(wav_path), frame_ms, hop_ms);
        const int p = order == 0 ? frames.n_channels() : order;
        gc::FeatureSeries f;
        if (kind == gc::FeatureKind::graph_cepstrum) {
          f = gc::graph_cepstrum(frames, gc::gft_basis(gc::laplacian(gc::build_graph(topo))), p);
        } else {
          // Single clip: the covariance is fitted on the clip itself.
          f = gc::spatial_cepstrum(frames, gc::fit_covariance(frames, centered), p);
        }
        with_output(out_path, [&](std::ostream& os) { gc::write_features(os, f); });
      } else {
        throw gc::Error(gc::ErrorKind::invalid_parameter, "features needs --wav or --manifest");
      }
    } else if (train->parsed()) {
      const auto models = gc::train_from_directory(features_dir, k, train_seed, models_dir);
      std::cerr << "trained " << models.size() << " scene models\n";
    } else if (eval->parsed()) {
      const auto models = gc::load_models(models_dir);
      const auto test = gc::load_feature_split(features_dir, gc::Split::test);
      const auto report = gc::evaluate(test, models);
      with_output(out_path, [&](std::ostream& os) { gc::write_report(os, report); });
      std::cerr << "accuracy " << report.accuracy() << " (" << report.correct << "/" << report.total << ")\n";
    } else if (sweep->parsed()) {
      auto cfg = config_path.empty() ? gc::ExperimentConfig{} : gc::load_experiment_config(config_path);
      if (auto env = seed_from_env()) cfg.corpus.master_seed = *env;
      if (seed_flag) cfg.corpus.master_seed = *seed_flag;
      if (trials) cfg.trials = *trials;
      if (!sigma_grid.empty()) cfg.sigma_grid_s = sigma_grid;
      if (clips_per_scene) {
        cfg.corpus.clips_per_scene = *clips_per_scene;
        cfg.corpus.train_clips_per_scene = std::max(1, *clips_per_scene * 3 / 4);
      }
      if (gmm_k) cfg.gmm_components = *gmm_k;
      if (sweep_order) cfg.order = *sweep_order;
      if (threads) cfg.threads = *threads;
      if (!sweep_out.empty()) cfg.output_dir = sweep_out;
      const auto result = gc::run_sweep(cfg);
      if (cfg.output_dir.empty()) gc::write_sweep_csv(std::cout, result.trials);
    } else if (ring->parsed()) {
      bool all_pass = true;
      with_output(out_path, [&](std::ostream& os) {
        gc::csv::write_row(os, {"n", "max_projector_mismatch", "max_eigen_residual", "pass"});
        for (int n : ring_sizes) {
          const auto rep = gc::verify_ring_equivalence(n, tol);
          all_pass = all_pass && rep.pass;
          gc::csv::write_row(os, {std::to_string(n), gc::csv::format_double(rep.max_projector_mismatch),
                                  gc::csv::format_double(rep.max_eigen_residual), rep.pass ? "true" : "false"});
        }
      });
      if (!all_pass) return kNumericalFailure;
    }
  } catch (const gc::Error& e) {
    std::cerr << "graph-ceps: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "graph-ceps: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}
