#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "graph_ceps/error.hpp"
#include "graph_ceps/features.hpp"

namespace graph_ceps {

using SceneLabel = std::string;

// Diagonal-covariance Gaussian mixture for one scene.
struct GmmModel {
  SceneLabel scene;
  FeatureKind kind = FeatureKind::graph_cepstrum;
  std::uint64_t seed = 0;
  Eigen::VectorXd weights;    // K
  Eigen::MatrixXd means;      // K x P
  Eigen::MatrixXd variances;  // K x P

  int n_components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(means.cols()); }
};

struct GmmOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;  // relative log-likelihood improvement
  double relative_variance_floor = 1e-6;
  // Used when a dimension has no spread at all.
  double absolute_variance_floor = 1e-12;
};

struct GmmFit {
  GmmModel model;
  std::vector<double> log_likelihood;  // total training log-likelihood per E-step
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// Per-frame, per-component log(w_k N(x | mu_k, diag v_k)). Zero-weight
// components get -inf.
inline Eigen::MatrixXd component_log_densities(const GmmModel& g, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd out(n, g.n_components());
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (int k = 0; k < g.n_components(); ++k) {
    if (g.weights(k) <= 0.0) {
      out.col(k).setConstant(-std::numeric_limits<double>::infinity());
      continue;
    }
    const Eigen::RowVectorXd inv_var = g.variances.row(k).cwiseInverse();
    const double c = std::log(g.weights(k)) - 0.5 * (g.dim() * log_2pi + g.variances.row(k).array().log().sum());
    out.col(k) = (c - 0.5 * ((x.rowwise() - g.means.row(k)).array().square().rowwise() * inv_var.array())
                             .rowwise()
                             .sum())
                     .matrix();
  }
  return out;
}

inline Eigen::MatrixXd stack_frames(std::span<const FeatureSeries> series) {
  if (series.empty()) throw Error(ErrorKind::invalid_input, "no training features");
  const int p = series.front().order();
  Eigen::Index rows = 0;
  for (const auto& s : series) {
    if (s.order() != p) throw Error(ErrorKind::invalid_input, "feature order differs between clips");
    rows += s.n_frames();
  }
  Eigen::MatrixXd x(rows, p);
  Eigen::Index r = 0;
  for (const auto& s : series) {
    x.middleRows(r, s.n_frames()) = s.vectors;
    r += s.n_frames();
  }
  return x;
}

// k-means++ seeding: first centre uniform, later ones with probability
// proportional to the squared distance to the nearest chosen centre.
inline Eigen::MatrixXd kmeans_pp(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  centers.row(0) = x.row(pick(rng));
  Eigen::VectorXd d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      const double u = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > u && d2(i) > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = x.row(chosen);
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

}  // namespace detail

inline Eigen::VectorXd frame_log_likelihoods(const GmmModel& g, const Eigen::MatrixXd& x) {
  if (x.cols() != g.dim()) throw Error(ErrorKind::invalid_input, "feature dimension does not match model");
  const Eigen::MatrixXd lp = detail::component_log_densities(g, x);
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = detail::log_sum_exp(lp.row(i).transpose());
  return out;
}

// EM for a diagonal GMM from a seeded k-means++ start.
inline GmmFit train_gmm(std::span<const FeatureSeries> features, int k, std::uint64_t seed,
                        const SceneLabel& scene = {}, const GmmOptions& opt = {}) {
  if (k < 1) throw Error(ErrorKind::invalid_parameter, "component count must be positive");
  const Eigen::MatrixXd x = detail::stack_frames(features);
  const Eigen::Index n = x.rows();
  if (n < k) throw Error(ErrorKind::invalid_input, "fewer frames than mixture components");
  if (!x.allFinite()) throw Error(ErrorKind::invalid_input, "non-finite feature values");

  const Eigen::RowVectorXd global_mean = x.colwise().mean();
  const Eigen::RowVectorXd global_var = (x.rowwise() - global_mean).array().square().colwise().mean();
  const Eigen::RowVectorXd floor =
      (opt.relative_variance_floor * global_var).cwiseMax(opt.absolute_variance_floor);

  std::mt19937_64 rng(seed);
  GmmFit fit;
  GmmModel& g = fit.model;
  g.scene = scene;
  g.kind = features.front().kind;
  g.seed = seed;
  g.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  g.means = detail::kmeans_pp(x, k, rng);
  g.variances = global_var.cwiseMax(floor).replicate(k, 1);

  Eigen::MatrixXd resp(n, k);
  auto e_step = [&] {
    resp = detail::component_log_densities(g, x);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lse = detail::log_sum_exp(resp.row(i).transpose());
      ll += lse;
      resp.row(i) = (resp.row(i).array() - lse).exp();
    }
    return ll;
  };

  double ll = e_step();
  fit.log_likelihood.push_back(ll);
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Eigen::VectorXd nk = resp.colwise().sum().transpose();
    for (int c = 0; c < k; ++c) {
      g.weights(c) = nk(c) / static_cast<double>(n);
      // An empty component keeps its parameters; with zero weight it no
      // longer contributes.
      if (nk(c) <= 0.0) continue;
      const Eigen::RowVectorXd mu = (resp.col(c).transpose() * x) / nk(c);
      const Eigen::RowVectorXd var =
          (resp.col(c).transpose() * (x.rowwise() - mu).array().square().matrix()) / nk(c);
      g.means.row(c) = mu;
      g.variances.row(c) = var.cwiseMax(floor);
    }
    g.weights /= g.weights.sum();

    const double next = e_step();
    fit.log_likelihood.push_back(next);
    fit.iterations = it + 1;
    const double gain = next - ll;
    ll = next;
    if (gain < opt.tolerance * std::abs(ll)) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

// Sum over frames of log p(f_t | scene), one entry per model.
inline std::vector<double> clip_log_likelihoods(const FeatureSeries& clip, std::span<const GmmModel> models) {
  std::vector<double> out;
  out.reserve(models.size());
  for (const auto& m : models) {
    if (m.dim() != clip.order()) throw Error(ErrorKind::invalid_input, "feature order does not match model " + m.scene);
    out.push_back(frame_log_likelihoods(m, clip.vectors).sum());
  }
  return out;
}

// argmax over scenes of the product of frame likelihoods, evaluated as a sum
// of logs. Exact ties go to the lexicographically smallest scene id.
inline SceneLabel classify_clip(const FeatureSeries& clip, std::span<const GmmModel> models) {
  if (models.empty()) throw Error(ErrorKind::invalid_input, "no scene models");
  const auto scores = clip_log_likelihoods(clip, models);
  std::size_t best = 0;
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (scores[i] > scores[best] || (scores[i] == scores[best] && models[i].scene < models[best].scene)) best = i;
  }
  return models[best].scene;
}

struct LabeledFeatures {
  SceneLabel scene;
  FeatureSeries features;
};

struct AccuracyReport {
  std::vector<SceneLabel> scenes;           // sorted
  std::vector<std::vector<long>> confusion;  // [true][predicted]
  long correct = 0;
  long total = 0;

  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

inline AccuracyReport evaluate(std::span<const LabeledFeatures> testset, std::span<const GmmModel> models) {
  if (testset.empty()) throw Error(ErrorKind::invalid_input, "empty test set");
  AccuracyReport rep;
  for (const auto& m : models) rep.scenes.push_back(m.scene);
  std::sort(rep.scenes.begin(), rep.scenes.end());
  rep.confusion.assign(rep.scenes.size(), std::vector<long>(rep.scenes.size(), 0));
  auto index_of = [&](const SceneLabel& s) {
    auto it = std::lower_bound(rep.scenes.begin(), rep.scenes.end(), s);
    if (it == rep.scenes.end() || *it != s) throw Error(ErrorKind::invalid_input, "no model for scene " + s);
    return static_cast<std::size_t>(it - rep.scenes.begin());
  };
  for (const auto& item : testset) {
    const auto truth = index_of(item.scene);
    const auto pred = index_of(classify_clip(item.features, models));
    ++rep.confusion[truth][pred];
    ++rep.total;
    if (truth == pred) ++rep.correct;
  }
  return rep;
}

inline void write_report(std::ostream& os, const AccuracyReport& rep) {
  std::vector<std::string> header{"true_scene"};
  for (const auto& s : rep.scenes) header.push_back("pred:" + s);
  header.insert(header.end(), {"total", "correct", "accuracy"});
  csv::write_row(os, header);
  for (std::size_t i = 0; i < rep.scenes.size(); ++i) {
    std::vector<std::string> row{rep.scenes[i]};
    long total = 0;
    for (long c : rep.confusion[i]) {
      row.push_back(std::to_string(c));
      total += c;
    }
    const long ok = rep.confusion[i][i];
    row.push_back(std::to_string(total));
    row.push_back(std::to_string(ok));
    row.push_back(csv::format_double(total ? static_cast<double>(ok) / static_cast<double>(total) : 0.0));
    csv::write_row(os, row);
  }
  std::vector<std::string> overall{"overall"};
  overall.insert(overall.end(), rep.scenes.size(), "");
  overall.push_back(std::to_string(rep.total));
  overall.push_back(std::to_string(rep.correct));
  overall.push_back(csv::format_double(rep.accuracy()));
  csv::write_row(os, overall);
}

inline nlohmann::json model_to_json(const GmmModel& g) {
  auto rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      out.push_back(row);
    }
    return out;
  };
  std::vector<double> w(g.weights.data(), g.weights.data() + g.weights.size());
  return {{"scene", g.scene},       {"kind", to_string(g.kind)}, {"order", g.dim()},
          {"seed", g.seed},         {"weights", w},              {"means", rows(g.means)},
          {"variances", rows(g.variances)}};
}

inline GmmModel model_from_json(const nlohmann::json& j) {
  GmmModel g;
  try {
    g.scene = j.at("scene").get<std::string>();
    g.kind = parse_feature_kind(j.at("kind").get<std::string>());
    g.seed = j.value("seed", std::uint64_t{0});
    const auto w = j.at("weights").get<std::vector<double>>();
    const auto mu = j.at("means").get<std::vector<std::vector<double>>>();
    const auto var = j.at("variances").get<std::vector<std::vector<double>>>();
    const int k = static_cast<int>(w.size());
    const int p = j.at("order").get<int>();
    if (k < 1 || static_cast<int>(mu.size()) != k || static_cast<int>(var.size()) != k)
      throw Error(ErrorKind::invalid_input, "inconsistent mixture sizes");
    g.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), k);
    g.means.resize(k, p);
    g.variances.resize(k, p);
    for (int c = 0; c < k; ++c) {
      if (static_cast<int>(mu[static_cast<std::size_t>(c)].size()) != p ||
          static_cast<int>(var[static_cast<std::size_t>(c)].size()) != p)
        throw Error(ErrorKind::invalid_input, "inconsistent mixture dimension");
      for (int d = 0; d < p; ++d) {
        g.means(c, d) = mu[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)];
        g.variances(c, d) = var[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)];
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, std::string("malformed model: ") + e.what());
  }
  if ((g.variances.array() <= 0.0).any()) throw Error(ErrorKind::invalid_input, "variances must be positive");
  return g;
}

inline void save_model(const std::string& path, const GmmModel& g) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  out << model_to_json(g).dump(2) << '\n';
}

inline GmmModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace graph_ceps
