#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include "graph_ceps/classify.hpp"
#include "test_support.hpp"

using namespace graph_ceps;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

FeatureSeries series(Eigen::MatrixXd m) { return {FeatureKind::graph_cepstrum, std::move(m)}; }

GmmModel single_gaussian(const std::string& scene, Eigen::RowVectorXd mean, Eigen::RowVectorXd var) {
  GmmModel g;
  g.scene = scene;
  g.weights = Eigen::VectorXd::Ones(1);
  g.means = mean;
  g.variances = var;
  return g;
}

// Direct evaluation of sum_t log sum_k w_k N(f_t; mu_k, diag(var_k)).
double brute_force_score(const GmmModel& g, const Eigen::MatrixXd& x) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    long double p = 0.0L;
    for (int k = 0; k < g.n_components(); ++k) {
      long double log_n = 0.0L;
      for (Eigen::Index d = 0; d < x.cols(); ++d) {
        const long double v = g.variances(k, d);
        const long double diff = x(t, d) - g.means(k, d);
        log_n += -0.5L * std::log(2.0L * 3.14159265358979323846264338327950288L * v) - 0.5L * diff * diff / v;
      }
      p += static_cast<long double>(g.weights(k)) * std::exp(log_n);
    }
    total += static_cast<double>(std::log(p));
  }
  return total;
}

}  // namespace

TEST_CASE("train_gmm: repeated vector collapses to the variance floor", "[gmm]") {
  Eigen::MatrixXd x(10, 2);
  x.rowwise() = Eigen::RowVector2d(1.0, 2.0);
  const std::vector<FeatureSeries> data{series(x)};
  const auto fit = train_gmm(data, 1, 5);
  CHECK(fit.model.means.row(0) == Eigen::RowVector2d(1.0, 2.0));
  CHECK(fit.model.variances(0, 0) == GmmOptions{}.absolute_variance_floor);
  CHECK(fit.model.variances(0, 1) == GmmOptions{}.absolute_variance_floor);
  CHECK(std::isfinite(fit.log_likelihood.back()));
}

TEST_CASE("train_gmm: one component equals the sample moments", "[gmm]") {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 10; ++iter) {
    const Eigen::MatrixXd x = test_support::random_matrix(rng, 200 + 37 * iter, 5, 1.5, 2.0);
    const std::vector<FeatureSeries> data{series(x)};
    const auto fit = train_gmm(data, 1, static_cast<std::uint64_t>(iter));
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::RowVectorXd var = (x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(x.rows());
    REQUIRE((fit.model.means.row(0) - mean).cwiseAbs().maxCoeff() <= 1e-9);
    REQUIRE((fit.model.variances.row(0) - var).cwiseAbs().maxCoeff() <= 1e-9);
    REQUIRE(fit.model.weights(0) == 1.0);
  }
}

TEST_CASE("train_gmm: two separated clusters", "[gmm]") {
  std::mt19937_64 rng(8);
  Eigen::MatrixXd x(1000, 2);
  x.topRows(300) = test_support::random_matrix(rng, 300, 2, -10.0, 1.0);
  x.bottomRows(700) = test_support::random_matrix(rng, 700, 2, 10.0, 1.0);
  const std::vector<FeatureSeries> data{series(x)};
  const auto fit = train_gmm(data, 2, 11);
  const int lo = fit.model.means(0, 0) < fit.model.means(1, 0) ? 0 : 1;
  const int hi = 1 - lo;
  CHECK_THAT(fit.model.means(lo, 0), WithinAbs(-10.0, 0.1));
  CHECK_THAT(fit.model.means(lo, 1), WithinAbs(-10.0, 0.1));
  CHECK_THAT(fit.model.means(hi, 0), WithinAbs(10.0, 0.1));
  CHECK_THAT(fit.model.weights(lo), WithinAbs(0.3, 0.05));
  CHECK_THAT(fit.model.weights(hi), WithinAbs(0.7, 0.05));
  CHECK(fit.converged);
}

TEST_CASE("train_gmm: EM never decreases the training likelihood", "[gmm][property]") {
  std::mt19937_64 rng(9);
  for (int iter = 0; iter < 20; ++iter) {
    const int p = 1 + iter % 6;
    const Eigen::MatrixXd x = test_support::random_matrix(rng, 400, p) +
                              test_support::random_matrix(rng, 400, p).cwiseAbs2();
    const std::vector<FeatureSeries> data{series(x)};
    const auto fit = train_gmm(data, 1 + iter % 8, static_cast<std::uint64_t>(100 + iter));
    const auto& ll = fit.log_likelihood;
    REQUIRE(ll.size() == static_cast<std::size_t>(fit.iterations) + 1);
    for (std::size_t i = 1; i < ll.size(); ++i) REQUIRE(ll[i] >= ll[i - 1] - 1e-9 * std::abs(ll[i - 1]));
    REQUIRE(std::abs(fit.model.weights.sum() - 1.0) <= 1e-12);
    REQUIRE((fit.model.variances.array() > 0.0).all());
  }
}

TEST_CASE("train_gmm is deterministic in its seed", "[gmm]") {
  std::mt19937_64 rng(10);
  const std::vector<FeatureSeries> data{series(test_support::random_matrix(rng, 300, 4))};
  const auto a = train_gmm(data, 4, 42);
  const auto b = train_gmm(data, 4, 42);
  CHECK(a.model.means == b.model.means);
  CHECK(a.model.variances == b.model.variances);
  CHECK(a.model.weights == b.model.weights);
  CHECK(a.log_likelihood == b.log_likelihood);
}

TEST_CASE("train_gmm: invalid arguments", "[gmm][errors]") {
  std::mt19937_64 rng(12);
  const std::vector<FeatureSeries> data{series(test_support::random_matrix(rng, 3, 2))};
  CHECK_THROWS_AS(train_gmm(data, 0, 1), Error);
  CHECK_THROWS_AS(train_gmm(data, 4, 1), Error);
  auto bad = data;
  bad[0].vectors(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train_gmm(bad, 1, 1), Error);
}

TEST_CASE("classify_clip: nearest unit Gaussian wins", "[classify]") {
  const std::vector<GmmModel> models{single_gaussian("A", Eigen::RowVector2d(0, 0), Eigen::RowVector2d(1, 1)),
                                     single_gaussian("B", Eigen::RowVector2d(5, 5), Eigen::RowVector2d(1, 1))};
  Eigen::MatrixXd near_b(1, 2);
  near_b << 4.9, 5.1;
  CHECK(classify_clip(series(near_b), models) == "B");
  Eigen::MatrixXd near_a(1, 2);
  near_a << 0.2, -0.1;
  CHECK(classify_clip(series(near_a), models) == "A");
}

TEST_CASE("classify_clip: exact ties go to the smallest scene id", "[classify]") {
  const std::vector<GmmModel> models{single_gaussian("B", Eigen::RowVector2d(0, 0), Eigen::RowVector2d(1, 1)),
                                     single_gaussian("A", Eigen::RowVector2d(0, 0), Eigen::RowVector2d(1, 1))};
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  CHECK(classify_clip(series(x), models) == "A");
}

TEST_CASE("classify_clip agrees with a brute-force product of likelihoods", "[classify][property]") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int iter = 0; iter < 50; ++iter) {
    const int p = 1 + iter % 5;
    std::vector<GmmModel> models;
    for (int s = 0; s < 4; ++s) {
      const int k = 1 + (iter + s) % 3;
      GmmModel g;
      g.scene = "scene" + std::to_string(s);
      g.weights = test_support::random_matrix(rng, k, 1).cwiseAbs().array() + 0.1;
      g.weights /= g.weights.sum();
      g.means = test_support::random_matrix(rng, k, p, 0.0, 2.0);
      g.variances = Eigen::MatrixXd(k, p);
      for (int i = 0; i < k; ++i)
        for (int d = 0; d < p; ++d) g.variances(i, d) = u(rng);
      models.push_back(std::move(g));
    }
    const Eigen::MatrixXd x = test_support::random_matrix(rng, 5, p, 0.0, 2.0);
    const auto scores = clip_log_likelihoods(series(x), models);
    std::size_t best = 0;
    for (std::size_t s = 0; s < models.size(); ++s) {
      const double oracle = brute_force_score(models[s], x);
      REQUIRE_THAT(scores[s], WithinRel(oracle, 1e-9));
      if (oracle > brute_force_score(models[best], x)) best = s;
    }
    REQUIRE(classify_clip(series(x), models) == models[best].scene);
  }
}

TEST_CASE("classify_clip: far tails do not underflow", "[classify]") {
  const std::vector<GmmModel> models{single_gaussian("A", Eigen::RowVector2d(0, 0), Eigen::RowVector2d(1, 1)),
                                     single_gaussian("B", Eigen::RowVector2d(3, 0), Eigen::RowVector2d(1, 1))};
  // Per-frame likelihoods are ~exp(-5000); the log-domain sum still decides.
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(400, 2, 100.0);
  CHECK(classify_clip(series(x), models) == "B");
}

TEST_CASE("classification is invariant to a common rescaling of all models", "[classify][property]") {
  std::mt19937_64 rng(14);
  for (int iter = 0; iter < 20; ++iter) {
    std::vector<GmmModel> models;
    for (int s = 0; s < 3; ++s)
      models.push_back(single_gaussian("s" + std::to_string(s), test_support::random_matrix(rng, 1, 3),
                                       test_support::random_matrix(rng, 1, 3).cwiseAbs().array() + 0.5));
    const Eigen::MatrixXd x = test_support::random_matrix(rng, 6, 3);
    const double c = 0.25 + iter;
    auto scaled = models;
    for (auto& m : scaled) {
      m.means *= c;
      m.variances *= c * c;
    }
    REQUIRE(classify_clip(series(x), models) == classify_clip(series(x * c), scaled));
  }
}

TEST_CASE("evaluate: accuracy and confusion", "[classify][report]") {
  const std::vector<GmmModel> models{single_gaussian("A", Eigen::RowVector2d(0, 0), Eigen::RowVector2d(1, 1)),
                                     single_gaussian("B", Eigen::RowVector2d(9, 9), Eigen::RowVector2d(1, 1))};
  const Eigen::MatrixXd at_a = Eigen::MatrixXd::Zero(2, 2);
  const Eigen::MatrixXd at_b = Eigen::MatrixXd::Constant(2, 2, 9.0);

  const std::vector<LabeledFeatures> perfect{{"A", series(at_a)}, {"B", series(at_b)}};
  CHECK(evaluate(perfect, models).accuracy() == 1.0);

  const std::vector<LabeledFeatures> swapped{{"A", series(at_b)}, {"B", series(at_a)}};
  CHECK(evaluate(swapped, models).accuracy() == 0.0);

  const std::vector<LabeledFeatures> three_of_four{
      {"A", series(at_a)}, {"A", series(at_a)}, {"B", series(at_b)}, {"B", series(at_a)}};
  const auto rep = evaluate(three_of_four, models);
  CHECK(rep.accuracy() == 0.75);
  CHECK(rep.confusion == std::vector<std::vector<long>>{{2, 0}, {1, 1}});

  std::ostringstream os;
  write_report(os, rep);
  CHECK(os.str().find("true_scene,pred:A,pred:B,total,correct,accuracy\n") == 0);
  CHECK(os.str().find("overall,") != std::string::npos);

  const std::vector<LabeledFeatures> unknown{{"C", series(at_a)}};
  CHECK_THROWS_AS(evaluate(unknown, models), Error);
}

TEST_CASE("model JSON round trip is exact", "[classify][io]") {
  std::mt19937_64 rng(15);
  const std::vector<FeatureSeries> data{series(test_support::random_matrix(rng, 200, 3))};
  const auto g = train_gmm(data, 3, 99, "office").model;
  const auto path = (std::filesystem::temp_directory_path() / "gc_model_roundtrip.json").string();
  save_model(path, g);
  const auto back = load_model(path);
  CHECK(back.scene == "office");
  CHECK(back.seed == 99);
  CHECK(back.kind == g.kind);
  CHECK(back.weights == g.weights);
  CHECK(back.means == g.means);
  CHECK(back.variances == g.variances);
}
