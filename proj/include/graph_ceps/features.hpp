#pragma once

#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graph_ceps/csv.hpp"
#include "graph_ceps/error.hpp"
#include "graph_ceps/spectral.hpp"
#include "graph_ceps/wav.hpp"

namespace graph_ceps {

// Floor on the per-frame mean-square power, relative to full scale squared.
inline constexpr double kLogPowerFloor = 1e-12;

// Per-frame log powers of one clip: q(t, n) = log(mean square of channel n in
// frame t).
struct FrameSeries {
  Eigen::MatrixXd q;  // T x N
  double frame_len_ms = 0.0;
  double hop_ms = 0.0;

  int n_frames() const { return static_cast<int>(q.rows()); }
  int n_channels() const { return static_cast<int>(q.cols()); }
};

enum class FeatureKind { graph_cepstrum, spatial_cepstrum };

inline const char* to_string(FeatureKind k) { return k == FeatureKind::graph_cepstrum ? "gc" : "sc"; }

inline FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "gc") return FeatureKind::graph_cepstrum;
  if (s == "sc") return FeatureKind::spatial_cepstrum;
  throw Error(ErrorKind::invalid_parameter, "unknown feature kind '" + s + "' (expected gc or sc)");
}

struct FeatureSeries {
  FeatureKind kind = FeatureKind::graph_cepstrum;
  Eigen::MatrixXd vectors;  // T x P

  int order() const { return static_cast<int>(vectors.cols()); }
  int n_frames() const { return static_cast<int>(vectors.rows()); }
};

struct CovarianceModel {
  Eigen::MatrixXd r_q;
  Eigen::VectorXd mean;  // all zero unless fitted with centering
  long n_frames_used = 0;
};

inline std::size_t frame_samples(double ms, int sample_rate) {
  return static_cast<std::size_t>(std::llround(ms * sample_rate / 1000.0));
}

inline FrameSeries frame_log_power(const MultichannelClip& clip, double frame_len_ms, double hop_ms) {
  if (clip.sample_rate <= 0) throw Error(ErrorKind::invalid_input, "sample rate must be positive");
  if (clip.channels.empty() || clip.n_samples() == 0) throw Error(ErrorKind::invalid_input, "empty clip");
  const std::size_t len = clip.n_samples();
  for (const auto& ch : clip.channels)
    if (ch.size() != len) throw Error(ErrorKind::invalid_input, "channels differ in length");
  const std::size_t frame = frame_samples(frame_len_ms, clip.sample_rate);
  const std::size_t hop = frame_samples(hop_ms, clip.sample_rate);
  if (frame == 0 || hop == 0) throw Error(ErrorKind::invalid_input, "frame and hop must span at least one sample");
  if (frame > len) throw Error(ErrorKind::invalid_input, "frame longer than clip");

  const std::size_t n_frames = (len - frame) / hop + 1;
  FrameSeries out;
  out.frame_len_ms = frame_len_ms;
  out.hop_ms = hop_ms;
  out.q.resize(static_cast<Eigen::Index>(n_frames), clip.n_channels());
  for (int c = 0; c < clip.n_channels(); ++c) {
    const auto& x = clip.channels[static_cast<std::size_t>(c)];
    for (std::size_t t = 0; t < n_frames; ++t) {
      double acc = 0.0;
      for (std::size_t i = t * hop, end = t * hop + frame; i < end; ++i) acc += x[i] * x[i];
      out.q(static_cast<Eigen::Index>(t), c) = std::log(std::max(acc / static_cast<double>(frame), kLogPowerFloor));
    }
  }
  return out;
}

namespace detail {

inline void check_order(int order, int n) {
  if (order < 1 || order > n)
    throw Error(ErrorKind::invalid_input, "order must lie in [1, " + std::to_string(n) + "]");
}

}  // namespace detail

// e_t = U_P^T q_t: the k-th coefficient is the inner product with the k-th
// ascending Laplacian eigenvector, so the first one is the channel sum over
// sqrt(N) on a connected graph.
inline FeatureSeries graph_cepstrum(const FrameSeries& frames, const SpectralBasis& basis, int order) {
  if (basis.ordering != Ordering::ascending)
    throw Error(ErrorKind::invalid_input, "graph cepstrum needs an ascending Laplacian basis");
  if (basis.size() != frames.n_channels())
    throw Error(ErrorKind::invalid_input, "basis size does not match channel count");
  detail::check_order(order, basis.size());
  return {FeatureKind::graph_cepstrum, frames.q * basis.eigenvectors.leftCols(order)};
}

// Non-centered second moment (1/T) sum q q^T over all frames of all series.
// With `centered` the pooled mean is removed first.
inline CovarianceModel fit_covariance(std::span<const FrameSeries> series, bool centered = false) {
  if (series.empty()) throw Error(ErrorKind::invalid_input, "no frames to fit");
  const int n = series.front().n_channels();
  long total = 0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  for (const auto& s : series) {
    if (s.n_channels() != n) throw Error(ErrorKind::invalid_input, "channel count differs between clips");
    total += s.n_frames();
    sum += s.q.colwise().sum().transpose();
  }
  if (total < 1) throw Error(ErrorKind::invalid_input, "no frames to fit");

  CovarianceModel cov;
  cov.n_frames_used = total;
  cov.mean = centered ? Eigen::VectorXd(sum / static_cast<double>(total)) : Eigen::VectorXd::Zero(n);
  cov.r_q = Eigen::MatrixXd::Zero(n, n);
  for (const auto& s : series) {
    const Eigen::MatrixXd x = s.q.rowwise() - cov.mean.transpose();
    cov.r_q.noalias() += x.transpose() * x;
  }
  cov.r_q /= static_cast<double>(total);
  cov.r_q = 0.5 * (cov.r_q + cov.r_q.transpose()).eval();
  return cov;
}

inline CovarianceModel fit_covariance(const FrameSeries& frames, bool centered = false) {
  return fit_covariance(std::span<const FrameSeries>(&frames, 1), centered);
}

// Principal axes of R_q, eigenvalues descending.
inline SpectralBasis pca_basis(const CovarianceModel& cov) { return eig_sym(cov.r_q, Ordering::descending); }

inline FeatureSeries spatial_cepstrum(const FrameSeries& frames, const SpectralBasis& pca, const Eigen::VectorXd& mean,
                                      int order) {
  if (pca.ordering != Ordering::descending)
    throw Error(ErrorKind::invalid_input, "spatial cepstrum needs a descending covariance basis");
  if (pca.size() != frames.n_channels() || mean.size() != frames.n_channels())
    throw Error(ErrorKind::invalid_input, "covariance size does not match channel count");
  detail::check_order(order, pca.size());
  return {FeatureKind::spatial_cepstrum, (frames.q.rowwise() - mean.transpose()) * pca.eigenvectors.leftCols(order)};
}

// d_t = E_P^T q_t with E the descending eigenvectors of R_q.
inline FeatureSeries spatial_cepstrum(const FrameSeries& frames, const CovarianceModel& cov, int order) {
  if (cov.r_q.rows() != frames.n_channels())
    throw Error(ErrorKind::invalid_input, "covariance size does not match channel count");
  return spatial_cepstrum(frames, pca_basis(cov), cov.mean, order);
}

inline void write_features(std::ostream& os, const FeatureSeries& f) {
  std::vector<std::string> header;
  for (int k = 1; k <= f.order(); ++k) header.push_back(std::string(to_string(f.kind)) + "_" + std::to_string(k));
  csv::write_row(os, header);
  csv::write_matrix(os, f.vectors);
}

inline void write_features(const std::string& path, const FeatureSeries& f) {
  auto out = csv::open_out(path);
  write_features(out, f);
}

inline FeatureSeries read_features(const std::string& path) {
  auto t = csv::read_numeric_file(path);
  if (t.header.empty() || t.header.front().size() < 3)
    throw Error(ErrorKind::invalid_input, path + ": missing feature header");
  FeatureSeries f;
  f.kind = parse_feature_kind(t.header.front().substr(0, 2));
  f.vectors = std::move(t.values);
  return f;
}

}  // namespace graph_ceps
