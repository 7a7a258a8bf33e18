#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "graph_ceps/error.hpp"
#include "graph_ceps/graph_topology.hpp"

namespace graph_ceps {

enum class Ordering { ascending, descending };

// Eigenpairs of a real symmetric matrix. Columns of `eigenvectors` are unit
// eigenvectors; column k pairs with eigenvalues[k].
struct SpectralBasis {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  Ordering ordering = Ordering::ascending;

  int size() const { return static_cast<int>(eigenvalues.size()); }

  // Row k of the returned matrix is eigenvector k.
  Eigen::MatrixXd transposed() const { return eigenvectors.transpose(); }
};

struct JacobiOptions {
  double off_tolerance = 1e-12;  // relative to ||M||_F
  int max_sweeps = 100;
  double asymmetry_tolerance = 1e-9;
  double tie_tolerance = 1e-9;  // relative to max |lambda|
};

namespace detail {

// Cyclic-by-row Jacobi. On return `a` is (numerically) diagonal and
// v^T M v = a.
inline void jacobi_sweeps(Eigen::MatrixXd& a, Eigen::MatrixXd& v, const JacobiOptions& opt) {
  const Eigen::Index n = a.rows();
  const double norm = a.norm();
  v.setIdentity(n, n);
  if (norm == 0.0) return;
  const double target = opt.off_tolerance * norm;

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0;; ++sweep) {
    if (off_norm() <= target) return;
    if (sweep == opt.max_sweeps)
      throw Error(ErrorKind::numerical_failure, "Jacobi iteration did not converge");

    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = a(p, k) = c * akp - s * akq;
          a(k, q) = a(q, k) = s * akp + c * akq;
        }
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;

        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
}

// Flip so the largest-magnitude entry is positive; near-ties go to the
// first index.
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> col) {
  const double max_abs = col.cwiseAbs().maxCoeff();
  if (max_abs == 0.0) return;
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    if (std::abs(col(i)) >= max_abs - 1e-12 * max_abs) {
      if (col(i) < 0.0) col = -col;
      return;
    }
  }
}

// Descending lexicographic comparison with a small entrywise tolerance.
inline bool lex_greater(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x(i) - y(i)) > 1e-12) return x(i) > y(i);
  }
  return false;
}

}  // namespace detail

inline SpectralBasis eig_sym(const Eigen::MatrixXd& m, Ordering ordering,
                             const JacobiOptions& opt = {}) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw Error(ErrorKind::invalid_matrix, "matrix must be square and non-empty");
  if (!m.allFinite()) throw Error(ErrorKind::invalid_matrix, "matrix has non-finite entries");
  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > opt.asymmetry_tolerance * scale)
    throw Error(ErrorKind::invalid_matrix, "matrix is not symmetric");

  Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  Eigen::MatrixXd v;
  detail::jacobi_sweeps(a, v, opt);

  const auto n = static_cast<int>(m.rows());
  Eigen::VectorXd lambda = a.diagonal();
  for (int k = 0; k < n; ++k) detail::fix_sign(v.col(k));

  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) {
    return ordering == Ordering::ascending ? lambda(x) < lambda(y) : lambda(x) > lambda(y);
  });

  // Runs of (near-)equal eigenvalues are reordered by their eigenvectors.
  const double tie = opt.tie_tolerance * lambda.cwiseAbs().maxCoeff();
  for (std::size_t begin = 0; begin < idx.size();) {
    std::size_t end = begin + 1;
    while (end < idx.size() && std::abs(lambda(idx[end]) - lambda(idx[end - 1])) <= tie) ++end;
    std::stable_sort(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                     idx.begin() + static_cast<std::ptrdiff_t>(end), [&](int x, int y) {
                       return detail::lex_greater(v.col(x), v.col(y));
                     });
    begin = end;
  }

  SpectralBasis out;
  out.ordering = ordering;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (int k = 0; k < n; ++k) {
    out.eigenvalues(k) = lambda(idx[static_cast<std::size_t>(k)]);
    out.eigenvectors.col(k) = v.col(idx[static_cast<std::size_t>(k)]);
  }
  return out;
}

// Graph Fourier basis: Laplacian eigenvectors in ascending eigenvalue order.
inline SpectralBasis gft_basis(const GraphLaplacian& l) { return eig_sym(l.matrix(), Ordering::ascending); }

struct DftMatrix {
  int n = 0;
  Eigen::MatrixXcd entries;
};

// Z(j, k) = zeta^(j k) / sqrt(N), zeta = exp(i 2 pi / N).
inline DftMatrix idft_matrix(int n) {
  if (n < 1) throw Error(ErrorKind::invalid_parameter, "DFT size must be positive");
  DftMatrix z;
  z.n = n;
  z.entries.resize(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      // Reduce the exponent first so large N keeps full phase accuracy.
      const long long e = (static_cast<long long>(j) * k) % n;
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(e) / n;
      z.entries(j, k) = std::polar(scale, phase);
    }
  }
  return z;
}

struct RingEquivalenceReport {
  int n = 0;
  double max_projector_mismatch = 0.0;
  double max_eigen_residual = 0.0;
  bool pass = false;
};

// Checks that the ring-graph Fourier basis spans the same eigenspaces as the
// DFT. Compared as orthogonal projectors per distinct eigenvalue, since the
// ring spectrum is degenerate (lambda_k == lambda_{N-k}).
inline RingEquivalenceReport verify_ring_equivalence(int n, double tol) {
  if (n < 3) throw Error(ErrorKind::invalid_parameter, "ring equivalence needs N >= 3");
  const GraphLaplacian l = laplacian(ring_graph(n));
  const SpectralBasis basis = gft_basis(l);
  const DftMatrix z = idft_matrix(n);

  RingEquivalenceReport rep;
  rep.n = n;

  // DFT column k has eigenvalue 2 - 2 cos(2 pi k / N).
  Eigen::VectorXd dft_lambda(n);
  for (int k = 0; k < n; ++k) {
    dft_lambda(k) = 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * k / n);
    const Eigen::VectorXcd r = l.matrix().cast<std::complex<double>>() * z.entries.col(k) - dft_lambda(k) * z.entries.col(k);
    rep.max_eigen_residual = std::max(rep.max_eigen_residual, r.norm());
  }

  // Group eigenvalues well outside round-off but far below the smallest gap
  // of the ring spectrum at any practical N.
  const double group_tol = 1e-7;
  std::vector<bool> dft_used(static_cast<std::size_t>(n), false);
  for (int begin = 0; begin < n;) {
    int end = begin + 1;
    while (end < n && basis.eigenvalues(end) - basis.eigenvalues(end - 1) <= group_tol) ++end;
    const double lambda = basis.eigenvalues.segment(begin, end - begin).mean();

    const Eigen::MatrixXd ur = basis.eigenvectors.middleCols(begin, end - begin);
    const Eigen::MatrixXd p_real = ur * ur.transpose();

    Eigen::MatrixXcd p_dft = Eigen::MatrixXcd::Zero(n, n);
    int count = 0;
    for (int k = 0; k < n; ++k) {
      if (std::abs(dft_lambda(k) - lambda) <= group_tol) {
        p_dft += z.entries.col(k) * z.entries.col(k).adjoint();
        dft_used[static_cast<std::size_t>(k)] = true;
        ++count;
      }
    }
    double mismatch = (p_real.cast<std::complex<double>>() - p_dft).norm();
    if (count != end - begin) mismatch = std::numeric_limits<double>::infinity();
    rep.max_projector_mismatch = std::max(rep.max_projector_mismatch, mismatch);
    begin = end;
  }
  if (std::find(dft_used.begin(), dft_used.end(), false) != dft_used.end())
    rep.max_projector_mismatch = std::numeric_limits<double>::infinity();

  rep.pass = rep.max_projector_mismatch <= tol && rep.max_eigen_residual <= tol;
  return rep;
}

}  // namespace graph_ceps
