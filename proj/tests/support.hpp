#pragma once

#include <algorithm>
#include <complex>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpcca/cpcca.hpp"

namespace support {

using cpcca::Index;

/// Loop-based objective n_c - sum_j (chi_j^T W chi_j) / (w^T chi_j).
inline double objective_oracle(const Eigen::MatrixXd& chi, const Eigen::VectorXd& w) {
  double trace = 0.0;
  for (Index j = 0; j < chi.cols(); ++j) {
    double num = 0.0;
    double den = 0.0;
    for (Index i = 0; i < chi.rows(); ++i) {
      num += w[i] * chi(i, j) * chi(i, j);
      den += w[i] * chi(i, j);
    }
    trace += num / den;
  }
  return static_cast<double>(chi.cols()) - trace;
}

/// Coarse matrix through a QR solve of the normal equations.
inline Eigen::MatrixXd coarse_oracle(const Eigen::MatrixXd& p, const Eigen::MatrixXd& chi, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd wc = w.asDiagonal() * chi;
  const Eigen::MatrixXd lhs = chi.transpose() * wc;
  const Eigen::MatrixXd rhs = wc.transpose() * p * chi;
  return lhs.colPivHouseholderQr().solve(rhs);
}

/// Eigenvalues through the complex Schur route, independent of the real solver.
inline Eigen::VectorXcd eigenvalues_oracle(const Eigen::MatrixXd& p) {
  const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(p.cast<std::complex<double>>(), false);
  return ces.eigenvalues();
}

/// Greedy matching distance between two eigenvalue multisets.
inline double multiset_distance(Eigen::VectorXcd a, Eigen::VectorXcd b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::vector<bool> used(static_cast<std::size_t>(b.size()), false);
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Index arg = -1;
    for (Index j = 0; j < b.size(); ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double d = std::abs(a[i] - b[j]);
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    used[static_cast<std::size_t>(arg)] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

/// Distance to the nearest permutation matrix (entrywise max).
inline double distance_to_permutation(const Eigen::MatrixXd& m) {
  std::vector<Index> perm(static_cast<std::size_t>(m.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i) q(i, perm[static_cast<std::size_t>(i)]) = 1.0;
    best = std::min(best, (m - q).cwiseAbs().maxCoeff());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Distance to the nearest cyclic permutation matrix without fixed points.
inline double distance_to_cycle(const Eigen::MatrixXd& m) {
  const Index n = m.rows();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    Index k = 0;
    Index len = 0;
    do {
      k = perm[static_cast<std::size_t>(k)];
      ++len;
    } while (k != 0);
    if (len != n) continue;
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i) q(i, perm[static_cast<std::size_t>(i)]) = 1.0;
    best = std::min(best, (m - q).cwiseAbs().maxCoeff());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Three-cluster reference with the given diagonal and two off-diagonal values
/// placed cyclically: row i has `near` at i+1 and `far` at i+2.
inline Eigen::MatrixXd cyclic_reference(double diag, double near, double far) {
  Eigen::Matrix3d m;
  m << diag, near, far, far, diag, near, near, far, diag;
  return m;
}

/// Smallest aligned max-distance to the reference or its transpose pattern.
inline double pattern_distance(const Eigen::MatrixXd& pc, double diag, double a, double b) {
  return std::min({cpcca::aligned_max_distance(pc, cyclic_reference(diag, a, b)),
                   cpcca::aligned_max_distance(pc, cyclic_reference(diag, b, a))});
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& gen, Index rows, Index cols, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = u(gen);
  }
  return m;
}

/// Random nonsingular matrix with 2-norm condition number at most `cap`.
inline Eigen::MatrixXd random_well_conditioned(std::mt19937_64& gen, Index n, double cap) {
  while (true) {
    Eigen::MatrixXd b = random_matrix(gen, n, n);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
    const auto s = svd.singularValues();
    if (s[n - 1] > 0.0 && s[0] / s[n - 1] <= cap) return b;
  }
}

/// Exactly decoupled chain with `blocks` blocks of `size` states.
inline cpcca::StochasticMatrix decoupled(Index blocks, Index size, std::uint64_t seed = 7) {
  return cpcca::generate_nearly_uncoupled(blocks, size, 0.0, seed);
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cpcca_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace support
