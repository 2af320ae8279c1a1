#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "cpcca/error.hpp"

namespace cpcca {

/// Exhaustive search is used up to this many clusters.
inline constexpr Eigen::Index kMaxAlignedClusters = 8;

/// Relabels clusters: result(i, j) = m(perm[i], perm[j]), i.e. Pi^T M Pi.
inline Eigen::MatrixXd permute_clusters(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out(i, j) = m(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

struct Alignment {
  std::vector<Eigen::Index> permutation;
  double distance = std::numeric_limits<double>::infinity();
};

/// min over cluster permutations of norm(a - Pi^T b Pi).
inline Alignment best_alignment(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                const std::function<double(const Eigen::MatrixXd&)>& norm) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "matrices to align must be square and of equal size");
  }
  if (a.rows() > kMaxAlignedClusters) {
    throw Error(ErrorCode::InvalidArgument, "permutation alignment supports at most 8 clusters");
  }
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(a.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  Alignment best;
  do {
    const double d = norm(a - permute_clusters(b, perm));
    if (d < best.distance) {
      best.distance = d;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline double max_abs_norm(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// Entrywise max-norm distance after the best cluster relabeling.
inline double aligned_max_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return best_alignment(a, b, max_abs_norm).distance;
}

}  // namespace cpcca
