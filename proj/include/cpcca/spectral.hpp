#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "cpcca/error.hpp"
#include "cpcca/matrix_core.hpp"

namespace cpcca {

using Complex = std::complex<double>;

enum class SelectionMode { LargestMagnitude, LargestRealPart };

struct EigenSelection {
  SelectionMode mode = SelectionMode::LargestRealPart;
  Index count = 1;
};

enum class WeightChoice { Uniform, Stationary };

struct SpectralOptions {
  /// Upper bound on the 2-norm condition number of the eigenvector matrix.
  double condition_cap = 1e12;
  /// Above this dimension only the selected eigenvectors enter the condition check.
  Index full_condition_limit = 1024;
  /// Relative tolerance for matching conjugate eigenvalues.
  double pair_tolerance = 1e-8;
  /// Sort keys closer than this are treated as ties.
  double tie_tolerance = 1e-10;
  /// Eigenvalues within this distance of 1 form the Perron group.
  double perron_tolerance = 1e-8;
};

/// The n_c dominant eigenvalues. `pair_start[k]` marks that slots k and k+1
/// hold a conjugate pair (positive imaginary part first).
struct DominantSpectrum {
  Eigen::VectorXcd eigenvalues;
  std::vector<bool> pair_start;
  EigenSelection selection;

  Index size() const noexcept { return eigenvalues.size(); }
  bool starts_pair(Index k) const { return pair_start[static_cast<std::size_t>(k)]; }
  bool ends_pair(Index k) const { return k > 0 && pair_start[static_cast<std::size_t>(k - 1)]; }
};

/// Full eigendecomposition with phase-normalized, unit-norm eigenvectors.
struct EigenDecomposition {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;
};

struct EigenPairs {
  DominantSpectrum spectrum;
  Eigen::MatrixXcd vectors;
  /// Position of each selected eigenvalue in the full decomposition.
  std::vector<Index> source_indices;
  double condition = 0.0;
};

/// Realification certificate: input * C == output with C built from one 2x2
/// block [[1/2, -i/2], [1/2, i/2]] per conjugate pair and identity elsewhere.
struct RealifyCertificate {
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<Eigen::Matrix2cd> blocks;

  Eigen::MatrixXcd matrix(Index n) const {
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Identity(n, n);
    for (std::size_t p = 0; p < pairs.size(); ++p) c.block<2, 2>(pairs[p].first, pairs[p].first) = blocks[p];
    return c;
  }
};

struct RealifiedBasis {
  Eigen::MatrixXd vectors;
  /// Real block form of the eigenvalues: P * vectors = vectors * block_spectrum.
  Eigen::MatrixXd block_spectrum;
  RealifyCertificate certificate;
};

struct SpectralBasis {
  /// N x n_c, first column identically 1, X^T diag(w) X = I.
  Eigen::MatrixXd vectors;
  Eigen::MatrixXd block_spectrum;
  DensityVector weight = DensityVector::uniform(1);
  DominantSpectrum spectrum;
  /// ||P X - X L||_F / ||X||_F, NaN until computed against a matrix.
  double residual = std::numeric_limits<double>::quiet_NaN();

  Index n_states() const noexcept { return vectors.rows(); }
  Index n_clusters() const noexcept { return vectors.cols(); }
};

inline Eigen::Matrix2cd realify_block() {
  using namespace std::complex_literals;
  Eigen::Matrix2cd c;
  c << 0.5, -0.5i, 0.5, 0.5i;
  return c;
}

namespace detail {

/// Rotates v so that its largest-magnitude entry is real and positive.
inline void align_phase(Eigen::Ref<Eigen::VectorXcd> v) {
  Index best = 0;
  double best_abs = -1.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  if (best_abs > 0.0) v *= std::conj(v[best]) / best_abs;
}

inline double selection_key(Complex z, SelectionMode mode) {
  return mode == SelectionMode::LargestMagnitude ? std::abs(z) : z.real();
}

inline bool is_real(Complex z, double tol) { return std::abs(z.imag()) <= tol * std::max(1.0, std::abs(z)); }

/// Groups eigenvalues into real singletons and conjugate pairs (positive
/// imaginary member first). Returns false if a complex value has no partner.
inline bool pair_units(const Eigen::VectorXcd& values, double tol, std::vector<std::vector<Index>>& units) {
  const Index n = values.size();
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  units.clear();
  for (Index i = 0; i < n; ++i) {
    if (used[static_cast<std::size_t>(i)]) continue;
    const Complex z = values[i];
    if (is_real(z, tol)) {
      used[static_cast<std::size_t>(i)] = true;
      units.push_back({i});
      continue;
    }
    Index partner = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (j == i || used[static_cast<std::size_t>(j)]) continue;
      const double d = std::abs(values[j] - std::conj(z));
      if (d <= tol * std::max(1.0, std::abs(z)) && d < best) {
        best = d;
        partner = j;
      }
    }
    if (partner < 0) return false;
    used[static_cast<std::size_t>(i)] = true;
    used[static_cast<std::size_t>(partner)] = true;
    if (z.imag() > 0.0) {
      units.push_back({i, partner});
    } else {
      units.push_back({partner, i});
    }
  }
  return true;
}

inline double condition_number(const Eigen::MatrixXcd& v) {
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(v);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s[s.size() - 1];
  return smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline EigenDecomposition eigendecompose(const StochasticMatrix& p) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(p.dense(), true);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::DefectiveOrIllConditioned, "eigenvalue iteration did not converge");
  }
  EigenDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
  for (Index k = 0; k < out.vectors.cols(); ++k) {
    out.vectors.col(k).normalize();
    detail::align_phase(out.vectors.col(k));
  }
  return out;
}

/// Ranking of all eigenvalues for a selection mode. Ordering: key descending,
/// then real part descending, then imaginary part descending, then index.
/// Keys within `tie_tolerance` tie. Conjugate pairs are ranked as one unit and
/// stay adjacent with the positive imaginary part first. `pair_start` is
/// filled per ranked slot.
inline std::vector<Index> rank_eigenvalues(const Eigen::VectorXcd& values, SelectionMode mode,
                                           const SpectralOptions& opts, std::vector<bool>* pair_start = nullptr) {
  std::vector<std::vector<Index>> units;
  if (!detail::pair_units(values, opts.pair_tolerance, units)) {
    throw Error(ErrorCode::UnpairedComplexColumn, "complex eigenvalue without conjugate partner");
  }
  const double tie = opts.tie_tolerance;
  std::stable_sort(units.begin(), units.end(), [&](const auto& a, const auto& b) {
    const Complex za = values[a.front()];
    const Complex zb = values[b.front()];
    const double ka = detail::selection_key(za, mode);
    const double kb = detail::selection_key(zb, mode);
    if (std::abs(ka - kb) > tie) return ka > kb;
    if (std::abs(za.real() - zb.real()) > tie) return za.real() > zb.real();
    if (std::abs(za.imag() - zb.imag()) > tie) return za.imag() > zb.imag();
    return a.front() < b.front();
  });
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(values.size()));
  if (pair_start) pair_start->clear();
  for (const auto& u : units) {
    for (std::size_t m = 0; m < u.size(); ++m) {
      order.push_back(u[m]);
      if (pair_start) pair_start->push_back(u.size() == 2 && m == 0);
    }
  }
  return order;
}

/// Selects the n_c dominant eigenpairs. The eigenvector of the Perron group
/// (eigenvalues at 1) with the largest share of the constant vector is
/// replaced by the exactly constant vector.
inline EigenPairs dominant_eigenpairs(const StochasticMatrix& p, const EigenSelection& selection,
                                      const SpectralOptions& opts = {}) {
  const Index n = p.dim();
  const Index nc = selection.count;
  if (nc < 1 || nc >= n) {
    throw Error(ErrorCode::InvalidArgument,
                "cluster count " + std::to_string(nc) + " must lie in [1, " + std::to_string(n - 1) + "]");
  }
  EigenDecomposition full = eigendecompose(p);

  std::vector<bool> ranked_pairs;
  const std::vector<Index> order = rank_eigenvalues(full.values, selection.mode, opts, &ranked_pairs);
  if (ranked_pairs[static_cast<std::size_t>(nc - 1)]) {
    std::vector<long long> suggestions;
    if (nc - 1 >= 1) suggestions.push_back(nc - 1);
    if (nc + 1 < n) suggestions.push_back(nc + 1);
    std::string hint;
    for (auto s : suggestions) hint += (hint.empty() ? "" : " or ") + std::to_string(s);
    throw Error(ErrorCode::SplitConjugatePair,
                "n_c = " + std::to_string(nc) + " splits a conjugate pair; use n_c = " + hint, suggestions);
  }

  EigenPairs out;
  out.spectrum.selection = selection;
  out.spectrum.eigenvalues.resize(nc);
  out.spectrum.pair_start.assign(ranked_pairs.begin(), ranked_pairs.begin() + nc);
  out.vectors.resize(n, nc);
  out.source_indices.assign(order.begin(), order.begin() + nc);
  for (Index k = 0; k < nc; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.spectrum.eigenvalues[k] = full.values[src];
    out.vectors.col(k) = full.vectors.col(src);
  }
  // Exact conjugacy inside pairs; real eigenvalues carry real vectors.
  for (Index k = 0; k < nc; ++k) {
    if (out.spectrum.starts_pair(k)) {
      out.spectrum.eigenvalues[k + 1] = std::conj(out.spectrum.eigenvalues[k]);
      out.vectors.col(k + 1) = out.vectors.col(k).conjugate();
      ++k;
    } else {
      out.spectrum.eigenvalues[k] = Complex(out.spectrum.eigenvalues[k].real(), 0.0);
    }
  }

  std::vector<Index> perron_all;
  for (Index i = 0; i < full.values.size(); ++i) {
    if (std::abs(full.values[i] - Complex(1.0, 0.0)) <= opts.perron_tolerance) perron_all.push_back(i);
  }
  std::vector<Index> perron_selected;
  for (Index k = 0; k < nc; ++k) {
    if (std::abs(out.spectrum.eigenvalues[k] - Complex(1.0, 0.0)) <= opts.perron_tolerance) {
      perron_selected.push_back(k);
    }
  }
  if (!perron_selected.empty()) {
    Eigen::MatrixXd group(n, static_cast<Index>(perron_all.size()));
    for (std::size_t m = 0; m < perron_all.size(); ++m) {
      group.col(static_cast<Index>(m)) = full.vectors.col(perron_all[m]).real();
    }
    const Eigen::VectorXd coeffs = group.colPivHouseholderQr().solve(Eigen::VectorXd::Ones(n));
    Index replace = perron_selected.front();
    double best = -1.0;
    for (Index k : perron_selected) {
      const auto it = std::find(perron_all.begin(), perron_all.end(), out.source_indices[static_cast<std::size_t>(k)]);
      const double c = std::abs(coeffs[static_cast<Index>(it - perron_all.begin())]);
      if (c > best) {
        best = c;
        replace = k;
      }
    }
    out.vectors.col(replace) = Eigen::VectorXcd::Constant(n, Complex(1.0 / std::sqrt(static_cast<double>(n)), 0.0));
    out.spectrum.eigenvalues[replace] = Complex(1.0, 0.0);
  }

  if (n <= opts.full_condition_limit) {
    out.condition = detail::condition_number(full.vectors);
  } else {
    out.condition = detail::condition_number(out.vectors);
  }
  if (!(out.condition <= opts.condition_cap)) {
    throw Error(ErrorCode::DefectiveOrIllConditioned,
                "eigenvector matrix condition number " + detail::format_double(out.condition) +
                    " exceeds cap; a Schur-based method is required for this matrix");
  }
  return out;
}

/// Replaces every conjugate column pair (x, conj(x)) by (Re x, Im x).
inline RealifiedBasis realify(const Eigen::MatrixXcd& vectors, const DominantSpectrum& spectrum,
                              double imaginary_tolerance = 1e-10) {
  const Index n = vectors.rows();
  const Index nc = vectors.cols();
  if (spectrum.size() != nc || static_cast<Index>(spectrum.pair_start.size()) != nc) {
    throw Error(ErrorCode::DimensionMismatch, "spectrum and eigenvector counts differ");
  }
  RealifiedBasis out;
  out.vectors.resize(n, nc);
  out.block_spectrum = Eigen::MatrixXd::Zero(nc, nc);
  for (Index k = 0; k < nc; ++k) {
    if (spectrum.starts_pair(k)) {
      if (k + 1 >= nc) throw Error(ErrorCode::UnpairedComplexColumn, "pair at column " + std::to_string(k) + " is cut off", {k});
      const Eigen::VectorXcd x = vectors.col(k);
      const double scale = std::max(x.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
      if ((vectors.col(k + 1) - x.conjugate()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw Error(ErrorCode::UnpairedComplexColumn,
                    "columns " + std::to_string(k) + " and " + std::to_string(k + 1) + " are not conjugate", {k});
      }
      const Complex lambda = spectrum.eigenvalues[k];
      out.vectors.col(k) = x.real();
      out.vectors.col(k + 1) = x.imag();
      out.block_spectrum(k, k) = lambda.real();
      out.block_spectrum(k, k + 1) = lambda.imag();
      out.block_spectrum(k + 1, k) = -lambda.imag();
      out.block_spectrum(k + 1, k + 1) = lambda.real();
      out.certificate.pairs.emplace_back(k, k + 1);
      out.certificate.blocks.push_back(realify_block());
      ++k;
      continue;
    }
    if (spectrum.ends_pair(k)) continue;
    if (!detail::is_real(spectrum.eigenvalues[k], 1e-8)) {
      throw Error(ErrorCode::UnpairedComplexColumn, "complex eigenvalue at column " + std::to_string(k) + " has no partner", {k});
    }
    Eigen::VectorXcd x = vectors.col(k);
    detail::align_phase(x);
    const double scale = std::max(x.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    if (x.imag().cwiseAbs().maxCoeff() > imaginary_tolerance * scale) {
      throw Error(ErrorCode::NonNegligibleImaginaryPart,
                  "real eigenvalue at column " + std::to_string(k) + " has a complex eigenvector", {k});
    }
    out.vectors.col(k) = x.real();
    out.block_spectrum(k, k) = spectrum.eigenvalues[k].real();
  }
  return out;
}

/// Weighted orthonormalization with <u, v> = u^T diag(w) v. The output's first
/// column is exactly the constant vector 1 (unit weighted norm since w sums to
/// 1); the block spectrum is transported so that P X = X L keeps holding.
inline SpectralBasis orthonormalize(const Eigen::MatrixXd& x, const Eigen::MatrixXd& block_spectrum,
                                    const DensityVector& w, DominantSpectrum spectrum = {}) {
  const Index n = x.rows();
  const Index nc = x.cols();
  if (w.dim() != n || block_spectrum.rows() != nc || block_spectrum.cols() != nc || nc < 1) {
    throw Error(ErrorCode::DimensionMismatch, "basis, block spectrum and weight dimensions disagree");
  }
  const Eigen::VectorXd& wv = w.values();
  const Eigen::VectorXd sqrt_w = wv.cwiseSqrt();
  const auto dot = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(wv.cwiseProduct(b)); };
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);

  const Eigen::MatrixXd scaled = sqrt_w.asDiagonal() * x;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  const Eigen::VectorXd coeffs = qr.solve(sqrt_w);
  const double miss = (scaled * coeffs - sqrt_w).norm();
  if (!(miss <= 1e-8)) {
    throw Error(ErrorCode::ConstantVectorNotInSpan,
                "constant vector is not in the column span (distance " + detail::format_double(miss) + ")");
  }

  // The column carrying the largest share of the constant vector is exchanged for it.
  Index drop = 0;
  double best = -1.0;
  for (Index j = 0; j < nc; ++j) {
    const double share = std::abs(coeffs[j]) * std::sqrt(dot(x.col(j), x.col(j)));
    if (share > best + 1e-12 * std::max(1.0, best)) {
      best = share;
      drop = j;
    }
  }

  Eigen::MatrixXd q(n, nc);
  q.col(0) = ones;
  Index filled = 1;
  for (Index j = 0; j < nc; ++j) {
    if (j == drop) continue;
    Eigen::VectorXd r = x.col(j);
    const double norm0 = std::sqrt(dot(r, r));
    for (int pass = 0; pass < 2; ++pass) {
      for (Index m = 0; m < filled; ++m) r -= dot(q.col(m), r) * q.col(m);
    }
    const double norm = std::sqrt(dot(r, r));
    if (!(norm0 > 0.0) || !(norm > 1e-10 * norm0)) {
      throw Error(ErrorCode::RankDeficient, "column " + std::to_string(j) + " is linearly dependent", {j});
    }
    q.col(filled++) = r / norm;
  }

  // x = q * r_mat on the common span, hence L' = r_mat * L * r_mat^{-1}.
  const Eigen::MatrixXd r_mat = q.transpose() * wv.asDiagonal() * x;
  const double recon = (x - q * r_mat).norm() / std::max(x.norm(), std::numeric_limits<double>::min());
  if (!(recon <= 1e-8)) {
    throw Error(ErrorCode::NumericalError, "orthonormalization lost the span (" + detail::format_double(recon) + ")");
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(r_mat);
  if (!lu.isInvertible()) throw Error(ErrorCode::RankDeficient, "basis change is singular");
  const Eigen::MatrixXd transported = r_mat * block_spectrum * lu.inverse();

  SpectralBasis out;
  out.vectors = std::move(q);
  out.block_spectrum = transported;
  out.weight = w;
  out.spectrum = std::move(spectrum);
  return out;
}

/// ||P X - X L||_F / ||X||_F.
inline double subspace_residual(const StochasticMatrix& p, const Eigen::MatrixXd& vectors,
                                const Eigen::MatrixXd& block_spectrum) {
  if (vectors.rows() != p.dim() || block_spectrum.rows() != vectors.cols() ||
      block_spectrum.cols() != vectors.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "basis does not match the matrix dimension");
  }
  return (p.multiply(vectors) - vectors * block_spectrum).norm() / vectors.norm();
}

inline double subspace_residual(const StochasticMatrix& p, const SpectralBasis& basis) {
  return subspace_residual(p, basis.vectors, basis.block_spectrum);
}

/// Normalized left Perron eigenvector.
inline DensityVector stationary_density(const StochasticMatrix& p) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(p.dense().transpose(), true);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::DefectiveOrIllConditioned, "eigen iteration failed");
  const Eigen::VectorXcd values = solver.eigenvalues();
  Index best = 0;
  for (Index i = 1; i < values.size(); ++i) {
    if (std::abs(values[i] - 1.0) < std::abs(values[best] - 1.0)) best = i;
  }
  Eigen::VectorXcd v = solver.eigenvectors().col(best);
  detail::align_phase(v);
  Eigen::VectorXd pi = v.real();
  pi /= pi.sum();
  for (Index i = 0; i < pi.size(); ++i) {
    if (!(pi[i] > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "stationary density is not strictly positive; use uniform weights");
    }
  }
  return DensityVector::from(std::move(pi), 1e-10);
}

inline DensityVector make_weight(const StochasticMatrix& p, WeightChoice choice) {
  return choice == WeightChoice::Uniform ? DensityVector::uniform(p.dim()) : stationary_density(p);
}

/// dominant_eigenpairs -> realify -> orthonormalize, with the residual filled in.
inline SpectralBasis spectral_basis(const StochasticMatrix& p, const EigenSelection& selection,
                                    const DensityVector& weight, const SpectralOptions& opts = {}) {
  if (weight.dim() != p.dim()) throw Error(ErrorCode::DimensionMismatch, "weight dimension differs from matrix");
  EigenPairs pairs = dominant_eigenpairs(p, selection, opts);
  RealifiedBasis real = realify(pairs.vectors, pairs.spectrum);
  SpectralBasis basis = orthonormalize(real.vectors, real.block_spectrum, weight, std::move(pairs.spectrum));
  basis.residual = subspace_residual(p, basis);
  return basis;
}

inline SpectralBasis spectral_basis(const StochasticMatrix& p, const EigenSelection& selection,
                                    WeightChoice weight = WeightChoice::Uniform, const SpectralOptions& opts = {}) {
  return spectral_basis(p, selection, make_weight(p, weight), opts);
}

struct CircularCheck {
  double max_eigenvalue_error = 0.0;
  double max_block_deviation = 0.0;
  bool passed = false;
};

/// Checks that every blocks-th root of unity is an eigenvalue and that its
/// eigenvector (scaled to unit max-entry) is constant on each block.
inline CircularCheck check_circular_spectrum(const StochasticMatrix& p, Index blocks, double tolerance = 1e-8) {
  const Index n = p.dim();
  if (blocks < 2 || n % blocks != 0) {
    throw Error(ErrorCode::InvalidArgument, "block count must divide the matrix dimension");
  }
  const Index size = n / blocks;
  const EigenDecomposition full = eigendecompose(p);
  CircularCheck out;
  for (Index k = 0; k < blocks; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(blocks);
    const Complex root = std::polar(1.0, angle);
    Index best = 0;
    for (Index i = 1; i < full.values.size(); ++i) {
      if (std::abs(full.values[i] - root) < std::abs(full.values[best] - root)) best = i;
    }
    out.max_eigenvalue_error = std::max(out.max_eigenvalue_error, std::abs(full.values[best] - root));
    Eigen::VectorXcd v = full.vectors.col(best);
    v /= v.cwiseAbs().maxCoeff();
    for (Index b = 0; b < blocks; ++b) {
      const Eigen::VectorXcd seg = v.segment(b * size, size);
      const Complex mean = seg.mean();
      const double dev = std::sqrt((seg.array() - mean).abs2().sum() / static_cast<double>(size));
      out.max_block_deviation = std::max(out.max_block_deviation, dev);
    }
  }
  out.passed = out.max_eigenvalue_error <= tolerance && out.max_block_deviation <= tolerance;
  return out;
}

}  // namespace cpcca
