#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpcca/error.hpp"
#include "cpcca/matrix_core.hpp"
#include "cpcca/optimize.hpp"
#include "cpcca/spectral.hpp"

namespace cpcca {

/// Fuzzy cluster assignment: nonnegative rows summing to one.
struct Membership {
  Eigen::MatrixXd values;
  DensityVector weight = DensityVector::uniform(1);

  Index n_states() const noexcept { return values.rows(); }
  Index n_clusters() const noexcept { return values.cols(); }
};

/// chi = X * A.
struct TransformMatrix {
  Eigen::MatrixXd values;
};

enum class OptimizerMethod { NelderMead, GaussNewton, LevenbergMarquardt };

struct OptimizeOptions {
  OptimizerMethod method = OptimizerMethod::GaussNewton;
  MinimizerOptions minimizer;
  /// Throw NoConvergence instead of returning a result flagged unconverged.
  bool require_convergence = false;
};

struct OptimizerTrace {
  Index iterations = 0;
  Index evaluations = 0;
  bool converged = true;
};

struct ClusteringResult {
  Membership membership;
  TransformMatrix transform;
  /// Coarse-grained propagator; filled by cluster(), empty after optimize().
  Eigen::MatrixXd coarse;
  double objective = 0.0;
  double crispness = 1.0;
  double initial_objective = 0.0;
  OptimizerTrace trace;
  /// Simplex vertices of the initial guess (0-based state indices).
  std::vector<Index> vertex_indices;
  SpectralBasis basis;
  OptimizerMethod method = OptimizerMethod::GaussNewton;
};

struct SimplexGuess {
  TransformMatrix transform;
  std::vector<Index> vertices;
};

/// Inner simplex algorithm: the first vertex is the row of X with maximal
/// norm; each further vertex maximizes the distance to the affine span of the
/// previous ones. A0 is the inverse of the vertex rows.
inline SimplexGuess inner_simplex_guess(const SpectralBasis& basis) {
  const Eigen::MatrixXd& x = basis.vectors;
  const Index n = x.rows();
  const Index nc = x.cols();
  if (nc < 1 || n < nc) throw Error(ErrorCode::DimensionMismatch, "basis has fewer states than clusters");

  SimplexGuess out;
  Index first = 0;
  double best = -1.0;
  for (Index i = 0; i < n; ++i) {
    const double v = x.row(i).squaredNorm();
    if (v > best) {
      best = v;
      first = i;
    }
  }
  out.vertices.push_back(first);
  Eigen::MatrixXd ortho = x.rowwise() - x.row(first);
  for (Index k = 1; k < nc; ++k) {
    Index next = 0;
    best = -1.0;
    for (Index i = 0; i < n; ++i) {
      const double v = ortho.row(i).squaredNorm();
      if (v > best) {
        best = v;
        next = i;
      }
    }
    if (!(best > 0.0)) throw Error(ErrorCode::DegenerateSimplex, "rows of the basis span fewer than n_c vertices");
    out.vertices.push_back(next);
    const Eigen::RowVectorXd dir = ortho.row(next) / std::sqrt(best);
    ortho -= (ortho * dir.transpose()) * dir;
  }

  Eigen::MatrixXd vertex_rows(nc, nc);
  for (Index k = 0; k < nc; ++k) vertex_rows.row(k) = x.row(out.vertices[static_cast<std::size_t>(k)]);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(vertex_rows);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    throw Error(ErrorCode::DegenerateSimplex, "simplex vertex matrix is singular");
  }
  out.transform.values = lu.inverse();
  return out;
}

namespace detail {

/// Fill construction; nullopt when the positivity row has nonpositive sum.
inline std::optional<Eigen::MatrixXd> try_feasibilize(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x) {
  const Index nc = a.rows();
  if (nc == 1) {
    Eigen::MatrixXd one(1, 1);
    one(0, 0) = 1.0 / x(0, 0);
    return one;
  }
  Eigen::MatrixXd out = a;
  const auto inner = a.bottomRightCorner(nc - 1, nc - 1);
  out.bottomLeftCorner(nc - 1, 1) = -inner.rowwise().sum();
  const Eigen::MatrixXd partial = x.rightCols(nc - 1) * out.bottomRows(nc - 1);
  for (Index j = 0; j < nc; ++j) out(0, j) = -partial.col(j).minCoeff();
  const double total = out.row(0).sum();
  if (!(total > 0.0) || !std::isfinite(total)) return std::nullopt;
  out /= total;
  return out;
}

/// Per-cluster ratios [chi^T W chi]_jj / [chi^T w]_j; nullopt when a cluster has no weight.
inline std::optional<Eigen::VectorXd> cluster_ratios(const Eigen::MatrixXd& chi, const Eigen::VectorXd& w) {
  Eigen::VectorXd ratios(chi.cols());
  for (Index j = 0; j < chi.cols(); ++j) {
    const double den = w.dot(chi.col(j));
    if (!(den > 0.0)) return std::nullopt;
    ratios[j] = w.dot(chi.col(j).cwiseAbs2()) / den;
  }
  return ratios;
}

}  // namespace detail

/// Completes A from its lower-right (n_c-1) x (n_c-1) block so that chi = X A
/// is a partition of unity (rows 2..n_c of A sum to 0, row 1 to 1) and every
/// column of chi has minimum exactly zero.
inline TransformMatrix feasibilize(const Eigen::MatrixXd& a, const SpectralBasis& basis) {
  const Index nc = basis.n_clusters();
  if (a.rows() != nc || a.cols() != nc) throw Error(ErrorCode::DimensionMismatch, "transform size differs from basis");
  auto out = detail::try_feasibilize(a, basis.vectors);
  if (!out) throw Error(ErrorCode::InfeasibleScaling, "positivity row of the transform has nonpositive sum");
  return TransformMatrix{std::move(*out)};
}

/// n_c - trace(D_c^{-2} chi^T D^2 chi), D^2 = diag(w), D_c^2 = diag(chi^T w).
inline double objective(const Eigen::MatrixXd& chi, const DensityVector& w) {
  if (chi.rows() != w.dim()) throw Error(ErrorCode::DimensionMismatch, "membership and weight sizes differ");
  const auto ratios = detail::cluster_ratios(chi, w.values());
  if (!ratios) throw Error(ErrorCode::SingularDc, "a cluster has zero total weight");
  return static_cast<double>(chi.cols()) - ratios->sum();
}

inline double objective(const TransformMatrix& a, const SpectralBasis& basis) {
  if (a.values.rows() != basis.n_clusters() || a.values.cols() != basis.n_clusters()) {
    throw Error(ErrorCode::DimensionMismatch, "transform size differs from basis");
  }
  return objective(basis.vectors * a.values, basis.weight);
}

inline double crispness_from_objective(double objective_value, Index n_clusters) {
  return (static_cast<double>(n_clusters) - objective_value) / static_cast<double>(n_clusters);
}

/// Minimum entry of the unfeasibilized initial guess X * A0.
inline double min_chi(const SpectralBasis& basis) {
  const SimplexGuess guess = inner_simplex_guess(basis);
  return (basis.vectors * guess.transform.values).minCoeff();
}

inline constexpr double kClampTolerance = 1e-12;

namespace detail {

inline Membership finalize_membership(const Eigen::MatrixXd& chi_raw, const DensityVector& w) {
  const double lowest = chi_raw.minCoeff();
  if (lowest < -kClampTolerance) {
    throw Error(ErrorCode::NumericalError,
                "membership has a negative excursion of " + format_double(lowest) + " before clamping");
  }
  Eigen::MatrixXd chi = chi_raw.cwiseMax(0.0).cwiseMin(1.0);
  for (Index i = 0; i < chi.rows(); ++i) chi.row(i) /= chi.row(i).sum();
  return Membership{std::move(chi), w};
}

}  // namespace detail

/// Locally minimizes the objective over the inner block of A, starting from
/// the feasibilized inner simplex guess. Every candidate is feasibilized
/// before evaluation.
inline ClusteringResult optimize(const SpectralBasis& basis, const OptimizeOptions& opts = {}) {
  const Index nc = basis.n_clusters();
  const Index n = basis.n_states();
  const Eigen::VectorXd& w = basis.weight.values();
  ClusteringResult out;
  out.basis = basis;
  out.method = opts.method;

  const SimplexGuess guess = inner_simplex_guess(basis);
  out.vertex_indices = guess.vertices;
  if (nc == 1) {
    out.transform = feasibilize(guess.transform.values, basis);
    out.membership = Membership{Eigen::MatrixXd::Ones(n, 1), basis.weight};
    out.objective = 0.0;
    out.initial_objective = 0.0;
    out.crispness = 1.0;
    return out;
  }

  const Eigen::MatrixXd start = feasibilize(guess.transform.values, basis).values;
  const Index m = nc - 1;
  const auto pack = [&](const Eigen::MatrixXd& a) {
    Eigen::VectorXd p(m * m);
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < m; ++j) p[i * m + j] = a(i + 1, j + 1);
    }
    return p;
  };
  const auto unpack = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd a = start;
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < m; ++j) a(i + 1, j + 1) = p[i * m + j];
    }
    return a;
  };
  const auto residuals = [&](const Eigen::VectorXd& p) -> std::optional<Eigen::VectorXd> {
    const auto a = detail::try_feasibilize(unpack(p), basis.vectors);
    if (!a) return std::nullopt;
    const auto ratios = detail::cluster_ratios(basis.vectors * (*a), w);
    if (!ratios) return std::nullopt;
    return (1.0 - ratios->array()).max(0.0).sqrt().matrix().eval();
  };
  const auto scalar = [&](const Eigen::VectorXd& p) {
    const auto r = residuals(p);
    return r ? r->squaredNorm() : std::numeric_limits<double>::infinity();
  };

  const Eigen::VectorXd p0 = pack(start);
  out.initial_objective = objective(basis.vectors * start, basis.weight);
  MinimizeResult res;
  switch (opts.method) {
    case OptimizerMethod::NelderMead: res = nelder_mead(scalar, p0, opts.minimizer); break;
    case OptimizerMethod::GaussNewton: res = gauss_newton(residuals, p0, opts.minimizer); break;
    case OptimizerMethod::LevenbergMarquardt: res = levenberg_marquardt(residuals, p0, opts.minimizer); break;
  }
  out.trace = OptimizerTrace{res.iterations, res.evaluations, res.converged};
  if (!res.converged && opts.require_convergence) {
    throw Error(ErrorCode::NoConvergence, "optimizer hit its iteration cap");
  }

  Eigen::MatrixXd best = start;
  if (res.x.size() == p0.size() && std::isfinite(res.value)) {
    if (auto a = detail::try_feasibilize(unpack(res.x), basis.vectors)) best = std::move(*a);
  }
  double best_objective = objective(basis.vectors * best, basis.weight);
  if (best_objective > out.initial_objective) {
    best = start;
    best_objective = out.initial_objective;
  }
  out.transform = TransformMatrix{best};
  out.membership = detail::finalize_membership(basis.vectors * best, basis.weight);
  out.objective = best_objective;
  out.crispness = crispness_from_objective(best_objective, nc);
  return out;
}

/// P_c = (chi^T W chi)^{-1} chi^T W P chi with W = diag(w).
inline Eigen::MatrixXd coarse_grain(const StochasticMatrix& p, const Membership& membership) {
  const Eigen::MatrixXd& chi = membership.values;
  if (chi.rows() != p.dim() || membership.weight.dim() != p.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "membership does not match the matrix dimension");
  }
  const Eigen::VectorXd& w = membership.weight.values();
  const Eigen::MatrixXd wchi = w.asDiagonal() * chi;
  const Eigen::MatrixXd mass = chi.transpose() * wchi;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(mass);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    throw Error(ErrorCode::SingularProjection, "chi^T W chi is singular");
  }
  return lu.solve(wchi.transpose() * p.multiply(chi));
}

struct ClusterOptions {
  Index n_clusters = 3;
  SelectionMode mode = SelectionMode::LargestRealPart;
  WeightChoice weight = WeightChoice::Uniform;
  OptimizeOptions optimize;
  SpectralOptions spectral;
};

/// dominant_eigenpairs -> realify -> orthonormalize -> optimize -> coarse_grain.
inline ClusteringResult cluster(const StochasticMatrix& p, const ClusterOptions& opts) {
  const SpectralBasis basis =
      spectral_basis(p, EigenSelection{opts.mode, opts.n_clusters}, opts.weight, opts.spectral);
  ClusteringResult out = optimize(basis, opts.optimize);
  out.coarse = coarse_grain(p, out.membership);
  return out;
}

struct ScanCandidate {
  Index n_clusters = 0;
  double min_chi = std::numeric_limits<double>::quiet_NaN();
  double crispness = std::numeric_limits<double>::quiet_NaN();
  bool skipped = false;
  bool selected = false;
  /// Error code name when skipped.
  std::string skip_reason;
};

struct ClusterScan {
  std::vector<ScanCandidate> candidates;
  Index selected = 0;
};

struct ScanOptions {
  Index first = 2;
  Index last = 5;
  SelectionMode mode = SelectionMode::LargestRealPart;
  WeightChoice weight = WeightChoice::Uniform;
  /// Candidates with minChi below this are flagged as doubtful in reports.
  double min_chi_threshold = -0.1;
  MinimizerOptions minimizer;
  SpectralOptions spectral;
};

/// For each candidate n_c: minChi of the initial guess, then crispness after a
/// Nelder-Mead run. Candidates that split a conjugate pair (or otherwise fail
/// to yield a basis) are skipped. Picks the largest crispness, smaller n_c on ties.
inline ClusterScan select_n_clusters(const StochasticMatrix& p, const ScanOptions& opts) {
  if (opts.first > opts.last || opts.first < 2 || opts.last > p.dim() - 1) {
    throw Error(ErrorCode::EmptyRange, "candidate range must be nonempty and within [2, N-1]");
  }
  const DensityVector weight = make_weight(p, opts.weight);
  ClusterScan scan;
  double best = -std::numeric_limits<double>::infinity();
  for (Index nc = opts.first; nc <= opts.last; ++nc) {
    ScanCandidate c;
    c.n_clusters = nc;
    try {
      const SpectralBasis basis = spectral_basis(p, EigenSelection{opts.mode, nc}, weight, opts.spectral);
      c.min_chi = min_chi(basis);
      OptimizeOptions o;
      o.method = OptimizerMethod::NelderMead;
      o.minimizer = opts.minimizer;
      c.crispness = optimize(basis, o).crispness;
      if (c.crispness > best + 1e-12) {
        best = c.crispness;
        scan.selected = nc;
      }
    } catch (const Error& e) {
      c.skipped = true;
      c.skip_reason = std::string(code_name(e.code()));
    }
    scan.candidates.push_back(std::move(c));
  }
  if (scan.selected == 0) throw Error(ErrorCode::AllCandidatesSkipped, "no candidate cluster count was usable");
  for (auto& c : scan.candidates) c.selected = c.n_clusters == scan.selected;
  return scan;
}

}  // namespace cpcca
