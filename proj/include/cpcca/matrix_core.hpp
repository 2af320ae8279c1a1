#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cpcca/error.hpp"
#include "cpcca/random.hpp"

namespace cpcca {

using Index = Eigen::Index;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline constexpr double kRowSumTolerance = 1e-12;
/// Matrices above this dimension are stored in coordinate-sparse form.
inline constexpr Index kDenseStorageLimit = 2048;

enum class StorageKind { Dense, Sparse };

/// Validated row-stochastic transition matrix. Immutable once built; obtain
/// instances through validate(), row_normalize() or the generators.
class StochasticMatrix {
 public:
  Index dim() const noexcept {
    return std::visit([](const auto& m) { return static_cast<Index>(m.rows()); }, storage_);
  }

  StorageKind storage_kind() const noexcept {
    return std::holds_alternative<Eigen::MatrixXd>(storage_) ? StorageKind::Dense : StorageKind::Sparse;
  }

  /// Dense copy of the entries.
  Eigen::MatrixXd dense() const {
    if (const auto* d = std::get_if<Eigen::MatrixXd>(&storage_)) return *d;
    return Eigen::MatrixXd(std::get<SparseRowMatrix>(storage_));
  }

  const Eigen::MatrixXd* dense_ptr() const noexcept { return std::get_if<Eigen::MatrixXd>(&storage_); }
  const SparseRowMatrix* sparse_ptr() const noexcept { return std::get_if<SparseRowMatrix>(&storage_); }

  double coeff(Index i, Index j) const {
    if (const auto* d = dense_ptr()) return (*d)(i, j);
    return sparse_ptr()->coeff(i, j);
  }

  /// P * X.
  Eigen::MatrixXd multiply(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    if (const auto* d = dense_ptr()) return (*d) * x;
    return (*sparse_ptr()) * x;
  }

  /// P^T * x.
  Eigen::VectorXd multiply_transposed(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (const auto* d = dense_ptr()) return d->transpose() * x;
    return sparse_ptr()->transpose() * x;
  }

  double max_row_sum_deviation() const {
    Eigen::VectorXd sums = std::visit(
        [](const auto& m) -> Eigen::VectorXd { return m * Eigen::VectorXd::Ones(m.cols()); }, storage_);
    return (sums.array() - 1.0).abs().maxCoeff();
  }

  friend StochasticMatrix validate(Eigen::MatrixXd candidate, double tolerance);
  friend StochasticMatrix validate(SparseRowMatrix candidate, double tolerance);

 private:
  explicit StochasticMatrix(Eigen::MatrixXd m) : storage_(std::move(m)) {}
  explicit StochasticMatrix(SparseRowMatrix m) : storage_(std::move(m)) {}

  std::variant<Eigen::MatrixXd, SparseRowMatrix> storage_;
};

/// Probability density with strictly positive entries, used as the
/// orthonormalization weight.
class DensityVector {
 public:
  static DensityVector uniform(Index n) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "density dimension must be positive");
    return DensityVector(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  }

  static DensityVector from(Eigen::VectorXd values, double tolerance = kRowSumTolerance) {
    if (values.size() < 1) throw Error(ErrorCode::InvalidArgument, "density dimension must be positive");
    for (Index i = 0; i < values.size(); ++i) {
      if (!(values[i] > 0.0)) {
        throw Error(ErrorCode::InvalidArgument,
                    "density entry " + std::to_string(i) + " is not strictly positive", {i});
      }
    }
    if (std::abs(values.sum() - 1.0) > tolerance) {
      throw Error(ErrorCode::InvalidArgument, "density entries do not sum to 1");
    }
    return DensityVector(std::move(values));
  }

  Index dim() const noexcept { return values_.size(); }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  double operator[](Index i) const { return values_[i]; }

 private:
  explicit DensityVector(Eigen::VectorXd v) : values_(std::move(v)) {}
  Eigen::VectorXd values_;
};

struct CircularSpec {
  Index blocks = 3;
  Index block_size = 10;
  double perturbation = 0.0;
  std::uint64_t seed = 42;

  Index dim() const noexcept { return blocks * block_size; }
};

namespace detail {

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename Matrix>
Eigen::VectorXd row_sums(const Matrix& m) {
  return m * Eigen::VectorXd::Ones(m.cols());
}

}  // namespace detail

/// Checks squareness, nonnegativity and row sums; the entries are never modified.
inline StochasticMatrix validate(Eigen::MatrixXd candidate, double tolerance = kRowSumTolerance) {
  if (candidate.rows() != candidate.cols()) {
    throw Error(ErrorCode::NonSquare, std::to_string(candidate.rows()) + "x" +
                                          std::to_string(candidate.cols()) + " matrix is not square");
  }
  if (candidate.rows() < 2) throw Error(ErrorCode::InvalidArgument, "dimension must be at least 2");
  for (Index i = 0; i < candidate.rows(); ++i) {
    for (Index j = 0; j < candidate.cols(); ++j) {
      if (!(candidate(i, j) >= 0.0)) {
        throw Error(ErrorCode::NegativeEntry,
                    "entry (" + std::to_string(i) + "," + std::to_string(j) + ") is negative or NaN", {i, j});
      }
    }
  }
  const Eigen::VectorXd sums = detail::row_sums(candidate);
  for (Index i = 0; i < sums.size(); ++i) {
    if (!(std::abs(sums[i] - 1.0) <= tolerance)) {
      throw Error(ErrorCode::RowSumViolation,
                  "row " + std::to_string(i) + " sums to " + detail::format_double(sums[i]), {i});
    }
  }
  return StochasticMatrix(std::move(candidate));
}

inline StochasticMatrix validate(SparseRowMatrix candidate, double tolerance = kRowSumTolerance) {
  if (candidate.rows() != candidate.cols()) {
    throw Error(ErrorCode::NonSquare, std::to_string(candidate.rows()) + "x" +
                                          std::to_string(candidate.cols()) + " matrix is not square");
  }
  if (candidate.rows() < 2) throw Error(ErrorCode::InvalidArgument, "dimension must be at least 2");
  candidate.makeCompressed();
  for (Index i = 0; i < candidate.outerSize(); ++i) {
    for (SparseRowMatrix::InnerIterator it(candidate, i); it; ++it) {
      if (!(it.value() >= 0.0)) {
        throw Error(ErrorCode::NegativeEntry,
                    "entry (" + std::to_string(it.row()) + "," + std::to_string(it.col()) + ") is negative or NaN",
                    {it.row(), it.col()});
      }
    }
  }
  const Eigen::VectorXd sums = detail::row_sums(candidate);
  for (Index i = 0; i < sums.size(); ++i) {
    if (!(std::abs(sums[i] - 1.0) <= tolerance)) {
      throw Error(ErrorCode::RowSumViolation,
                  "row " + std::to_string(i) + " sums to " + detail::format_double(sums[i]), {i});
    }
  }
  return StochasticMatrix(std::move(candidate));
}

namespace detail {

inline StochasticMatrix store(Eigen::MatrixXd m, double tolerance) {
  if (m.rows() > kDenseStorageLimit) return validate(SparseRowMatrix(m.sparseView()), tolerance);
  return validate(std::move(m), tolerance);
}

}  // namespace detail

/// Divides every row by its sum.
inline StochasticMatrix row_normalize(Eigen::MatrixXd m, double tolerance = kRowSumTolerance) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::NonSquare, "matrix is not square");
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (!(m(i, j) >= 0.0)) {
        throw Error(ErrorCode::NegativeEntry,
                    "entry (" + std::to_string(i) + "," + std::to_string(j) + ") is negative or NaN", {i, j});
      }
    }
    const double s = m.row(i).sum();
    if (!(s > 0.0)) throw Error(ErrorCode::ZeroRow, "row " + std::to_string(i) + " has zero sum", {i});
    m.row(i) /= s;
  }
  return validate(std::move(m), tolerance);
}

inline StochasticMatrix row_normalize(SparseRowMatrix m, double tolerance = kRowSumTolerance) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::NonSquare, "matrix is not square");
  m.makeCompressed();
  for (Index i = 0; i < m.outerSize(); ++i) {
    double s = 0.0;
    for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) {
      if (!(it.value() >= 0.0)) {
        throw Error(ErrorCode::NegativeEntry,
                    "entry (" + std::to_string(it.row()) + "," + std::to_string(it.col()) + ") is negative or NaN",
                    {it.row(), it.col()});
      }
      s += it.value();
    }
    if (!(s > 0.0)) throw Error(ErrorCode::ZeroRow, "row " + std::to_string(i) + " has zero sum", {i});
    for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) it.valueRef() /= s;
  }
  return validate(std::move(m), tolerance);
}

/// Block-circular chain: block k feeds block k+1 (mod blocks) through a random
/// positive n x n block. With perturbation eps > 0 every entry of the raw
/// matrix additionally receives eps * U(0,1) before row normalization.
///
/// Draw order (part of the reproducibility contract): the blocks in order
/// k = 0..blocks-1, each row-major; then the perturbation, row-major over the
/// whole matrix.
inline StochasticMatrix generate_circular(const CircularSpec& spec) {
  if (spec.blocks < 2 || spec.block_size < 1) {
    throw Error(ErrorCode::InvalidSpec, "circular spec needs blocks >= 2 and block size >= 1");
  }
  if (!(spec.perturbation >= 0.0 && spec.perturbation < 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "perturbation magnitude must lie in [0, 1)");
  }
  const Index n = spec.block_size;
  const Index dim = spec.dim();
  Rng rng(spec.seed);
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(dim, dim);
  for (Index k = 0; k < spec.blocks; ++k) {
    const Index row0 = k * n;
    const Index col0 = ((k + 1) % spec.blocks) * n;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) raw(row0 + i, col0 + j) = rng.uniform();
    }
  }
  if (spec.perturbation > 0.0) {
    for (Index i = 0; i < dim; ++i) {
      for (Index j = 0; j < dim; ++j) raw(i, j) += spec.perturbation * rng.uniform();
    }
  }
  for (Index i = 0; i < dim; ++i) raw.row(i) /= raw.row(i).sum();
  return detail::store(std::move(raw), kRowSumTolerance);
}

/// Nearly decomposable chain: random stochastic diagonal blocks scaled by
/// (1 - coupling) plus random off-block mass summing to exactly `coupling`
/// in every row.
inline StochasticMatrix generate_nearly_uncoupled(Index blocks, Index block_size, double coupling,
                                                  std::uint64_t seed) {
  if (blocks < 1 || block_size < 1 || blocks * block_size < 2) {
    throw Error(ErrorCode::InvalidSpec, "nearly uncoupled spec needs a positive block layout of dimension >= 2");
  }
  if (!(coupling >= 0.0 && coupling < 1.0)) throw Error(ErrorCode::InvalidSpec, "coupling must lie in [0, 1)");
  if (blocks == 1 && coupling > 0.0) throw Error(ErrorCode::InvalidSpec, "coupling needs at least two blocks");
  const Index dim = blocks * block_size;
  Rng rng(seed);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    const Index b = i / block_size;
    const Index lo = b * block_size;
    const Index hi = lo + block_size;
    double in_sum = 0.0;
    double out_sum = 0.0;
    for (Index j = 0; j < dim; ++j) {
      const double u = rng.uniform();
      if (j >= lo && j < hi) {
        m(i, j) = u;
        in_sum += u;
      } else if (coupling > 0.0) {
        m(i, j) = u;
        out_sum += u;
      }
    }
    for (Index j = 0; j < dim; ++j) {
      if (j >= lo && j < hi) {
        m(i, j) *= (1.0 - coupling) / in_sum;
      } else if (coupling > 0.0) {
        m(i, j) *= coupling / out_sum;
      }
    }
  }
  return detail::store(std::move(m), kRowSumTolerance);
}

/// Six-state nearly uncoupled, non-reversible chain with three metastable
/// pairs and a complex pair of dominant eigenvalues.
inline StochasticMatrix fixture_example1() {
  Eigen::MatrixXd p(6, 6);
  p << 0.25, 0.70, 0.00, 0.00, 0.00, 0.05,  //
      0.70, 0.29, 0.01, 0.00, 0.00, 0.00,   //
      0.00, 0.05, 0.25, 0.70, 0.00, 0.00,   //
      0.00, 0.00, 0.70, 0.29, 0.01, 0.00,   //
      0.00, 0.00, 0.00, 0.05, 0.25, 0.70,   //
      0.01, 0.00, 0.00, 0.00, 0.70, 0.29;
  return validate(std::move(p));
}

/// Nine-state chain [[X, Y, 0], [0, X, Y], [Y, 0, X]] with
/// X = [[0, x, 0], [0, 0, 1], [1, 0, 0]] and Y = y * e1 e1^T. Requires x + y = 1.
inline StochasticMatrix fixture_example2(double x, double y) {
  if (!(x >= 0.0 && y >= 0.0) || std::abs(x + y - 1.0) > kRowSumTolerance) {
    throw Error(ErrorCode::UnknownFixture, "example2 needs nonnegative x, y with x + y = 1");
  }
  Eigen::Matrix3d xb;
  xb << 0.0, x, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0;
  Eigen::Matrix3d yb = Eigen::Matrix3d::Zero();
  yb(0, 0) = y;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(9, 9);
  for (Index k = 0; k < 3; ++k) {
    p.block<3, 3>(3 * k, 3 * k) = xb;
    p.block<3, 3>(3 * k, 3 * ((k + 1) % 3)) = yb;
  }
  return validate(std::move(p));
}

/// Names accepted by fixture().
inline std::vector<std::string> fixture_names() { return {"example1", "example2:0.9:0.1", "example2:0.1:0.9"}; }

/// Resolves "example1" or "example2:<x>:<y>".
inline StochasticMatrix fixture(std::string_view name) {
  if (name == "example1") return fixture_example1();
  constexpr std::string_view prefix = "example2:";
  if (name.substr(0, prefix.size()) == prefix) {
    const std::string rest(name.substr(prefix.size()));
    const auto colon = rest.find(':');
    if (colon != std::string::npos) {
      try {
        std::size_t used_x = 0;
        std::size_t used_y = 0;
        const std::string xs = rest.substr(0, colon);
        const std::string ys = rest.substr(colon + 1);
        const double x = std::stod(xs, &used_x);
        const double y = std::stod(ys, &used_y);
        if (used_x == xs.size() && used_y == ys.size()) return fixture_example2(x, y);
      } catch (const std::logic_error&) {
      }
    }
  }
  throw Error(ErrorCode::UnknownFixture, "unknown fixture '" + std::string(name) + "'");
}

}  // namespace cpcca
