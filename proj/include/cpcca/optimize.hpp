#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace cpcca {

/// Objective returning +infinity for infeasible points.
using ScalarObjective = std::function<double(const Eigen::VectorXd&)>;
/// Residual vector; std::nullopt marks an infeasible point.
using ResidualFunction = std::function<std::optional<Eigen::VectorXd>(const Eigen::VectorXd&)>;

struct MinimizerOptions {
  /// Evaluation budget; 0 selects 200 * (number of parameters).
  Eigen::Index max_evaluations = 0;
  Eigen::Index max_iterations = 200;
  /// Nelder-Mead stops once the simplex value spread drops below this.
  double value_spread = 1e-10;
  /// Least-squares methods stop once an accepted step lowers the value by less than this.
  double min_decrease = 1e-14;
  double initial_spread = 0.05;
  /// Nelder-Mead restarts from the best vertex while a run still improves the value.
  int restarts = 5;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  Eigen::Index iterations = 0;
  Eigen::Index evaluations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::Index evaluation_budget(const MinimizerOptions& opts, Eigen::Index n) {
  return opts.max_evaluations > 0 ? opts.max_evaluations : 200 * std::max<Eigen::Index>(n, 1);
}

inline double squared_norm(const std::optional<Eigen::VectorXd>& r) {
  return r ? r->squaredNorm() : std::numeric_limits<double>::infinity();
}

}  // namespace detail

namespace detail {

inline MinimizeResult nelder_mead_run(const ScalarObjective& f, const Eigen::VectorXd& x0,
                                  const MinimizerOptions& opts = {}) {
  const Eigen::Index n = x0.size();
  const Eigen::Index budget = detail::evaluation_budget(opts, n);
  MinimizeResult out;
  if (n == 0) {
    out.x = x0;
    out.value = f(x0);
    out.evaluations = 1;
    out.converged = true;
    return out;
  }

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> vals(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& p = pts[static_cast<std::size_t>(i + 1)];
    // Round-off sized parameters count as zero; a relative offset would vanish.
    const bool zero = std::abs(x0[i]) <= 1e-8 * std::max(1.0, x0.cwiseAbs().maxCoeff());
    p[i] += zero ? opts.initial_spread : opts.initial_spread * x0[i];
  }
  Eigen::Index evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(pts.size());
  Eigen::Index iter = 0;
  bool converged = false;
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    {
      std::vector<Eigen::VectorXd> p2;
      std::vector<double> v2;
      for (auto k : order) {
        p2.push_back(pts[k]);
        v2.push_back(vals[k]);
      }
      pts.swap(p2);
      vals.swap(v2);
    }
    const double spread = vals.back() - vals.front();
    if (std::isfinite(vals.back()) && spread < opts.value_spread) {
      converged = true;
      break;
    }
    if (evals >= budget || iter >= 50 * budget) break;
    ++iter;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) centroid += pts[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(n);
    const auto& worst = pts.back();

    const Eigen::VectorXd xr = centroid + (centroid - worst);
    const double fr = eval(xr);
    if (fr < vals.front()) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - worst);
      const double fe = eval(xe);
      if (fe < fr) {
        pts.back() = xe;
        vals.back() = fe;
      } else {
        pts.back() = xr;
        vals.back() = fr;
      }
      continue;
    }
    if (fr < vals[static_cast<std::size_t>(n - 1)]) {
      pts.back() = xr;
      vals.back() = fr;
      continue;
    }
    if (fr < vals.back()) {
      const Eigen::VectorXd xc = centroid + 0.5 * (xr - centroid);
      const double fc = eval(xc);
      if (fc <= fr) {
        pts.back() = xc;
        vals.back() = fc;
        continue;
      }
    } else {
      const Eigen::VectorXd xc = centroid + 0.5 * (worst - centroid);
      const double fc = eval(xc);
      if (fc < vals.back()) {
        pts.back() = xc;
        vals.back() = fc;
        continue;
      }
    }
    for (std::size_t i = 1; i < pts.size(); ++i) {
      pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
      vals[i] = eval(pts[i]);
    }
  }
  out.x = pts.front();
  out.value = vals.front();
  out.iterations = iter;
  out.evaluations = evals;
  out.converged = converged;
  return out;
}

}  // namespace detail

/// Nelder-Mead with reflection 1, expansion 2, contraction 1/2 and shrink 1/2.
/// The initial simplex offsets coordinate i by `initial_spread * x0[i]`
/// (or `initial_spread` when x0[i] is zero up to round-off). A collapsed simplex is rebuilt
/// around the best vertex up to `restarts` times; each run has its own budget.
inline MinimizeResult nelder_mead(const ScalarObjective& f, const Eigen::VectorXd& x0,
                                  const MinimizerOptions& opts = {}) {
  MinimizeResult best = detail::nelder_mead_run(f, x0, opts);
  for (int r = 0; r < opts.restarts && best.converged; ++r) {
    MinimizeResult next = detail::nelder_mead_run(f, best.x, opts);
    const bool improved = next.value < best.value - opts.value_spread;
    next.iterations += best.iterations;
    next.evaluations += best.evaluations;
    if (next.value <= best.value) {
      best = next;
    } else {
      best.iterations = next.iterations;
      best.evaluations = next.evaluations;
      best.converged = next.converged;
    }
    if (!improved) break;
  }
  return best;
}

namespace detail {

/// Forward-difference Jacobian with step 1e-7 * (1 + |x_j|); falls back to a
/// backward difference when the forward point is infeasible.
inline std::optional<Eigen::MatrixXd> fd_jacobian(const ResidualFunction& r, const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& r0, Eigen::Index& evals) {
  Eigen::MatrixXd jac(r0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-7 * (1.0 + std::abs(x[j]));
    Eigen::VectorXd xp = x;
    xp[j] += h;
    ++evals;
    auto rp = r(xp);
    if (rp) {
      jac.col(j) = (*rp - r0) / h;
      continue;
    }
    xp[j] = x[j] - h;
    ++evals;
    rp = r(xp);
    if (!rp) return std::nullopt;
    jac.col(j) = (r0 - *rp) / h;
  }
  return jac;
}

}  // namespace detail

/// Gauss-Newton on 0.5 * ||r(x)||^2 with minimum-norm steps and backtracking.
inline MinimizeResult gauss_newton(const ResidualFunction& r, const Eigen::VectorXd& x0,
                                   const MinimizerOptions& opts = {}) {
  MinimizeResult out;
  out.x = x0;
  Eigen::Index evals = 1;
  auto r0 = r(x0);
  out.value = detail::squared_norm(r0);
  if (!r0) {
    out.evaluations = evals;
    return out;
  }
  Eigen::VectorXd res = *r0;
  const Eigen::Index budget = detail::evaluation_budget(opts, x0.size());
  for (Eigen::Index it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it + 1;
    if (out.value == 0.0) {
      out.converged = true;
      break;
    }
    const auto jac = detail::fd_jacobian(r, out.x, res, evals);
    if (!jac) break;
    const Eigen::VectorXd step = -jac->completeOrthogonalDecomposition().solve(res);
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      const Eigen::VectorXd trial = out.x + alpha * step;
      ++evals;
      auto rt = r(trial);
      const double v = detail::squared_norm(rt);
      if (v < out.value) {
        const double decrease = out.value - v;
        out.x = trial;
        out.value = v;
        res = *rt;
        accepted = true;
        if (decrease < opts.min_decrease) out.converged = true;
        break;
      }
    }
    if (!accepted) {
      out.converged = true;
      break;
    }
    if (out.converged || evals >= budget * 10) break;
  }
  out.evaluations = evals;
  return out;
}

/// Levenberg-Marquardt with multiplicative damping updates.
inline MinimizeResult levenberg_marquardt(const ResidualFunction& r, const Eigen::VectorXd& x0,
                                          const MinimizerOptions& opts = {}) {
  MinimizeResult out;
  out.x = x0;
  Eigen::Index evals = 1;
  auto r0 = r(x0);
  out.value = detail::squared_norm(r0);
  if (!r0) {
    out.evaluations = evals;
    return out;
  }
  Eigen::VectorXd res = *r0;
  const Eigen::Index n = x0.size();
  const Eigen::Index budget = detail::evaluation_budget(opts, n);
  double mu = -1.0;
  for (Eigen::Index it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it + 1;
    if (out.value == 0.0) {
      out.converged = true;
      break;
    }
    const auto jac = detail::fd_jacobian(r, out.x, res, evals);
    if (!jac) break;
    const Eigen::MatrixXd jtj = jac->transpose() * (*jac);
    const Eigen::VectorXd grad = jac->transpose() * res;
    if (mu < 0.0) mu = 1e-3 * std::max(jtj.diagonal().maxCoeff(), 1e-12);
    bool accepted = false;
    while (mu < 1e20) {
      const Eigen::MatrixXd lhs = jtj + mu * Eigen::MatrixXd::Identity(n, n);
      const Eigen::VectorXd step = -lhs.ldlt().solve(grad);
      ++evals;
      auto rt = r(out.x + step);
      const double v = detail::squared_norm(rt);
      if (v < out.value) {
        const double decrease = out.value - v;
        out.x += step;
        out.value = v;
        res = *rt;
        mu = std::max(mu / 3.0, 1e-15);
        accepted = true;
        if (decrease < opts.min_decrease) out.converged = true;
        break;
      }
      mu *= 4.0;
    }
    if (!accepted) {
      out.converged = true;
      break;
    }
    if (out.converged || evals >= budget * 10) break;
  }
  out.evaluations = evals;
  return out;
}

}  // namespace cpcca
