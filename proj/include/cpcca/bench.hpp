#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "cpcca/error.hpp"
#include "cpcca/matrix_core.hpp"
#include "cpcca/matrix_io.hpp"
#include "cpcca/pcca.hpp"
#include "cpcca/permutation.hpp"
#include "cpcca/random.hpp"
#include "cpcca/serialize.hpp"
#include "cpcca/spectral.hpp"

namespace cpcca {

enum class NormKind { One, Two, Infinity };

inline std::string_view to_string(NormKind p) {
  switch (p) {
    case NormKind::One: return "1";
    case NormKind::Two: return "2";
    case NormKind::Infinity: return "inf";
  }
  return "?";
}

/// Induced 1-norm (max column sum), spectral norm, or induced inf-norm (max row sum).
inline double matrix_norm(const Eigen::MatrixXd& m, NormKind p) {
  if (m.size() == 0) return 0.0;
  switch (p) {
    case NormKind::One: return m.cwiseAbs().colwise().sum().maxCoeff();
    case NormKind::Two: return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()[0];
    case NormKind::Infinity: return m.cwiseAbs().rowwise().sum().maxCoeff();
  }
  return 0.0;
}

/// min over cluster permutations Pi of ||a - Pi^T b Pi||_p.
inline double compare_coarse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, NormKind p) {
  return best_alignment(a, b, [p](const Eigen::MatrixXd& d) { return matrix_norm(d, p); }).distance;
}

struct QuadraticFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double residual = 0.0;
};

/// Least-squares fit of y ~ a x^2 + b x + c.
inline QuadraticFit fit_quadratic(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::DimensionMismatch, "x and y counts differ");
  if (xs.size() < 3) throw Error(ErrorCode::InsufficientPoints, "a quadratic fit needs at least 3 points");
  if (std::set<double>(xs.begin(), xs.end()).size() < 3) {
    throw Error(ErrorCode::DegenerateDesign, "a quadratic fit needs at least 3 distinct x values");
  }
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = xs[static_cast<std::size_t>(i)];
    design.row(i) << x * x, x, 1.0;
    y[i] = ys[static_cast<std::size_t>(i)];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 3) throw Error(ErrorCode::DegenerateDesign, "design matrix is rank deficient");
  const Eigen::Vector3d coef = qr.solve(y);
  return QuadraticFit{coef[0], coef[1], coef[2], (design * coef - y).norm()};
}

enum class GeneratorKind { Circular, NearlyUncoupled };

inline std::string_view to_string(GeneratorKind g) { return g == GeneratorKind::Circular ? "circular" : "uncoupled"; }

struct BenchPlan {
  std::vector<Index> sizes{30, 60, 90, 120};
  Index trials = 5;
  GeneratorKind generator = GeneratorKind::Circular;
  /// Number of blocks; each size must be a multiple of it.
  Index blocks = 3;
  /// Circular perturbation magnitude.
  double perturbation = 0.0;
  /// Off-block mass for the nearly uncoupled generator.
  double coupling = 0.01;
  ClusterOptions cluster{3, SelectionMode::LargestMagnitude, WeightChoice::Uniform, {}, {}};
  std::uint64_t seed_base = 42;
  /// Worker threads for trials; 1 runs serially.
  unsigned jobs = 1;
  /// Run one untimed warm-up pipeline per size.
  bool warmup = true;
};

inline void validate_plan(const BenchPlan& plan) {
  if (plan.trials < 1) throw Error(ErrorCode::InvalidSpec, "trials per size must be at least 1");
  if (plan.sizes.empty()) throw Error(ErrorCode::InvalidSpec, "no sizes given");
  for (std::size_t i = 0; i < plan.sizes.size(); ++i) {
    if (i > 0 && plan.sizes[i] <= plan.sizes[i - 1]) throw Error(ErrorCode::InvalidSpec, "sizes must be strictly increasing");
    if (plan.blocks < 1 || plan.sizes[i] % plan.blocks != 0 || plan.sizes[i] / plan.blocks < 1) {
      throw Error(ErrorCode::InvalidSpec, "size " + std::to_string(plan.sizes[i]) + " is not a multiple of the block count");
    }
  }
  if (plan.jobs < 1) throw Error(ErrorCode::InvalidSpec, "jobs must be at least 1");
  if (plan.cluster.n_clusters < 1 || plan.cluster.n_clusters > kMaxAlignedClusters) {
    throw Error(ErrorCode::InvalidSpec, "bench cluster count must be between 1 and 8");
  }
}

/// Per-trial seed: base XOR a SplitMix64 hash of (size, trial).
inline std::uint64_t trial_seed(std::uint64_t base, Index size, Index trial) {
  return base ^ mix64((static_cast<std::uint64_t>(size) << 32) ^ static_cast<std::uint64_t>(trial));
}

inline StochasticMatrix generate_trial_matrix(const BenchPlan& plan, Index size, Index trial) {
  const std::uint64_t seed = trial_seed(plan.seed_base, size, trial);
  if (plan.generator == GeneratorKind::Circular) {
    return generate_circular(CircularSpec{plan.blocks, size / plan.blocks, plan.perturbation, seed});
  }
  return generate_nearly_uncoupled(plan.blocks, size / plan.blocks, plan.coupling, seed);
}

struct StageTimes {
  double spectral = 0.0;
  double optimize = 0.0;
  double coarse_grain = 0.0;
  double total = 0.0;
};

struct TrialRecord {
  Index size = 0;
  Index trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error_code;
  std::string error_message;
  StageTimes times;
  Eigen::MatrixXd coarse;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double crispness = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();
};

struct PairDifference {
  Index trial_a = 0;
  Index trial_b = 0;
  double p1 = 0.0;
  double p2 = 0.0;
  double pinf = 0.0;
};

struct MeanStd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
};

/// Mean and unbiased (n-1) standard deviation; std is NaN for a single sample.
inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  double s = 0.0;
  for (double x : v) s += x;
  out.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double q = 0.0;
    for (double x : v) q += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(q / static_cast<double>(v.size() - 1));
  }
  return out;
}

struct SizeSummary {
  Index size = 0;
  Index successes = 0;
  MeanStd spectral;
  MeanStd optimize;
  MeanStd coarse_grain;
  MeanStd total;
  std::vector<PairDifference> differences;
};

struct BenchReport {
  BenchPlan plan;
  std::vector<TrialRecord> trials;
  std::vector<SizeSummary> sizes;

  Index successes() const {
    return static_cast<Index>(std::count_if(trials.begin(), trials.end(), [](const auto& t) { return t.ok; }));
  }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline TrialRecord run_trial(const BenchPlan& plan, Index size, Index trial) {
  TrialRecord rec;
  rec.size = size;
  rec.trial = trial;
  rec.seed = trial_seed(plan.seed_base, size, trial);
  try {
    const StochasticMatrix p = generate_trial_matrix(plan, size, trial);
    const auto& o = plan.cluster;
    auto t0 = std::chrono::steady_clock::now();
    const SpectralBasis basis = spectral_basis(p, EigenSelection{o.mode, o.n_clusters}, o.weight, o.spectral);
    rec.times.spectral = seconds_since(t0);
    auto t1 = std::chrono::steady_clock::now();
    ClusteringResult r = optimize(basis, o.optimize);
    rec.times.optimize = seconds_since(t1);
    auto t2 = std::chrono::steady_clock::now();
    r.coarse = coarse_grain(p, r.membership);
    rec.times.coarse_grain = seconds_since(t2);
    rec.times.total = rec.times.spectral + rec.times.optimize + rec.times.coarse_grain;
    rec.coarse = std::move(r.coarse);
    rec.objective = r.objective;
    rec.crispness = r.crispness;
    rec.residual = basis.residual;
    rec.ok = true;
  } catch (const Error& e) {
    rec.error_code = std::string(code_name(e.code()));
    rec.error_message = e.what();
  }
  return rec;
}

}  // namespace detail

/// Generates and clusters `trials` matrices per size. Pipeline errors mark the
/// trial failed without aborting the plan. Everything except the timings is
/// a deterministic function of the plan.
inline BenchReport run_bench(const BenchPlan& plan) {
  validate_plan(plan);
  BenchReport report;
  report.plan = plan;
  const auto n_sizes = plan.sizes.size();
  const auto n_trials = static_cast<std::size_t>(plan.trials);
  report.trials.resize(n_sizes * n_trials);

  for (std::size_t s = 0; s < n_sizes; ++s) {
    const Index size = plan.sizes[s];
    if (plan.warmup) (void)detail::run_trial(plan, size, 0);
    auto work = [&](std::size_t t) { report.trials[s * n_trials + t] = detail::run_trial(plan, size, static_cast<Index>(t)); };
    if (plan.jobs <= 1) {
      for (std::size_t t = 0; t < n_trials; ++t) work(t);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      const auto workers = std::min<std::size_t>(plan.jobs, n_trials);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t t = next++; t < n_trials; t = next++) work(t);
        });
      }
      for (auto& th : pool) th.join();
    }
  }

  for (std::size_t s = 0; s < n_sizes; ++s) {
    SizeSummary sum;
    sum.size = plan.sizes[s];
    std::vector<double> sp;
    std::vector<double> op;
    std::vector<double> cg;
    std::vector<double> tot;
    std::vector<const TrialRecord*> ok;
    for (std::size_t t = 0; t < n_trials; ++t) {
      const auto& rec = report.trials[s * n_trials + t];
      if (!rec.ok) continue;
      ok.push_back(&rec);
      sp.push_back(rec.times.spectral);
      op.push_back(rec.times.optimize);
      cg.push_back(rec.times.coarse_grain);
      tot.push_back(rec.times.total);
    }
    sum.successes = static_cast<Index>(ok.size());
    sum.spectral = mean_std(sp);
    sum.optimize = mean_std(op);
    sum.coarse_grain = mean_std(cg);
    sum.total = mean_std(tot);
    for (std::size_t a = 0; a < ok.size(); ++a) {
      for (std::size_t b = a + 1; b < ok.size(); ++b) {
        if (ok[a]->coarse.rows() != ok[b]->coarse.rows()) continue;
        sum.differences.push_back(PairDifference{ok[a]->trial, ok[b]->trial,
                                                 compare_coarse(ok[a]->coarse, ok[b]->coarse, NormKind::One),
                                                 compare_coarse(ok[a]->coarse, ok[b]->coarse, NormKind::Two),
                                                 compare_coarse(ok[a]->coarse, ok[b]->coarse, NormKind::Infinity)});
      }
    }
    report.sizes.push_back(std::move(sum));
  }
  return report;
}

/// Same-instance comparison of two configurations (e.g. method or weight).
/// Both plans must generate identical matrices.
struct ConfigurationDifference {
  Index size = 0;
  Index trial = 0;
  bool ok = false;
  double p1 = std::numeric_limits<double>::quiet_NaN();
  double p2 = std::numeric_limits<double>::quiet_NaN();
  double pinf = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<ConfigurationDifference> compare_configurations(const BenchReport& a, const BenchReport& b) {
  if (a.plan.sizes != b.plan.sizes || a.plan.trials != b.plan.trials || a.plan.seed_base != b.plan.seed_base ||
      a.plan.generator != b.plan.generator || a.plan.blocks != b.plan.blocks ||
      a.plan.perturbation != b.plan.perturbation || a.plan.coupling != b.plan.coupling) {
    throw Error(ErrorCode::InvalidArgument, "configurations must share the generated instances");
  }
  std::vector<ConfigurationDifference> out;
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    const auto& ta = a.trials[i];
    const auto& tb = b.trials[i];
    ConfigurationDifference d{ta.size, ta.trial};
    if (ta.ok && tb.ok && ta.coarse.rows() == tb.coarse.rows()) {
      d.ok = true;
      d.p1 = compare_coarse(ta.coarse, tb.coarse, NormKind::One);
      d.p2 = compare_coarse(ta.coarse, tb.coarse, NormKind::Two);
      d.pinf = compare_coarse(ta.coarse, tb.coarse, NormKind::Infinity);
    }
    out.push_back(d);
  }
  return out;
}

inline void write_csv(std::ostream& out, const BenchReport& report) {
  out << "size,trial,seed,status,error_code,spectral_s,optimize_s,coarse_grain_s,total_s,objective,crispness,residual\n";
  const auto num = [](double v) { return std::isfinite(v) ? detail::shortest(v) : std::string(); };
  for (const auto& t : report.trials) {
    out << t.size << ',' << t.trial << ',' << t.seed << ',' << (t.ok ? "ok" : "failed") << ',' << t.error_code << ',';
    if (t.ok) {
      out << num(t.times.spectral) << ',' << num(t.times.optimize) << ',' << num(t.times.coarse_grain) << ','
          << num(t.times.total);
    } else {
      out << ",,,";
    }
    out << ',' << num(t.objective) << ',' << num(t.crispness) << ',' << num(t.residual) << '\n';
  }
}

inline Json mean_std_json(const MeanStd& m) { return Json{{"mean", number(m.mean)}, {"std", number(m.std)}}; }

/// JSON summary. Deterministic content first; all wall-clock values live
/// under the top-level "timing" key.
inline Json to_json(const BenchReport& report) {
  const auto& p = report.plan;
  Json j;
  j["plan"] = {{"sizes", p.sizes},
               {"trials", p.trials},
               {"generator", std::string(to_string(p.generator))},
               {"blocks", p.blocks},
               {"perturbation", p.perturbation},
               {"coupling", p.coupling},
               {"n_clusters", p.cluster.n_clusters},
               {"mode", std::string(to_string(p.cluster.mode))},
               {"weight", std::string(to_string(p.cluster.weight))},
               {"method", std::string(to_string(p.cluster.optimize.method))},
               {"seed_base", p.seed_base}};
  j["successful_trials"] = report.successes();
  Json trials = Json::array();
  for (const auto& t : report.trials) {
    Json e{{"size", t.size}, {"trial", t.trial}, {"seed", t.seed}, {"status", t.ok ? "ok" : "failed"}};
    if (t.ok) {
      e["objective"] = number(t.objective);
      e["crispness"] = number(t.crispness);
      e["subspace_residual"] = number(t.residual);
      e["coarse_matrix"] = matrix_json(t.coarse);
    } else {
      e["error"] = {{"code", t.error_code}, {"message", t.error_message}};
    }
    trials.push_back(std::move(e));
  }
  j["trials"] = std::move(trials);
  Json sizes = Json::array();
  Json timing_sizes = Json::array();
  for (const auto& s : report.sizes) {
    Json diffs = Json::array();
    double m1 = 0.0;
    double m2 = 0.0;
    double mi = 0.0;
    for (const auto& d : s.differences) {
      diffs.push_back({{"trial_a", d.trial_a}, {"trial_b", d.trial_b}, {"p1", d.p1}, {"p2", d.p2}, {"pinf", d.pinf}});
      m1 = std::max(m1, d.p1);
      m2 = std::max(m2, d.p2);
      mi = std::max(mi, d.pinf);
    }
    sizes.push_back({{"size", s.size},
                     {"successes", s.successes},
                     {"max_difference", {{"p1", m1}, {"p2", m2}, {"pinf", mi}}},
                     {"pairwise_differences", diffs}});
    timing_sizes.push_back({{"size", s.size},
                            {"spectral_s", mean_std_json(s.spectral)},
                            {"optimize_s", mean_std_json(s.optimize)},
                            {"coarse_grain_s", mean_std_json(s.coarse_grain)},
                            {"total_s", mean_std_json(s.total)}});
  }
  j["sizes"] = std::move(sizes);
  Json timing;
  timing["per_size"] = std::move(timing_sizes);
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& s : report.sizes) {
    if (std::isfinite(s.total.mean)) {
      xs.push_back(static_cast<double>(s.size));
      ys.push_back(s.total.mean);
    }
  }
  try {
    const QuadraticFit fit = fit_quadratic(xs, ys);
    timing["total_vs_size_quadratic_fit"] = {{"a", fit.a}, {"b", fit.b}, {"c", fit.c}, {"residual", fit.residual}};
  } catch (const Error&) {
    timing["total_vs_size_quadratic_fit"] = nullptr;
  }
  j["timing"] = std::move(timing);
  return j;
}

}  // namespace cpcca
