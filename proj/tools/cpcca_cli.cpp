#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpcca/cpcca.hpp"

namespace fs = std::filesystem;
using namespace cpcca;

namespace {

struct InputFlags {
  std::string in;
  std::string fixture;
  std::string generate;
  std::string format;
  bool raw = false;
  double tol = kRowSumTolerance;
};

struct Loaded {
  StochasticMatrix matrix;
  std::optional<Index> circular_blocks;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("CPCCA_SEED")) {
    std::uint64_t v = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw Error(ErrorCode::InvalidArgument, "CPCCA_SEED must be an unsigned integer");
    }
    return v;
  }
  return 42;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const char* what) {
  double v = 0.0;
  if (!detail::parse_double(s, v)) throw Error(ErrorCode::InvalidArgument, std::string("invalid ") + what + ": '" + s + "'");
  return v;
}

long long to_int(const std::string& s, const char* what) {
  long long v = 0;
  if (!detail::parse_index(detail::trim(s), v)) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid ") + what + ": '" + s + "'");
  }
  return v;
}

/// circular:B:S:eps[:seed] or uncoupled:B:S:c[:seed]
Loaded generate_from_spec(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.size() < 4 || parts.size() > 5) {
    throw Error(ErrorCode::InvalidSpec, "generator spec must be circular:B:S:eps[:seed] or uncoupled:B:S:c[:seed]");
  }
  const Index blocks = to_int(parts[1], "block count");
  const Index size = to_int(parts[2], "block size");
  const double x = to_double(parts[3], "generator parameter");
  const std::uint64_t seed =
      parts.size() == 5 ? static_cast<std::uint64_t>(to_int(parts[4], "seed")) : default_seed();
  if (parts[0] == "circular") return {generate_circular(CircularSpec{blocks, size, x, seed}), blocks};
  if (parts[0] == "uncoupled") return {generate_nearly_uncoupled(blocks, size, x, seed), std::nullopt};
  throw Error(ErrorCode::InvalidSpec, "unknown generator '" + parts[0] + "'");
}

Loaded load_input(const InputFlags& f) {
  const int given = !f.in.empty() + !f.fixture.empty() + !f.generate.empty();
  if (given != 1) throw Error(ErrorCode::InvalidArgument, "exactly one of --in, --fixture, --generate is required");
  if (!f.fixture.empty()) return {fixture(f.fixture), std::nullopt};
  if (!f.generate.empty()) return generate_from_spec(f.generate);
  MatrixFormat fmt = format_from_path(f.in);
  if (f.format == "csv") fmt = MatrixFormat::Csv;
  else if (f.format == "mtx") fmt = MatrixFormat::MatrixMarket;
  return {load_matrix(f.in, fmt, LoadOptions{f.raw, f.tol}), std::nullopt};
}

void add_input_flags(CLI::App* cmd, InputFlags& f) {
  cmd->add_option("--in", f.in, "Input matrix file (.mtx or .csv)");
  cmd->add_option("--fixture", f.fixture, "Built-in fixture (see 'fixtures --list')");
  cmd->add_option("--generate", f.generate, "circular:B:S:eps[:seed] or uncoupled:B:S:c[:seed]");
  cmd->add_option("--format", f.format, "Override input format")->check(CLI::IsMember({"mtx", "csv"}));
  cmd->add_flag("--raw", f.raw, "Row-normalize the input before validation");
  cmd->add_option("--tol", f.tol, "Row-sum tolerance")->check(CLI::PositiveNumber);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void emit_json(const Json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct ClusterFlags {
  InputFlags input;
  Index n_clusters = 0;
  std::string scan;
  std::string mode = "real";
  std::string weight = "uniform";
  std::string method = "gauss-newton";
  std::string out_dir;
  double min_chi_threshold = -0.1;
  double condition_cap = 1e12;
};

int cmd_cluster(const ClusterFlags& f) {
  const Loaded in = load_input(f.input);
  const StochasticMatrix& p = in.matrix;
  ClusterOptions opts;
  opts.mode = parse_selection_mode(f.mode);
  opts.weight = parse_weight_choice(f.weight);
  opts.optimize.method = parse_optimizer_method(f.method);
  opts.spectral.condition_cap = f.condition_cap;

  Json scan_json;
  double scan_seconds = 0.0;
  if (!f.scan.empty()) {
    const auto parts = split(f.scan, ':');
    if (parts.size() != 2) throw Error(ErrorCode::InvalidArgument, "--scan expects a:b");
    ScanOptions so;
    so.first = to_int(parts[0], "scan start");
    so.last = to_int(parts[1], "scan end");
    so.mode = opts.mode;
    so.weight = opts.weight;
    so.min_chi_threshold = f.min_chi_threshold;
    so.spectral = opts.spectral;
    const auto t0 = std::chrono::steady_clock::now();
    const ClusterScan scan = select_n_clusters(p, so);
    scan_seconds = seconds_since(t0);
    scan_json = to_json(scan, so.min_chi_threshold);
    opts.n_clusters = scan.selected;
  } else {
    if (f.n_clusters < 1) throw Error(ErrorCode::InvalidArgument, "one of --n-clusters or --scan is required");
    opts.n_clusters = f.n_clusters;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const SpectralBasis basis =
      spectral_basis(p, EigenSelection{opts.mode, opts.n_clusters}, opts.weight, opts.spectral);
  const double t_spectral = seconds_since(t0);
  const auto t1 = std::chrono::steady_clock::now();
  ClusteringResult r = optimize(basis, opts.optimize);
  const double t_optimize = seconds_since(t1);
  const auto t2 = std::chrono::steady_clock::now();
  r.coarse = coarse_grain(p, r.membership);
  const double t_coarse = seconds_since(t2);

  Json report = to_json(r);
  report["weight"] = std::string(to_string(opts.weight));
  if (!scan_json.is_null()) report["scan"] = scan_json;
  report["timing"] = {{"spectral_s", t_spectral},
                      {"optimize_s", t_optimize},
                      {"coarse_grain_s", t_coarse},
                      {"total_s", t_spectral + t_optimize + t_coarse}};
  if (!scan_json.is_null()) report["timing"]["scan_s"] = scan_seconds;

  if (!f.out_dir.empty()) {
    const fs::path dir(f.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
    save_csv(r.membership.values, dir / "membership.csv");
    save_csv(r.coarse, dir / "coarse.csv");
    write_text(dir / "report.json", report.dump(2) + "\n");
  }
  std::cout << report.dump(2) << "\n";
  return 0;
}

struct SpectrumFlags {
  InputFlags input;
  Index count = 3;
  std::string mode;
  bool check_circular = false;
  Index blocks = 0;
  double circular_tol = 1e-8;
  std::string out;
};

int cmd_spectrum(const SpectrumFlags& f) {
  const Loaded in = load_input(f.input);
  const StochasticMatrix& p = in.matrix;
  if (f.count < 1 || f.count >= p.dim()) {
    throw Error(ErrorCode::InvalidArgument, "--count must lie in [1, N-1] (N = " + std::to_string(p.dim()) + ")",
                {static_cast<long long>(f.count), static_cast<long long>(p.dim())});
  }
  Json j;
  j["n_states"] = p.dim();
  j["count"] = f.count;
  std::vector<SelectionMode> modes{SelectionMode::LargestMagnitude, SelectionMode::LargestRealPart};
  if (!f.mode.empty()) modes = {parse_selection_mode(f.mode)};
  Json per_mode;
  for (const auto m : modes) {
    try {
      const SpectralBasis basis = spectral_basis(p, EigenSelection{m, f.count});
      per_mode[std::string(to_string(m))] = {{"eigenvalues", eigenvalues_json(basis.spectrum.eigenvalues)},
                                             {"subspace_residual", number(basis.residual)}};
    } catch (const Error& e) {
      per_mode[std::string(to_string(m))] = error_json(e);
    }
  }
  j["modes"] = per_mode;
  bool ok = true;
  if (f.check_circular) {
    const Index blocks = f.blocks > 0 ? f.blocks : in.circular_blocks.value_or(0);
    if (blocks < 2) throw Error(ErrorCode::InvalidArgument, "--check-circular needs --blocks for this input");
    const CircularCheck c = check_circular_spectrum(p, blocks, f.circular_tol);
    j["circular_check"] = {{"blocks", blocks},
                           {"tolerance", f.circular_tol},
                           {"max_eigenvalue_error", c.max_eigenvalue_error},
                           {"max_block_deviation", c.max_block_deviation},
                           {"passed", c.passed}};
    ok = c.passed;
  }
  emit_json(j, f.out);
  return ok ? 0 : 1;
}

struct GenerateFlags {
  Index blocks = 3;
  Index block_size = 10;
  double eps = 0.0;
  double coupling = 0.01;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_generate(const std::string& kind, const GenerateFlags& f) {
  const std::uint64_t seed = f.seed ? *f.seed : default_seed();
  const StochasticMatrix m = kind == "circular"
                                 ? generate_circular(CircularSpec{f.blocks, f.block_size, f.eps, seed})
                                 : generate_nearly_uncoupled(f.blocks, f.block_size, f.coupling, seed);
  if (f.out.empty() || f.out == "-") {
    write_matrix(std::cout, m, MatrixFormat::MatrixMarket);
  } else {
    save_matrix(m, f.out);
  }
  return 0;
}

struct BenchFlags {
  std::string sizes;
  Index trials = 5;
  std::string gen = "circular";
  double eps = 0.0;
  double coupling = 0.01;
  Index blocks = 3;
  Index n_clusters = 3;
  std::string mode = "magnitude";
  std::string weight = "uniform";
  std::string method = "gauss-newton";
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  bool serial = false;
  bool no_warmup = false;
  std::string csv;
  std::string json;
  std::string plan;
  std::string versus_method;
  std::string versus_weight;
  std::string versus_mode;
};

BenchPlan plan_from_json(const Json& j, BenchPlan plan) {
  try {
    if (j.contains("sizes")) plan.sizes = j.at("sizes").get<std::vector<Index>>();
    if (j.contains("trials")) plan.trials = j.at("trials").get<Index>();
    if (j.contains("generator")) {
      const auto g = j.at("generator").get<std::string>();
      if (g != "circular" && g != "uncoupled") throw Error(ErrorCode::InvalidSpec, "unknown generator '" + g + "'");
      plan.generator = g == "circular" ? GeneratorKind::Circular : GeneratorKind::NearlyUncoupled;
    }
    if (j.contains("blocks")) plan.blocks = j.at("blocks").get<Index>();
    if (j.contains("perturbation")) plan.perturbation = j.at("perturbation").get<double>();
    if (j.contains("coupling")) plan.coupling = j.at("coupling").get<double>();
    if (j.contains("n_clusters")) plan.cluster.n_clusters = j.at("n_clusters").get<Index>();
    if (j.contains("mode")) plan.cluster.mode = parse_selection_mode(j.at("mode").get<std::string>());
    if (j.contains("weight")) plan.cluster.weight = parse_weight_choice(j.at("weight").get<std::string>());
    if (j.contains("method")) plan.cluster.optimize.method = parse_optimizer_method(j.at("method").get<std::string>());
    if (j.contains("seed_base")) plan.seed_base = j.at("seed_base").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("invalid plan file: ") + e.what());
  }
  return plan;
}

int cmd_bench(const BenchFlags& f) {
  BenchPlan plan;
  if (!f.plan.empty()) {
    std::ifstream in(f.plan);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open plan file " + f.plan);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("invalid plan file: ") + e.what());
    }
    plan.seed_base = default_seed();
    plan = plan_from_json(j, plan);
  } else {
    if (!f.sizes.empty()) {
      plan.sizes.clear();
      for (const auto& s : split(f.sizes, ',')) plan.sizes.push_back(to_int(s, "size"));
    }
    plan.trials = f.trials;
    plan.generator = f.gen == "circular" ? GeneratorKind::Circular : GeneratorKind::NearlyUncoupled;
    plan.perturbation = f.eps;
    plan.coupling = f.coupling;
    plan.blocks = f.blocks;
    plan.cluster.n_clusters = f.n_clusters;
    plan.cluster.mode = parse_selection_mode(f.mode);
    plan.cluster.weight = parse_weight_choice(f.weight);
    plan.cluster.optimize.method = parse_optimizer_method(f.method);
    plan.seed_base = f.seed ? *f.seed : default_seed();
  }
  plan.jobs = f.serial ? 1u : f.jobs;
  plan.warmup = !f.no_warmup;

  const BenchReport report = run_bench(plan);
  Json j = to_json(report);
  if (!f.versus_method.empty() || !f.versus_weight.empty() || !f.versus_mode.empty()) {
    BenchPlan other = plan;
    if (!f.versus_method.empty()) other.cluster.optimize.method = parse_optimizer_method(f.versus_method);
    if (!f.versus_weight.empty()) other.cluster.weight = parse_weight_choice(f.versus_weight);
    if (!f.versus_mode.empty()) other.cluster.mode = parse_selection_mode(f.versus_mode);
    const BenchReport second = run_bench(other);
    Json diffs = Json::array();
    for (const auto& d : compare_configurations(report, second)) {
      diffs.push_back({{"size", d.size},
                       {"trial", d.trial},
                       {"status", d.ok ? "ok" : "failed"},
                       {"p1", number(d.p1)},
                       {"p2", number(d.p2)},
                       {"pinf", number(d.pinf)}});
    }
    Json versus = to_json(second);
    j["comparison"] = {{"plan", versus["plan"]}, {"successful_trials", versus["successful_trials"]}, {"differences", diffs}};
    Json timing = j["timing"];
    j.erase("timing");
    timing["comparison"] = versus["timing"];
    j["timing"] = timing;
  }
  if (!f.csv.empty()) {
    std::ostringstream os;
    write_csv(os, report);
    if (f.csv == "-") {
      std::cout << os.str();
    } else {
      write_text(f.csv, os.str());
    }
  }
  if (!f.json.empty()) {
    emit_json(j, f.json);
  } else if (f.csv != "-") {
    emit_json(j, "");
  }
  return report.successes() == static_cast<Index>(report.trials.size()) ? 0 : 1;
}

int cmd_fixtures(bool list, const std::string& name, const std::string& out) {
  if (!name.empty()) {
    const StochasticMatrix m = fixture(name);
    if (out.empty() || out == "-") {
      write_matrix(std::cout, m, MatrixFormat::MatrixMarket);
    } else {
      save_matrix(m, out);
    }
    return 0;
  }
  (void)list;
  for (const auto& n : fixture_names()) std::cout << n << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-graining of non-reversible Markov chains with cPCCA+"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cpcca 1.0.0");

  ClusterFlags cf;
  auto* cluster = app.add_subcommand("cluster", "Cluster a transition matrix");
  add_input_flags(cluster, cf.input);
  auto* nc_opt = cluster->add_option("--n-clusters", cf.n_clusters, "Number of clusters")->check(CLI::PositiveNumber);
  auto* scan_opt = cluster->add_option("--scan", cf.scan, "Scan a cluster range a:b and pick the crispest");
  nc_opt->excludes(scan_opt);
  cluster->add_option("--mode", cf.mode, "Eigenvalue dominance")->check(CLI::IsMember({"magnitude", "real"}));
  cluster->add_option("--weight", cf.weight, "Inner product weight")->check(CLI::IsMember({"uniform", "stationary"}));
  cluster->add_option("--method", cf.method, "Optimizer")
      ->check(CLI::IsMember({"nelder-mead", "gauss-newton", "levenberg-marquardt"}));
  cluster->add_option("--min-chi-threshold", cf.min_chi_threshold, "Scan minChi acceptance threshold");
  cluster->add_option("--condition-cap", cf.condition_cap, "Eigenvector condition number cap");
  cluster->add_option("--out-dir", cf.out_dir, "Write membership.csv, coarse.csv and report.json here");

  SpectrumFlags sf;
  auto* spectrum = app.add_subcommand("spectrum", "Report dominant eigenvalues");
  add_input_flags(spectrum, sf.input);
  spectrum->add_option("--count", sf.count, "Number of dominant eigenvalues");
  spectrum->add_option("--mode", sf.mode, "Restrict to one dominance notion")->check(CLI::IsMember({"magnitude", "real"}));
  spectrum->add_flag("--check-circular", sf.check_circular, "Check the roots-of-unity structure");
  spectrum->add_option("--blocks", sf.blocks, "Block count for --check-circular");
  spectrum->add_option("--circular-tol", sf.circular_tol, "Tolerance for --check-circular");
  spectrum->add_option("--out", sf.out, "Output JSON path (default stdout)");

  GenerateFlags gf;
  std::string gen_kind;
  auto* generate = app.add_subcommand("generate", "Generate a test matrix");
  generate->add_option("kind", gen_kind, "circular or uncoupled")->required()->check(CLI::IsMember({"circular", "uncoupled"}));
  generate->add_option("--blocks", gf.blocks, "Number of blocks");
  generate->add_option("--block-size", gf.block_size, "States per block");
  generate->add_option("--eps", gf.eps, "Circular perturbation magnitude");
  generate->add_option("--coupling", gf.coupling, "Off-block mass (uncoupled)");
  generate->add_option("--seed", gf.seed, "RNG seed (default: CPCCA_SEED or 42)");
  generate->add_option("--out", gf.out, "Output path; .csv selects CSV (default stdout, Matrix Market)");

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "Run the benchmark protocol");
  bench->add_option("--sizes", bf.sizes, "Comma-separated, strictly increasing matrix sizes");
  bench->add_option("--trials", bf.trials, "Trials per size");
  bench->add_option("--gen", bf.gen, "Generator")->check(CLI::IsMember({"circular", "uncoupled"}));
  bench->add_option("--eps", bf.eps, "Circular perturbation magnitude");
  bench->add_option("--coupling", bf.coupling, "Off-block mass (uncoupled)");
  bench->add_option("--blocks", bf.blocks, "Number of blocks");
  bench->add_option("--n-clusters", bf.n_clusters, "Number of clusters");
  bench->add_option("--mode", bf.mode, "Eigenvalue dominance")->check(CLI::IsMember({"magnitude", "real"}));
  bench->add_option("--weight", bf.weight, "Inner product weight")->check(CLI::IsMember({"uniform", "stationary"}));
  bench->add_option("--method", bf.method, "Optimizer")
      ->check(CLI::IsMember({"nelder-mead", "gauss-newton", "levenberg-marquardt"}));
  bench->add_option("--seed", bf.seed, "Seed base (default: CPCCA_SEED or 42)");
  bench->add_option("--jobs", bf.jobs, "Worker threads")->check(CLI::PositiveNumber);
  bench->add_flag("--serial", bf.serial, "Force serial trials");
  bench->add_flag("--no-warmup", bf.no_warmup, "Skip the per-size warm-up run");
  bench->add_option("--csv", bf.csv, "Per-trial CSV path ('-' for stdout)");
  bench->add_option("--json", bf.json, "JSON summary path (default stdout)");
  bench->add_option("--plan", bf.plan, "JSON plan file");
  bench->add_option("--versus-method", bf.versus_method, "Compare against another optimizer");
  bench->add_option("--versus-weight", bf.versus_weight, "Compare against another weight");
  bench->add_option("--versus-mode", bf.versus_mode, "Compare against another dominance notion");

  bool list = false;
  std::string export_name;
  std::string export_out;
  auto* fixtures = app.add_subcommand("fixtures", "List or export built-in matrices");
  fixtures->add_flag("--list", list, "List fixture names");
  fixtures->add_option("--export", export_name, "Fixture to export");
  fixtures->add_option("--out", export_out, "Export path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json(Error(ErrorCode::InvalidArgument, e.what())).dump(2) << "\n";
    return 2;
  }

  try {
    if (*cluster) return cmd_cluster(cf);
    if (*spectrum) return cmd_spectrum(sf);
    if (*generate) return cmd_generate(gen_kind, gf);
    if (*bench) return cmd_bench(bf);
    if (*fixtures) return cmd_fixtures(list, export_name, export_out);
  } catch (const Error& e) {
    std::cerr << error_json(e).dump(2) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << error_json(Error(ErrorCode::NumericalError, e.what())).dump(2) << "\n";
    return 1;
  }
  return 0;
}
