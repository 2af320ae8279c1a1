#include <catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "support.hpp"

using namespace cpcca;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Run cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() / "cpcca_cli_runs";
  std::filesystem::create_directories(dir);
  const auto out = dir / ("out" + std::to_string(counter) + ".txt");
  const auto err = dir / ("err" + std::to_string(counter++) + ".txt");
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" CPCCA_CLI_PATH "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string golden(const std::string& name) { return slurp(std::filesystem::path(CPCCA_GOLDEN_DIR) / name); }

Eigen::MatrixXd matrix_of(const Json& rows) {
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

Json without_timing(Json j) {
  j.erase("timing");
  return j;
}

}  // namespace

TEST_CASE("fixtures subcommand", "[cli]") {
  const auto r = cli("fixtures --list");
  CHECK(r.status == 0);
  CHECK(r.out == golden("fixtures_list.txt"));
  const auto e = cli("fixtures --export example1");
  CHECK(e.status == 0);
  CHECK(e.out == golden("example1.mtx"));
}

TEST_CASE("cluster example1", "[cli]") {
  const auto r = cli("cluster --fixture example1 --n-clusters 3 --mode real");
  REQUIRE(r.status == 0);
  const Json j = Json::parse(r.out);
  CHECK(without_timing(j).dump(2) + "\n" == golden("cluster_example1.json"));
  const auto ev = j["eigenvalues"];
  CHECK(std::abs(ev[0][0].get<double>() - 1.0) <= 5e-4);
  CHECK(std::abs(ev[1][0].get<double>() - 0.9557) <= 5e-4);
  CHECK(std::abs(ev[1][1].get<double>() - 0.0177) <= 5e-4);
  CHECK(support::pattern_distance(matrix_of(j["coarse_matrix"]), 0.9705, 0.0250, 0.0046) <= 1e-3);
  for (const char* k : {"spectral_s", "optimize_s", "coarse_grain_s", "total_s"}) CHECK(j["timing"][k] >= 0.0);
}

TEST_CASE("cluster case (i) gives a cyclic coarse matrix", "[cli]") {
  const auto r = cli("cluster --fixture example2:0.9:0.1 --n-clusters 3 --mode magnitude");
  REQUIRE(r.status == 0);
  CHECK(support::distance_to_cycle(matrix_of(Json::parse(r.out)["coarse_matrix"])) <= 1e-2);
}

TEST_CASE("cluster output files are byte stable", "[cli]") {
  const auto d1 = support::temp_dir("cli_a");
  const auto d2 = support::temp_dir("cli_b");
  const std::string base = "cluster --generate circular:3:5:0.1:9 --n-clusters 3 --mode magnitude --out-dir ";
  REQUIRE(cli(base + "\"" + d1.string() + "\"").status == 0);
  REQUIRE(cli(base + "\"" + d2.string() + "\"").status == 0);
  CHECK(slurp(d1 / "membership.csv") == slurp(d2 / "membership.csv"));
  CHECK(slurp(d1 / "coarse.csv") == slurp(d2 / "coarse.csv"));
  CHECK(without_timing(Json::parse(slurp(d1 / "report.json"))) == without_timing(Json::parse(slurp(d2 / "report.json"))));
  std::istringstream mem(slurp(d1 / "membership.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(mem, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 2);
  }
  CHECK(rows == 15);
}

TEST_CASE("generate then cluster", "[cli]") {
  const auto dir = support::temp_dir("cli_gen");
  const auto path = (dir / "m.mtx").string();
  REQUIRE(cli("generate circular --blocks 3 --block-size 10 --eps 0.1 --seed 42 --out \"" + path + "\"").status == 0);
  CHECK(load_matrix(path).dense() == generate_circular({3, 10, 0.1, 42}).dense());
  const auto r = cli("cluster --in \"" + path + "\" --n-clusters 3 --mode magnitude");
  REQUIRE(r.status == 0);
  const Json j = Json::parse(r.out);
  const Eigen::MatrixXd pc = matrix_of(j["coarse_matrix"]);
  CHECK((pc.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
  Eigen::VectorXcd reported(3);
  for (int k = 0; k < 3; ++k) reported[k] = {j["eigenvalues"][k][0].get<double>(), j["eigenvalues"][k][1].get<double>()};
  CHECK(support::multiset_distance(support::eigenvalues_oracle(pc), reported) <= 1e-8);
}

TEST_CASE("default seed comes from the environment", "[cli]") {
  const auto a = cli("generate circular --blocks 3 --block-size 2", "CPCCA_SEED=5");
  const auto b = cli("generate circular --blocks 3 --block-size 2 --seed 5");
  REQUIRE(a.status == 0);
  CHECK(a.out == b.out);
  CHECK(cli("generate circular --blocks 3 --block-size 2", "CPCCA_SEED=6").out != a.out);
}

TEST_CASE("scan mode", "[cli]") {
  const auto r = cli("cluster --fixture example1 --scan 2:4 --mode real");
  REQUIRE(r.status == 0);
  const Json j = Json::parse(r.out);
  CHECK(j["n_clusters"] == 3);
  CHECK(j["scan"]["selected"] == 3);
  CHECK(j["scan"]["candidates"][0]["skip_reason"] == "SPLIT_CONJUGATE_PAIR");
}

TEST_CASE("spectrum subcommand", "[cli]") {
  const auto r = cli("spectrum --fixture example2:0.9:0.1 --count 3 --mode magnitude");
  REQUIRE(r.status == 0);
  const Json j = Json::parse(r.out);
  CHECK(j.dump(2) + "\n" == golden("spectrum_case1.json"));
  const auto ev = j["modes"]["magnitude"]["eigenvalues"];
  CHECK(std::abs(ev[1][0].get<double>() + 0.5) <= 5e-4);
  CHECK(std::abs(ev[1][1].get<double>() - 0.8660) <= 5e-4);
  const auto both = Json::parse(cli("spectrum --fixture example1 --count 3").out);
  CHECK(both["modes"].contains("magnitude"));
  CHECK(both["modes"].contains("real"));
  const auto circ = cli("spectrum --generate circular:3:10:0 --check-circular");
  CHECK(circ.status == 0);
  CHECK(Json::parse(circ.out)["circular_check"]["passed"] == true);
  const auto not_circ = cli("spectrum --fixture example1 --check-circular --blocks 3");
  CHECK(not_circ.status != 0);
}

TEST_CASE("bench subcommand", "[cli]") {
  const auto dir = support::temp_dir("cli_bench");
  const auto csv = (dir / "b.csv").string();
  const auto json = (dir / "b.json").string();
  const auto r = cli("bench --sizes 30,60,90,120 --trials 5 --gen circular --eps 0 --csv \"" + csv + "\" --json \"" +
                     json + "\"");
  REQUIRE(r.status == 0);
  std::istringstream is(slurp(csv));
  std::string line;
  int rows = 0;
  std::getline(is, line);
  while (std::getline(is, line)) {
    ++rows;
    CHECK(line.find(",ok,") != std::string::npos);
  }
  CHECK(rows == 20);
  const Json j = Json::parse(slurp(json));
  CHECK(j["successful_trials"] == 20);

  const auto plan = dir / "plan.json";
  std::ofstream(plan) << R"({"sizes": [30, 60], "trials": 2, "generator": "uncoupled", "coupling": 0.01})";
  const auto p = cli("bench --plan \"" + plan.string() + "\" --versus-method nelder-mead");
  REQUIRE(p.status == 0);
  const Json pj = Json::parse(p.out);
  CHECK(pj["plan"]["generator"] == "uncoupled");
  CHECK(pj["comparison"]["differences"].size() == 4);
  CHECK(pj["timing"].contains("comparison"));
}

TEST_CASE("errors are machine readable", "[cli]") {
  auto code_of = [](const Run& r) { return Json::parse(r.err)["error"]["code"].get<std::string>(); };
  const auto missing = cli("cluster --in missing.mtx --n-clusters 3");
  CHECK(missing.status != 0);
  CHECK(code_of(missing) == "FILE_NOT_FOUND");
  const auto count = cli("spectrum --count 9 --fixture example1");
  CHECK(count.status != 0);
  CHECK(code_of(count) == "INVALID_ARGUMENT");
  const auto both = cli("cluster --fixture example1 --n-clusters 3 --scan 2:4");
  CHECK(both.status != 0);
  CHECK(code_of(both) == "INVALID_ARGUMENT");
  const auto split = cli("cluster --fixture example2:0.9:0.1 --n-clusters 2 --mode magnitude");
  CHECK(split.status != 0);
  CHECK(code_of(split) == "SPLIT_CONJUGATE_PAIR");
  CHECK(Json::parse(split.err)["error"]["data"] == Json::array({1, 3}));
  const auto fixture_err = cli("cluster --fixture nope --n-clusters 2");
  CHECK(code_of(fixture_err) == "UNKNOWN_FIXTURE");

  const auto dir = support::temp_dir("cli_err");
  std::ofstream(dir / "bad.csv") << "0.5,0.5,0\n0.5,0.5\n";
  const auto parse = cli("cluster --in \"" + (dir / "bad.csv").string() + "\" --n-clusters 2");
  CHECK(code_of(parse) == "PARSE_ERROR");
  const auto nosub = cli("");
  CHECK(nosub.status != 0);
  const auto none = cli("cluster --n-clusters 2");
  CHECK(code_of(none) == "INVALID_ARGUMENT");
}
