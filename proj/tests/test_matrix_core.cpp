#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace cpcca;
using Catch::Matchers::WithinAbs;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::NumericalError;
}

}  // namespace

TEST_CASE("validate accepts stochastic matrices", "[matrix_core]") {
  const auto p = validate(Eigen::MatrixXd::Identity(2, 2));
  CHECK(p.dim() == 2);
  CHECK(p.storage_kind() == StorageKind::Dense);
  CHECK(fixture_example1().dim() == 6);
}

TEST_CASE("validate rejects malformed candidates", "[matrix_core]") {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.4, 0.5, 0.5;
  try {
    validate(bad);
    FAIL("expected RowSumViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RowSumViolation);
    REQUIRE(e.data().size() == 1);
    CHECK(e.data()[0] == 0);
    CHECK(std::string(e.what()).find("0.9") != std::string::npos);
  }
  CHECK(code_of([] { validate(Eigen::MatrixXd::Constant(2, 3, 1.0 / 3)); }) == ErrorCode::NonSquare);
  Eigen::MatrixXd neg(2, 2);
  neg << 1.5, -0.5, 0.5, 0.5;
  try {
    validate(neg);
    FAIL("expected NegativeEntry");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NegativeEntry);
    CHECK(e.data() == std::vector<long long>{0, 1});
  }
  Eigen::MatrixXd nan = Eigen::MatrixXd::Identity(2, 2);
  nan(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK(code_of([&] { validate(nan); }) == ErrorCode::NegativeEntry);
}

TEST_CASE("row-sum tolerance is configurable", "[matrix_core]") {
  Eigen::MatrixXd m(2, 2);
  m << 0.5, 0.5 + 1e-9, 0.5, 0.5;
  CHECK(code_of([&] { validate(m); }) == ErrorCode::RowSumViolation);
  CHECK_NOTHROW(validate(m, 1e-8));
}

TEST_CASE("row_normalize divides by row sums", "[matrix_core]") {
  Eigen::MatrixXd m(2, 2);
  m << 2, 2, 1, 3;
  const auto p = row_normalize(m);
  CHECK(p.coeff(0, 0) == 0.5);
  CHECK(p.coeff(0, 1) == 0.5);
  CHECK(p.coeff(1, 0) == 0.25);
  CHECK(p.coeff(1, 1) == 0.75);
  CHECK(row_normalize(Eigen::MatrixXd::Identity(3, 3)).dense() == Eigen::MatrixXd::Identity(3, 3));
  Eigen::MatrixXd z(2, 2);
  z << 1, 1, 0, 0;
  try {
    row_normalize(z);
    FAIL("expected ZeroRow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroRow);
    CHECK(e.data() == std::vector<long long>{1});
  }
  z << 1, -1, 1, 1;
  CHECK(code_of([&] { row_normalize(z); }) == ErrorCode::NegativeEntry);
}

TEST_CASE("DensityVector requires positive mass summing to one", "[matrix_core]") {
  const auto u = DensityVector::uniform(4);
  CHECK(u.values().isApproxToConstant(0.25));
  CHECK(code_of([] { DensityVector::from(Eigen::Vector3d(0.5, 0.5, 0.0)); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { DensityVector::from(Eigen::Vector2d(0.5, 0.6)); }) == ErrorCode::InvalidArgument);
  CHECK_NOTHROW(DensityVector::from(Eigen::Vector2d(0.3, 0.7)));
}

TEST_CASE("generate_circular structure", "[matrix_core][generator]") {
  SECTION("single-state blocks give the 3-cycle") {
    for (std::uint64_t seed : {1ULL, 42ULL, 999ULL}) {
      const auto p = generate_circular({3, 1, 0.0, seed});
      Eigen::Matrix3d cyc;
      cyc << 0, 1, 0, 0, 0, 1, 1, 0, 0;
      CHECK(p.dense() == Eigen::MatrixXd(cyc));
    }
  }
  SECTION("zero pattern follows the block cycle") {
    const auto d = generate_circular({3, 10, 0.0, 42}).dense();
    for (Index i = 0; i < 30; ++i) {
      for (Index j = 0; j < 30; ++j) {
        const bool on_cycle = (i / 10 + 1) % 3 == j / 10;
        if (on_cycle) {
          CHECK(d(i, j) > 0.0);
        } else {
          CHECK(d(i, j) == 0.0);
        }
      }
      CHECK_THAT(d.row(i).sum(), WithinAbs(1.0, 1e-12));
    }
  }
  SECTION("perturbation fills every entry") {
    const auto p = generate_circular({3, 10, 0.1, 42});
    const auto d = p.dense();
    CHECK(d.minCoeff() > 0.0);
    CHECK(p.max_row_sum_deviation() <= 1e-12);
  }
  SECTION("determinism") {
    CHECK(generate_circular({4, 5, 0.1, 9}).dense() == generate_circular({4, 5, 0.1, 9}).dense());
    CHECK(generate_circular({4, 5, 0.1, 9}).dense() != generate_circular({4, 5, 0.1, 10}).dense());
  }
  SECTION("invalid specs") {
    CHECK(code_of([] { generate_circular({1, 5, 0.0, 1}); }) == ErrorCode::InvalidSpec);
    CHECK(code_of([] { generate_circular({3, 0, 0.0, 1}); }) == ErrorCode::InvalidSpec);
    CHECK(code_of([] { generate_circular({3, 5, 1.0, 1}); }) == ErrorCode::InvalidSpec);
    CHECK(code_of([] { generate_circular({3, 5, -0.1, 1}); }) == ErrorCode::InvalidSpec);
  }
}

TEST_CASE("generate_circular reproducibility anchor", "[matrix_core][generator]") {
  // Pins the draw order and the random stream.
  Rng rng(42);
  const double u0 = rng.uniform();
  const double u1 = rng.uniform();
  const auto d = generate_circular({3, 2, 0.0, 42}).dense();
  CHECK(d(0, 2) == u0 / (u0 + u1));
  CHECK(d(0, 3) == u1 / (u0 + u1));
}

TEST_CASE("generate_nearly_uncoupled", "[matrix_core][generator]") {
  SECTION("zero coupling is block diagonal with a triple unit eigenvalue") {
    const auto d = generate_nearly_uncoupled(3, 2, 0.0, 7).dense();
    for (Index i = 0; i < 6; ++i) {
      for (Index j = 0; j < 6; ++j) {
        if (i / 2 != j / 2) CHECK(d(i, j) == 0.0);
      }
    }
    const auto ev = support::eigenvalues_oracle(d);
    int ones = 0;
    for (Index k = 0; k < ev.size(); ++k) ones += std::abs(ev[k] - 1.0) < 1e-10 ? 1 : 0;
    CHECK(ones == 3);
  }
  SECTION("off-block mass is bounded by the coupling") {
    const auto d = generate_nearly_uncoupled(3, 2, 0.01, 7).dense();
    for (Index i = 0; i < 6; ++i) {
      double off = 0.0;
      for (Index j = 0; j < 6; ++j) {
        if (i / 2 != j / 2) off += d(i, j);
      }
      CHECK(off <= 0.01 + 1e-12);
      CHECK(off > 0.0);
    }
  }
  SECTION("determinism") {
    CHECK(generate_nearly_uncoupled(3, 4, 0.01, 5).dense() == generate_nearly_uncoupled(3, 4, 0.01, 5).dense());
  }
  SECTION("invalid specs") {
    CHECK(code_of([] { generate_nearly_uncoupled(0, 3, 0.01, 1); }) == ErrorCode::InvalidSpec);
    CHECK(code_of([] { generate_nearly_uncoupled(3, 3, 1.5, 1); }) == ErrorCode::InvalidSpec);
    CHECK(code_of([] { generate_nearly_uncoupled(1, 4, 0.1, 1); }) == ErrorCode::InvalidSpec);
  }
}

TEST_CASE("fixtures reproduce the published matrices", "[matrix_core][fixture]") {
  const auto e1 = fixture("example1");
  CHECK(e1.coeff(0, 1) == 0.7);
  CHECK(e1.coeff(0, 5) == 0.05);
  Eigen::RowVectorXd row(9);
  row << 0, 0.9, 0, 0.1, 0, 0, 0, 0, 0;
  CHECK(fixture("example2:0.9:0.1").dense().row(0) == row);
  row << 0, 0.1, 0, 0.9, 0, 0, 0, 0, 0;
  CHECK(fixture("example2:0.1:0.9").dense().row(0) == row);
  const auto names = fixture_names();
  CHECK(names == std::vector<std::string>{"example1", "example2:0.9:0.1", "example2:0.1:0.9"});
  for (const auto& n : names) CHECK(fixture(n).max_row_sum_deviation() <= 1e-12);
  CHECK(code_of([] { fixture("example3"); }) == ErrorCode::UnknownFixture);
  CHECK(code_of([] { fixture("example2:0.5:0.6"); }) == ErrorCode::UnknownFixture);
  CHECK(code_of([] { fixture("example2:abc:0.1"); }) == ErrorCode::UnknownFixture);
}

TEST_CASE("large matrices use sparse storage", "[matrix_core]") {
  const auto big = generate_circular({3, 700, 0.0, 1});
  CHECK(big.dim() == 2100);
  CHECK(big.storage_kind() == StorageKind::Sparse);
  CHECK(big.max_row_sum_deviation() <= 1e-12);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2100);
  CHECK((big.multiply(ones) - ones).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("matrix market and CSV round trips", "[matrix_io]") {
  const auto dir = support::temp_dir("io");
  const auto e1 = fixture_example1();
  for (const char* name : {"e1.mtx", "e1.csv"}) {
    save_matrix(e1, dir / name);
    const auto back = load_matrix(dir / name);
    CHECK((back.dense() - e1.dense()).cwiseAbs().maxCoeff() == 0.0);
  }
  const auto rnd = generate_circular({3, 5, 0.1, 3});
  save_matrix(rnd, dir / "r.mtx");
  CHECK(load_matrix(dir / "r.mtx").dense() == rnd.dense());
  save_matrix(rnd, dir / "r.csv");
  CHECK(load_matrix(dir / "r.csv").dense() == rnd.dense());
}

TEST_CASE("matrix market parsing", "[matrix_io]") {
  const auto dir = support::temp_dir("mm");
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return dir / name;
  };
  SECTION("explicit zeros are kept in the pattern") {
    const auto path = write("z.mtx",
                            "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 3\n1 1 1\n1 2 0\n2 2 1\n");
    const auto p = load_matrix(path);
    REQUIRE(p.sparse_ptr() != nullptr);
    CHECK(p.sparse_ptr()->nonZeros() == 3);
    std::ostringstream os;
    write_matrix(os, p, MatrixFormat::MatrixMarket);
    CHECK(os.str().find("1 2 0\n") != std::string::npos);
  }
  SECTION("malformed inputs report the line") {
    auto line_of = [&](const std::string& text) {
      try {
        load_matrix(write("bad.mtx", text));
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        return e.data().empty() ? -1LL : e.data()[0];
      }
      FAIL("expected ParseError");
      return -1LL;
    };
    CHECK(line_of("%%MatrixMarket matrix array real general\n2 2\n") == 1);
    CHECK(line_of("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n3 2 1\n") == 4);
    CHECK(line_of("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 x\n2 2 1\n") == 3);
    CHECK(line_of("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n2 2 1\n") == 4);
    CHECK(line_of("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n1 1 1\n") == 4);
  }
  SECTION("raw input is normalized first") {
    const auto path = write("raw.mtx", "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 2\n1 2 2\n2 1 5\n");
    CHECK(code_of([&] { load_matrix(path); }) == ErrorCode::RowSumViolation);
    const auto p = load_matrix(path, LoadOptions{true});
    CHECK(p.coeff(0, 0) == 0.5);
    CHECK(p.coeff(1, 0) == 1.0);
  }
}

TEST_CASE("CSV parsing", "[matrix_io]") {
  const auto dir = support::temp_dir("csv");
  std::ofstream(dir / "bad.csv") << "0.5,0.5,0\n0.5,0.5\n";
  try {
    load_matrix(dir / "bad.csv");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(e.data() == std::vector<long long>{1});
  }
  std::ofstream(dir / "num.csv") << "0.5,abc\n0.5,0.5\n";
  CHECK(code_of([&] { load_matrix(dir / "num.csv"); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { load_matrix(dir / "missing.csv"); }) == ErrorCode::FileNotFound);
}

TEST_CASE("Rng is a portable uniform stream", "[random]") {
  Rng a(123);
  Rng b(123);
  std::mt19937_64 ref(123);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
    CHECK(u == (static_cast<double>(ref() >> 11) + 0.5) * 0x1.0p-53);
  }
  CHECK(mix64(0) != mix64(1));
}
