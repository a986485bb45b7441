#include <doctest.h>

#include "test_helpers.hpp"

using namespace gridest;
using namespace gridest::testing;

TEST_CASE("single line topology") {
  const GridTopology topo = build_topology({{0, 1}}, 0);
  CHECK(topo.node_count == 2);
  CHECK(topo.line_count == 1);
  CHECK(topo.incidence(0, 0) == 1.0);
  CHECK(topo.incidence(0, 1) == -1.0);
  CHECK(topo.non_slack == std::vector<int>{1});
}

TEST_CASE("district chain has 4 nodes and 3 lines") {
  const District d;
  CHECK(d.topo.node_count == 4);
  CHECK(d.topo.line_count == 3);
}

TEST_CASE("topology validation errors") {
  CHECK_THROWS_AS(build_topology({{0, 1}, {1, 2}, {0, 2}}, 0), CyclicGraph);
  CHECK_THROWS_AS(build_topology({{0, 1}, {2, 3}}, 0), Disconnected);
  CHECK_THROWS_AS(build_topology({{0, 1}}, 5), BadSlack);
  CHECK_THROWS_AS(build_topology({{0, 0}}, 0), CyclicGraph);
}

TEST_CASE("unit resistance admittance") {
  const GridTopology topo = build_topology({{0, 1}}, 0);
  LineParams p{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)};
  const AdmittanceModel adm = build_admittance(topo, p);
  CHECK(adm.Y(0, 0) == std::complex<double>(1, 0));
  CHECK(adm.Y(0, 1) == std::complex<double>(-1, 0));
  CHECK(adm.Y(1, 1) == std::complex<double>(1, 0));
}

TEST_CASE("admittance matches independent complex reciprocal") {
  // 150 + j141.4 mOhm on the 16-ohm district base
  const District d;
  const GridTopology topo = build_topology({{0, 1}}, 0);
  LineParams p{Eigen::VectorXd(1), Eigen::VectorXd(1)};
  p.R << 0.150 / 16.0;
  p.X << 0.1414 / 16.0;
  const AdmittanceModel adm = build_admittance(topo, p);
  const std::complex<double> expected = 1.0 / std::complex<double>(p.R(0), p.X(0));
  CHECK(std::abs(adm.Y(0, 0) - expected) < 1e-12 * std::abs(expected));
  CHECK(std::abs(adm.Y(0, 1) + expected) < 1e-12 * std::abs(expected));
}

TEST_CASE("admittance errors") {
  const GridTopology topo = build_topology({{0, 1}}, 0);
  LineParams zero{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  CHECK_THROWS_AS(build_admittance(topo, zero), ZeroImpedance);
  LineParams wrong{Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2)};
  CHECK_THROWS_AS(build_admittance(topo, wrong), DimensionMismatch);
}

TEST_CASE("polar cache reconstructs Y") {
  std::mt19937_64 rng(7);
  const District d;
  const AdmittanceModel adm = build_admittance(d.topo, d.datasheet);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j) {
      const std::complex<double> rebuilt =
          adm.mag(k, j) * std::exp(std::complex<double>(0, adm.ang(k, j)));
      CHECK(std::abs(rebuilt - adm.Y(k, j)) <= 1e-12 * std::max(1.0, adm.mag(k, j)));
    }
}

TEST_CASE("symmetry and zero row sums over random radial grids") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_int_distribution<int> size(2, 20);
    const int n = size(rng);
    const GridTopology topo = random_radial(n, rng);
    const LineParams p = random_params(topo.line_count, rng);
    const AdmittanceModel adm = build_admittance(topo, p);
    CHECK((adm.Y - adm.Y.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXcd row_sums = adm.Y.rowwise().sum();
    CHECK(row_sums.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("off-diagonal recovers primitive admittance of adjacent pairs") {
  std::mt19937_64 rng(5);
  const GridTopology topo = random_radial(8, rng);
  const LineParams p = random_params(topo.line_count, rng);
  const AdmittanceModel adm = build_admittance(topo, p);
  for (const auto& line : topo.lines) {
    const std::complex<double> y = 1.0 / std::complex<double>(p.R(line.id), p.X(line.id));
    CHECK(std::abs(-adm.Y(line.top, line.bottom) - y) < 1e-12 * std::abs(y));
  }
}

TEST_CASE("per-unit conversion") {
  const PerUnitBase base{10000.0, 400.0};
  CHECK(base.z_base_ohm() == doctest::Approx(16.0));

  LineParams si{Eigen::VectorXd(1), Eigen::VectorXd(1)};
  si.R << 0.150;
  si.X << 0.1414;
  const LineParams pu = to_per_unit(si, base);
  CHECK(pu.R(0) == doctest::Approx(0.009375).epsilon(1e-12));

  // base impedance maps to 1 pu
  LineParams unit{Eigen::VectorXd::Constant(1, 16.0), Eigen::VectorXd::Constant(1, 16.0)};
  CHECK(to_per_unit(unit, base).R(0) == doctest::Approx(1.0).epsilon(1e-14));

  // round trip
  std::mt19937_64 rng(11);
  const LineParams random = random_params(6, rng, 0.01, 10.0);
  const LineParams back = to_si(to_per_unit(random, base), base);
  CHECK(max_rel_err(back.R, random.R) < 1e-14);
  CHECK(max_rel_err(back.X, random.X) < 1e-14);
}

TEST_CASE("validate_params rejects non-positive entries") {
  LineParams bad{Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2)};
  bad.X(1) = -0.1;
  CHECK_THROWS_AS(validate_params(bad), ZeroImpedance);
  LineParams good{Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2)};
  CHECK_NOTHROW(validate_params(good));
}
