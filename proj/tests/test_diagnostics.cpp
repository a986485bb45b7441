#include <doctest.h>

#include <algorithm>

#include "test_helpers.hpp"
#include "gridest/diagnostics.hpp"

using namespace gridest;
using namespace gridest::testing;

namespace {

SweepScenario district_scenario(std::uint64_t seed) {
  const District d;
  SweepScenario sc;
  sc.topo = d.topo;
  sc.truth = d.perturbed_truth(seed);
  sc.datasheet = d.datasheet;
  sc.base_P = Eigen::VectorXd::Zero(4);
  sc.base_Q = Eigen::VectorXd::Zero(4);
  for (int k : d.topo.non_slack) {
    sc.base_P(k) = 0.3;  // 3 kW on the 10 kVA base
    sc.base_Q(k) = 0.3;
  }
  sc.config.max_iter = 200;
  sc.seed = seed;
  return sc;
}

std::vector<Snapshot> campaign(const District& d, const LineParams& truth, int count,
                               double noise_sigma, std::uint64_t seed) {
  std::vector<ScheduleEntry> schedule;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < count; ++t)
    schedule.push_back({"t" + std::to_string(t), random_injections(d.topo, rng, 0.35),
                        random_injections(d.topo, rng, 0.35)});
  NoiseModel noise;
  noise.vmag_rel = noise_sigma;
  noise.pq_abs = noise_sigma;
  noise.seed = seed;
  return synthesize_snapshots(d.topo, truth, schedule, noise);
}

double plateau(const DiagnosticsReport& report) {
  std::vector<double> values;
  for (const auto& rec : report.records) {
    const auto it = rec.metrics.find("rcond");
    if (it != rec.metrics.end()) values.push_back(it->second);
  }
  std::sort(values.begin(), values.end());
  return values[values.size() / 2];
}

}  // namespace

TEST_CASE("rcond collapses at r = 0 and r = 1") {
  const SweepScenario sc = district_scenario(7);
  const DiagnosticsReport report = rcond_sweep(sc, default_r_grid());
  REQUIRE(report.records.size() == 121);

  const double med = plateau(report);
  double at0 = -1, at1 = -1, at_half = -1, near1 = -1;
  for (const auto& rec : report.records) {
    if (rec.metrics.find("rcond") == rec.metrics.end()) continue;
    const double rc = rec.metrics.at("rcond");
    CHECK(rc >= 0.0);
    CHECK(rc <= 1.0);
    if (std::abs(rec.value - 0.0) < 1e-12) at0 = rc;
    if (std::abs(rec.value - 1.0) < 1e-12) at1 = rc;
    if (std::abs(rec.value - 0.5) < 1e-12) at_half = rc;
    if (std::abs(rec.value - 0.99) < 1e-12) near1 = rc;
  }
  CHECK(at0 < med * 1e-6);
  CHECK(at1 < med * 1e-6);
  CHECK(at_half > med * 1e-2);
  CHECK(near1 > med * 1e-2);  // 1% separation already recovers conditioning
}

TEST_CASE("rcond is invariant under snapshot order and r-symmetry") {
  const SweepScenario sc = district_scenario(7);
  const std::vector<double> grid = {0.0, 0.3, 1.0};
  const DiagnosticsReport forward = rcond_sweep(sc, grid);

  // scale t1 instead of t2: same collapse points by symmetry
  SweepScenario swapped = sc;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = grid[i];
    std::vector<ScheduleEntry> schedule = {
        {"t1", r * sc.base_P, r * sc.base_Q}, {"t2", sc.base_P, sc.base_Q}};
    const auto snaps = synthesize_snapshots(sc.topo, sc.truth, schedule, {});
    const auto thetas = default_angle_guesses(sc.topo, sc.datasheet, snaps);
    const JacobianMatrix jac =
        assemble_jacobian(sc.topo, sc.datasheet, snaps, AngleRegime::RMS, thetas);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac.M);
    const double rc = svd.singularValues()(svd.singularValues().size() - 1) /
                      svd.singularValues()(0);
    CHECK(rc == doctest::Approx(forward.records[i].metrics.at("rcond")).epsilon(1e-6));
  }
}

TEST_CASE("error reduction endpoints") {
  const District d;
  const LineParams truth = d.perturbed_truth(31);
  const auto snaps = synthesize_snapshots(d.topo, truth, d.two_snapshot_schedule(), {});

  // estimated = truth on noiseless data: 100% at every node
  for (double r : error_reduction(d.topo, d.datasheet, truth, snaps))
    CHECK(r == doctest::Approx(100.0).epsilon(1e-6));

  // estimated = datasheet: identical errors, 0%
  for (double r : error_reduction(d.topo, d.datasheet, d.datasheet, snaps))
    CHECK(r == doctest::Approx(0.0));
}

TEST_CASE("sample count study plateaus on noisy data") {
  const District d;
  const LineParams truth = d.perturbed_truth(37);
  SweepScenario sc = district_scenario(37);
  const auto snaps = campaign(d, truth, 30, 2e-4, 37);
  const DiagnosticsReport report = sample_count_study(sc, snaps, {2, 10, 30});
  REQUIRE(report.records.size() == 3);
  const double full = report.records[2].metrics.at("bounded_ls_reduction_mean_pct");
  CHECK(full > 0.0);
  // two shuffle seeds agree at the full sample count
  sc.seed = 38;
  const DiagnosticsReport other = sample_count_study(sc, snaps, {30});
  CHECK(other.records[0].metrics.at("bounded_ls_reduction_mean_pct") ==
        doctest::Approx(full).epsilon(1e-9));
}

TEST_CASE("rho sweep recovers for moderate rho and reports failures") {
  const District d;
  const LineParams truth = d.perturbed_truth(41);
  SweepScenario sc = district_scenario(41);
  const auto snaps = campaign(d, truth, 10, 0.0, 41);
  const DiagnosticsReport report = rho_sweep(sc, snaps, {0.1, 1.0, 100.0});
  REQUIRE(report.records.size() == 3);
  CHECK(report.records[0].metrics.at("bounded_ls_max_r_err_pct") < 1.0);
  CHECK(report.records[1].metrics.at("nr_ls_max_r_err_pct") < 1e-4);  // starts at truth
  // rho = 100: any outcome allowed, but it must be recorded
  CHECK(report.records[2].status != "");
  CHECK(report.records[2].metrics.count("bounded_ls_max_r_err_pct") +
            report.records[2].metrics.count("nr_ls_max_r_err_pct") + 1 >
        0);
}

TEST_CASE("default grids match the documented ranges") {
  const auto r = default_r_grid();
  CHECK(r.front() == doctest::Approx(-0.1));
  CHECK(r.back() == doctest::Approx(1.1));
  const auto rho = default_rho_grid();
  CHECK(rho.front() == doctest::Approx(0.01));
  CHECK(rho.back() == doctest::Approx(100.0));
}
