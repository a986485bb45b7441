#include "gridest/diagnostics.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gridest {

namespace {

double svd_rcond(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  return smax > 0.0 ? sv(sv.size() - 1) / smax : 0.0;
}

double max_rel_err_pct(const Eigen::VectorXd& est, const Eigen::VectorXd& truth) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i)
    worst = std::max(worst, std::abs(est(i) - truth(i)) / std::abs(truth(i)));
  return 100.0 * worst;
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  int n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

DiagnosticsReport rcond_sweep(const SweepScenario& scenario,
                              const std::vector<double>& r_grid) {
  DiagnosticsReport report;
  report.sweep_name = "rcond";
  report.metric_columns = {"rcond"};
  const auto& topo = scenario.topo;

  for (double r : r_grid) {
    SweepRecord rec;
    rec.value = r;
    try {
      std::vector<ScheduleEntry> schedule = {
          {"t1", scenario.base_P, scenario.base_Q},
          {"t2", r * scenario.base_P, r * scenario.base_Q}};
      const auto snaps = synthesize_snapshots(topo, scenario.truth, schedule, {});
      const auto thetas = default_angle_guesses(topo, scenario.datasheet, snaps);
      const JacobianMatrix jac =
          assemble_jacobian(topo, scenario.datasheet, snaps, AngleRegime::RMS, thetas);
      rec.metrics["rcond"] = svd_rcond(jac.M);
      rec.status = "ok";
    } catch (const Error& e) {
      rec.status = std::string("error: ") + e.what();
    }
    report.records.push_back(std::move(rec));
  }
  return report;
}

std::vector<double> error_reduction(const GridTopology& topo,
                                    const LineParams& params_datasheet,
                                    const LineParams& params_estimated,
                                    const std::vector<Snapshot>& snapshots) {
  const auto& ns = topo.non_slack;
  const int m = static_cast<int>(ns.size());
  Eigen::VectorXd err_ds = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd err_est = Eigen::VectorXd::Zero(m);
  int used = 0;

  for (const auto& snap : snapshots) {
    const std::complex<double> slack_v(snap.Vmag(topo.slack), 0.0);
    Eigen::VectorXd v_ds, v_est;
    try {
      v_ds = solve_load_flow(topo, params_datasheet, snap.P, snap.Q, slack_v).vmag;
      v_est = solve_load_flow(topo, params_estimated, snap.P, snap.Q, slack_v).vmag;
    } catch (const Error&) {
      continue;  // snapshot dropped from the average
    }
    for (int i = 0; i < m; ++i) {
      err_ds(i) += std::abs(snap.Vmag(ns[i]) - v_ds(ns[i]));
      err_est(i) += std::abs(snap.Vmag(ns[i]) - v_est(ns[i]));
    }
    ++used;
  }

  std::vector<double> out(m, std::numeric_limits<double>::quiet_NaN());
  if (used == 0) return out;
  for (int i = 0; i < m; ++i) {
    if (err_ds(i) > 0.0)
      out[i] = 100.0 * (err_ds(i) - err_est(i)) / err_ds(i);
    else
      out[i] = 0.0;
  }
  return out;
}

DiagnosticsReport sample_count_study(const SweepScenario& scenario,
                                     const std::vector<Snapshot>& snapshots,
                                     const std::vector<int>& counts) {
  DiagnosticsReport report;
  report.sweep_name = "samples";
  report.metric_columns = {"nr_ls_reduction_mean_pct", "bounded_ls_reduction_mean_pct"};

  std::vector<int> order(snapshots.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(scenario.seed);
  std::shuffle(order.begin(), order.end(), rng);

  for (int count : counts) {
    SweepRecord rec;
    rec.value = count;
    if (count < 2 || count > static_cast<int>(snapshots.size())) {
      rec.status = "error: count out of range";
      report.records.push_back(std::move(rec));
      continue;
    }
    EstimationProblem problem;
    problem.topo = scenario.topo;
    for (int i = 0; i < count; ++i) problem.snapshots.push_back(snapshots[order[i]]);
    problem.initial = scenario.datasheet;
    problem.config = scenario.config;
    problem.config.regime = AngleRegime::RMS;

    std::string status;
    for (const auto& [name, run] :
         {std::pair<std::string, EstimateReport (*)(const EstimationProblem&)>{
              "nr_ls", &estimate_nr_ls},
          {"bounded_ls", &estimate_bounded_ls}}) {
      try {
        const EstimateReport est = run(problem);
        rec.metrics[name + "_reduction_mean_pct"] = mean_of(
            error_reduction(scenario.topo, scenario.datasheet, est.params, snapshots));
        status += name + "=" + to_string(est.status) + " ";
      } catch (const Error& e) {
        status += name + "=error ";
      }
    }
    rec.status = status;
    report.records.push_back(std::move(rec));
  }
  return report;
}

DiagnosticsReport rho_sweep(const SweepScenario& scenario,
                            const std::vector<Snapshot>& snapshots,
                            const std::vector<double>& rho_grid) {
  DiagnosticsReport report;
  report.sweep_name = "rho";
  report.metric_columns = {"nr_ls_max_r_err_pct", "nr_ls_max_x_err_pct",
                           "bounded_ls_max_r_err_pct", "bounded_ls_max_x_err_pct"};

  for (double rho : rho_grid) {
    SweepRecord rec;
    rec.value = rho;
    EstimationProblem problem;
    problem.topo = scenario.topo;
    problem.snapshots = snapshots;
    problem.initial = {rho * scenario.truth.R, rho * scenario.truth.X};
    problem.config = scenario.config;
    problem.config.regime = AngleRegime::RMS;

    std::string status;
    for (const auto& [name, run] :
         {std::pair<std::string, EstimateReport (*)(const EstimationProblem&)>{
              "nr_ls", &estimate_nr_ls},
          {"bounded_ls", &estimate_bounded_ls}}) {
      try {
        const EstimateReport est = run(problem);
        rec.metrics[name + "_max_r_err_pct"] = max_rel_err_pct(est.params.R, scenario.truth.R);
        rec.metrics[name + "_max_x_err_pct"] = max_rel_err_pct(est.params.X, scenario.truth.X);
        status += name + "=" + to_string(est.status) + " ";
      } catch (const Error&) {
        status += name + "=error ";
      }
    }
    rec.status = status;
    report.records.push_back(std::move(rec));
  }
  return report;
}

std::vector<double> default_r_grid() {
  std::vector<double> grid;
  for (int i = -10; i <= 110; ++i) grid.push_back(i / 100.0);
  return grid;
}

std::vector<double> default_rho_grid() {
  std::vector<double> grid;
  const double lo = std::log10(0.01), hi = std::log10(100.0);
  const int points = 17;
  for (int i = 0; i < points; ++i)
    grid.push_back(std::pow(10.0, lo + (hi - lo) * i / (points - 1)));
  return grid;
}

}  // namespace gridest
