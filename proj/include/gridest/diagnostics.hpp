#pragma once

#include <map>

#include "gridest/estimators.hpp"

namespace gridest {

/// One record per sweep grid point. Metric keys depend on the sweep kind
/// (e.g. "rcond", "nr_ls_max_r_err_pct", "reduction_mean_pct").
struct SweepRecord {
  double value = 0.0;
  std::map<std::string, double> metrics;
  std::string status;
};

struct DiagnosticsReport {
  std::string sweep_name;
  std::vector<std::string> metric_columns;
  std::vector<SweepRecord> records;
};

/// Base scenario shared by the sweep studies, everything in per-unit.
struct SweepScenario {
  GridTopology topo;
  LineParams truth;      // parameters used to synthesize measurements
  LineParams datasheet;  // initial guess for the estimators
  Eigen::VectorXd base_P;  // t1 injections, length N
  Eigen::VectorXd base_Q;
  SolverConfig config;
  std::uint64_t seed = 0;
};

/// Fig.-2 style study: snapshot t2 scaled by power ratio r, reciprocal
/// condition number of the first-iterate RMS Jacobian per r (exact, from
/// singular values).
DiagnosticsReport rcond_sweep(const SweepScenario& scenario,
                              const std::vector<double>& r_grid);

/// Per-node voltage-error reduction (%) of estimated vs datasheet
/// parameters against measured snapshots; slack node excluded.
std::vector<double> error_reduction(const GridTopology& topo,
                                    const LineParams& params_datasheet,
                                    const LineParams& params_estimated,
                                    const std::vector<Snapshot>& snapshots);

/// Fig.-3 style study: error reduction of both LS estimators as a function
/// of the number of samples used, sample order shuffled by seed.
DiagnosticsReport sample_count_study(const SweepScenario& scenario,
                                     const std::vector<Snapshot>& snapshots,
                                     const std::vector<int>& counts);

/// Fig.-4 style study: both LS estimators started from rho * truth; records
/// the max R and X errors per rho.
DiagnosticsReport rho_sweep(const SweepScenario& scenario,
                            const std::vector<Snapshot>& snapshots,
                            const std::vector<double>& rho_grid);

std::vector<double> default_r_grid();    // [-0.1, 1.1], step 0.01
std::vector<double> default_rho_grid();  // log-spaced in [0.01, 100]

}  // namespace gridest
