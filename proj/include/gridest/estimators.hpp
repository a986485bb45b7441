#pragma once

#include "gridest/sensitivity.hpp"

namespace gridest {

enum class SolveStatus { Converged, NoConvergence, SingularJacobian, RankDeficient };

std::string to_string(SolveStatus status);

struct SolverConfig {
  double alpha = 1.0;         // NR step size, (0, 1]
  double tol = 1e-6;          // convergence tolerance on |dx|_inf, pu
  int max_iter = 50;
  AngleRegime regime = AngleRegime::RMS;
  double bound_eps = 1e-9;    // lower bound standing in for R, X > 0
  double lambda_init = 1e-3;  // initial damping of the bounded solver
};

struct EstimationProblem {
  GridTopology topo;
  std::vector<Snapshot> snapshots;
  LineParams initial;
  std::vector<Eigen::VectorXd> initial_theta;  // per snapshot, RMS regime
  SolverConfig config;
};

struct IterationRecord {
  double dx_inf = 0.0;
  double residual_norm = 0.0;
  double rcond = 0.0;
};

struct EstimateReport {
  LineParams params;
  std::vector<Eigen::VectorXd> theta;  // per snapshot, full length N
  std::vector<IterationRecord> trace;
  SolveStatus status = SolveStatus::NoConvergence;
  bool negative_params_seen = false;
  bool bound_active = false;
  double rcond_at_failure = 0.0;
  double wall_seconds = 0.0;
};

/// Square NR over [R, X] with PMU angles, one snapshot.
EstimateReport estimate_nr_square(const EstimationProblem& problem);

/// Square NR over [R, X, theta^t1, theta^t2] from two RMS snapshots.
EstimateReport estimate_nr_rms(const EstimationProblem& problem);

/// NR with a linear least-squares subproblem per iteration; overdetermined
/// systems, any snapshot count the regime supports.
EstimateReport estimate_nr_ls(const EstimationProblem& problem);

/// Damped (trust-region style) nonlinear least squares with bound
/// constraints R, X >= eps and theta in [-pi, pi], analytical Jacobian.
EstimateReport estimate_bounded_ls(const EstimationProblem& problem);

/// Angle initial guesses from a forward load flow at the given parameters;
/// falls back to flat angles when the load flow fails.
std::vector<Eigen::VectorXd> default_angle_guesses(const GridTopology& topo,
                                                   const LineParams& params,
                                                   const std::vector<Snapshot>& snapshots);

}  // namespace gridest
