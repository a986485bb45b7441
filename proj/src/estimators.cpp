#include "gridest/estimators.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <chrono>
#include <cmath>
#include <numbers>

namespace gridest {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::NoConvergence: return "no_convergence";
    case SolveStatus::SingularJacobian: return "singular_jacobian";
    case SolveStatus::RankDeficient: return "rank_deficient";
  }
  return "unknown";
}

namespace {

// Unknown vector layout: [R_1..R_L, X_1..X_L, per-snapshot theta blocks
// over non-slack nodes (RMS regime only)].
struct Packing {
  const GridTopology* topo;
  AngleRegime regime;
  int nt;
  int nl;
  int m;  // non-slack count

  int size() const { return 2 * nl + (regime == AngleRegime::RMS ? nt * m : 0); }

  Eigen::VectorXd pack(const LineParams& params,
                       const std::vector<Eigen::VectorXd>& thetas) const {
    Eigen::VectorXd x(size());
    x.segment(0, nl) = params.R;
    x.segment(nl, nl) = params.X;
    if (regime == AngleRegime::RMS) {
      for (int t = 0; t < nt; ++t)
        for (int i = 0; i < m; ++i)
          x(2 * nl + t * m + i) = thetas[t](topo->non_slack[i]);
    }
    return x;
  }

  LineParams params_of(const Eigen::VectorXd& x) const {
    return {x.segment(0, nl), x.segment(nl, nl)};
  }

  // Full-length angle vectors; slack pinned to 0.
  std::vector<Eigen::VectorXd> thetas_of(const Eigen::VectorXd& x,
                                         const std::vector<Snapshot>& snapshots) const {
    std::vector<Eigen::VectorXd> out(nt);
    for (int t = 0; t < nt; ++t) {
      if (regime == AngleRegime::RMS) {
        out[t] = Eigen::VectorXd::Zero(topo->node_count);
        for (int i = 0; i < m; ++i)
          out[t](topo->non_slack[i]) = x(2 * nl + t * m + i);
      } else {
        out[t] = *snapshots[t].theta;
      }
    }
    return out;
  }
};

Eigen::VectorXd stacked_residual(const GridTopology& topo, const LineParams& params,
                                 const std::vector<Snapshot>& snapshots,
                                 const std::vector<Eigen::VectorXd>& thetas) {
  const int m = static_cast<int>(topo.non_slack.size());
  const int nt = static_cast<int>(snapshots.size());
  Eigen::VectorXd out(nt * 2 * m);
  const AdmittanceModel adm = build_admittance(topo, params);
  for (int t = 0; t < nt; ++t)
    out.segment(t * 2 * m, 2 * m) = mismatch(topo, adm, snapshots[t], &thetas[t]);
  return out;
}

bool has_nonpositive(const LineParams& params) {
  return (params.R.array() <= 0.0).any() || (params.X.array() <= 0.0).any();
}

enum class LinearSolve { LU, QR };

EstimateReport run_newton(const EstimationProblem& problem, LinearSolve mode) {
  const auto start = std::chrono::steady_clock::now();
  const auto& topo = problem.topo;
  const auto& cfg = problem.config;
  Packing pk{&topo, cfg.regime, static_cast<int>(problem.snapshots.size()),
             topo.line_count, static_cast<int>(topo.non_slack.size())};

  std::vector<Eigen::VectorXd> theta0 = problem.initial_theta;
  if (cfg.regime == AngleRegime::RMS && theta0.empty())
    theta0 = default_angle_guesses(topo, problem.initial, problem.snapshots);
  if (cfg.regime == AngleRegime::RMS && static_cast<int>(theta0.size()) != pk.nt)
    throw MissingAngleGuess("need one angle guess per snapshot");

  Eigen::VectorXd x = pk.pack(problem.initial, theta0);

  EstimateReport report;
  double best_residual = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    const LineParams params = pk.params_of(x);
    if (has_nonpositive(params)) report.negative_params_seen = true;
    std::vector<Eigen::VectorXd> thetas = pk.thetas_of(x, problem.snapshots);

    Eigen::VectorXd residual;
    JacobianMatrix jac;
    try {
      residual = stacked_residual(topo, params, problem.snapshots, thetas);
      jac = assemble_jacobian(topo, params, problem.snapshots, cfg.regime, thetas);
    } catch (const ZeroImpedance&) {
      report.status = SolveStatus::NoConvergence;
      break;
    }

    Eigen::VectorXd dx;
    double rcond = 0.0;
    if (mode == LinearSolve::LU) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac.M);
      rcond = lu.rcond();
      if (!std::isfinite(rcond)) rcond = 0.0;  // exactly singular factorization
      if (!(rcond > 1e-14)) {
        report.status = SolveStatus::SingularJacobian;
        report.rcond_at_failure = rcond;
        break;
      }
      dx = lu.solve(-residual);
    } else {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac.M);
      const auto& rdiag = qr.matrixQR().diagonal();
      const double rmax = rdiag.cwiseAbs().maxCoeff();
      const double rmin =
          std::abs(rdiag(std::min<Eigen::Index>(rdiag.size(), jac.M.cols()) - 1));
      rcond = rmax > 0.0 ? rmin / rmax : 0.0;
      if (qr.rank() < jac.M.cols()) {
        report.status = SolveStatus::RankDeficient;
        report.rcond_at_failure = rcond;
        break;
      }
      dx = qr.solve(-residual);
    }

    const double dx_inf = dx.lpNorm<Eigen::Infinity>();
    const double res_norm = residual.norm();
    report.trace.push_back({dx_inf, res_norm, rcond});

    if (dx_inf <= cfg.tol) {
      // a sub-tolerance step cannot oscillate; apply it undamped so the
      // limit does not depend on alpha
      x += dx;
      report.status = SolveStatus::Converged;
      break;
    }
    x += cfg.alpha * dx;
    // residual stagnation guard for small alpha
    if (res_norm < best_residual * (1.0 - 1e-12)) {
      best_residual = res_norm;
      stall = 0;
    } else if (++stall >= 10) {
      report.status = SolveStatus::NoConvergence;
      break;
    }
  }

  report.params = pk.params_of(x);
  report.theta = pk.thetas_of(x, problem.snapshots);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

std::vector<Eigen::VectorXd> default_angle_guesses(const GridTopology& topo,
                                                   const LineParams& params,
                                                   const std::vector<Snapshot>& snapshots) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(snapshots.size());
  for (const auto& snap : snapshots) {
    try {
      const std::complex<double> slack_v(snap.Vmag(topo.slack), 0.0);
      out.push_back(solve_load_flow(topo, params, snap.P, snap.Q, slack_v).theta);
    } catch (const Error&) {
      out.push_back(Eigen::VectorXd::Zero(topo.node_count));  // flat fallback
    }
  }
  return out;
}

EstimateReport estimate_nr_square(const EstimationProblem& problem) {
  if (problem.snapshots.size() != 1)
    throw ConfigError("nr-square takes exactly one snapshot");
  if (!problem.snapshots[0].theta)
    throw MissingAngles("nr-square requires PMU angles in the snapshot");
  EstimationProblem p = problem;
  p.config.regime = AngleRegime::PMU;
  return run_newton(p, LinearSolve::LU);
}

EstimateReport estimate_nr_rms(const EstimationProblem& problem) {
  if (problem.snapshots.size() != 2)
    throw ConfigError("nr-rms takes exactly two snapshots");
  EstimationProblem p = problem;
  p.config.regime = AngleRegime::RMS;
  return run_newton(p, LinearSolve::LU);
}

EstimateReport estimate_nr_ls(const EstimationProblem& problem) {
  const int m = static_cast<int>(problem.topo.non_slack.size());
  const int nt = static_cast<int>(problem.snapshots.size());
  const int cols = 2 * problem.topo.line_count +
                   (problem.config.regime == AngleRegime::RMS ? nt * m : 0);
  if (nt * 2 * m < cols)
    throw ConfigError("least-squares needs at least as many residual rows as unknowns");
  return run_newton(problem, LinearSolve::QR);
}

EstimateReport estimate_bounded_ls(const EstimationProblem& problem) {
  const auto start = std::chrono::steady_clock::now();
  const auto& topo = problem.topo;
  const auto& cfg = problem.config;
  Packing pk{&topo, cfg.regime, static_cast<int>(problem.snapshots.size()),
             topo.line_count, static_cast<int>(topo.non_slack.size())};

  if (cfg.regime == AngleRegime::PMU)
    for (const auto& snap : problem.snapshots)
      if (!snap.theta) throw MissingAngles("PMU regime requires snapshot angles");

  std::vector<Eigen::VectorXd> theta0 = problem.initial_theta;
  if (cfg.regime == AngleRegime::RMS && theta0.empty())
    theta0 = default_angle_guesses(topo, problem.initial, problem.snapshots);

  const int nx = pk.size();
  Eigen::VectorXd lb(nx), ub(nx);
  lb.head(2 * pk.nl).setConstant(cfg.bound_eps);
  ub.head(2 * pk.nl).setConstant(std::numeric_limits<double>::infinity());
  if (nx > 2 * pk.nl) {
    lb.tail(nx - 2 * pk.nl).setConstant(-std::numbers::pi);
    ub.tail(nx - 2 * pk.nl).setConstant(std::numbers::pi);
  }

  Eigen::VectorXd x = pk.pack(problem.initial, theta0).cwiseMax(lb).cwiseMin(ub);

  EstimateReport report;
  double lambda = cfg.lambda_init;

  auto eval_cost = [&](const Eigen::VectorXd& z, Eigen::VectorXd& residual) -> bool {
    try {
      residual = stacked_residual(topo, pk.params_of(z), problem.snapshots,
                                  pk.thetas_of(z, problem.snapshots));
      return residual.allFinite();
    } catch (const Error&) {
      return false;
    }
  };

  Eigen::VectorXd residual;
  if (!eval_cost(x, residual)) throw ConfigError("initial point is not evaluable");
  double cost = residual.squaredNorm();

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    const JacobianMatrix jac = assemble_jacobian(topo, pk.params_of(x), problem.snapshots,
                                                 cfg.regime,
                                                 pk.thetas_of(x, problem.snapshots));
    const Eigen::MatrixXd jtj = jac.M.transpose() * jac.M;
    const Eigen::VectorXd g = jac.M.transpose() * residual;
    Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12);

    const double rcond = [&] {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac.M);
      const auto& rd = qr.matrixQR().diagonal();
      const double rmax = rd.cwiseAbs().maxCoeff();
      return rmax > 0.0 ? std::abs(rd(rd.size() - 1)) / rmax : 0.0;
    }();

    // projected-gradient first-order optimality
    double opt = 0.0;
    for (int i = 0; i < nx; ++i) {
      double gi = -g(i);
      if (x(i) <= lb(i) && gi < 0.0) gi = 0.0;
      if (x(i) >= ub(i) && gi > 0.0) gi = 0.0;
      opt = std::max(opt, std::abs(gi));
    }
    if (opt < 1e-14) {
      report.trace.push_back({0.0, std::sqrt(cost), rcond});
      report.status = SolveStatus::Converged;
      break;
    }

    bool accepted = false;
    double dx_inf = 0.0;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      const Eigen::VectorXd step = ldlt.solve(-g);
      const Eigen::VectorXd cand = (x + step).cwiseMax(lb).cwiseMin(ub);
      Eigen::VectorXd cand_residual;
      if (eval_cost(cand, cand_residual)) {
        const double cand_cost = cand_residual.squaredNorm();
        if (cand_cost < cost) {
          dx_inf = (cand - x).lpNorm<Eigen::Infinity>();
          x = cand;
          residual = std::move(cand_residual);
          cost = cand_cost;
          lambda = std::max(lambda / 3.0, 1e-14);
          accepted = true;
          break;
        }
      }
      lambda *= 3.0;
    }

    report.trace.push_back({dx_inf, std::sqrt(cost), rcond});
    if (!accepted) {
      // no downhill step left at any damping
      report.status = SolveStatus::Converged;
      break;
    }
    if (dx_inf <= cfg.tol) {
      report.status = SolveStatus::Converged;
      break;
    }
  }

  report.params = pk.params_of(x);
  report.theta = pk.thetas_of(x, problem.snapshots);
  for (int i = 0; i < nx; ++i)
    if (x(i) <= lb(i) + 1e-12 || (std::isfinite(ub(i)) && x(i) >= ub(i) - 1e-12))
      report.bound_active = true;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace gridest
