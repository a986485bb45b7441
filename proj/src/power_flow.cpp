#include "gridest/power_flow.hpp"

#include <Eigen/LU>
#include <cmath>
#include <random>

namespace gridest {

namespace {

// Calculated injections per Kirchhoff: P_k = sum_j VkVj|Ykj|cos(tk-tj-phi),
// Q_k with sin.
void calc_injections(const AdmittanceModel& adm, const Eigen::VectorXd& vmag,
                     const Eigen::VectorXd& theta, Eigen::VectorXd& p_calc,
                     Eigen::VectorXd& q_calc) {
  const int n = static_cast<int>(vmag.size());
  p_calc.setZero(n);
  q_calc.setZero(n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      const double m = adm.mag(k, j);
      if (m == 0.0) continue;
      const double u = theta(k) - theta(j) - adm.ang(k, j);
      p_calc(k) += vmag(k) * vmag(j) * m * std::cos(u);
      q_calc(k) += vmag(k) * vmag(j) * m * std::sin(u);
    }
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

LoadFlowResult solve_load_flow(const GridTopology& topo, const LineParams& params,
                               const Eigen::VectorXd& P, const Eigen::VectorXd& Q,
                               std::complex<double> slack_voltage,
                               const LoadFlowConfig& config) {
  const int n = topo.node_count;
  if (P.size() != n || Q.size() != n) throw DimensionMismatch("injection vector length");
  if (!(std::abs(slack_voltage) > 0.0)) throw ConfigError("slack voltage magnitude must be > 0");

  const AdmittanceModel adm = build_admittance(topo, params);
  const auto& ns = topo.non_slack;
  const int m = static_cast<int>(ns.size());

  // flat start at the slack magnitude
  Eigen::VectorXd vmag = Eigen::VectorXd::Constant(n, std::abs(slack_voltage));
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(n, std::arg(slack_voltage));

  Eigen::VectorXd p_calc, q_calc;
  Eigen::VectorXd g(2 * m);
  Eigen::MatrixXd jac(2 * m, 2 * m);

  for (int iter = 1; iter <= config.max_iter; ++iter) {
    calc_injections(adm, vmag, theta, p_calc, q_calc);
    for (int i = 0; i < m; ++i) {
      g(i) = p_calc(ns[i]) - P(ns[i]);
      g(m + i) = q_calc(ns[i]) - Q(ns[i]);
    }
    if (g.lpNorm<Eigen::Infinity>() < config.tol)
      return {vmag, theta, iter - 1};

    // rows: [dP_ns, dQ_ns]; cols: [theta_ns, vmag_ns]
    for (int i = 0; i < m; ++i) {
      const int k = ns[i];
      for (int c = 0; c < m; ++c) {
        const int node = ns[c];
        double dp_dt = 0, dq_dt = 0, dp_dv = 0, dq_dv = 0;
        if (node == k) {
          for (int j = 0; j < n; ++j) {
            const double mag = adm.mag(k, j);
            if (mag == 0.0) continue;
            const double u = theta(k) - theta(j) - adm.ang(k, j);
            if (j != k) {
              dp_dt -= vmag(k) * vmag(j) * mag * std::sin(u);
              dq_dt += vmag(k) * vmag(j) * mag * std::cos(u);
              dp_dv += vmag(j) * mag * std::cos(u);
              dq_dv += vmag(j) * mag * std::sin(u);
            } else {
              dp_dv += 2.0 * vmag(k) * mag * std::cos(u);
              dq_dv += 2.0 * vmag(k) * mag * std::sin(u);
            }
          }
        } else {
          const double mag = adm.mag(k, node);
          if (mag != 0.0) {
            const double u = theta(k) - theta(node) - adm.ang(k, node);
            dp_dt = vmag(k) * vmag(node) * mag * std::sin(u);
            dq_dt = -vmag(k) * vmag(node) * mag * std::cos(u);
            dp_dv = vmag(k) * mag * std::cos(u);
            dq_dv = vmag(k) * mag * std::sin(u);
          }
        }
        jac(i, c) = dp_dt;
        jac(i, m + c) = dp_dv;
        jac(m + i, c) = dq_dt;
        jac(m + i, m + c) = dq_dv;
      }
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    const double rc = lu.rcond();
    if (!(rc > 1e-14)) throw SingularJacobian(rc);
    const Eigen::VectorXd dx = lu.solve(-g);
    for (int i = 0; i < m; ++i) {
      theta(ns[i]) += dx(i);
      vmag(ns[i]) += dx(m + i);
    }
  }

  calc_injections(adm, vmag, theta, p_calc, q_calc);
  double worst = 0.0;
  for (int i = 0; i < m; ++i) {
    worst = std::max(worst, std::abs(p_calc(ns[i]) - P(ns[i])));
    worst = std::max(worst, std::abs(q_calc(ns[i]) - Q(ns[i])));
  }
  throw NoConvergence(config.max_iter, worst);
}

Eigen::VectorXd mismatch(const GridTopology& topo, const AdmittanceModel& adm,
                         const Snapshot& snapshot, const Eigen::VectorXd* theta_override) {
  const int n = topo.node_count;
  if (snapshot.P.size() != n || snapshot.Q.size() != n || snapshot.Vmag.size() != n)
    throw DimensionMismatch("snapshot vector length");
  const Eigen::VectorXd* theta = theta_override;
  if (!theta && snapshot.theta) theta = &*snapshot.theta;
  if (!theta) throw MissingAngles("snapshot has no angles and no guess was supplied");
  if (theta->size() != n) throw DimensionMismatch("theta vector length");

  Eigen::VectorXd p_calc, q_calc;
  calc_injections(adm, snapshot.Vmag, *theta, p_calc, q_calc);

  const auto& ns = topo.non_slack;
  const int m = static_cast<int>(ns.size());
  Eigen::VectorXd res(2 * m);
  for (int i = 0; i < m; ++i) {
    res(i) = p_calc(ns[i]) - snapshot.P(ns[i]);
    res(m + i) = q_calc(ns[i]) - snapshot.Q(ns[i]);
  }
  return res;
}

Eigen::VectorXd mismatch(const GridTopology& topo, const LineParams& params,
                         const Snapshot& snapshot, const Eigen::VectorXd* theta_override) {
  return mismatch(topo, build_admittance(topo, params), snapshot, theta_override);
}

std::vector<Snapshot> synthesize_snapshots(const GridTopology& topo,
                                           const LineParams& true_params,
                                           const std::vector<ScheduleEntry>& schedule,
                                           const NoiseModel& noise, bool with_angles,
                                           std::complex<double> slack_voltage) {
  if (schedule.empty()) throw ConfigError("empty injection schedule");
  std::vector<Snapshot> out;
  out.reserve(schedule.size());
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& entry = schedule[i];
    LoadFlowResult lf = solve_load_flow(topo, true_params, entry.P, entry.Q, slack_voltage);

    Snapshot snap;
    snap.label = entry.label;
    snap.P = entry.P;
    snap.Q = entry.Q;
    // slack injections implied by the solved flow
    Eigen::VectorXd p_calc, q_calc;
    const AdmittanceModel adm = build_admittance(topo, true_params);
    calc_injections(adm, lf.vmag, lf.theta, p_calc, q_calc);
    snap.P(topo.slack) = p_calc(topo.slack);
    snap.Q(topo.slack) = q_calc(topo.slack);
    snap.Vmag = lf.vmag;
    if (with_angles) snap.theta = lf.theta;

    // per-entry RNG substream
    std::mt19937_64 rng(splitmix64(noise.seed ^ splitmix64(static_cast<std::uint64_t>(i))));
    std::normal_distribution<double> gauss(0.0, 1.0);
    if (noise.vmag_rel > 0.0)
      for (int k = 0; k < topo.node_count; ++k)
        snap.Vmag(k) *= 1.0 + noise.vmag_rel * gauss(rng);
    if (noise.pq_abs > 0.0) {
      for (int k = 0; k < topo.node_count; ++k) snap.P(k) += noise.pq_abs * gauss(rng);
      for (int k = 0; k < topo.node_count; ++k) snap.Q(k) += noise.pq_abs * gauss(rng);
    }
    if (with_angles && noise.theta_abs > 0.0) {
      for (int k = 0; k < topo.node_count; ++k)
        if (k != topo.slack) (*snap.theta)(k) += noise.theta_abs * gauss(rng);
    }
    out.push_back(std::move(snap));
  }
  return out;
}

}  // namespace gridest
