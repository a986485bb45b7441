#include "gridest/sensitivity.hpp"

#include <cmath>

namespace gridest {

namespace {

std::complex<double> endpoint_block_value(const LineParams& params, int l) {
  const double r = params.R(l);
  const double x = params.X(l);
  const double denom = r * r + x * x;
  if (denom == 0.0) throw ZeroImpedance("line " + std::to_string(l));
  return {(x * x - r * r) / (denom * denom), 2.0 * x * r / (denom * denom)};
}

// Resolves the angle vector used for snapshot t.
const Eigen::VectorXd& snapshot_theta(const Snapshot& snap,
                                      const std::vector<Eigen::VectorXd>& thetas,
                                      std::size_t t, AngleRegime regime) {
  if (regime == AngleRegime::PMU) {
    if (!snap.theta) throw MissingAngles("PMU regime requires snapshot angles");
    return *snap.theta;
  }
  if (t < thetas.size() && thetas[t].size() > 0) return thetas[t];
  if (snap.theta) return *snap.theta;
  throw MissingAngleGuess("RMS regime requires an angle estimate per snapshot");
}

}  // namespace

Eigen::MatrixXcd dY_dR(const GridTopology& topo, const LineParams& params, int l) {
  if (l < 0 || l >= topo.line_count) throw DimensionMismatch("line index out of range");
  if (params.R.size() != topo.line_count || params.X.size() != topo.line_count)
    throw DimensionMismatch("params dimension does not match line count");
  const std::complex<double> v = endpoint_block_value(params, l);
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(topo.node_count, topo.node_count);
  const int a = topo.lines[l].top;
  const int b = topo.lines[l].bottom;
  d(a, a) = v;
  d(b, b) = v;
  d(a, b) = -v;
  d(b, a) = -v;
  return d;
}

Eigen::MatrixXcd dY_dX(const GridTopology& topo, const LineParams& params, int l) {
  return std::complex<double>(0.0, 1.0) * dY_dR(topo, params, l);
}

PolarDerivative polar_derivatives(std::complex<double> y, std::complex<double> dy) {
  const double mag2 = std::norm(y);
  if (mag2 == 0.0) {
    if (dy == std::complex<double>(0.0, 0.0)) return {0.0, 0.0};
    throw DegeneratePolar("magnitude derivative undefined at |Y| = 0");
  }
  const double mag = std::sqrt(mag2);
  return {(y.real() * dy.real() + y.imag() * dy.imag()) / mag,
          (y.real() * dy.imag() - y.imag() * dy.real()) / mag2};
}

JacobianMatrix assemble_jacobian(const GridTopology& topo, const LineParams& params,
                                 std::span<const Snapshot> snapshots, AngleRegime regime,
                                 const std::vector<Eigen::VectorXd>& thetas) {
  const int n = topo.node_count;
  const int nl = topo.line_count;
  const auto& ns = topo.non_slack;
  const int m = static_cast<int>(ns.size());
  const int nt = static_cast<int>(snapshots.size());
  const int angle_cols = regime == AngleRegime::RMS ? nt * m : 0;

  JacobianMatrix jac;
  jac.rows_per_snapshot = 2 * m;
  jac.M = Eigen::MatrixXd::Zero(nt * 2 * m, 2 * nl + angle_cols);
  for (int l = 0; l < nl; ++l) jac.col_labels.push_back("R_" + std::to_string(l + 1));
  for (int l = 0; l < nl; ++l) jac.col_labels.push_back("X_" + std::to_string(l + 1));
  if (regime == AngleRegime::RMS)
    for (int t = 0; t < nt; ++t)
      for (int i = 0; i < m; ++i)
        jac.col_labels.push_back("theta_" + std::to_string(ns[i] + 1) + "_t" +
                                 std::to_string(t + 1));

  const AdmittanceModel adm = build_admittance(topo, params);

  // node -> position in the non-slack residual ordering, -1 for slack
  std::vector<int> row_of(n, -1);
  for (int i = 0; i < m; ++i) row_of[ns[i]] = i;

  for (int t = 0; t < nt; ++t) {
    const Snapshot& snap = snapshots[t];
    if (snap.P.size() != n || snap.Vmag.size() != n)
      throw DimensionMismatch("snapshot vector length");
    const Eigen::VectorXd& theta = snapshot_theta(snap, thetas, t, regime);
    const Eigen::VectorXd& vmag = snap.Vmag;
    const int r0 = t * 2 * m;

    // R and X columns, shared by all snapshots
    for (int l = 0; l < nl; ++l) {
      const std::complex<double> v = endpoint_block_value(params, l);
      const int ends[2] = {topo.lines[l].top, topo.lines[l].bottom};
      for (int k : ends) {
        if (row_of[k] < 0) continue;
        double dp_dr = 0, dq_dr = 0, dp_dx = 0, dq_dx = 0;
        for (int j : ends) {
          const std::complex<double> dy = (k == j) ? v : -v;
          const auto [dmag_r, dang_r] = polar_derivatives(adm.Y(k, j), dy);
          const auto [dmag_x, dang_x] =
              polar_derivatives(adm.Y(k, j), std::complex<double>(0.0, 1.0) * dy);
          const double u = theta(k) - theta(j) - adm.ang(k, j);
          const double vv = vmag(k) * vmag(j);
          const double mg = adm.mag(k, j);
          dp_dr += vv * (dmag_r * std::cos(u) + mg * std::sin(u) * dang_r);
          dq_dr += vv * (dmag_r * std::sin(u) - mg * std::cos(u) * dang_r);
          dp_dx += vv * (dmag_x * std::cos(u) + mg * std::sin(u) * dang_x);
          dq_dx += vv * (dmag_x * std::sin(u) - mg * std::cos(u) * dang_x);
        }
        jac.M(r0 + row_of[k], l) = dp_dr;
        jac.M(r0 + m + row_of[k], l) = dq_dr;
        jac.M(r0 + row_of[k], nl + l) = dp_dx;
        jac.M(r0 + m + row_of[k], nl + l) = dq_dx;
      }
    }

    // theta columns of the same snapshot; cross-snapshot blocks stay zero
    if (regime == AngleRegime::RMS) {
      const int c0 = 2 * nl + t * m;
      for (int i = 0; i < m; ++i) {
        const int k = ns[i];
        for (int c = 0; c < m; ++c) {
          const int node = ns[c];
          double dp = 0, dq = 0;
          if (node == k) {
            for (int j = 0; j < n; ++j) {
              if (j == k) continue;
              const double mg = adm.mag(k, j);
              if (mg == 0.0) continue;
              const double u = theta(k) - theta(j) - adm.ang(k, j);
              dp -= vmag(k) * vmag(j) * mg * std::sin(u);
              dq += vmag(k) * vmag(j) * mg * std::cos(u);
            }
          } else {
            const double mg = adm.mag(k, node);
            if (mg != 0.0) {
              const double u = theta(k) - theta(node) - adm.ang(k, node);
              dp = vmag(k) * vmag(node) * mg * std::sin(u);
              dq = -vmag(k) * vmag(node) * mg * std::cos(u);
            }
          }
          jac.M(r0 + i, c0 + c) = dp;
          jac.M(r0 + m + i, c0 + c) = dq;
        }
      }
    }
  }
  return jac;
}

FdCheckReport fd_check(const GridTopology& topo, const LineParams& params,
                       std::span<const Snapshot> snapshots, AngleRegime regime,
                       const std::vector<Eigen::VectorXd>& thetas, double step) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be > 0");
  const int nl = topo.line_count;
  const auto& ns = topo.non_slack;
  const int m = static_cast<int>(ns.size());
  const int nt = static_cast<int>(snapshots.size());

  // resolve working angles up front so perturbed evaluations share them
  std::vector<Eigen::VectorXd> base_theta(nt);
  for (int t = 0; t < nt; ++t)
    base_theta[t] = snapshot_theta(snapshots[t], thetas, t, regime);

  const JacobianMatrix jac = assemble_jacobian(topo, params, snapshots, regime, base_theta);
  const int cols = static_cast<int>(jac.M.cols());

  auto eval = [&](const LineParams& p, const std::vector<Eigen::VectorXd>& th) {
    Eigen::VectorXd out(nt * 2 * m);
    const AdmittanceModel adm = build_admittance(topo, p);
    for (int t = 0; t < nt; ++t)
      out.segment(t * 2 * m, 2 * m) = mismatch(topo, adm, snapshots[t], &th[t]);
    return out;
  };

  FdCheckReport report;
  report.step = step;
  for (int c = 0; c < cols; ++c) {
    LineParams pp = params, pm = params;
    std::vector<Eigen::VectorXd> tp = base_theta, tm = base_theta;
    if (c < nl) {
      pp.R(c) += step;
      pm.R(c) -= step;
    } else if (c < 2 * nl) {
      pp.X(c - nl) += step;
      pm.X(c - nl) -= step;
    } else {
      const int t = (c - 2 * nl) / m;
      const int node = ns[(c - 2 * nl) % m];
      tp[t](node) += step;
      tm[t](node) -= step;
    }
    const Eigen::VectorXd col_fd = (eval(pp, tp) - eval(pm, tm)) / (2.0 * step);
    // FD truncation noise scales with the column, so entries are judged
    // against the column scale (entries far below it carry no information)
    const double col_scale = std::max(
        {col_fd.cwiseAbs().maxCoeff(), jac.M.col(c).cwiseAbs().maxCoeff(), 1e-9});
    for (int r = 0; r < col_fd.size(); ++r) {
      const double a = jac.M(r, c);
      const double b = col_fd(r);
      if (std::abs(a) < 1e-9 && std::abs(b) < 1e-9) continue;
      const double rel = std::abs(a - b) / col_scale;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.row = r;
        report.col = c;
        report.analytic_value = a;
        report.fd_value = b;
      }
    }
  }
  return report;
}

}  // namespace gridest
