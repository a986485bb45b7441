#pragma once

#include <span>
#include <string>
#include <vector>

#include "gridest/power_flow.hpp"

namespace gridest {

enum class AngleRegime { PMU, RMS };

/// Dense Jacobian of the stacked mismatch residuals.
/// Rows per snapshot: [dP non-slack, dQ non-slack].
/// Column ordering: [R_1..R_L, X_1..X_L, then per-snapshot theta blocks
/// (non-slack nodes) in the RMS regime].
struct JacobianMatrix {
  Eigen::MatrixXd M;
  std::vector<std::string> col_labels;
  int rows_per_snapshot = 0;
};

/// dY/dR_l: nonzero only on the 2x2 endpoint block of line l.
Eigen::MatrixXcd dY_dR(const GridTopology& topo, const LineParams& params, int l);

/// dY/dX_l = j * dY/dR_l.
Eigen::MatrixXcd dY_dX(const GridTopology& topo, const LineParams& params, int l);

struct PolarDerivative {
  double dmag = 0.0;
  double dang = 0.0;
};

/// Chain rule of |Y| and arg(Y) through the real and imaginary parts.
/// The angle derivative uses the form (Re*dIm - Im*dRe)/|Y|^2, defined for
/// any |Y| > 0.
PolarDerivative polar_derivatives(std::complex<double> y, std::complex<double> dy);

/// Assembles the full mismatch Jacobian for one or more snapshots.
/// thetas supplies the working angle estimate per snapshot; entries may be
/// empty for snapshots that carry their own angles.
JacobianMatrix assemble_jacobian(const GridTopology& topo, const LineParams& params,
                                 std::span<const Snapshot> snapshots, AngleRegime regime,
                                 const std::vector<Eigen::VectorXd>& thetas);

struct FdCheckReport {
  double max_rel_error = 0.0;
  int row = -1;
  int col = -1;
  double step = 0.0;
  double analytic_value = 0.0;
  double fd_value = 0.0;
};

/// Compares assemble_jacobian against central finite differences of the
/// mismatch residuals, entry by entry.
FdCheckReport fd_check(const GridTopology& topo, const LineParams& params,
                       std::span<const Snapshot> snapshots, AngleRegime regime,
                       const std::vector<Eigen::VectorXd>& thetas, double step = 1e-7);

}  // namespace gridest
