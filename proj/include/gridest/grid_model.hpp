#pragma once

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

#include "gridest/errors.hpp"

namespace gridest {

/// Radial single-phase grid: N nodes, L = N-1 lines, one slack node.
/// Node indices are 0-based internally; file formats use 1-based labels.
struct GridTopology {
  struct Line {
    int id;
    int top;
    int bottom;
  };

  int node_count = 0;
  int line_count = 0;
  int slack = 0;
  std::vector<Line> lines;
  Eigen::MatrixXd incidence;   // L x N, entries in {-1, 0, +1}
  std::vector<int> non_slack;  // ascending node indices, slack excluded
};

/// Per-line series resistance and reactance. Per-unit internally; ohms only
/// at the I/O boundary.
struct LineParams {
  Eigen::VectorXd R;
  Eigen::VectorXd X;
};

struct PerUnitBase {
  double s_base_va = 0.0;
  double v_base_v = 0.0;
  double z_base_ohm() const { return v_base_v * v_base_v / s_base_va; }
  bool valid() const { return s_base_va > 0.0 && v_base_v > 0.0; }
};

/// Nodal admittance matrix with a polar cache of |Y_kj| and phi_kj.
struct AdmittanceModel {
  Eigen::MatrixXcd Y;
  Eigen::MatrixXd mag;
  Eigen::MatrixXd ang;
};

/// Validates the radial structure (connected, acyclic, contiguous node
/// indices) and fills the branch-to-node incidence matrix.
GridTopology build_topology(const std::vector<std::pair<int, int>>& lines, int slack);

/// Y_kj = sum_l a_lk a_lj (R_l - jX_l) / (R_l^2 + X_l^2), polar cache included.
AdmittanceModel build_admittance(const GridTopology& topo, const LineParams& params);

LineParams to_per_unit(const LineParams& params_si, const PerUnitBase& base);
LineParams to_si(const LineParams& params_pu, const PerUnitBase& base);

/// Throws unless all R_l, X_l are finite and strictly positive.
void validate_params(const LineParams& params);

}  // namespace gridest
