#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridest/grid_model.hpp"

namespace gridest {

/// One time instant's nodal measurements, all in per-unit.
/// theta is present only when emulating PMU availability.
struct Snapshot {
  std::string label;
  Eigen::VectorXd P;
  Eigen::VectorXd Q;
  Eigen::VectorXd Vmag;
  std::optional<Eigen::VectorXd> theta;
};

struct NoiseModel {
  double vmag_rel = 0.0;   // relative sigma on |V|
  double pq_abs = 0.0;     // absolute sigma on P and Q, pu
  double theta_abs = 0.0;  // absolute sigma on angles, rad
  std::uint64_t seed = 0;
};

struct LoadFlowConfig {
  double tol = 1e-10;  // max |mismatch|, pu
  int max_iter = 50;
};

struct LoadFlowResult {
  Eigen::VectorXd vmag;
  Eigen::VectorXd theta;
  int iterations = 0;
};

struct ScheduleEntry {
  std::string label;
  Eigen::VectorXd P;  // length N, pu; slack entry ignored
  Eigen::VectorXd Q;
};

/// Conventional NR load flow in voltage unknowns, flat start.
/// P and Q are injections at all nodes (slack entries ignored).
LoadFlowResult solve_load_flow(const GridTopology& topo, const LineParams& params,
                               const Eigen::VectorXd& P, const Eigen::VectorXd& Q,
                               std::complex<double> slack_voltage,
                               const LoadFlowConfig& config = {});

/// Power mismatch residuals [dP_k..., dQ_k...] over non-slack nodes,
/// length 2(N-1). Angles come from the snapshot or, failing that, from
/// theta_override.
Eigen::VectorXd mismatch(const GridTopology& topo, const LineParams& params,
                         const Snapshot& snapshot,
                         const Eigen::VectorXd* theta_override = nullptr);

/// Same residuals evaluated against a prebuilt admittance model.
Eigen::VectorXd mismatch(const GridTopology& topo, const AdmittanceModel& adm,
                         const Snapshot& snapshot,
                         const Eigen::VectorXd* theta_override = nullptr);

/// Runs a load flow with the true parameters per schedule entry, then layers
/// measurement noise. Deterministic per (seed, entry index).
std::vector<Snapshot> synthesize_snapshots(const GridTopology& topo,
                                           const LineParams& true_params,
                                           const std::vector<ScheduleEntry>& schedule,
                                           const NoiseModel& noise,
                                           bool with_angles = false,
                                           std::complex<double> slack_voltage = {1.0, 0.0});

}  // namespace gridest
