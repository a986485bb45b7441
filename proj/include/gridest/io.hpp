#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>

#include "gridest/diagnostics.hpp"

namespace gridest {

struct TopologyFile {
  GridTopology topo;
  LineParams datasheet_si;  // ohms, as listed in the file
};

/// Topology JSON: {"nodes", "slack", "lines": [{"id", "from", "to",
/// "r_ohm", "x_ohm"}]}. Node labels are 1-based in files.
TopologyFile load_topology(const std::string& path);
void save_topology(const std::string& path, const TopologyFile& file);

/// Snapshot CSV columns: t, node, p_w, q_var, vmag_v, theta_rad (optional,
/// empty when absent). SI units in the file, per-unit in memory; values
/// round-trip at 17 significant digits.
void write_snapshots_csv(const std::string& path, const std::vector<Snapshot>& snapshots,
                         const GridTopology& topo, const PerUnitBase& base);
std::vector<Snapshot> read_snapshots_csv(const std::string& path, const GridTopology& topo,
                                         const PerUnitBase& base);

/// FNV-1a over the canonical CSV serialization of the snapshots.
std::string fingerprint_snapshots(const std::vector<Snapshot>& snapshots);

nlohmann::json report_to_json(const EstimateReport& report, const PerUnitBase& base,
                              const std::string& method, const SolverConfig& config,
                              const std::string& input_fingerprint);

void write_diagnostics_csv(const std::string& path, const DiagnosticsReport& report);
nlohmann::json diagnostics_to_json(const DiagnosticsReport& report);

/// Optional debug dump of an assembled Jacobian with its column labels.
void write_jacobian_csv(const std::string& path, const JacobianMatrix& jac);

/// Scenario file: single JSON document driving the CLI; all quantities SI.
struct Scenario {
  std::string topology_path;
  TopologyFile topology;
  PerUnitBase base;
  double slack_voltage_pu = 1.0;
  std::vector<ScheduleEntry> schedule_pu;  // converted at load time
  std::string measurements_path;           // exclusive with schedule
  NoiseModel noise;                        // sigmas already in pu
  bool with_angles = false;
  std::string method = "nr-rms";
  SolverConfig config;
  bool truth_explicit = false;
  LineParams truth_si;     // when explicit
  double perturb_rel = 0;  // else datasheet * (1 +- U(perturb_rel)), seeded
  std::uint64_t seed = 0;
  std::string out_dir = "out";
};

Scenario load_scenario(const std::string& path);

/// Datasheet parameters in per-unit.
LineParams scenario_datasheet_pu(const Scenario& scenario);

/// True parameters in per-unit: explicit values or the seeded perturbation
/// of the datasheet.
LineParams scenario_truth_pu(const Scenario& scenario);

}  // namespace gridest
