#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "gridest/io.hpp"

using namespace gridest;
using nlohmann::json;

namespace {

// exit codes: 2 config, 3 load flow, 4 no convergence, 5 singular Jacobian,
// 6 Jacobian check failure
constexpr int kExitConfig = 2;
constexpr int kExitLoadFlow = 3;
constexpr int kExitNoConvergence = 4;
constexpr int kExitSingular = 5;
constexpr int kExitJacobianCheck = 6;

void emit_error(const std::string& kind, const std::string& message) {
  json err{{"error", kind}, {"message", message}};
  std::cerr << err.dump() << "\n";
}

std::vector<Snapshot> load_or_synthesize(const Scenario& sc, const LineParams& truth_pu) {
  if (!sc.measurements_path.empty())
    return read_snapshots_csv(sc.measurements_path, sc.topology.topo, sc.base);
  const auto existing = std::filesystem::path(sc.out_dir) / "snapshots.csv";
  if (std::filesystem::exists(existing))
    return read_snapshots_csv(existing.string(), sc.topology.topo, sc.base);
  return synthesize_snapshots(sc.topology.topo, truth_pu, sc.schedule_pu, sc.noise,
                              sc.with_angles, {sc.slack_voltage_pu, 0.0});
}

int run_simulate(const Scenario& sc, bool quiet) {
  const LineParams truth = scenario_truth_pu(sc);
  if (sc.schedule_pu.empty()) {
    emit_error("config", "simulate requires a schedule");
    return kExitConfig;
  }
  const auto snaps = synthesize_snapshots(sc.topology.topo, truth, sc.schedule_pu, sc.noise,
                                          sc.with_angles, {sc.slack_voltage_pu, 0.0});
  std::filesystem::create_directories(sc.out_dir);
  const auto csv = std::filesystem::path(sc.out_dir) / "snapshots.csv";
  write_snapshots_csv(csv.string(), snaps, sc.topology.topo, sc.base);

  const LineParams truth_si = to_si(truth, sc.base);
  json tj{{"r_ohm", std::vector<double>(truth_si.R.begin(), truth_si.R.end())},
          {"x_ohm", std::vector<double>(truth_si.X.begin(), truth_si.X.end())}};
  std::ofstream(std::filesystem::path(sc.out_dir) / "truth_params.json") << tj.dump(2) << "\n";
  if (!quiet)
    std::cout << "wrote " << snaps.size() << " snapshots to " << csv.string() << "\n";
  return 0;
}

int run_estimate(const Scenario& sc, const std::string& method, bool quiet) {
  const LineParams truth = scenario_truth_pu(sc);
  const auto snaps = load_or_synthesize(sc, truth);

  EstimationProblem problem;
  problem.topo = sc.topology.topo;
  problem.snapshots = snaps;
  problem.initial = scenario_datasheet_pu(sc);
  problem.config = sc.config;

  EstimateReport report;
  if (method == "nr-square") {
    if (snaps.empty() || !snaps[0].theta) {
      emit_error("config", "nr-square requires PMU snapshots (with angles); "
                           "set with_angles or supply theta_rad in the CSV");
      return kExitConfig;
    }
    problem.snapshots.resize(1);
    report = estimate_nr_square(problem);
  } else if (method == "nr-rms") {
    if (problem.snapshots.size() != 2) {
      emit_error("config", "nr-rms requires exactly two snapshots");
      return kExitConfig;
    }
    report = estimate_nr_rms(problem);
  } else if (method == "nr-ls") {
    report = estimate_nr_ls(problem);
  } else if (method == "bounded-ls") {
    report = estimate_bounded_ls(problem);
  } else {
    emit_error("config", "unknown method " + method);
    return kExitConfig;
  }

  std::filesystem::create_directories(sc.out_dir);
  const json j =
      report_to_json(report, sc.base, method, problem.config, fingerprint_snapshots(snaps));
  const auto out = std::filesystem::path(sc.out_dir) / "report.json";
  std::ofstream(out) << j.dump(2) << "\n";
  if (!quiet)
    std::cout << "status: " << to_string(report.status) << " (" << report.trace.size()
              << " iterations), report at " << out.string() << "\n";

  if (report.status == SolveStatus::SingularJacobian ||
      report.status == SolveStatus::RankDeficient) {
    emit_error("singular_jacobian",
               "rcond " + std::to_string(report.rcond_at_failure));
    return kExitSingular;
  }
  if (report.status != SolveStatus::Converged) {
    emit_error("no_convergence", "estimator did not converge");
    return kExitNoConvergence;
  }
  return 0;
}

int run_sweep(const Scenario& sc, const std::string& kind, bool quiet) {
  const LineParams truth = scenario_truth_pu(sc);
  SweepScenario sweep;
  sweep.topo = sc.topology.topo;
  sweep.truth = truth;
  sweep.datasheet = scenario_datasheet_pu(sc);
  sweep.config = sc.config;
  sweep.seed = sc.seed;

  // t1 injections: first schedule entry, or 3 kW + j3 kvar at load nodes
  const int n = sc.topology.topo.node_count;
  if (!sc.schedule_pu.empty()) {
    sweep.base_P = sc.schedule_pu[0].P;
    sweep.base_Q = sc.schedule_pu[0].Q;
  } else {
    sweep.base_P = Eigen::VectorXd::Zero(n);
    sweep.base_Q = Eigen::VectorXd::Zero(n);
    for (int k : sc.topology.topo.non_slack) {
      sweep.base_P(k) = 3000.0 / sc.base.s_base_va;
      sweep.base_Q(k) = 3000.0 / sc.base.s_base_va;
    }
  }

  DiagnosticsReport report;
  std::string csv_name;
  if (kind == "rcond") {
    report = rcond_sweep(sweep, default_r_grid());
    csv_name = "fig2_rcond.csv";
  } else if (kind == "rho") {
    const auto snaps = load_or_synthesize(sc, truth);
    report = rho_sweep(sweep, snaps, default_rho_grid());
    csv_name = "fig4_rho_sweep.csv";
  } else if (kind == "samples") {
    const auto snaps = load_or_synthesize(sc, truth);
    std::vector<int> counts;
    for (int c = 2; c <= static_cast<int>(snaps.size()); ++c) counts.push_back(c);
    report = sample_count_study(sweep, snaps, counts);
    csv_name = "fig3_error_reduction.csv";
  } else {
    emit_error("config", "unknown sweep " + kind);
    return kExitConfig;
  }

  std::filesystem::create_directories(sc.out_dir);
  const auto csv = std::filesystem::path(sc.out_dir) / csv_name;
  write_diagnostics_csv(csv.string(), report);
  std::ofstream(std::filesystem::path(sc.out_dir) / ("sweep_" + kind + ".json"))
      << diagnostics_to_json(report).dump(2) << "\n";
  if (!quiet) std::cout << "wrote " << csv.string() << "\n";
  return 0;
}

int run_check_jacobian(const Scenario& sc, bool quiet) {
  const LineParams truth = scenario_truth_pu(sc);
  const auto snaps = load_or_synthesize(sc, truth);
  const LineParams datasheet = scenario_datasheet_pu(sc);
  const AngleRegime regime = sc.config.regime;

  std::vector<Eigen::VectorXd> thetas;
  if (regime == AngleRegime::RMS)
    thetas = default_angle_guesses(sc.topology.topo, datasheet, snaps);

  try {
    const FdCheckReport check = fd_check(sc.topology.topo, datasheet, snaps, regime, thetas);
    if (!quiet)
      std::cout << "max relative error " << check.max_rel_error << " at row " << check.row
                << " col " << check.col << " (step " << check.step << ")\n";
    if (check.max_rel_error < 1e-6) return 0;
    emit_error("jacobian_check", "max relative error " + std::to_string(check.max_rel_error) +
                                     " at row " + std::to_string(check.row) + " col " +
                                     std::to_string(check.col));
    return kExitJacobianCheck;
  } catch (const SingularJacobian& e) {
    // degenerate scenario (e.g. zero injections): report, don't crash
    if (!quiet) std::cout << "degenerate scenario: " << e.what() << "\n";
    return 0;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Line-parameter estimation for radial distribution grids"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  bool quiet = false;
  app.add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  app.add_option("--seed", seed_override, "Override the scenario seed")
      ->each([&](const std::string&) { has_seed_override = true; });
  app.add_option("--out", out_override, "Override the output directory");
  app.add_flag("--quiet", quiet, "Suppress progress output");

  auto* simulate = app.add_subcommand("simulate", "Synthesize measurement snapshots");
  auto* estimate = app.add_subcommand("estimate", "Estimate line parameters");
  std::string method_override;
  estimate->add_option("--method", method_override,
                       "nr-square | nr-rms | nr-ls | bounded-ls");
  auto* sweep = app.add_subcommand("sweep", "Run a diagnostics sweep");
  std::string sweep_kind;
  sweep->add_option("--sweep", sweep_kind, "rcond | rho | samples")->required();
  auto* check = app.add_subcommand("check-jacobian", "Finite-difference Jacobian check");

  CLI11_PARSE(app, argc, argv);

  try {
    Scenario sc = load_scenario(scenario_path);
    if (has_seed_override) {
      sc.seed = seed_override;
      sc.noise.seed = seed_override;
    }
    if (!out_override.empty()) sc.out_dir = out_override;

    if (simulate->parsed()) return run_simulate(sc, quiet);
    if (estimate->parsed())
      return run_estimate(sc, method_override.empty() ? sc.method : method_override, quiet);
    if (sweep->parsed()) return run_sweep(sc, sweep_kind, quiet);
    if (check->parsed()) return run_check_jacobian(sc, quiet);
  } catch (const NoConvergence& e) {
    emit_error("load_flow", e.what());
    return kExitLoadFlow;
  } catch (const SingularJacobian& e) {
    emit_error("singular_jacobian", e.what());
    return kExitSingular;
  } catch (const MissingAngles& e) {
    emit_error("config", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    emit_error("config", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
