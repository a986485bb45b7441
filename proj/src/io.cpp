#include "gridest/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

namespace gridest {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return j;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

Eigen::VectorXd json_vector(const json& j, Eigen::Index expected, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expected)
    throw ConfigError(what + ": expected array of length " + std::to_string(expected));
  Eigen::VectorXd v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace

TopologyFile load_topology(const std::string& path) {
  const json j = load_json(path);
  if (!j.contains("nodes") || !j.contains("slack") || !j.contains("lines"))
    throw ConfigError(path + ": topology needs nodes, slack, lines");
  const int n = j["nodes"].get<int>();
  const int slack = j["slack"].get<int>() - 1;

  std::vector<std::pair<int, int>> lines;
  std::vector<double> r, x;
  for (const auto& line : j["lines"]) {
    lines.emplace_back(line["from"].get<int>() - 1, line["to"].get<int>() - 1);
    r.push_back(line["r_ohm"].get<double>());
    x.push_back(line["x_ohm"].get<double>());
  }
  TopologyFile file;
  file.topo = build_topology(lines, slack);
  if (file.topo.node_count != n)
    throw ConfigError(path + ": declared node count does not match lines");
  file.datasheet_si.R = Eigen::Map<Eigen::VectorXd>(r.data(), r.size());
  file.datasheet_si.X = Eigen::Map<Eigen::VectorXd>(x.data(), x.size());
  return file;
}

void save_topology(const std::string& path, const TopologyFile& file) {
  json j;
  j["nodes"] = file.topo.node_count;
  j["slack"] = file.topo.slack + 1;
  j["lines"] = json::array();
  for (const auto& line : file.topo.lines) {
    j["lines"].push_back({{"id", line.id + 1},
                          {"from", line.top + 1},
                          {"to", line.bottom + 1},
                          {"r_ohm", file.datasheet_si.R(line.id)},
                          {"x_ohm", file.datasheet_si.X(line.id)}});
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << "\n";
}

namespace {

std::string snapshots_csv_text(const std::vector<Snapshot>& snapshots,
                               const GridTopology& topo, const PerUnitBase& base) {
  std::string text = "t,node,p_w,q_var,vmag_v,theta_rad\n";
  for (const auto& snap : snapshots) {
    for (int k = 0; k < topo.node_count; ++k) {
      text += snap.label + "," + std::to_string(k + 1) + "," +
              fmt17(snap.P(k) * base.s_base_va) + "," + fmt17(snap.Q(k) * base.s_base_va) +
              "," + fmt17(snap.Vmag(k) * base.v_base_v) + ",";
      if (snap.theta) text += fmt17((*snap.theta)(k));
      text += "\n";
    }
  }
  return text;
}

}  // namespace

void write_snapshots_csv(const std::string& path, const std::vector<Snapshot>& snapshots,
                         const GridTopology& topo, const PerUnitBase& base) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << snapshots_csv_text(snapshots, topo, base);
}

std::vector<Snapshot> read_snapshots_csv(const std::string& path, const GridTopology& topo,
                                         const PerUnitBase& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");

  const int n = topo.node_count;
  std::vector<Snapshot> snapshots;
  std::map<std::string, std::size_t> index_of;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < 5)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": short row");
    const std::string& t = fields[0];
    const int node = std::stoi(fields[1]) - 1;
    if (node < 0 || node >= n)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": node out of range");
    auto [it, inserted] = index_of.try_emplace(t, snapshots.size());
    if (inserted) {
      Snapshot snap;
      snap.label = t;
      snap.P = Eigen::VectorXd::Zero(n);
      snap.Q = Eigen::VectorXd::Zero(n);
      snap.Vmag = Eigen::VectorXd::Zero(n);
      snapshots.push_back(std::move(snap));
    }
    Snapshot& snap = snapshots[it->second];
    snap.P(node) = std::stod(fields[2]) / base.s_base_va;
    snap.Q(node) = std::stod(fields[3]) / base.s_base_va;
    snap.Vmag(node) = std::stod(fields[4]) / base.v_base_v;
    if (fields.size() >= 6 && !fields[5].empty()) {
      if (!snap.theta) snap.theta = Eigen::VectorXd::Zero(n);
      (*snap.theta)(node) = std::stod(fields[5]);
    }
  }
  return snapshots;
}

std::string fingerprint_snapshots(const std::vector<Snapshot>& snapshots) {
  // canonical text: labels plus 17-digit values, topology-free
  std::string text;
  for (const auto& snap : snapshots) {
    text += snap.label + ";";
    for (Eigen::Index k = 0; k < snap.P.size(); ++k) {
      text += fmt17(snap.P(k)) + "," + fmt17(snap.Q(k)) + "," + fmt17(snap.Vmag(k));
      if (snap.theta) text += "," + fmt17((*snap.theta)(k));
      text += ";";
    }
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json report_to_json(const EstimateReport& report, const PerUnitBase& base,
                    const std::string& method, const SolverConfig& config,
                    const std::string& input_fingerprint) {
  const LineParams si = to_si(report.params, base);
  json j;
  j["method"] = method;
  j["status"] = to_string(report.status);
  j["params"]["r_ohm"] = std::vector<double>(si.R.begin(), si.R.end());
  j["params"]["x_ohm"] = std::vector<double>(si.X.begin(), si.X.end());
  j["params"]["r_pu"] = std::vector<double>(report.params.R.begin(), report.params.R.end());
  j["params"]["x_pu"] = std::vector<double>(report.params.X.begin(), report.params.X.end());
  j["theta_rad"] = json::array();
  for (const auto& th : report.theta)
    j["theta_rad"].push_back(std::vector<double>(th.begin(), th.end()));
  j["trace"] = json::array();
  for (const auto& rec : report.trace)
    j["trace"].push_back({{"dx_inf", rec.dx_inf},
                          {"residual_norm", rec.residual_norm},
                          {"rcond", rec.rcond}});
  j["iterations"] = report.trace.size();
  j["negative_params_seen"] = report.negative_params_seen;
  j["bound_active"] = report.bound_active;
  if (report.status == SolveStatus::SingularJacobian ||
      report.status == SolveStatus::RankDeficient)
    j["rcond_at_failure"] = report.rcond_at_failure;
  j["wall_seconds"] = report.wall_seconds;
  j["config"] = {{"alpha", config.alpha},
                 {"tol_pu", config.tol},
                 {"max_iter", config.max_iter},
                 {"regime", config.regime == AngleRegime::PMU ? "pmu" : "rms"}};
  j["base"] = {{"s_base_va", base.s_base_va}, {"v_base_v", base.v_base_v}};
  j["input_fingerprint"] = input_fingerprint;
  return j;
}

void write_diagnostics_csv(const std::string& path, const DiagnosticsReport& report) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << report.sweep_name;
  for (const auto& col : report.metric_columns) out << "," << col;
  out << ",status\n";
  for (const auto& rec : report.records) {
    out << fmt17(rec.value);
    for (const auto& col : report.metric_columns) {
      out << ",";
      auto it = rec.metrics.find(col);
      if (it != rec.metrics.end()) out << fmt17(it->second);
    }
    out << "," << rec.status << "\n";
  }
}

json diagnostics_to_json(const DiagnosticsReport& report) {
  json j;
  j["sweep"] = report.sweep_name;
  j["records"] = json::array();
  for (const auto& rec : report.records) {
    json r;
    r["value"] = rec.value;
    for (const auto& [k, v] : rec.metrics) r[k] = v;
    r["status"] = rec.status;
    j["records"].push_back(std::move(r));
  }
  return j;
}

void write_jacobian_csv(const std::string& path, const JacobianMatrix& jac) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  for (std::size_t i = 0; i < jac.col_labels.size(); ++i)
    out << (i ? "," : "") << jac.col_labels[i];
  out << "\n";
  for (Eigen::Index r = 0; r < jac.M.rows(); ++r) {
    for (Eigen::Index c = 0; c < jac.M.cols(); ++c)
      out << (c ? "," : "") << fmt17(jac.M(r, c));
    out << "\n";
  }
}

Scenario load_scenario(const std::string& path) {
  const json j = load_json(path);
  const auto dir = std::filesystem::path(path).parent_path();

  Scenario sc;
  if (!j.contains("topology")) throw ConfigError(path + ": missing topology");
  sc.topology_path = (dir / j["topology"].get<std::string>()).string();
  sc.topology = load_topology(sc.topology_path);
  const int n = sc.topology.topo.node_count;

  if (!j.contains("base")) throw ConfigError(path + ": missing base");
  sc.base.v_base_v = j["base"]["v_base_v"].get<double>();
  sc.base.s_base_va = j["base"]["s_base_va"].get<double>();
  if (!sc.base.valid()) throw ConfigError(path + ": base must be strictly positive");
  sc.slack_voltage_pu = j.value("slack_voltage_pu", 1.0);

  const bool has_schedule = j.contains("schedule") || j.contains("grid_schedule");
  const bool has_measurements = j.contains("measurements");
  if (has_schedule == has_measurements)
    throw ConfigError(path + ": exactly one of schedule/grid_schedule or measurements");

  if (j.contains("schedule")) {
    for (const auto& entry : j["schedule"]) {
      ScheduleEntry e;
      e.label = entry["t"].get<std::string>();
      e.P = json_vector(entry["p_w"], n, "p_w") / sc.base.s_base_va;
      e.Q = json_vector(entry["q_var"], n, "q_var") / sc.base.s_base_va;
      sc.schedule_pu.push_back(std::move(e));
    }
  } else if (j.contains("grid_schedule")) {
    // every (P, Q) combination on the grid, same injection at all non-slack nodes
    const auto& g = j["grid_schedule"];
    const double pmin = g["p_min_w"].get<double>(), pmax = g["p_max_w"].get<double>();
    const double pstep = g["p_step_w"].get<double>();
    const double qmin = g["q_min_var"].get<double>(), qmax = g["q_max_var"].get<double>();
    const double qstep = g["q_step_var"].get<double>();
    if (pstep <= 0 || qstep <= 0) throw ConfigError(path + ": grid_schedule step must be > 0");
    int idx = 0;
    for (double p = pmin; p <= pmax + 1e-9; p += pstep) {
      for (double q = qmin; q <= qmax + 1e-9; q += qstep) {
        ScheduleEntry e;
        e.label = "s" + std::to_string(++idx);
        e.P = Eigen::VectorXd::Zero(n);
        e.Q = Eigen::VectorXd::Zero(n);
        for (int k : sc.topology.topo.non_slack) {
          e.P(k) = p / sc.base.s_base_va;
          e.Q(k) = q / sc.base.s_base_va;
        }
        sc.schedule_pu.push_back(std::move(e));
      }
    }
  }
  if (has_measurements)
    sc.measurements_path = (dir / j["measurements"].get<std::string>()).string();

  if (j.contains("noise")) {
    const auto& nj = j["noise"];
    sc.noise.vmag_rel = nj.value("vmag_rel", 0.0);
    sc.noise.pq_abs = nj.value("pq_abs_w", 0.0) / sc.base.s_base_va;
    sc.noise.theta_abs = nj.value("theta_abs_rad", 0.0);
  }
  sc.with_angles = j.value("with_angles", false);

  if (j.contains("estimator")) {
    const auto& ej = j["estimator"];
    sc.method = ej.value("method", "nr-rms");
    sc.config.alpha = ej.value("alpha", 1.0);
    sc.config.tol = ej.value("tol_pu", 1e-6);
    sc.config.max_iter = ej.value("max_iter", 50);
    if (sc.config.tol <= 0 || sc.config.max_iter < 1 || sc.config.alpha <= 0 ||
        sc.config.alpha > 1)
      throw ConfigError(path + ": bad estimator config");
  }
  sc.config.regime =
      (sc.method == "nr-square" || sc.with_angles) ? AngleRegime::PMU : AngleRegime::RMS;

  if (j.contains("truth")) {
    const auto& tj = j["truth"];
    if (tj.contains("r_ohm")) {
      sc.truth_explicit = true;
      const int nl = sc.topology.topo.line_count;
      sc.truth_si.R = json_vector(tj["r_ohm"], nl, "truth r_ohm");
      sc.truth_si.X = json_vector(tj["x_ohm"], nl, "truth x_ohm");
    } else {
      sc.perturb_rel = tj.value("perturb_rel", 0.0);
    }
  }

  sc.seed = j.value("seed", 0ULL);
  sc.noise.seed = sc.seed;
  sc.out_dir = j.value("out_dir", "out");
  return sc;
}

LineParams scenario_datasheet_pu(const Scenario& scenario) {
  return to_per_unit(scenario.topology.datasheet_si, scenario.base);
}

LineParams scenario_truth_pu(const Scenario& scenario) {
  if (scenario.truth_explicit) return to_per_unit(scenario.truth_si, scenario.base);
  LineParams truth = scenario_datasheet_pu(scenario);
  if (scenario.perturb_rel > 0.0) {
    std::mt19937_64 rng(scenario.seed);
    std::uniform_real_distribution<double> u(-scenario.perturb_rel, scenario.perturb_rel);
    for (Eigen::Index l = 0; l < truth.R.size(); ++l) truth.R(l) *= 1.0 + u(rng);
    for (Eigen::Index l = 0; l < truth.X.size(); ++l) truth.X(l) *= 1.0 + u(rng);
  }
  return truth;
}

}  // namespace gridest
