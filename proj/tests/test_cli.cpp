#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli() {
  const char* p = std::getenv("GRIDEST_CLI");
  REQUIRE_MESSAGE(p != nullptr, "GRIDEST_CLI must point at the built binary");
  return p;
}

std::string data_dir() {
  const char* p = std::getenv("GRIDEST_DATA");
  REQUIRE_MESSAGE(p != nullptr, "GRIDEST_DATA must point at the data directory");
  return p;
}

int run(const std::string& args) {
  const std::string cmd = cli() + " " + args + " >/dev/null 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WEXITSTATUS(rc);
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("gridest_cli_" + std::to_string(counter()++) + "_" +
                                        std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), path);
  json j;
  in >> j;
  return j;
}

// scenario pointing at the stock district topology with a custom body
void write_scenario(const std::string& path, const std::string& body) {
  const std::string topo = (fs::path(data_dir()) / "district_topology.json").string();
  std::ofstream out(path);
  out << R"({"topology": ")" << topo << R"(",
    "base": {"v_base_v": 400.0, "s_base_va": 10000.0},)" << body << "}";
}

}  // namespace

TEST_CASE("simulate writes snapshots and the truth realization") {
  TempDir tmp;
  const std::string scenario = (fs::path(data_dir()) / "district_scenario.json").string();
  CHECK(run("--scenario " + scenario + " --out " + tmp.file("out") + " --quiet simulate") == 0);
  CHECK(fs::exists(tmp.file("out") + "/snapshots.csv"));
  const json truth = read_json(tmp.file("out") + "/truth_params.json");
  REQUIRE(truth["r_ohm"].size() == 3);

  std::ifstream csv(tmp.file("out") + "/snapshots.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,node,p_w,q_var,vmag_v,theta_rad");
  int rows = 0;
  for (std::string line; std::getline(csv, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == 8);  // 2 snapshots x 4 nodes
}

TEST_CASE("estimate recovers the simulated truth") {
  TempDir tmp;
  const std::string scenario = (fs::path(data_dir()) / "district_scenario.json").string();
  const std::string out = tmp.file("out");
  REQUIRE(run("--scenario " + scenario + " --out " + out + " --quiet simulate") == 0);
  CHECK(run("--scenario " + scenario + " --out " + out + " --quiet estimate") == 0);

  const json report = read_json(out + "/report.json");
  CHECK(report["status"] == "converged");
  CHECK(report["method"] == "nr-rms");
  const json truth = read_json(out + "/truth_params.json");
  for (int l = 0; l < 3; ++l) {
    const double r_hat = report["params"]["r_ohm"][l].get<double>();
    const double r_true = truth["r_ohm"][l].get<double>();
    CHECK(std::abs(r_hat / r_true - 1.0) < 0.002);
    const double x_hat = report["params"]["x_ohm"][l].get<double>();
    const double x_true = truth["x_ohm"][l].get<double>();
    CHECK(std::abs(x_hat / x_true - 1.0) < 0.002);
  }
}

TEST_CASE("estimate is deterministic apart from wall time") {
  TempDir tmp;
  const std::string scenario = (fs::path(data_dir()) / "district_scenario.json").string();
  REQUIRE(run("--scenario " + scenario + " --out " + tmp.file("a") + " --quiet estimate") == 0);
  REQUIRE(run("--scenario " + scenario + " --out " + tmp.file("b") + " --quiet estimate") == 0);
  json a = read_json(tmp.file("a") + "/report.json");
  json b = read_json(tmp.file("b") + "/report.json");
  a.erase("wall_seconds");
  b.erase("wall_seconds");
  CHECK(a.dump() == b.dump());
}

TEST_CASE("seed override changes the truth realization") {
  TempDir tmp;
  const std::string scenario = (fs::path(data_dir()) / "district_scenario.json").string();
  REQUIRE(run("--scenario " + scenario + " --out " + tmp.file("a") + " --quiet simulate") == 0);
  REQUIRE(run("--scenario " + scenario + " --seed 7 --out " + tmp.file("b") +
              " --quiet simulate") == 0);
  const json a = read_json(tmp.file("a") + "/truth_params.json");
  const json b = read_json(tmp.file("b") + "/truth_params.json");
  CHECK(a["r_ohm"][0].get<double>() != b["r_ohm"][0].get<double>());
}

TEST_CASE("exit 2 on configuration errors") {
  TempDir tmp;
  const std::string scenario = (fs::path(data_dir()) / "district_scenario.json").string();
  // missing scenario file
  CHECK(run("--scenario " + tmp.file("nope.json") + " --quiet estimate") == 2);
  // unknown method
  CHECK(run("--scenario " + scenario + " --out " + tmp.file("o1") +
            " --quiet estimate --method bogus") == 2);
  // nr-square without angles
  CHECK(run("--scenario " + scenario + " --out " + tmp.file("o2") +
            " --quiet estimate --method nr-square") == 2);
  // unknown sweep kind
  CHECK(run("--scenario " + scenario + " --out " + tmp.file("o3") +
            " --quiet sweep --sweep bogus") == 2);
  // missing required --scenario: CLI parse error, nonzero but outside our contract
  CHECK(run("estimate") != 0);
}

TEST_CASE("exit 3 when the forward load flow diverges") {
  TempDir tmp;
  write_scenario(tmp.file("scenario.json"), R"(
    "schedule": [
      {"t": "t1", "p_w": [0, 1e9, 1e9, 1e9], "q_var": [0, 1e9, 1e9, 1e9]},
      {"t": "t2", "p_w": [0, -1e9, -1e9, -1e9], "q_var": [0, -1e9, -1e9, -1e9]}
    ])");
  CHECK(run("--scenario " + tmp.file("scenario.json") + " --out " + tmp.file("out") +
            " --quiet simulate") == 3);
}

TEST_CASE("exit 4 when the estimator runs out of iterations") {
  TempDir tmp;
  write_scenario(tmp.file("scenario.json"), R"(
    "schedule": [
      {"t": "t1", "p_w": [0, 3000, 3000, 3000], "q_var": [0, 3000, 3000, 3000]},
      {"t": "t2", "p_w": [0, -3000, -3000, -3000], "q_var": [0, -3000, -3000, -3000]}
    ],
    "truth": {"perturb_rel": 0.25},
    "estimator": {"method": "nr-rms", "tol_pu": 1e-12, "max_iter": 1},
    "seed": 42)");
  CHECK(run("--scenario " + tmp.file("scenario.json") + " --out " + tmp.file("out") +
            " --quiet estimate") == 4);
  // the report is still written, with the failure status
  CHECK(read_json(tmp.file("out") + "/report.json")["status"] == "no_convergence");
}

TEST_CASE("exit 5 when the system is singular") {
  TempDir tmp;
  // two identical operating points: the RMS system loses rank
  write_scenario(tmp.file("scenario.json"), R"(
    "schedule": [
      {"t": "t1", "p_w": [0, 3000, 3000, 3000], "q_var": [0, 3000, 3000, 3000]},
      {"t": "t2", "p_w": [0, 3000, 3000, 3000], "q_var": [0, 3000, 3000, 3000]}
    ],
    "truth": {"perturb_rel": 0.25},
    "seed": 42)");
  CHECK(run("--scenario " + tmp.file("scenario.json") + " --out " + tmp.file("out") +
            " --quiet estimate") == 5);
  const json report = read_json(tmp.file("out") + "/report.json");
  CHECK(report["status"] == "singular_jacobian");
  CHECK(report["rcond_at_failure"].get<double>() < 1e-10);
}

TEST_CASE("check-jacobian passes on the stock scenario") {
  TempDir tmp;
  const std::string scenario = (fs::path(data_dir()) / "district_scenario.json").string();
  CHECK(run("--scenario " + scenario + " --out " + tmp.file("out") +
            " --quiet check-jacobian") == 0);
}

TEST_CASE("sweep rcond writes the conditioning profile") {
  TempDir tmp;
  const std::string scenario = (fs::path(data_dir()) / "district_scenario.json").string();
  CHECK(run("--scenario " + scenario + " --out " + tmp.file("out") +
            " --quiet sweep --sweep rcond") == 0);
  std::ifstream csv(tmp.file("out") + "/fig2_rcond.csv");
  REQUIRE(csv.good());
  std::string header;
  std::getline(csv, header);
  CHECK(header.substr(0, 6) == "rcond,");
  int rows = 0;
  for (std::string line; std::getline(csv, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == 121);
  CHECK(fs::exists(tmp.file("out") + "/sweep_rcond.json"));
}

TEST_CASE("sweep samples consumes simulated snapshots") {
  TempDir tmp;
  write_scenario(tmp.file("scenario.json"), R"(
    "schedule": [
      {"t": "t1", "p_w": [0, 3000, 1000, -2000], "q_var": [0, 2000, -1000, 3000]},
      {"t": "t2", "p_w": [0, -3000, 2000, 1000], "q_var": [0, -2000, 3000, -1000]},
      {"t": "t3", "p_w": [0, 1000, -3000, 2000], "q_var": [0, 3000, 1000, -2000]},
      {"t": "t4", "p_w": [0, -1000, -2000, -3000], "q_var": [0, 1000, 2000, 3000]}
    ],
    "truth": {"perturb_rel": 0.25},
    "estimator": {"method": "bounded-ls", "alpha": 0.5, "max_iter": 200},
    "seed": 9)");
  const std::string base = "--scenario " + tmp.file("scenario.json") + " --out " +
                           tmp.file("out") + " --quiet ";
  REQUIRE(run(base + "simulate") == 0);
  CHECK(run(base + "sweep --sweep samples") == 0);
  std::ifstream csv(tmp.file("out") + "/fig3_error_reduction.csv");
  REQUIRE(csv.good());
  int rows = -1;  // discount the header
  for (std::string line; std::getline(csv, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == 3);  // sample counts 2, 3, 4
}
