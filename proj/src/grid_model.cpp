#include "gridest/grid_model.hpp"

#include <cmath>
#include <numeric>

namespace gridest {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

}  // namespace

GridTopology build_topology(const std::vector<std::pair<int, int>>& lines, int slack) {
  int max_node = -1;
  for (const auto& [top, bot] : lines) {
    if (top < 0 || bot < 0) throw DimensionMismatch("negative node index");
    if (top == bot) throw CyclicGraph("self-loop at node " + std::to_string(top));
    max_node = std::max(max_node, std::max(top, bot));
  }
  const int n = max_node + 1;
  if (n < 2) throw DimensionMismatch("a grid needs at least 2 nodes");
  if (slack < 0 || slack >= n) throw BadSlack("slack index out of range");

  UnionFind uf(n);
  for (const auto& [top, bot] : lines) {
    if (top == bot) throw CyclicGraph("self-loop at node " + std::to_string(top));
    if (!uf.unite(top, bot)) throw CyclicGraph("lines form a loop");
  }
  for (int k = 0; k < n; ++k) {
    if (uf.find(k) != uf.find(slack))
      throw Disconnected("node " + std::to_string(k) + " unreachable from slack");
  }
  // acyclic + connected over n nodes implies exactly n-1 lines

  GridTopology topo;
  topo.node_count = n;
  topo.line_count = static_cast<int>(lines.size());
  topo.slack = slack;
  topo.incidence = Eigen::MatrixXd::Zero(topo.line_count, n);
  for (int l = 0; l < topo.line_count; ++l) {
    topo.lines.push_back({l, lines[l].first, lines[l].second});
    topo.incidence(l, lines[l].first) = 1.0;
    topo.incidence(l, lines[l].second) = -1.0;
  }
  for (int k = 0; k < n; ++k)
    if (k != slack) topo.non_slack.push_back(k);
  return topo;
}

AdmittanceModel build_admittance(const GridTopology& topo, const LineParams& params) {
  const int n = topo.node_count;
  if (params.R.size() != topo.line_count || params.X.size() != topo.line_count)
    throw DimensionMismatch("params dimension does not match line count");

  AdmittanceModel model;
  model.Y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& line : topo.lines) {
    const double r = params.R(line.id);
    const double x = params.X(line.id);
    const double denom = r * r + x * x;
    if (!(std::isfinite(r) && std::isfinite(x)))
      throw DimensionMismatch("non-finite line parameter");
    if (denom == 0.0) throw ZeroImpedance("line " + std::to_string(line.id));
    const std::complex<double> y(r / denom, -x / denom);
    model.Y(line.top, line.top) += y;
    model.Y(line.bottom, line.bottom) += y;
    model.Y(line.top, line.bottom) -= y;
    model.Y(line.bottom, line.top) -= y;
  }
  model.mag.resize(n, n);
  model.ang.resize(n, n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      model.mag(k, j) = std::abs(model.Y(k, j));
      model.ang(k, j) = std::arg(model.Y(k, j));
    }
  }
  return model;
}

LineParams to_per_unit(const LineParams& params_si, const PerUnitBase& base) {
  if (!base.valid()) throw ConfigError("per-unit base must be strictly positive");
  const double z = base.z_base_ohm();
  return {params_si.R / z, params_si.X / z};
}

LineParams to_si(const LineParams& params_pu, const PerUnitBase& base) {
  if (!base.valid()) throw ConfigError("per-unit base must be strictly positive");
  const double z = base.z_base_ohm();
  return {params_pu.R * z, params_pu.X * z};
}

void validate_params(const LineParams& params) {
  if (params.R.size() != params.X.size())
    throw DimensionMismatch("R and X length mismatch");
  for (Eigen::Index l = 0; l < params.R.size(); ++l) {
    if (!(std::isfinite(params.R(l)) && std::isfinite(params.X(l))))
      throw DimensionMismatch("non-finite line parameter");
    if (params.R(l) <= 0.0 || params.X(l) <= 0.0)
      throw ZeroImpedance("non-positive parameter on line " + std::to_string(l));
  }
}

}  // namespace gridest
