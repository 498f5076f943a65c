#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "ctas/ot.hpp"

namespace ctas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Edge {
  int to;
  double cap;
  double cost;
  int rev;  // index of the reverse edge in graph[to]
};

class McfGraph {
 public:
  explicit McfGraph(int nodes) : graph_(nodes) {}

  void add_edge(int from, int to, double cap, double cost) {
    graph_[from].push_back({to, cap, cost, static_cast<int>(graph_[to].size())});
    graph_[to].push_back({from, 0.0, -cost, static_cast<int>(graph_[from].size()) - 1});
  }

  std::vector<std::vector<Edge>> graph_;
};

}  // namespace

TransportPlan exact_ot(const CostMatrix& c, const std::vector<double>& mu,
                       const std::vector<double>& nu) {
  validate_cost_matrix(c);
  if (static_cast<long long>(c.n) * c.m > 4096)
    throw std::invalid_argument("exact_ot oracle limited to n*m <= 4096");
  if (static_cast<int>(mu.size()) != c.n || static_cast<int>(nu.size()) != c.m)
    throw std::invalid_argument("marginal sizes must match the cost matrix");
  double mu_sum = 0.0, nu_sum = 0.0;
  for (double v : mu) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("mu must be nonnegative");
    mu_sum += v;
  }
  for (double v : nu) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("nu must be nonnegative");
    nu_sum += v;
  }
  if (mu_sum <= 0.0 || std::abs(mu_sum - nu_sum) > 1e-9 * std::max(1.0, mu_sum))
    throw std::invalid_argument("marginals must carry equal positive mass");

  const int n = c.n, m = c.m;
  const int src_node = n + m, dst_node = n + m + 1, nodes = n + m + 2;
  const double big_cap = 2.0 * mu_sum;

  McfGraph g(nodes);
  // Rescale nu so demand matches supply bit-for-bit.
  std::vector<double> nu_scaled(nu);
  for (double& v : nu_scaled) v *= mu_sum / nu_sum;

  for (int i = 0; i < n; ++i) g.add_edge(src_node, i, mu[i], 0.0);
  for (int j = 0; j < m; ++j) g.add_edge(n + j, dst_node, nu_scaled[j], 0.0);
  // Bipartite arcs are added source-major so they can be found again below.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) g.add_edge(i, n + j, big_cap, c.at(i, j));

  std::vector<double> potential(nodes, 0.0), dist(nodes);
  std::vector<int> prev_node(nodes), prev_edge(nodes);
  double remaining = mu_sum;
  const double done_tol = 1e-15 * std::max(1.0, mu_sum);
  int augmentations = 0;

  while (remaining > done_tol) {
    // Dijkstra on reduced costs.
    std::fill(dist.begin(), dist.end(), kInf);
    dist[src_node] = 0.0;
    using QItem = std::pair<double, int>;
    std::priority_queue<QItem, std::vector<QItem>, std::greater<>> pq;
    pq.push({0.0, src_node});
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (d > dist[u]) continue;
      for (int k = 0; k < static_cast<int>(g.graph_[u].size()); ++k) {
        const Edge& e = g.graph_[u][k];
        if (e.cap <= 0.0) continue;
        // Clamp float dust: reduced costs are nonnegative up to rounding.
        double nd = d + std::max(0.0, e.cost + potential[u] - potential[e.to]);
        if (nd < dist[e.to]) {
          dist[e.to] = nd;
          prev_node[e.to] = u;
          prev_edge[e.to] = k;
          pq.push({nd, e.to});
        }
      }
    }
    if (dist[dst_node] == kInf) break;  // only float dust left unserved

    // Capping at dist[dst] keeps reduced costs nonnegative for arcs touching
    // unreached nodes.
    for (int v = 0; v < nodes; ++v) potential[v] += std::min(dist[v], dist[dst_node]);

    double delta = remaining;
    for (int v = dst_node; v != src_node; v = prev_node[v])
      delta = std::min(delta, g.graph_[prev_node[v]][prev_edge[v]].cap);
    for (int v = dst_node; v != src_node; v = prev_node[v]) {
      Edge& e = g.graph_[prev_node[v]][prev_edge[v]];
      e.cap -= delta;
      g.graph_[e.to][e.rev].cap += delta;
    }
    remaining -= delta;
    ++augmentations;
    if (augmentations > 16 * (n + m + 2))
      throw std::runtime_error("exact_ot failed to terminate; degenerate instance");
  }

  TransportPlan out;
  out.n = n;
  out.m = m;
  out.plan.assign(static_cast<std::size_t>(n) * m, 0.0);
  out.attained_cost = 0.0;
  // Flow on a bipartite arc equals the residual capacity of its reverse.
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < static_cast<int>(g.graph_[i].size()); ++k) {
      const Edge& e = g.graph_[i][k];
      if (e.to < n || e.to >= n + m) continue;
      double flow = g.graph_[e.to][e.rev].cap;
      if (flow <= 0.0) continue;
      int j = e.to - n;
      out.plan[static_cast<std::size_t>(i) * m + j] = flow;
      out.attained_cost += flow * c.at(i, j);
    }
  }
  out.dual_source.resize(n);
  out.dual_target.resize(m);
  for (int i = 0; i < n; ++i) out.dual_source[i] = -potential[i];
  for (int j = 0; j < m; ++j) out.dual_target[j] = potential[n + j];
  out.iterations = augmentations;
  double res = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < m; ++j) row += out.plan_at(i, j);
    res += std::abs(row - mu[i]);
  }
  for (int j = 0; j < m; ++j) {
    double col = 0.0;
    for (int i = 0; i < n; ++i) col += out.plan_at(i, j);
    res += std::abs(col - nu_scaled[j]);
  }
  out.residual = res;
  out.converged = remaining <= done_tol;
  out.stage_costs = {out.attained_cost};
  return out;
}

}  // namespace ctas
