#pragma once
// Reference implementations used only by tests. Each one takes a different
// route from the library code it checks: explicit path enumeration for
// d-separation, brute-force Markov-equivalence enumeration for CPDAGs, the
// O(n^4)-style V-statistic expansion for HSIC and closed-form partial
// correlations for Fisher-z.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// Plain adjacency-matrix DAG, independent of netcausal::Dag.
struct Graph {
  int n = 0;
  std::vector<std::vector<bool>> edge;  // edge[a][b]: a -> b

  explicit Graph(int k = 0) : n(k), edge(k, std::vector<bool>(k, false)) {}
  bool adjacent(int a, int b) const { return edge[a][b] || edge[b][a]; }
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (edge[a][b]) out.emplace_back(a, b);
    return out;
  }
};

inline bool acyclic(const Graph& g) {
  std::vector<int> state(g.n, 0);
  std::function<bool(int)> visit = [&](int v) {
    state[v] = 1;
    for (int w = 0; w < g.n; ++w) {
      if (!g.edge[v][w]) continue;
      if (state[w] == 1) return false;
      if (state[w] == 0 && !visit(w)) return false;
    }
    state[v] = 2;
    return true;
  };
  for (int v = 0; v < g.n; ++v)
    if (state[v] == 0 && !visit(v)) return false;
  return true;
}

/// Reflexive descendant set.
inline std::vector<bool> descendants(const Graph& g, int v) {
  std::vector<bool> seen(g.n, false);
  std::vector<int> stack{v};
  seen[v] = true;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int w = 0; w < g.n; ++w)
      if (g.edge[u][w] && !seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
  }
  return seen;
}

/// Every simple path from x to y in the skeleton.
inline std::vector<std::vector<int>> simple_paths(const Graph& g, int x, int y) {
  std::vector<std::vector<int>> out;
  std::vector<int> path{x};
  std::vector<bool> on(g.n, false);
  on[x] = true;
  std::function<void()> walk = [&] {
    const int t = path.back();
    if (t == y) {
      out.push_back(path);
      return;
    }
    for (int w = 0; w < g.n; ++w) {
      if (on[w] || !g.adjacent(t, w)) continue;
      on[w] = true;
      path.push_back(w);
      walk();
      path.pop_back();
      on[w] = false;
    }
  };
  walk();
  return out;
}

/// Textbook blocking rule: a non-collider in Z blocks; a collider blocks
/// unless it or one of its descendants is in Z.
inline bool path_blocked(const Graph& g, const std::vector<int>& path, const std::vector<bool>& in_z) {
  for (std::size_t i = 1; i + 1 < path.size(); ++i) {
    const int a = path[i - 1], v = path[i], b = path[i + 1];
    const bool collider = g.edge[a][v] && g.edge[b][v];
    if (collider) {
      const auto desc = descendants(g, v);
      bool opened = false;
      for (int w = 0; w < g.n; ++w)
        if (desc[w] && in_z[w]) opened = true;
      if (!opened) return true;
    } else if (in_z[v]) {
      return true;
    }
  }
  return false;
}

inline bool d_separated(const Graph& g, int x, int y, const std::vector<int>& z) {
  std::vector<bool> in_z(g.n, false);
  for (int v : z) in_z[v] = true;
  for (const auto& p : simple_paths(g, x, y))
    if (!path_blocked(g, p, in_z)) return false;
  return true;
}

/// All labelled DAGs on k nodes (3 states per unordered pair, cycles filtered).
inline std::vector<Graph> all_dags(int k) {
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) pairs.emplace_back(a, b);
  std::size_t total = 1;
  for (std::size_t i = 0; i < pairs.size(); ++i) total *= 3;
  std::vector<Graph> out;
  for (std::size_t code = 0; code < total; ++code) {
    Graph g(k);
    std::size_t c = code;
    for (auto [a, b] : pairs) {
      const auto s = c % 3;
      c /= 3;
      if (s == 1) g.edge[a][b] = true;
      if (s == 2) g.edge[b][a] = true;
    }
    if (acyclic(g)) out.push_back(std::move(g));
  }
  return out;
}

/// Random DAG: random causal order, each forward pair joined with prob p.
inline Graph random_dag(int k, double p, std::mt19937_64& rng) {
  std::vector<int> order(k);
  for (int i = 0; i < k; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::bernoulli_distribution coin(p);
  Graph g(k);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      if (coin(rng)) g.edge[order[i]][order[j]] = true;
  return g;
}

inline std::set<std::tuple<int, int, int>> v_structures(const Graph& g) {
  std::set<std::tuple<int, int, int>> out;
  for (int v = 0; v < g.n; ++v)
    for (int a = 0; a < g.n; ++a)
      for (int b = a + 1; b < g.n; ++b)
        if (g.edge[a][v] && g.edge[b][v] && !g.adjacent(a, b)) out.insert({a, v, b});
  return out;
}

/// CPDAG by brute force: orient the skeleton every possible way, keep the
/// acyclic orientations with the same v-structures, and mark an edge directed
/// iff every member of the class agrees on its direction.
/// Returns (directed, undirected) edge lists, undirected as (min, max).
inline std::pair<std::set<std::pair<int, int>>, std::set<std::pair<int, int>>> cpdag(const Graph& g) {
  std::vector<std::pair<int, int>> skel;
  for (auto [a, b] : g.edges()) skel.emplace_back(std::min(a, b), std::max(a, b));
  std::sort(skel.begin(), skel.end());
  const auto target = v_structures(g);
  std::vector<int> forward(skel.size(), 0), backward(skel.size(), 0);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << skel.size()); ++mask) {
    Graph h(g.n);
    for (std::size_t i = 0; i < skel.size(); ++i) {
      auto [a, b] = skel[i];
      if (mask >> i & 1) h.edge[b][a] = true;
      else h.edge[a][b] = true;
    }
    if (!acyclic(h) || v_structures(h) != target) continue;
    for (std::size_t i = 0; i < skel.size(); ++i) (mask >> i & 1 ? backward : forward)[i]++;
  }
  std::set<std::pair<int, int>> dir, und;
  for (std::size_t i = 0; i < skel.size(); ++i) {
    auto [a, b] = skel[i];
    if (backward[i] == 0) dir.insert({a, b});
    else if (forward[i] == 0) dir.insert({b, a});
    else und.insert({a, b});
  }
  return {dir, und};
}

/// Biased HSIC via the explicit three-term expansion
///   (1/n^2) sum K.L - (2/n^3) sum_i (K 1)_i (L 1)_i + (1/n^4) (1'K1)(1'L1)
/// with Gaussian kernels exp(-d^2 / (2 s^2)).
inline double hsic(const std::vector<double>& x, const std::vector<double>& y, double sx, double sy) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> k(n, std::vector<double>(n)), l(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      k[i][j] = std::exp(-(x[i] - x[j]) * (x[i] - x[j]) / (2 * sx * sx));
      l[i][j] = std::exp(-(y[i] - y[j]) * (y[i] - y[j]) / (2 * sy * sy));
    }
  double t1 = 0, t3k = 0, t3l = 0, t2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double rk = 0, rl = 0;
    for (std::size_t j = 0; j < n; ++j) {
      t1 += k[i][j] * l[i][j];
      rk += k[i][j];
      rl += l[i][j];
    }
    t2 += rk * rl;
    t3k += rk;
    t3l += rl;
  }
  const double nn = static_cast<double>(n);
  return t1 / (nn * nn) - 2 * t2 / (nn * nn * nn) + t3k * t3l / (nn * nn * nn * nn);
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// First-order partial correlation from the three pairwise correlations.
inline double partial_correlation(const std::vector<double>& x, const std::vector<double>& y,
                                  const std::vector<double>& z) {
  const double rxy = pearson(x, y), rxz = pearson(x, z), ryz = pearson(y, z);
  return (rxy - rxz * ryz) / std::sqrt((1 - rxz * rxz) * (1 - ryz * ryz));
}

}  // namespace oracle
