#include "netcausal/discovery.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <set>

#include <json.hpp>

#include "netcausal/error.hpp"

namespace netcausal {

std::string_view to_string(CiTestKind kind) {
  switch (kind) {
    case CiTestKind::Hsic: return "hsic";
    case CiTestKind::KernelCi: return "kernel_ci";
    case CiTestKind::FisherZ: return "fisher_z";
  }
  return "kernel_ci";
}

CiTestKind ci_test_kind_from_string(std::string_view text) {
  if (text == "hsic") return CiTestKind::Hsic;
  if (text == "kernel_ci") return CiTestKind::KernelCi;
  if (text == "fisher_z") return CiTestKind::FisherZ;
  throw InvalidInput("unknown independence test '" + std::string(text) +
                     "' (expected hsic, kernel_ci or fisher_z)");
}

void PcConfig::validate(std::size_t num_nodes) const {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("PC level must lie in (0, 1)");
  if (num_nodes < 2) throw InvalidInput("PC needs at least 2 variables");
  if (max_cond_size > num_nodes - 2)
    throw InvalidInput("max conditioning size " + std::to_string(max_cond_size) +
                       " exceeds node count - 2 = " + std::to_string(num_nodes - 2));
  kernel.validate();
}

void SepSets::set(NodeId a, NodeId b, NodeSet s) {
  sets_[{std::min(a, b), std::max(a, b)}] = std::move(s);
}

const NodeSet* SepSets::find(NodeId a, NodeId b) const {
  auto it = sets_.find({std::min(a, b), std::max(a, b)});
  return it == sets_.end() ? nullptr : &it->second;
}

namespace {

/// Node ids ordered by name. Every loop that decides which test runs first
/// walks this order, which makes the output independent of column order.
std::vector<NodeId> canonical_order(const std::vector<std::string>& names) {
  std::vector<NodeId> order(names.size());
  std::iota(order.begin(), order.end(), NodeId{0});
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return names[a] < names[b]; });
  return order;
}

/// Runs independence queries on a dataset, caching kernel residuals per
/// conditioning set.
class CiOracle {
 public:
  CiOracle(const Dataset& data, const PcConfig& cfg)
      : data_(data), cfg_(cfg), names_(data.names()), rank_(names_.size()) {
    const auto order = canonical_order(names_);
    for (std::size_t i = 0; i < order.size(); ++i) rank_[order[i]] = i;
  }

  CiTestResult test(NodeId x, NodeId y, const NodeSet& z) {
    if (rank_[y] < rank_[x]) std::swap(x, y);
    std::vector<NodeId> zs(z.begin(), z.end());
    std::sort(zs.begin(), zs.end(), [&](NodeId a, NodeId b) { return rank_[a] < rank_[b]; });

    switch (cfg_.test) {
      case CiTestKind::FisherZ: {
        std::vector<ColumnView> cols;
        for (NodeId v : zs) cols.push_back(data_.column(v));
        return fisher_z_test(data_.column(x), data_.column(y), cols, cfg_.level);
      }
      case CiTestKind::Hsic:
      case CiTestKind::KernelCi: {
        if (zs.empty()) return hsic_test(data_.column(x), data_.column(y), cfg_.level, cfg_.kernel);
        const auto& resid = residuals(zs);
        return detail::hsic_test_vectors(resid.at(x), resid.at(y), cfg_.level, cfg_.kernel,
                                         zs.size(), "kernel_ci");
      }
    }
    throw InvalidInput("unsupported test kind");
  }

 private:
  /// Residuals of every standardized column given the columns `zs`.
  const std::map<NodeId, Eigen::VectorXd>& residuals(const std::vector<NodeId>& zs) {
    auto it = cache_.find(zs);
    if (it != cache_.end()) return it->second;
    const auto n = static_cast<Eigen::Index>(data_.n());
    Eigen::MatrixXd zm(n, static_cast<Eigen::Index>(zs.size()));
    for (std::size_t j = 0; j < zs.size(); ++j)
      zm.col(static_cast<Eigen::Index>(j)) = detail::standardized(data_.column(zs[j]));
    const detail::KernelResidualizer resid(zm, cfg_.kernel.regularization);
    std::map<NodeId, Eigen::VectorXd> out;
    for (NodeId v = 0; v < data_.num_variables(); ++v)
      if (!std::binary_search(zs.begin(), zs.end(), v, [&](NodeId a, NodeId b) { return rank_[a] < rank_[b]; }))
        out.emplace(v, resid.residual(detail::standardized(data_.column(v))));
    return cache_.emplace(zs, std::move(out)).first->second;
  }

  const Dataset& data_;
  const PcConfig& cfg_;
  std::vector<std::string> names_;
  std::vector<std::size_t> rank_;
  std::map<std::vector<NodeId>, std::map<NodeId, Eigen::VectorXd>> cache_;
};

std::string describe_query(const Dataset& data, NodeId x, NodeId y, const NodeSet& z) {
  std::string out = "(" + data.schema()[x].name + ", " + data.schema()[y].name + " | {";
  for (std::size_t i = 0; i < z.size(); ++i) out += (i ? ", " : "") + data.schema()[z[i]].name;
  return out + "})";
}

/// Calls f on each k-subset of `pool`, in lexicographic position order, until
/// f returns true.
template <typename F>
bool for_each_subset(const std::vector<NodeId>& pool, std::size_t k, F&& f) {
  if (k > pool.size()) return false;
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  while (true) {
    NodeSet s;
    for (auto i : pick) s.push_back(pool[i]);
    if (f(make_node_set(std::move(s)))) return true;
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == pool.size() - k + i - 1) --i;
    if (i == 0) return false;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
}

bool reaches(const Cpdag& g, NodeId from, NodeId to) {
  std::vector<bool> seen(g.size(), false);
  std::vector<NodeId> stack{from};
  seen[from] = true;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    if (v == to) return true;
    for (NodeId c = 0; c < g.size(); ++c)
      if (!seen[c] && g.has_directed(v, c)) {
        seen[c] = true;
        stack.push_back(c);
      }
  }
  return false;
}

}  // namespace

CiTestResult run_ci_test(const Dataset& data, NodeId x, NodeId y, const NodeSet& z,
                         const PcConfig& cfg) {
  CiOracle oracle(data, cfg);
  return oracle.test(x, y, z);
}

SkeletonResult pc_skeleton(const Dataset& data, const PcConfig& cfg) {
  const std::size_t k = data.num_variables();
  cfg.validate(k);
  if (data.n() < 10) throw InvalidInput("PC needs at least 10 samples");

  const auto names = data.names();
  const auto order = canonical_order(names);
  std::vector<std::size_t> rank(k);
  for (std::size_t i = 0; i < k; ++i) rank[order[i]] = i;
  auto by_rank = [&](NodeId a, NodeId b) { return rank[a] < rank[b]; };

  std::vector<std::vector<bool>> adj(k, std::vector<bool>(k, true));
  for (NodeId v = 0; v < k; ++v) adj[v][v] = false;
  auto neighbours = [&](NodeId v) {
    std::vector<NodeId> out;
    for (NodeId u : order)
      if (adj[v][u]) out.push_back(u);
    return out;
  };

  CiOracle oracle(data, cfg);
  SkeletonResult result{Cpdag(names), SepSets{}, {}};
  const std::size_t max_level = cfg.test == CiTestKind::Hsic ? 0 : cfg.max_cond_size;
  std::size_t edges = k * (k - 1) / 2;

  for (std::size_t level = 0; level <= max_level; ++level) {
    std::vector<std::vector<NodeId>> frozen(k);
    if (cfg.stable)
      for (NodeId v = 0; v < k; ++v) frozen[v] = neighbours(v);

    LevelStats stats{level, 0, 0, 0};
    bool testable = false;
    for (NodeId x : order) {
      const auto adj_x = cfg.stable ? frozen[x] : neighbours(x);
      for (NodeId y : adj_x) {
        if (!adj[x][y]) continue;
        std::vector<NodeId> pool = cfg.stable ? frozen[x] : neighbours(x);
        pool.erase(std::remove(pool.begin(), pool.end(), y), pool.end());
        if (pool.size() < level) continue;
        testable = true;
        std::sort(pool.begin(), pool.end(), by_rank);
        for_each_subset(pool, level, [&](const NodeSet& s) {
          CiTestResult res;
          try {
            res = oracle.test(x, y, s);
          } catch (const std::exception& e) {
            throw ComputationError("independence test failed for " + describe_query(data, x, y, s) +
                                   ": " + e.what());
          }
          ++stats.tests_run;
          if (!res.independent) return false;
          adj[x][y] = adj[y][x] = false;
          result.sepsets.set(x, y, s);
          ++stats.edges_removed;
          return true;
        });
      }
    }
    edges -= stats.edges_removed;
    stats.edges_remaining = edges;
    result.levels.push_back(stats);
    if (!testable) break;
  }

  for (NodeId a = 0; a < k; ++a)
    for (NodeId b = a + 1; b < k; ++b)
      if (adj[a][b]) result.skeleton.add_undirected(a, b);
  return result;
}

VStructureResult orient_v_structures(const Cpdag& skeleton, const SepSets& sepsets) {
  const std::size_t k = skeleton.size();
  std::set<std::pair<NodeId, NodeId>> demanded;
  for (NodeId w = 0; w < k; ++w) {
    const NodeSet nb = skeleton.adjacent_nodes(w);
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        const NodeId x = nb[i], y = nb[j];
        if (skeleton.adjacent(x, y)) continue;
        const NodeSet* sep = sepsets.find(x, y);
        if (!sep || std::binary_search(sep->begin(), sep->end(), w)) continue;
        demanded.emplace(x, w);
        demanded.emplace(y, w);
      }
  }

  VStructureResult out{skeleton, {}};
  for (auto [a, b] : demanded) {
    const bool opposite = demanded.count({b, a}) > 0 || skeleton.has_directed(b, a);
    if (opposite) {
      if (a < b)
        out.conflicts.push_back({a, b, "v-structures demand both " + skeleton.name(a) + " -> " +
                                            skeleton.name(b) + " and the reverse; left undirected"});
      continue;
    }
    if (out.graph.has_undirected(a, b)) out.graph.orient(a, b);
  }
  return out;
}

Cpdag apply_meek_rules(Cpdag g) {
  const std::size_t k = g.size();
  const auto order = canonical_order(g.names());
  auto undirected = [&](NodeId a, NodeId b) { return g.has_undirected(a, b); };
  auto directed = [&](NodeId a, NodeId b) { return g.has_directed(a, b); };

  auto rule1 = [&](NodeId a, NodeId b) {
    for (NodeId c = 0; c < k; ++c)
      if (directed(c, a) && c != b && !g.adjacent(c, b)) return true;
    return false;
  };
  auto rule2 = [&](NodeId a, NodeId b) {
    for (NodeId c = 0; c < k; ++c)
      if (directed(a, c) && directed(c, b)) return true;
    return false;
  };
  auto rule3 = [&](NodeId a, NodeId b) {
    for (NodeId c = 0; c < k; ++c) {
      if (!undirected(a, c) || !directed(c, b)) continue;
      for (NodeId d = c + 1; d < k; ++d)
        if (undirected(a, d) && directed(d, b) && !g.adjacent(c, d)) return true;
    }
    return false;
  };
  auto rule4 = [&](NodeId a, NodeId b) {
    for (NodeId c = 0; c < k; ++c) {
      if (!undirected(a, c) || c == b || g.adjacent(c, b)) continue;
      for (NodeId d = 0; d < k; ++d)
        if (directed(c, d) && directed(d, b) && g.adjacent(a, d)) return true;
    }
    return false;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (NodeId a : order)
      for (NodeId b : order) {
        if (!undirected(a, b)) continue;
        if (!(rule1(a, b) || rule2(a, b) || rule3(a, b) || rule4(a, b))) continue;
        if (reaches(g, b, a)) continue;  // would close a directed cycle
        g.orient(a, b);
        changed = true;
      }
  }
  return g;
}

PcResult pc(const Dataset& data, const PcConfig& cfg) {
  auto skel = pc_skeleton(data, cfg);
  auto vs = orient_v_structures(skel.skeleton, skel.sepsets);
  PcResult out;
  out.cpdag = apply_meek_rules(std::move(vs.graph));
  out.sepsets = std::move(skel.sepsets);
  out.diagnostics.levels = std::move(skel.levels);
  out.diagnostics.conflicts = std::move(vs.conflicts);
  for (const auto& l : out.diagnostics.levels) out.diagnostics.total_tests += l.tests_run;
  return out;
}

Cpdag cpdag_of(const Dag& dag) {
  Cpdag g(dag.names());
  for (auto [a, b] : dag.edges()) g.add_undirected(a, b);
  for (NodeId w = 0; w < dag.size(); ++w) {
    const auto& ps = dag.parents(w);
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (std::size_t j = i + 1; j < ps.size(); ++j)
        if (!dag.adjacent(ps[i], ps[j])) {
          if (g.has_undirected(ps[i], w)) g.orient(ps[i], w);
          if (g.has_undirected(ps[j], w)) g.orient(ps[j], w);
        }
  }
  return apply_meek_rules(std::move(g));
}

std::size_t structural_hamming_distance(const Cpdag& a, const Cpdag& b) {
  if (a.size() != b.size()) throw InvalidInput("graphs have different node counts");
  std::vector<NodeId> map(a.size());
  for (NodeId v = 0; v < a.size(); ++v) map[v] = b.id(a.name(v));
  auto mark = [](const Cpdag& g, NodeId u, NodeId v) {
    if (g.has_undirected(u, v)) return 1;
    if (g.has_directed(u, v)) return 2;
    if (g.has_directed(v, u)) return 3;
    return 0;
  };
  std::size_t d = 0;
  for (NodeId u = 0; u < a.size(); ++u)
    for (NodeId v = u + 1; v < a.size(); ++v)
      if (mark(a, u, v) != mark(b, map[u], map[v])) ++d;
  return d;
}

std::string diagnostics_to_json(const PcResult& result, const PcConfig& cfg) {
  using nlohmann::json;
  const Cpdag& g = result.cpdag;
  json doc;
  doc["config"] = {{"test", std::string(to_string(cfg.test))},
                   {"level", cfg.level},
                   {"max_cond_size", cfg.max_cond_size},
                   {"stable", cfg.stable},
                   {"regularization", cfg.kernel.regularization},
                   {"bandwidth", cfg.kernel.fixed_bandwidth ? json(*cfg.kernel.fixed_bandwidth)
                                                            : json("median_heuristic")},
                   {"null", cfg.kernel.null == NullDistribution::Gamma ? "gamma" : "permutation"}};
  doc["total_tests"] = result.diagnostics.total_tests;
  doc["levels"] = json::array();
  for (const auto& l : result.diagnostics.levels)
    doc["levels"].push_back({{"level", l.level},
                             {"tests_run", l.tests_run},
                             {"edges_removed", l.edges_removed},
                             {"edges_remaining", l.edges_remaining}});
  doc["conflicts"] = json::array();
  for (const auto& c : result.diagnostics.conflicts)
    doc["conflicts"].push_back({{"pair", {g.name(c.a), g.name(c.b)}}, {"detail", c.detail}});
  doc["sepsets"] = json::array();
  for (const auto& [pair, set] : result.sepsets.entries()) {
    std::vector<std::string> names;
    for (NodeId v : set) names.push_back(g.name(v));
    doc["sepsets"].push_back({{"pair", {g.name(pair.first), g.name(pair.second)}}, {"set", names}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace netcausal
