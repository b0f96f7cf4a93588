#include "netcausal/graph.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <functional>

#include "netcausal/error.hpp"

namespace netcausal {

NodeSet make_node_set(std::vector<NodeId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

namespace {

bool contains_id(const NodeSet& s, NodeId v) { return std::binary_search(s.begin(), s.end(), v); }

void insert_sorted(NodeSet& s, NodeId v) {
  auto it = std::lower_bound(s.begin(), s.end(), v);
  if (it == s.end() || *it != v) s.insert(it, v);
}

}  // namespace

// ---------------------------------------------------------------------------
// NodeIndex

NodeIndex::NodeIndex(std::vector<std::string> names) : names_(std::move(names)) {
  for (NodeId i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw InvalidInput("node name must be non-empty");
    if (!lookup_.emplace(names_[i], i).second)
      throw InvalidInput("duplicate node name '" + names_[i] + "'");
  }
}

bool NodeIndex::contains(std::string_view name) const noexcept {
  return lookup_.find(std::string(name)) != lookup_.end();
}

NodeId NodeIndex::id(std::string_view name) const {
  auto it = lookup_.find(std::string(name));
  if (it == lookup_.end()) throw InvalidInput("unknown node '" + std::string(name) + "'");
  return it->second;
}

NodeSet NodeIndex::ids(std::span<const std::string> names) const {
  std::vector<NodeId> out;
  for (const auto& n : names) out.push_back(id(n));
  return make_node_set(std::move(out));
}

NodeSet NodeIndex::ids(std::initializer_list<std::string_view> names) const {
  std::vector<NodeId> out;
  for (auto n : names) out.push_back(id(n));
  return make_node_set(std::move(out));
}

// ---------------------------------------------------------------------------
// Dag

Dag::Dag(std::vector<std::string> nodes, const std::vector<std::pair<NodeId, NodeId>>& edges)
    : NodeIndex(std::move(nodes)), parents_(size()), children_(size()) {
  for (auto [from, to] : edges) {
    if (from >= size() || to >= size()) throw InvalidInput("edge endpoint out of range");
    if (from == to) throw InvalidInput("self-loop on '" + name(from) + "'");
    if (contains_id(children_[from], to)) continue;
    insert_sorted(children_[from], to);
    insert_sorted(parents_[to], from);
    ++num_edges_;
  }
  if (topological_order().size() != size()) throw InvalidInput("edge set contains a directed cycle");
}

Dag Dag::from_names(std::vector<std::string> nodes,
                    const std::vector<std::pair<std::string, std::string>>& edges) {
  NodeIndex index(nodes);
  std::vector<std::pair<NodeId, NodeId>> ids;
  for (const auto& [a, b] : edges) ids.emplace_back(index.id(a), index.id(b));
  return Dag(std::move(nodes), ids);
}

bool Dag::has_edge(NodeId from, NodeId to) const { return contains_id(children_.at(from), to); }

std::vector<std::pair<NodeId, NodeId>> Dag::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId v = 0; v < size(); ++v)
    for (NodeId c : children_[v]) out.emplace_back(v, c);
  return out;
}

std::vector<NodeId> Dag::topological_order() const {
  // Kahn's algorithm, always releasing the smallest ready id.
  std::vector<std::size_t> indegree(size());
  for (NodeId v = 0; v < size(); ++v) indegree[v] = parents_[v].size();
  std::vector<NodeId> ready;
  for (NodeId v = 0; v < size(); ++v)
    if (indegree[v] == 0) ready.push_back(v);
  std::vector<NodeId> order;
  while (!ready.empty()) {
    auto it = std::min_element(ready.begin(), ready.end());
    const NodeId v = *it;
    ready.erase(it);
    order.push_back(v);
    for (NodeId c : children_[v])
      if (--indegree[c] == 0) ready.push_back(c);
  }
  return order;
}

Dag Dag::without_outgoing(NodeId v) const {
  std::vector<std::pair<NodeId, NodeId>> kept;
  for (auto e : edges())
    if (e.first != v) kept.push_back(e);
  return Dag(names(), kept);
}

// ---------------------------------------------------------------------------
// Cpdag

Cpdag::Cpdag(std::vector<std::string> nodes)
    : NodeIndex(std::move(nodes)), dir_(size() * size(), false), und_(size() * size(), false) {}

Cpdag Cpdag::from_dag(const Dag& dag) {
  Cpdag g(dag.names());
  for (auto [a, b] : dag.edges()) g.add_directed(a, b);
  return g;
}

void Cpdag::check_pair(NodeId a, NodeId b) const {
  if (a >= size() || b >= size()) throw InvalidInput("edge endpoint out of range");
  if (a == b) throw InvalidInput("self-loop on '" + name(a) + "'");
}

void Cpdag::add_directed(NodeId from, NodeId to) {
  check_pair(from, to);
  if (adjacent(from, to))
    throw InvalidInput("pair '" + name(from) + "', '" + name(to) + "' already has an edge");
  dir_[from * size() + to] = true;
}

void Cpdag::add_undirected(NodeId a, NodeId b) {
  check_pair(a, b);
  if (adjacent(a, b))
    throw InvalidInput("pair '" + name(a) + "', '" + name(b) + "' already has an edge");
  und_[a * size() + b] = true;
  und_[b * size() + a] = true;
}

void Cpdag::remove_edge(NodeId a, NodeId b) {
  check_pair(a, b);
  dir_[a * size() + b] = false;
  dir_[b * size() + a] = false;
  und_[a * size() + b] = false;
  und_[b * size() + a] = false;
}

void Cpdag::orient(NodeId from, NodeId to) {
  check_pair(from, to);
  if (!has_undirected(from, to))
    throw InvalidInput("no undirected edge between '" + name(from) + "' and '" + name(to) + "'");
  und_[from * size() + to] = false;
  und_[to * size() + from] = false;
  dir_[from * size() + to] = true;
}

NodeSet Cpdag::adjacent_nodes(NodeId v) const {
  NodeSet out;
  for (NodeId u = 0; u < size(); ++u)
    if (u != v && adjacent(u, v)) out.push_back(u);
  return out;
}

std::vector<std::pair<NodeId, NodeId>> Cpdag::directed_edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId a = 0; a < size(); ++a)
    for (NodeId b = 0; b < size(); ++b)
      if (has_directed(a, b)) out.emplace_back(a, b);
  return out;
}

std::vector<std::pair<NodeId, NodeId>> Cpdag::undirected_edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId a = 0; a < size(); ++a)
    for (NodeId b = a + 1; b < size(); ++b)
      if (has_undirected(a, b)) out.emplace_back(a, b);
  return out;
}

std::size_t Cpdag::num_edges() const { return directed_edges().size() + undirected_edges().size(); }

bool Cpdag::has_directed_cycle() const {
  std::vector<std::size_t> indegree(size(), 0);
  for (auto [a, b] : directed_edges()) ++indegree[b];
  std::vector<NodeId> stack;
  for (NodeId v = 0; v < size(); ++v)
    if (indegree[v] == 0) stack.push_back(v);
  std::size_t seen = 0;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    ++seen;
    for (NodeId c = 0; c < size(); ++c)
      if (has_directed(v, c) && --indegree[c] == 0) stack.push_back(c);
  }
  return seen != size();
}

Dag Cpdag::to_dag() const {
  const auto und = undirected_edges();
  if (!und.empty())
    throw InvalidInput("graph has undirected edge '" + name(und.front().first) + "' - '" +
                       name(und.front().second) + "'; a fully directed graph is required");
  return Dag(names(), directed_edges());
}

bool operator==(const Cpdag& a, const Cpdag& b) {
  return a.names() == b.names() && a.dir_ == b.dir_ && a.und_ == b.und_;
}

// ---------------------------------------------------------------------------
// Queries

NodeSet descendants(const Dag& g, NodeId v) {
  if (v >= g.size()) throw InvalidInput("node id out of range");
  std::vector<bool> seen(g.size(), false);
  std::vector<NodeId> stack{v};
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    for (NodeId c : g.children(u))
      if (!seen[c]) {
        seen[c] = true;
        stack.push_back(c);
      }
  }
  NodeSet out;
  for (NodeId u = 0; u < g.size(); ++u)
    if (seen[u] && u != v) out.push_back(u);
  return out;
}

NodeSet ancestral_closure(const Dag& g, const NodeSet& targets) {
  std::vector<bool> seen(g.size(), false);
  std::vector<NodeId> stack;
  for (NodeId t : targets) {
    if (t >= g.size()) throw InvalidInput("node id out of range");
    if (!seen[t]) {
      seen[t] = true;
      stack.push_back(t);
    }
  }
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    for (NodeId p : g.parents(u))
      if (!seen[p]) {
        seen[p] = true;
        stack.push_back(p);
      }
  }
  NodeSet out;
  for (NodeId u = 0; u < g.size(); ++u)
    if (seen[u]) out.push_back(u);
  return out;
}

namespace {

void check_node(const Dag& g, NodeId v) {
  if (v >= g.size()) throw InvalidInput("node id out of range");
}

void check_query(const Dag& g, NodeId x, NodeId y, const NodeSet& z) {
  check_node(g, x);
  check_node(g, y);
  for (NodeId v : z) check_node(g, v);
  if (x == y) throw InvalidInput("query endpoints must differ");
  if (contains_id(z, x) || contains_id(z, y))
    throw InvalidInput("conditioning set must not contain the query endpoints");
}

}  // namespace

bool is_blocked(const Dag& g, std::span<const NodeId> path, const NodeSet& z) {
  if (path.size() < 2) throw InvalidInput("a path needs at least two nodes");
  std::vector<bool> on_path(g.size(), false);
  for (std::size_t i = 0; i < path.size(); ++i) {
    check_node(g, path[i]);
    if (on_path[path[i]]) throw InvalidInput("path repeats node '" + g.name(path[i]) + "'");
    on_path[path[i]] = true;
    if (i > 0 && !g.adjacent(path[i - 1], path[i]))
      throw InvalidInput("'" + g.name(path[i - 1]) + "' and '" + g.name(path[i]) + "' are not adjacent");
  }
  const NodeSet activators = ancestral_closure(g, z);
  for (std::size_t i = 1; i + 1 < path.size(); ++i) {
    const NodeId w = path[i];
    const bool collider = g.has_edge(path[i - 1], w) && g.has_edge(path[i + 1], w);
    if (collider) {
      if (!contains_id(activators, w)) return true;
    } else if (contains_id(z, w)) {
      return true;
    }
  }
  return false;
}

bool d_separated(const Dag& g, NodeId x, NodeId y, const NodeSet& z) {
  check_query(g, x, y, z);
  const NodeSet activators = ancestral_closure(g, z);
  std::vector<bool> in_z(g.size(), false);
  for (NodeId v : z) in_z[v] = true;
  std::vector<bool> in_act(g.size(), false);
  for (NodeId v : activators) in_act[v] = true;

  // Traversal states: (node, arrived_from_child). Leaving "up" means the
  // trail entered the node against an edge, "down" along one.
  enum Direction : int { kUp = 0, kDown = 1 };
  std::vector<bool> visited(2 * g.size(), false);
  std::deque<std::pair<NodeId, int>> queue{{x, kUp}};
  while (!queue.empty()) {
    const auto [v, dir] = queue.front();
    queue.pop_front();
    if (visited[2 * v + dir]) continue;
    visited[2 * v + dir] = true;
    if (v == y) return false;
    if (dir == kUp && !in_z[v]) {
      for (NodeId p : g.parents(v)) queue.emplace_back(p, kUp);
      for (NodeId c : g.children(v)) queue.emplace_back(c, kDown);
    } else if (dir == kDown) {
      if (!in_z[v])
        for (NodeId c : g.children(v)) queue.emplace_back(c, kDown);
      if (in_act[v])
        for (NodeId p : g.parents(v)) queue.emplace_back(p, kUp);
    }
  }
  return true;
}

std::optional<std::vector<NodeId>> find_open_path(const Dag& g, NodeId x, NodeId y,
                                                  const NodeSet& z, bool into_x_only) {
  check_query(g, x, y, z);
  const NodeSet activators = ancestral_closure(g, z);
  std::vector<bool> in_z(g.size(), false);
  for (NodeId v : z) in_z[v] = true;
  std::vector<bool> in_act(g.size(), false);
  for (NodeId v : activators) in_act[v] = true;

  std::vector<NodeId> path{x};
  std::vector<bool> on_path(g.size(), false);
  on_path[x] = true;

  auto neighbours = [&](NodeId v) {
    std::vector<NodeId> out(g.parents(v).begin(), g.parents(v).end());
    out.insert(out.end(), g.children(v).begin(), g.children(v).end());
    std::sort(out.begin(), out.end());
    return out;
  };

  // Depth-first over simple paths, pruning as soon as an interior node blocks.
  std::function<bool()> extend = [&]() -> bool {
    const NodeId tail = path.back();
    if (tail == y) return true;
    const bool at_start = path.size() < 2;
    const NodeId prev = at_start ? tail : path[path.size() - 2];
    for (NodeId next : neighbours(tail)) {
      if (on_path[next]) continue;
      if (at_start) {
        if (into_x_only && !g.has_edge(next, x)) continue;
      } else {
        const bool collider = g.has_edge(prev, tail) && g.has_edge(next, tail);
        if (collider ? !in_act[tail] : in_z[tail]) continue;
      }
      path.push_back(next);
      on_path[next] = true;
      if (extend()) return true;
      on_path[next] = false;
      path.pop_back();
    }
    return false;
  };
  if (extend()) return path;
  return std::nullopt;
}

BackdoorCertificate satisfies_backdoor(const Dag& g, NodeId x, NodeId y, const NodeSet& z) {
  check_query(g, x, y, z);
  BackdoorCertificate cert;
  cert.treatment = x;
  cert.outcome = y;
  cert.adjustment_set = z;

  const NodeSet desc = descendants(g, x);
  for (NodeId v : z)
    if (contains_id(desc, v)) {
      cert.violation = BackdoorViolation{BackdoorViolation::Kind::Descendant, v, {}};
      return cert;
    }
  if (auto path = find_open_path(g, x, y, z, /*into_x_only=*/true)) {
    cert.violation = BackdoorViolation{BackdoorViolation::Kind::UnblockedPath, 0, std::move(*path)};
    return cert;
  }
  cert.valid = true;
  return cert;
}

std::vector<NodeSet> find_backdoor_sets(const Dag& g, NodeId x, NodeId y, std::size_t max_size) {
  check_query(g, x, y, {});
  const NodeSet desc = descendants(g, x);
  std::vector<NodeId> candidates;
  for (NodeId v = 0; v < g.size(); ++v)
    if (v != x && v != y && !contains_id(desc, v)) candidates.push_back(v);

  std::vector<NodeSet> minimal;
  std::vector<NodeSet> others;
  auto has_valid_subset = [&](const NodeSet& s) {
    return std::any_of(minimal.begin(), minimal.end(), [&](const NodeSet& m) {
      return std::includes(s.begin(), s.end(), m.begin(), m.end());
    });
  };

  // Subsets in increasing size, so every valid proper subset is seen first.
  const std::size_t limit = std::min(max_size, candidates.size());
  std::vector<std::size_t> pick;
  for (std::size_t k = 0; k <= limit; ++k) {
    pick.resize(k);
    for (std::size_t i = 0; i < k; ++i) pick[i] = i;
    while (true) {
      NodeSet s;
      for (auto i : pick) s.push_back(candidates[i]);
      if (satisfies_backdoor(g, x, y, s).valid) (has_valid_subset(s) ? others : minimal).push_back(s);
      // next k-combination
      std::size_t i = k;
      while (i > 0 && pick[i - 1] == candidates.size() - k + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  std::sort(minimal.begin(), minimal.end());
  std::sort(others.begin(), others.end());
  minimal.insert(minimal.end(), others.begin(), others.end());
  return minimal;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string dot_id(const std::string& name) {
  const bool plain = !name.empty() && !std::isdigit(static_cast<unsigned char>(name[0])) &&
                     std::all_of(name.begin(), name.end(), [](char c) {
                       return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
                     });
  if (plain) return name;
  std::string out = "\"";
  for (char c : name) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string render_dot(const NodeIndex& nodes,
                       const std::vector<std::pair<NodeId, NodeId>>& directed,
                       const std::vector<std::pair<NodeId, NodeId>>& undirected) {
  std::string out = "digraph G {\n";
  for (const auto& n : nodes.names()) out += "  " + dot_id(n) + ";\n";
  for (auto [a, b] : directed) out += "  " + dot_id(nodes.name(a)) + " -> " + dot_id(nodes.name(b)) + ";\n";
  for (auto [a, b] : undirected)
    out += "  " + dot_id(nodes.name(a)) + " -> " + dot_id(nodes.name(b)) + " [dir=none];\n";
  return out + "}\n";
}

}  // namespace

std::string to_dot(const Dag& g) { return render_dot(g, g.edges(), {}); }

std::string to_dot(const Cpdag& g) { return render_dot(g, g.directed_edges(), g.undirected_edges()); }

std::string format_path(const Dag& g, std::span<const NodeId> path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0) out += g.has_edge(path[i - 1], path[i]) ? " -> " : " <- ";
    out += g.name(path[i]);
  }
  return out;
}

}  // namespace netcausal
