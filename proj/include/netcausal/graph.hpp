#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace netcausal {

using NodeId = std::size_t;
/// Sorted, duplicate-free list of node ids.
using NodeSet = std::vector<NodeId>;

NodeSet make_node_set(std::vector<NodeId> ids);

/// Shared name <-> id table. Node order is insertion order and governs every
/// iteration and every piece of output.
class NodeIndex {
 public:
  NodeIndex() = default;
  explicit NodeIndex(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(NodeId id) const { return names_.at(id); }
  bool contains(std::string_view name) const noexcept;
  /// Throws InvalidInput("unknown node 'X'").
  NodeId id(std::string_view name) const;
  NodeSet ids(std::span<const std::string> names) const;
  NodeSet ids(std::initializer_list<std::string_view> names) const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> lookup_;
};

/// Directed acyclic graph. Construction rejects self-loops, duplicate names,
/// unknown endpoints and directed cycles.
class Dag : public NodeIndex {
 public:
  Dag() = default;
  Dag(std::vector<std::string> nodes, const std::vector<std::pair<NodeId, NodeId>>& edges);
  static Dag from_names(std::vector<std::string> nodes,
                        const std::vector<std::pair<std::string, std::string>>& edges);

  const NodeSet& parents(NodeId v) const { return parents_.at(v); }
  const NodeSet& children(NodeId v) const { return children_.at(v); }
  bool has_edge(NodeId from, NodeId to) const;
  bool adjacent(NodeId a, NodeId b) const { return has_edge(a, b) || has_edge(b, a); }
  std::size_t num_edges() const noexcept { return num_edges_; }

  /// Edges sorted by (parent, child).
  std::vector<std::pair<NodeId, NodeId>> edges() const;
  std::vector<NodeId> topological_order() const;

  /// Copy with every edge leaving `v` deleted.
  Dag without_outgoing(NodeId v) const;

 private:
  std::vector<NodeSet> parents_;
  std::vector<NodeSet> children_;
  std::size_t num_edges_ = 0;
};

/// Partially directed graph; each adjacent pair carries exactly one mark.
class Cpdag : public NodeIndex {
 public:
  Cpdag() = default;
  explicit Cpdag(std::vector<std::string> nodes);
  static Cpdag from_dag(const Dag& dag);

  void add_directed(NodeId from, NodeId to);
  void add_undirected(NodeId a, NodeId b);
  void remove_edge(NodeId a, NodeId b);
  /// Turns the undirected edge a-b into a->b.
  void orient(NodeId from, NodeId to);

  bool has_directed(NodeId from, NodeId to) const { return dir_[from * size() + to]; }
  bool has_undirected(NodeId a, NodeId b) const { return und_[a * size() + b]; }
  bool adjacent(NodeId a, NodeId b) const {
    return has_directed(a, b) || has_directed(b, a) || has_undirected(a, b);
  }

  NodeSet adjacent_nodes(NodeId v) const;
  std::vector<std::pair<NodeId, NodeId>> directed_edges() const;
  /// Each undirected pair once, as (smaller id, larger id).
  std::vector<std::pair<NodeId, NodeId>> undirected_edges() const;
  std::size_t num_edges() const;

  bool has_directed_cycle() const;
  /// Throws InvalidInput when any edge is undirected or the result is cyclic.
  Dag to_dag() const;

  friend bool operator==(const Cpdag& a, const Cpdag& b);

 private:
  void check_pair(NodeId a, NodeId b) const;

  std::vector<bool> dir_;
  std::vector<bool> und_;
};

/// Nodes reachable from v along directed edges, excluding v.
NodeSet descendants(const Dag& g, NodeId v);
/// The nodes of `targets` together with all their ancestors.
NodeSet ancestral_closure(const Dag& g, const NodeSet& targets);

/// True iff some non-collider on `path` lies in z, or some collider on it has
/// neither itself nor a descendant in z. Throws when `path` is not a simple
/// path of g (consecutive nodes adjacent, no repeats).
bool is_blocked(const Dag& g, std::span<const NodeId> path, const NodeSet& z);

/// Reachability-based d-separation test. Requires x != y and x, y not in z.
bool d_separated(const Dag& g, NodeId x, NodeId y, const NodeSet& z);

/// Some simple path between x and y not blocked by z, if one exists. With
/// `into_x_only` only paths whose first edge points into x are considered.
std::optional<std::vector<NodeId>> find_open_path(const Dag& g, NodeId x, NodeId y,
                                                  const NodeSet& z, bool into_x_only = false);

struct BackdoorViolation {
  enum class Kind { Descendant, UnblockedPath };
  Kind kind = Kind::Descendant;
  NodeId descendant = 0;      // set for Kind::Descendant
  std::vector<NodeId> path;   // set for Kind::UnblockedPath, starts at the treatment
};

struct BackdoorCertificate {
  NodeId treatment = 0;
  NodeId outcome = 0;
  NodeSet adjustment_set;
  bool valid = false;
  std::optional<BackdoorViolation> violation;
};

/// Checks both back-door conditions: no member of z descends from x, and z
/// blocks every path between x and y that starts with an arrow into x.
BackdoorCertificate satisfies_backdoor(const Dag& g, NodeId x, NodeId y, const NodeSet& z);

/// Every valid adjustment set with at most `max_size` members. Minimal sets
/// come first, then the remaining valid sets; each group is ordered
/// lexicographically by node id.
std::vector<NodeSet> find_backdoor_sets(const Dag& g, NodeId x, NodeId y,
                                        std::size_t max_size = 4);

std::string to_dot(const Dag& g);
std::string to_dot(const Cpdag& g);

/// {"nodes": [...], "directed": [[a, b], ...], "undirected": [[a, b], ...]}
std::string to_json(const Cpdag& g);
std::string to_json(const Dag& g);
Cpdag graph_from_json(std::string_view text);

/// Renders a path with its edge directions, e.g. "X <- Z -> Y".
std::string format_path(const Dag& g, std::span<const NodeId> path);

}  // namespace netcausal
