#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "netcausal/dataset.hpp"
#include "netcausal/graph.hpp"
#include "netcausal/independence.hpp"

namespace netcausal {

enum class CiTestKind { Hsic, KernelCi, FisherZ };

std::string_view to_string(CiTestKind kind);
CiTestKind ci_test_kind_from_string(std::string_view text);

struct PcConfig {
  double level = 0.05;
  std::size_t max_cond_size = 3;
  /// Hsic runs marginal tests only, i.e. caps the conditioning size at 0.
  CiTestKind test = CiTestKind::KernelCi;
  /// Freeze adjacencies per conditioning level (order-independent skeleton).
  bool stable = true;
  KernelConfig kernel{};

  void validate(std::size_t num_nodes) const;
};

/// Separation set per unordered pair.
class SepSets {
 public:
  void set(NodeId a, NodeId b, NodeSet s);
  const NodeSet* find(NodeId a, NodeId b) const;
  bool contains(NodeId a, NodeId b) const { return find(a, b) != nullptr; }
  std::size_t size() const noexcept { return sets_.size(); }
  const std::map<std::pair<NodeId, NodeId>, NodeSet>& entries() const noexcept { return sets_; }

 private:
  std::map<std::pair<NodeId, NodeId>, NodeSet> sets_;
};

struct LevelStats {
  std::size_t level = 0;
  std::size_t tests_run = 0;
  std::size_t edges_removed = 0;
  std::size_t edges_remaining = 0;
};

struct OrientationConflict {
  NodeId a = 0;
  NodeId b = 0;
  std::string detail;
};

struct SkeletonResult {
  Cpdag skeleton;  // undirected edges only
  SepSets sepsets;
  std::vector<LevelStats> levels;
};

struct VStructureResult {
  Cpdag graph;
  std::vector<OrientationConflict> conflicts;
};

struct PcDiagnostics {
  std::vector<LevelStats> levels;
  std::vector<OrientationConflict> conflicts;
  std::size_t total_tests = 0;
};

struct PcResult {
  Cpdag cpdag;
  SepSets sepsets;
  PcDiagnostics diagnostics;
};

/// Runs the configured independence test for x and y given z on the columns
/// of `data` (node ids are column indices).
CiTestResult run_ci_test(const Dataset& data, NodeId x, NodeId y, const NodeSet& z,
                         const PcConfig& cfg);

SkeletonResult pc_skeleton(const Dataset& data, const PcConfig& cfg);
VStructureResult orient_v_structures(const Cpdag& skeleton, const SepSets& sepsets);
/// Meek rules R1-R4 applied to a fixed point.
Cpdag apply_meek_rules(Cpdag g);
PcResult pc(const Dataset& data, const PcConfig& cfg);

/// Markov-equivalence representative of a DAG: its skeleton, its
/// v-structures, and every edge compelled by the Meek rules.
Cpdag cpdag_of(const Dag& dag);

/// Number of node pairs whose edge mark differs between the two graphs.
/// Graphs are matched by node name.
std::size_t structural_hamming_distance(const Cpdag& a, const Cpdag& b);

std::string diagnostics_to_json(const PcResult& result, const PcConfig& cfg);

}  // namespace netcausal
