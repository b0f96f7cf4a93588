#pragma once
// Shared builders for test SCMs and graph conversions.

#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "netcausal/dataset.hpp"
#include "netcausal/discovery.hpp"
#include "netcausal/graph.hpp"
#include "netcausal/scm.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace netcausal;

inline std::vector<std::string> node_names(int k) {
  std::vector<std::string> out;
  for (int i = 0; i < k; ++i) out.push_back("V" + std::to_string(i));
  return out;
}

inline Dag to_dag(const oracle::Graph& g) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (auto [a, b] : g.edges()) edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
  return Dag(node_names(g.n), edges);
}

struct Node {
  std::string name;
  MechanismForm form = MechanismForm::Linear;
  std::vector<std::pair<std::string, double>> weights;
  double noise_sd = 1.0;
  double intercept = 0.0;
};

inline ScmSpec make_scm(const std::vector<Node>& nodes, std::uint64_t seed) {
  std::vector<std::string> names;
  for (const auto& n : nodes) names.push_back(n.name);
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<Mechanism> mechs;
  std::vector<Noise> noise;
  for (const auto& n : nodes) {
    Mechanism m;
    m.form = n.form;
    m.intercept = n.intercept;
    for (const auto& [p, w] : n.weights) {
      edges.emplace_back(p, n.name);
      m.weights[p] = w;
    }
    mechs.push_back(m);
    noise.push_back(Noise{NoiseKind::Gaussian, n.noise_sd});
  }
  return ScmSpec(Dag::from_names(names, edges), mechs, noise, seed);
}

/// Z -> X, Z -> Y, X -> Y with unit weights and unit noise:
/// E[Y | do(X = x)] = x while E[Y | X = x] = 1.5 x.
inline ScmSpec confounder_scm(std::uint64_t seed) {
  return make_scm({{"Z", MechanismForm::Linear, {}},
                   {"X", MechanismForm::Linear, {{"Z", 1.0}}},
                   {"Y", MechanismForm::Linear, {{"X", 1.0}, {"Z", 1.0}}}},
                  seed);
}

/// X -> Z -> Y.
inline ScmSpec chain_scm(std::uint64_t seed) {
  return make_scm({{"X", MechanismForm::Linear, {}},
                   {"Z", MechanismForm::Linear, {{"X", 0.8}}, 0.6},
                   {"Y", MechanismForm::Linear, {{"Z", 0.8}}, 0.6}},
                  seed);
}

/// X -> W <- Y.
inline ScmSpec collider_scm(std::uint64_t seed) {
  return make_scm({{"X", MechanismForm::Linear, {}},
                   {"Y", MechanismForm::Linear, {}},
                   {"W", MechanismForm::Linear, {{"X", 1.0}, {"Y", 1.0}}, 0.5}},
                  seed);
}

/// A -> C <- B, C -> D, D -> E <- A.
inline ScmSpec five_node_linear_scm(std::uint64_t seed) {
  return make_scm({{"A", MechanismForm::Linear, {}},
                   {"B", MechanismForm::Linear, {}},
                   {"C", MechanismForm::Linear, {{"A", 0.8}, {"B", 0.8}}},
                   {"D", MechanismForm::Linear, {{"C", 0.7}}},
                   {"E", MechanismForm::Linear, {{"D", 0.7}, {"A", 0.8}}}},
                  seed);
}

/// A -> B, A -> C, B -> D, C -> D, all quadratic.
inline ScmSpec four_node_quadratic_scm(std::uint64_t seed) {
  return make_scm({{"A", MechanismForm::Linear, {}},
                   {"B", MechanismForm::Quadratic, {{"A", 1.0}}, 0.5},
                   {"C", MechanismForm::Quadratic, {{"A", 0.8}}, 0.5},
                   {"D", MechanismForm::Quadratic, {{"B", 0.5}, {"C", 0.5}}, 0.5}},
                  seed);
}

/// Unordered name pairs of a graph's adjacencies.
inline std::set<std::pair<std::string, std::string>> skeleton_names(const Cpdag& g) {
  std::set<std::pair<std::string, std::string>> out;
  auto add = [&](NodeId a, NodeId b) {
    auto x = g.name(a), y = g.name(b);
    if (y < x) std::swap(x, y);
    out.insert({x, y});
  };
  for (auto [a, b] : g.directed_edges()) add(a, b);
  for (auto [a, b] : g.undirected_edges()) add(a, b);
  return out;
}

/// Named edge description that does not depend on node order:
/// directed "a->b", undirected "a--b" with a < b.
inline std::set<std::string> edge_strings(const Cpdag& g) {
  std::set<std::string> out;
  for (auto [a, b] : g.directed_edges()) out.insert(g.name(a) + "->" + g.name(b));
  for (auto [a, b] : g.undirected_edges()) {
    auto x = g.name(a), y = g.name(b);
    if (y < x) std::swap(x, y);
    out.insert(x + "--" + y);
  }
  return out;
}

}  // namespace fixtures
