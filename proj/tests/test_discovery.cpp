#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "netcausal/discovery.hpp"
#include "netcausal/error.hpp"

using namespace netcausal;

namespace {

PcConfig fisher(std::size_t max_cond = 3) {
  PcConfig cfg;
  cfg.test = CiTestKind::FisherZ;
  cfg.max_cond_size = max_cond;
  return cfg;
}

Cpdag undirected(std::vector<std::string> nodes, std::vector<std::pair<NodeId, NodeId>> edges) {
  Cpdag g(std::move(nodes));
  for (auto [a, b] : edges) g.add_undirected(a, b);
  return g;
}

std::map<std::set<std::string>, std::set<std::string>> named_sepsets(const PcResult& r,
                                                                   const std::vector<std::string>& names) {
  std::map<std::set<std::string>, std::set<std::string>> out;
  for (const auto& [pair, s] : r.sepsets.entries()) {
    std::set<std::string> members;
    for (NodeId v : s) members.insert(names[v]);
    out[{names[pair.first], names[pair.second]}] = members;
  }
  return out;
}

}  // namespace

TEST_CASE("test kind names") {
  CHECK(to_string(CiTestKind::KernelCi) == "kernel_ci");
  CHECK(ci_test_kind_from_string("fisher_z") == CiTestKind::FisherZ);
  CHECK(ci_test_kind_from_string("hsic") == CiTestKind::Hsic);
  CHECK_THROWS_AS(ci_test_kind_from_string("chi2"), InvalidInput);
}

TEST_CASE("pc config validation") {
  PcConfig cfg;
  CHECK_NOTHROW(cfg.validate(5));
  CHECK_THROWS_AS(cfg.validate(4), InvalidInput);
  cfg.level = 0;
  CHECK_THROWS_AS(cfg.validate(5), InvalidInput);
}

TEST_CASE("v-structure orientation follows the separation sets") {
  const auto skel = undirected({"A", "C", "B"}, {{0, 1}, {1, 2}});
  SepSets empty;
  empty.set(0, 2, {});
  const auto oriented = orient_v_structures(skel, empty);
  CHECK(oriented.graph.has_directed(0, 1));
  CHECK(oriented.graph.has_directed(2, 1));
  CHECK(oriented.conflicts.empty());

  SepSets through;
  through.set(0, 2, {1});
  const auto kept = orient_v_structures(skel, through);
  CHECK(kept.graph.has_undirected(0, 1));
  CHECK(kept.graph.has_undirected(1, 2));
}

TEST_CASE("conflicting v-structures are reported, not silently overwritten") {
  const auto skel = undirected({"A", "B", "C", "D"}, {{0, 1}, {1, 2}, {2, 3}});
  SepSets s;
  s.set(0, 2, {});
  s.set(1, 3, {});
  s.set(0, 3, {});
  const auto r = orient_v_structures(skel, s);
  CHECK_FALSE(r.conflicts.empty());
  CHECK_FALSE(r.graph.has_directed_cycle());
}

TEST_CASE("meek rule examples") {
  SUBCASE("R1 propagates away from an arrowhead") {
    Cpdag g({"a", "b", "c"});
    g.add_directed(0, 1);
    g.add_undirected(1, 2);
    const auto m = apply_meek_rules(g);
    CHECK(m.has_directed(1, 2));
  }
  SUBCASE("R2 avoids a directed cycle") {
    Cpdag g({"a", "b", "c"});
    g.add_directed(0, 1);
    g.add_directed(1, 2);
    g.add_undirected(0, 2);
    CHECK(apply_meek_rules(g).has_directed(0, 2));
  }
  SUBCASE("R3 orients into the shared child of two non-adjacent nodes") {
    Cpdag g({"a", "b", "c", "d"});
    g.add_undirected(0, 1);
    g.add_undirected(0, 2);
    g.add_undirected(0, 3);
    g.add_directed(2, 1);
    g.add_directed(3, 1);
    CHECK(apply_meek_rules(g).has_directed(0, 1));
  }
  SUBCASE("an isolated undirected edge stays undirected") {
    const auto g = undirected({"a", "b"}, {{0, 1}});
    CHECK(apply_meek_rules(g) == g);
  }
}

TEST_CASE("cpdag_of matches brute-force equivalence classes") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 150; ++trial) {
    const int k = 2 + trial % 5;
    const auto og = oracle::random_dag(k, 0.3 + 0.1 * (trial % 4), rng);
    const auto g = fixtures::to_dag(og);
    const auto c = cpdag_of(g);
    const auto [dir, und] = oracle::cpdag(og);
    std::set<std::pair<int, int>> got_dir, got_und;
    for (auto [a, b] : c.directed_edges()) got_dir.insert({static_cast<int>(a), static_cast<int>(b)});
    for (auto [a, b] : c.undirected_edges()) got_und.insert({static_cast<int>(a), static_cast<int>(b)});
    REQUIRE(got_dir == dir);
    REQUIRE(got_und == und);
    CHECK(apply_meek_rules(c) == c);
    CHECK_FALSE(c.has_directed_cycle());
    CHECK(structural_hamming_distance(c, c) == 0);
  }
}

TEST_CASE("structural hamming distance matches by name") {
  Cpdag a({"X", "Y", "Z"}), b({"Z", "Y", "X"});
  a.add_directed(0, 1);
  b.add_directed(2, 1);
  CHECK(structural_hamming_distance(a, b) == 0);
  b.remove_edge(2, 1);
  b.add_undirected(2, 1);
  CHECK(structural_hamming_distance(a, b) == 1);
  b.add_undirected(0, 1);
  CHECK(structural_hamming_distance(a, b) == 2);
  CHECK_THROWS_AS(structural_hamming_distance(a, Cpdag({"X", "Y"})), InvalidInput);
}

TEST_CASE("pc recovers a chain with the mediator as separating set") {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = generate_scm(fixtures::chain_scm(seed), 500);
    const auto r = pc(d, fisher(1));
    const auto s = r.sepsets.find(d.index_of("X"), d.index_of("Y"));
    const bool ok = !r.cpdag.adjacent(d.index_of("X"), d.index_of("Y")) && s && *s == NodeSet{d.index_of("Z")} &&
                    r.cpdag.has_undirected(0, 1) && r.cpdag.has_undirected(1, 2);
    hits += ok;
  }
  CHECK(hits >= 16);
}

TEST_CASE("pc orients a collider with the kernel test") {
  const auto d = generate_scm(fixtures::collider_scm(4), 250);
  PcConfig cfg;
  cfg.max_cond_size = 1;
  const auto r = pc(d, cfg);
  CHECK(fixtures::edge_strings(r.cpdag) == std::set<std::string>{"X->W", "Y->W"});
}

TEST_CASE("pc on independent columns finds no edges") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> cols(4, std::vector<double>(300));
  for (auto& c : cols)
    for (auto& v : c) v = z(rng);
  const Dataset d({{"a", "", ""}, {"b", "", ""}, {"c", "", ""}, {"d", "", ""}}, cols);
  auto cfg = fisher(2);
  cfg.level = 0.01;
  const auto r = pc(d, cfg);
  CHECK(r.cpdag.num_edges() == 0);
  CHECK(r.sepsets.size() == 6);
}

TEST_CASE("pc output does not depend on column order") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = generate_scm(fixtures::five_node_linear_scm(seed), 400);
    const std::vector<std::string> reversed{"E", "D", "C", "B", "A"};
    const auto a = pc(d, fisher());
    const auto b = pc(d.select(reversed), fisher());
    CHECK(fixtures::edge_strings(a.cpdag) == fixtures::edge_strings(b.cpdag));
    CHECK(named_sepsets(a, d.names()) == named_sepsets(b, reversed));
  }
}

TEST_CASE("pc internal consistency on linear models") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto d = generate_scm(fixtures::five_node_linear_scm(100 + seed), 300);
    const auto cfg = fisher();
    const auto r = pc(d, cfg);

    for (const auto& [pair, s] : r.sepsets.entries()) {
      CHECK_FALSE(r.cpdag.adjacent(pair.first, pair.second));
      CHECK(run_ci_test(d, pair.first, pair.second, s, cfg).independent);
      CHECK(s.size() <= cfg.max_cond_size);
    }
    for (std::size_t i = 1; i < r.diagnostics.levels.size(); ++i)
      CHECK(r.diagnostics.levels[i].edges_remaining <= r.diagnostics.levels[i - 1].edges_remaining);
    CHECK_FALSE(r.cpdag.has_directed_cycle());
    CHECK(apply_meek_rules(r.cpdag) == r.cpdag);
  }
}

TEST_CASE("pc is close to the truth on the five-node model") {
  const auto truth = cpdag_of(fixtures::five_node_linear_scm(0).graph());
  std::size_t worst = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = generate_scm(fixtures::five_node_linear_scm(seed), 1000);
    worst = std::max(worst, structural_hamming_distance(pc(d, fisher()).cpdag, truth));
  }
  CHECK(worst <= 2);
}

TEST_CASE("hsic mode runs marginal tests only") {
  const auto d = generate_scm(fixtures::chain_scm(2), 200);
  PcConfig cfg;
  cfg.test = CiTestKind::Hsic;
  cfg.max_cond_size = 1;
  const auto r = pc(d, cfg);
  CHECK(r.cpdag.num_edges() == 3);
  for (const auto& l : r.diagnostics.levels) CHECK(l.level == 0);
}
