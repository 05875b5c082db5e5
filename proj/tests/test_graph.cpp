#include <doctest.h>

#include <set>

#include "opfcert/graph.hpp"
#include "opfcert/netmodel.hpp"

using namespace opfcert::graph;

namespace {

std::string case_path(const char* name) {
  return std::string(OPFCERT_SOURCE_CASE_DIR) + "/" + name;
}

// Every cycle must be a closed walk whose edges connect consecutive vertices
// in the direction recorded by `sign`.
void check_cycle_consistency(const PowerGraph& g, const Cycle& cyc) {
  REQUIRE(cyc.vertices.size() == cyc.edges.size() + 1);
  REQUIRE(cyc.vertices.front() == cyc.vertices.back());
  for (size_t i = 0; i < cyc.edges.size(); ++i) {
    const Edge& ed = g.edges[static_cast<size_t>(cyc.edges[i].edge_id)];
    const int a = cyc.vertices[i], b = cyc.vertices[i + 1];
    if (cyc.edges[i].sign == 1) {
      CHECK(ed.u == a);
      CHECK(ed.v == b);
    } else {
      CHECK(ed.u == b);
      CHECK(ed.v == a);
    }
  }
}

}  // namespace

TEST_CASE("spanning tree on a triangle") {
  auto g = PowerGraph::from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
  auto t = spanning_tree(g, 0);
  CHECK(t.root == 0);
  CHECK(t.edge_ids.size() == 2);
  CHECK(t.parent[0] == -1);
  CHECK(t.parent[1] == 0);
  CHECK(t.parent[2] == 0);

  auto basis = fundamental_cycles(g, t);
  REQUIRE(basis.cycles.size() == 1);
  const Cycle& cyc = basis.cycles[0];
  CHECK(cyc.edges.size() == 3);  // the triangle itself
  check_cycle_consistency(g, cyc);
  std::set<int> used;
  for (auto& ce : cyc.edges) used.insert(ce.edge_id);
  CHECK(used == std::set<int>{0, 1, 2});
}

TEST_CASE("cyclomatic number |L| - |N| + 1 on case9") {
  auto c = opfcert::netmodel::parse_matpower_file(case_path("case9.m"));
  auto g = PowerGraph::from_case(c);
  auto t = spanning_tree(g, c.slack_index);
  auto basis = fundamental_cycles(g, t);
  CHECK(basis.cycles.size() == 9 - 9 + 1);  // single loop network
  for (const Cycle& cyc : basis.cycles) check_cycle_consistency(g, cyc);
}

TEST_CASE("cyclomatic number on case14") {
  auto c = opfcert::netmodel::parse_matpower_file(case_path("case14.m"));
  auto g = PowerGraph::from_case(c);
  auto t = spanning_tree(g, c.slack_index);
  CHECK(t.edge_ids.size() == 13);
  auto basis = fundamental_cycles(g, t);
  CHECK(basis.cycles.size() == 20 - 14 + 1);
  for (const Cycle& cyc : basis.cycles) check_cycle_consistency(g, cyc);
  // Every non-tree edge appears in exactly one fundamental cycle.
  std::set<int> chords;
  for (const Cycle& cyc : basis.cycles)
    for (auto& ce : cyc.edges)
      if (!t.in_tree[static_cast<size_t>(ce.edge_id)]) chords.insert(ce.edge_id);
  CHECK(chords.size() == basis.cycles.size());
}

TEST_CASE("radial graph has an empty basis") {
  auto g = PowerGraph::from_edges(4, {{0, 1}, {1, 2}, {1, 3}});
  auto t = spanning_tree(g, 0);
  CHECK(fundamental_cycles(g, t).cycles.empty());
  CHECK(t.parent_edge[2] == 1);
  CHECK(t.parent[3] == 1);
}

TEST_CASE("parallel branches form a two-edge cycle") {
  auto g = PowerGraph::from_edges(2, {{0, 1, 0}, {0, 1, 1}});
  auto t = spanning_tree(g, 0);
  auto basis = fundamental_cycles(g, t);
  REQUIRE(basis.cycles.size() == 1);
  CHECK(basis.cycles[0].edges.size() == 2);
  check_cycle_consistency(g, basis.cycles[0]);
  // Opposite traversal directions around the pair.
  CHECK(basis.cycles[0].edges[0].sign != basis.cycles[0].edges[1].sign);
}

TEST_CASE("disconnected graphs are reported with the stranded vertices") {
  auto g = PowerGraph::from_edges(4, {{0, 1}, {2, 3}});
  try {
    spanning_tree(g, 0);
    FAIL("expected GraphError");
  } catch (const GraphError& e) {
    std::string msg = e.what();
    CHECK(msg.find("2") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
  }
}

TEST_CASE("bfs tree is deterministic") {
  auto g = PowerGraph::from_edges(5, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}});
  auto t1 = spanning_tree(g, 0);
  auto t2 = spanning_tree(g, 0);
  CHECK(t1.edge_ids == t2.edge_ids);
  CHECK(t1.parent == t2.parent);
  // BFS in edge-id order reaches 3 through vertex 1 (edge 2), not vertex 2.
  CHECK(t1.parent[3] == 1);
}
