#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "opfcert/netmodel.hpp"

namespace opfcert::graph {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Edge {
  int u = 0, v = 0;
  int branch = -1;  // index into NetworkCase::branches; -1 for synthetic edges
};

/// Undirected multigraph over internal bus indices. Parallel branches are kept
/// as distinct edges; the cycle basis then records each duplicate pair as a
/// trivial two-edge cycle.
struct PowerGraph {
  int n = 0;
  std::vector<Edge> edges;
  std::vector<std::vector<int>> adj;  // vertex -> incident edge ids

  static PowerGraph from_case(const netmodel::NetworkCase& c);
  static PowerGraph from_edges(int n, std::vector<Edge> edges);
};

struct SpanningTree {
  int root = 0;
  std::vector<int> edge_ids;     // the |N|-1 tree edges
  std::vector<int> parent;       // vertex -> parent vertex, -1 at root
  std::vector<int> parent_edge;  // vertex -> edge id towards parent, -1 at root
  std::vector<char> in_tree;     // edge id -> membership flag
};

/// BFS tree rooted at `root` (deterministic: edges scanned in id order).
/// Throws GraphError listing the stranded vertices if g is disconnected.
SpanningTree spanning_tree(const PowerGraph& g, int root);

struct CycleEdge {
  int edge_id = -1;
  int sign = 1;  // +1: traversed u->v, -1: traversed v->u
};

struct Cycle {
  std::vector<CycleEdge> edges;
  std::vector<int> vertices;  // closed walk, first == last
};

struct CycleBasis {
  std::vector<Cycle> cycles;
};

/// One fundamental cycle per non-tree edge: the edge plus the tree path
/// between its endpoints, oriented consistently along the traversal.
CycleBasis fundamental_cycles(const PowerGraph& g, const SpanningTree& t);

}  // namespace opfcert::graph
