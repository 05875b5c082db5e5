#include "opfcert/graph.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

namespace opfcert::graph {

PowerGraph PowerGraph::from_case(const netmodel::NetworkCase& c) {
  std::vector<Edge> edges;
  edges.reserve(c.branches.size());
  for (size_t k = 0; k < c.branches.size(); ++k) {
    auto [a, b] = c.branch_endpoints(static_cast<int>(k));
    edges.push_back({a, b, static_cast<int>(k)});
  }
  return from_edges(c.n(), std::move(edges));
}

PowerGraph PowerGraph::from_edges(int n, std::vector<Edge> edges) {
  PowerGraph g;
  g.n = n;
  g.edges = std::move(edges);
  g.adj.assign(static_cast<size_t>(n), {});
  for (size_t e = 0; e < g.edges.size(); ++e) {
    const Edge& ed = g.edges[e];
    if (ed.u < 0 || ed.u >= n || ed.v < 0 || ed.v >= n)
      throw GraphError("edge " + std::to_string(e) + " endpoint out of range");
    g.adj[static_cast<size_t>(ed.u)].push_back(static_cast<int>(e));
    g.adj[static_cast<size_t>(ed.v)].push_back(static_cast<int>(e));
  }
  return g;
}

SpanningTree spanning_tree(const PowerGraph& g, int root) {
  if (root < 0 || root >= g.n) throw GraphError("spanning tree root out of range");
  SpanningTree t;
  t.root = root;
  t.parent.assign(static_cast<size_t>(g.n), -1);
  t.parent_edge.assign(static_cast<size_t>(g.n), -1);
  t.in_tree.assign(g.edges.size(), 0);
  std::vector<char> seen(static_cast<size_t>(g.n), 0);
  std::queue<int> q;
  seen[static_cast<size_t>(root)] = 1;
  q.push(root);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int e : g.adj[static_cast<size_t>(u)]) {
      const Edge& ed = g.edges[static_cast<size_t>(e)];
      const int w = ed.u == u ? ed.v : ed.u;
      if (seen[static_cast<size_t>(w)]) continue;
      seen[static_cast<size_t>(w)] = 1;
      t.parent[static_cast<size_t>(w)] = u;
      t.parent_edge[static_cast<size_t>(w)] = e;
      t.in_tree[static_cast<size_t>(e)] = 1;
      t.edge_ids.push_back(e);
      q.push(w);
    }
  }
  std::vector<int> stranded;
  for (int v = 0; v < g.n; ++v)
    if (!seen[static_cast<size_t>(v)]) stranded.push_back(v);
  if (!stranded.empty()) {
    std::ostringstream msg;
    msg << "graph is disconnected; unreachable vertices:";
    for (int v : stranded) msg << ' ' << v;
    throw GraphError(msg.str());
  }
  return t;
}

namespace {

// Root-to-vertex path as vertex list, via parent pointers.
std::vector<int> path_from_root(const SpanningTree& t, int v) {
  std::vector<int> path;
  for (int u = v; u != -1; u = t.parent[static_cast<size_t>(u)]) path.push_back(u);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

CycleBasis fundamental_cycles(const PowerGraph& g, const SpanningTree& t) {
  CycleBasis basis;
  for (size_t e = 0; e < g.edges.size(); ++e) {
    if (t.in_tree[e]) continue;
    const Edge& chord = g.edges[e];

    // Tree paths root->u and root->v share a prefix up to the LCA.
    std::vector<int> pu = path_from_root(t, chord.u);
    std::vector<int> pv = path_from_root(t, chord.v);
    size_t common = 0;
    while (common < pu.size() && common < pv.size() && pu[common] == pv[common])
      ++common;
    // Both paths start at the root, so common >= 1 and the LCA is the last
    // shared vertex. Walk: u -> ... -> lca -> ... -> v -> (chord back to u).
    const size_t lca = common - 1;
    Cycle cyc;
    std::vector<int> walk;
    for (size_t i = pu.size(); i-- > lca;) walk.push_back(pu[i]);
    for (size_t i = common; i < pv.size(); ++i) walk.push_back(pv[i]);

    for (size_t i = 0; i + 1 < walk.size(); ++i) {
      const int a = walk[i], b = walk[i + 1];
      // One of a,b is the child on this tree edge.
      const int child = t.parent[static_cast<size_t>(b)] == a ? b : a;
      const int eid = t.parent_edge[static_cast<size_t>(child)];
      const Edge& ed = g.edges[static_cast<size_t>(eid)];
      cyc.edges.push_back({eid, ed.u == a ? 1 : -1});
    }
    cyc.edges.push_back({static_cast<int>(e), chord.v == walk.back() ? -1 : 1});
    walk.push_back(walk.front());
    cyc.vertices = std::move(walk);
    basis.cycles.push_back(std::move(cyc));
  }
  return basis;
}

}  // namespace opfcert::graph
