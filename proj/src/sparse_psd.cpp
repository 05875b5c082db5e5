#include "opfcert/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <set>

namespace opfcert::solver::detail {

namespace {

bool is_subset(const std::vector<int>& small, const std::vector<int>& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(static_cast<size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[static_cast<size_t>(a)] != a) {
      parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
      a = parent[static_cast<size_t>(a)];
    }
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<size_t>(a)] = b;
    return true;
  }
};

}  // namespace

CliqueDecomposition chordal_cliques(int n, const std::vector<std::pair<int, int>>& pattern) {
  if (n <= 0) throw relaxation::ProgramError("chordal_cliques: empty pattern graph");
  std::vector<std::set<int>> adj(static_cast<size_t>(n));
  std::set<std::pair<int, int>> original;
  for (auto [a, b] : pattern) {
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (a < 0 || b >= n)
      throw relaxation::ProgramError("chordal_cliques: pattern vertex out of range");
    adj[static_cast<size_t>(a)].insert(b);
    adj[static_cast<size_t>(b)].insert(a);
    original.insert({a, b});
  }

  // Greedy minimum-degree elimination; each eliminated vertex yields the
  // candidate clique {v} u N(v), and N(v) gets the fill edges.
  std::vector<std::set<int>> work = adj;
  std::vector<char> gone(static_cast<size_t>(n), 0);
  std::vector<std::vector<int>> candidates;
  std::set<std::pair<int, int>> extension = original;
  for (int step = 0; step < n; ++step) {
    int best = -1;
    size_t best_deg = 0;
    for (int v = 0; v < n; ++v) {
      if (gone[static_cast<size_t>(v)]) continue;
      const size_t deg = work[static_cast<size_t>(v)].size();
      if (best == -1 || deg < best_deg) {
        best = v;
        best_deg = deg;
      }
    }
    std::vector<int> clique{best};
    for (int u : work[static_cast<size_t>(best)]) clique.push_back(u);
    std::sort(clique.begin(), clique.end());
    candidates.push_back(clique);
    const auto& nb = work[static_cast<size_t>(best)];
    for (auto it = nb.begin(); it != nb.end(); ++it) {
      for (auto jt = std::next(it); jt != nb.end(); ++jt) {
        const int a = std::min(*it, *jt), b = std::max(*it, *jt);
        if (extension.insert({a, b}).second) {
          work[static_cast<size_t>(a)].insert(b);
          work[static_cast<size_t>(b)].insert(a);
        }
      }
    }
    for (int u : nb) work[static_cast<size_t>(u)].erase(best);
    work[static_cast<size_t>(best)].clear();
    gone[static_cast<size_t>(best)] = 1;
  }

  CliqueDecomposition dec;
  // Keep only maximal candidates (larger first so subsets land on a keeper).
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  for (const auto& c : candidates) {
    bool covered = false;
    for (const auto& kept : dec.cliques)
      if (is_subset(c, kept)) {
        covered = true;
        break;
      }
    if (!covered) dec.cliques.push_back(c);
  }
  for (const auto& e : extension)
    if (!original.count(e)) dec.fill_pairs.push_back(e);

  // Junction tree: max-weight spanning forest on pairwise intersection size.
  const int nc = static_cast<int>(dec.cliques.size());
  struct Link {
    int w, i, j;
  };
  std::vector<Link> links;
  for (int i = 0; i < nc; ++i)
    for (int j = i + 1; j < nc; ++j) {
      std::vector<int> inter;
      std::set_intersection(dec.cliques[static_cast<size_t>(i)].begin(),
                            dec.cliques[static_cast<size_t>(i)].end(),
                            dec.cliques[static_cast<size_t>(j)].begin(),
                            dec.cliques[static_cast<size_t>(j)].end(),
                            std::back_inserter(inter));
      if (!inter.empty()) links.push_back({static_cast<int>(inter.size()), i, j});
    }
  std::stable_sort(links.begin(), links.end(),
                   [](const Link& a, const Link& b) { return a.w > b.w; });
  DisjointSet ds(nc);
  std::vector<std::vector<int>> tree_adj(static_cast<size_t>(nc));
  for (const Link& l : links)
    if (ds.unite(l.i, l.j)) {
      tree_adj[static_cast<size_t>(l.i)].push_back(l.j);
      tree_adj[static_cast<size_t>(l.j)].push_back(l.i);
    }
  dec.tree_parent.assign(static_cast<size_t>(nc), -2);
  for (int r = 0; r < nc; ++r) {
    if (dec.tree_parent[static_cast<size_t>(r)] != -2) continue;
    dec.tree_parent[static_cast<size_t>(r)] = -1;
    std::vector<int> stack{r};
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      for (int nb : tree_adj[static_cast<size_t>(c)])
        if (dec.tree_parent[static_cast<size_t>(nb)] == -2) {
          dec.tree_parent[static_cast<size_t>(nb)] = c;
          stack.push_back(nb);
        }
    }
  }
  return dec;
}

namespace {

Eigen::MatrixXcd hermitian_pinv(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double cutoff = 1e-10 * std::max(0.0, ev.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (ev[k] > cutoff) inv[k] = 1.0 / ev[k];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

Eigen::MatrixXcd clique_tree_complete(const Eigen::MatrixXcd& partial,
                                      const CliqueDecomposition& dec) {
  const int n = static_cast<int>(partial.rows());
  Eigen::MatrixXcd W = partial;
  const int nc = static_cast<int>(dec.cliques.size());

  // Children lists + BFS order over the rooted forest.
  std::vector<std::vector<int>> children(static_cast<size_t>(nc));
  std::vector<int> order;
  for (int c = 0; c < nc; ++c) {
    const int par = dec.tree_parent[static_cast<size_t>(c)];
    if (par == -1)
      order.push_back(c);
    else
      children[static_cast<size_t>(par)].push_back(c);
  }
  for (size_t head = 0; head < order.size(); ++head)
    for (int ch : children[static_cast<size_t>(order[head])]) order.push_back(ch);
  if (order.size() != static_cast<size_t>(nc))
    throw relaxation::ProgramError("clique tree is not a rooted forest");

  std::vector<char> in_cov(static_cast<size_t>(n), 0);
  std::vector<int> covered;
  auto absorb = [&](const std::vector<int>& verts) {
    for (int v : verts)
      if (!in_cov[static_cast<size_t>(v)]) {
        in_cov[static_cast<size_t>(v)] = 1;
        covered.push_back(v);
      }
  };

  for (size_t step = 0; step < order.size(); ++step) {
    const auto& K = dec.cliques[static_cast<size_t>(order[step])];
    if (dec.tree_parent[static_cast<size_t>(order[step])] == -1 && covered.empty()) {
      absorb(K);
      continue;
    }
    std::vector<int> S, R;
    for (int v : K) (in_cov[static_cast<size_t>(v)] ? S : R).push_back(v);
    if (R.empty()) continue;
    std::vector<int> D;
    for (int v : covered)
      if (std::find(S.begin(), S.end(), v) == S.end()) D.push_back(v);
    if (!D.empty()) {
      Eigen::MatrixXcd X;
      if (S.empty()) {
        X = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(D.size()),
                                   static_cast<Eigen::Index>(R.size()));
      } else {
        Eigen::MatrixXcd A(D.size(), S.size()), B(S.size(), S.size()), C(S.size(), R.size());
        for (size_t i = 0; i < D.size(); ++i)
          for (size_t j = 0; j < S.size(); ++j) A(i, j) = W(D[i], S[j]);
        for (size_t i = 0; i < S.size(); ++i)
          for (size_t j = 0; j < S.size(); ++j) B(i, j) = W(S[i], S[j]);
        for (size_t i = 0; i < S.size(); ++i)
          for (size_t j = 0; j < R.size(); ++j) C(i, j) = W(S[i], R[j]);
        X = A * hermitian_pinv(B) * C;
      }
      for (size_t i = 0; i < D.size(); ++i)
        for (size_t j = 0; j < R.size(); ++j) {
          W(D[i], R[j]) = X(i, j);
          W(R[j], D[i]) = std::conj(X(i, j));
        }
    }
    absorb(K);
  }
  return W;
}

}  // namespace opfcert::solver::detail
