#include "doctest.h"

#include "opfcert/netmodel.hpp"
#include "opfcert/relaxation.hpp"
#include "opfcert/solver.hpp"

#include <Eigen/Eigenvalues>

#include <complex>
#include <cstdlib>
#include <random>

using namespace opfcert;
using relaxation::AffExpr;
using relaxation::BuildResult;
using relaxation::ConeClass;
using relaxation::ConicProgram;
using relaxation::RelaxationKind;
using solver::SolverConfig;
using solver::SolveStatus;

namespace {

netmodel::NetworkCase load(const std::string& name) {
  return netmodel::parse_matpower_file(std::string(OPFCERT_SOURCE_CASE_DIR) + "/" + name);
}

std::string refsolve_command() {
  return "python3 " OPFCERT_TOOLS_DIR "/refsolve.py";
}

// case9 SDR optimum, frozen from an independent cvxpy/CVXOPT solve of the
// exported program.
constexpr double kCase9SdrObjective = 5297.4055434702;
// case9 AC-OPF optimum, frozen from a scipy trust-constr solve of the polar
// AC-OPF (multi-start, mismatch < 1e-12).
constexpr double kCase9AcObjective = 5297.406731;

}  // namespace

TEST_CASE("trivial LP solves exactly") {
  ConicProgram p;
  const int x = p.new_var("x");
  p.objective.add(x, 1.0);
  AffExpr floor;
  floor.add(x, 1.0).add_const(-3.0);
  p.ineq.push_back({floor, "floor"});
  auto be = solver::make_backend("native");
  auto raw = be->solve_raw(p, SolverConfig{});
  CHECK(raw.status == SolveStatus::optimal);
  CHECK(raw.objective == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(raw.x.at(0) == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("second-order and rotated cones lower with their textbook optima") {
  SolverConfig cfg;
  auto be = solver::make_backend("native");

  // min h s.t. h >= ||(3, 4)||  ->  5
  ConicProgram p;
  const int h = p.new_var("h");
  p.objective.add(h, 1.0);
  AffExpr eh, c3, c4;
  eh.add(h, 1.0);
  c3.add_const(3.0);
  c4.add_const(4.0);
  p.cones.push_back({ConeClass::soc, {eh, c3, c4}, "norm"});
  auto raw = be->solve_raw(p, cfg);
  CHECK(raw.status == SolveStatus::optimal);
  CHECK(raw.x.at(0) == doctest::Approx(5.0).epsilon(1e-7));

  // min t s.t. x = 3, 2 t (1/2) >= x^2  ->  9
  ConicProgram p2;
  const int t = p2.new_var("t");
  const int x = p2.new_var("x");
  p2.objective.add(t, 1.0);
  AffExpr fix;
  fix.add(x, 1.0).add_const(-3.0);
  p2.eq.push_back({fix, "fix"});
  AffExpr et, half, ex;
  et.add(t, 1.0);
  half.add_const(0.5);
  ex.add(x, 1.0);
  p2.cones.push_back({ConeClass::rsoc, {et, half, ex}, "epi"});
  raw = be->solve_raw(p2, cfg);
  CHECK(raw.status == SolveStatus::optimal);
  CHECK(raw.x.at(0) == doctest::Approx(9.0).epsilon(1e-6));
}

TEST_CASE("psd lowering pins the tridiagonal maximum at 1/sqrt(2)") {
  // max x s.t. [[1,x,0],[x,1,x],[0,x,1]] psd; distinguishes the svec slot
  // order at dimension 3, where row- and column-stacked layouts differ.
  ConicProgram p;
  const int x = p.new_var("x");
  p.objective.add(x, -1.0);
  relaxation::PsdBlock blk;
  blk.dim = 3;
  AffExpr one, ex;
  one.add_const(1.0);
  ex.add(x, 1.0);
  blk.entries.push_back({0, 0, one});
  blk.entries.push_back({0, 1, ex});
  blk.entries.push_back({1, 1, one});
  blk.entries.push_back({1, 2, ex});
  blk.entries.push_back({2, 2, one});
  blk.tag = "probe";
  p.psd_blocks.push_back(std::move(blk));
  auto raw = solver::make_backend("native")->solve_raw(p, SolverConfig{});
  CHECK(raw.status == SolveStatus::optimal);
  CHECK(raw.x.at(0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-7));
}

TEST_CASE("contradictory voltage rows report infeasible") {
  BuildResult br = build(RelaxationKind::SOCR, load("case9.m"));
  for (auto& row : br.program.ineq)
    if (row.tag == "vmax bus 5") row.expr.constant = 0.5;  // W_55 <= 0.5 < vmin^2
  SolverConfig cfg;
  auto sol = solver::solve(br.program, cfg);
  CHECK(sol.status == SolveStatus::infeasible);
  CHECK(sol.W_entries.empty());
}

TEST_CASE("an objective unbounded below reports unbounded") {
  ConicProgram p;
  const int x = p.new_var("x");
  p.objective.add(x, 1.0);
  AffExpr cap;
  cap.add(x, -1.0).add_const(5.0);  // x <= 5
  p.ineq.push_back({cap, "cap"});
  auto raw = solver::make_backend("native")->solve_raw(p, SolverConfig{});
  CHECK(raw.status == SolveStatus::unbounded);
}

TEST_CASE("backend selectors resolve and bad ones are rejected") {
  CHECK(solver::make_backend("native")->name() == "native");
  CHECK(solver::make_backend("native:dense")->name() == "native:dense");
  CHECK(solver::make_backend("native:sparse")->name() == "native:sparse");
  CHECK(solver::make_backend("subprocess:echo")->name() == "subprocess");
  CHECK_THROWS_AS((void)solver::make_backend("mosek"), solver::SolveError);

  setenv("OPFCERT_BACKEND", "native:dense", 1);
  CHECK(solver::make_backend("")->name() == "native:dense");
  unsetenv("OPFCERT_BACKEND");
  CHECK(solver::make_backend("")->name() == "native");

  SolverConfig bad;
  bad.tol_feas = 0.0;
  CHECK_THROWS_AS((void)solver::solve(ConicProgram{}, bad), solver::SolveError);
}

TEST_CASE("case9 SDR hits the reference objective and yields a psd W") {
  BuildResult br = build(RelaxationKind::SDR, load("case9.m"));
  SolverConfig cfg;
  auto sol = solver::solve(br.program, cfg);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(std::abs(sol.objective - kCase9SdrObjective) / kCase9SdrObjective < 1e-6);
  // Table-level check: the relaxation closes the gap on this case.
  CHECK(std::abs(sol.objective - kCase9AcObjective) / kCase9AcObjective < 1e-4);
  CHECK(sol.duality_gap < 0.01);
  CHECK(sol.diag.embedding_mismatch <= 1e-9);
  CHECK(sol.diag.iterations > 0);
  CHECK(sol.diag.backend == "native");
  CHECK(sol.diag.max_bound_violation < 1e-7);

  Eigen::MatrixXcd W = solver::extract_dense_W(sol, 9);
  REQUIRE(W.rows() == 9);
  CHECK((W - W.adjoint()).cwiseAbs().maxCoeff() <= 1e-9);
  for (int i = 0; i < 9; ++i) CHECK(W(i, i).imag() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(W);
  CHECK(es.eigenvalues().minCoeff() >= -1e-7);
}

TEST_CASE("dense and decomposed psd paths agree") {
  BuildResult br = build(RelaxationKind::SDR, load("case9.m"));
  SolverConfig cfg;
  cfg.backend = "native:dense";
  auto dense = solver::solve(br.program, cfg);
  cfg.backend = "native:sparse";
  auto sparse = solver::solve(br.program, cfg);
  REQUIRE(dense.status == SolveStatus::optimal);
  REQUIRE(sparse.status == SolveStatus::optimal);
  CHECK_FALSE(dense.diag.decomposed_psd);
  CHECK(sparse.diag.decomposed_psd);
  CHECK(std::abs(dense.objective - sparse.objective) / dense.objective < 1e-6);
  // The case is exact, so the completion is essentially unique and every
  // entry (completed ones included) must track the dense solve.
  for (const auto& [key, val] : dense.W_entries) {
    REQUIRE(sparse.W_entries.count(key));
    CHECK(std::abs(val - sparse.W_entries.at(key)) < 0.01);
  }

  // Auto mode keeps small blocks dense and honors the threshold.
  auto raw_auto = solver::make_clarabel_backend(0)->solve_raw(br.program, SolverConfig{});
  CHECK_FALSE(raw_auto.decomposed);
  auto raw_low = solver::make_clarabel_backend(0, 5)->solve_raw(br.program, SolverConfig{});
  CHECK(raw_low.decomposed);
}

TEST_CASE("chordal cliques cover, stay maximal and carry a spanning tree") {
  using solver::detail::chordal_cliques;
  const auto dec = chordal_cliques(4, {{0, 1}, {0, 2}, {1, 2}, {2, 3}});
  REQUIRE(dec.cliques.size() == 2);
  CHECK(dec.cliques[0] == std::vector<int>{0, 1, 2});
  CHECK(dec.cliques[1] == std::vector<int>{2, 3});
  CHECK(dec.fill_pairs.empty());
  const int roots = static_cast<int>(std::count(dec.tree_parent.begin(),
                                                dec.tree_parent.end(), -1));
  CHECK(roots == 1);

  // A 4-cycle needs one fill edge and two triangles.
  const auto ring = chordal_cliques(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
  CHECK(ring.fill_pairs.size() == 1);
  REQUIRE(ring.cliques.size() == 2);
  CHECK(ring.cliques[0].size() == 3);
  std::vector<char> seen(4, 0);
  for (const auto& K : ring.cliques)
    for (int v : K) seen[static_cast<size_t>(v)] = 1;
  CHECK(std::count(seen.begin(), seen.end(), 1) == 4);
}

TEST_CASE("clique-tree completion fills unseen pairs from a rank-1 matrix") {
  using solver::detail::chordal_cliques;
  using solver::detail::clique_tree_complete;

  SUBCASE("three-bus path: the 0-2 entry is reconstructed, not zeroed") {
    const auto dec = chordal_cliques(3, {{0, 1}, {1, 2}});
    std::vector<std::complex<double>> v{
        std::polar(1.0, 0.0), std::polar(0.98, -0.1), std::polar(1.02, 0.25)};
    Eigen::MatrixXcd partial = Eigen::MatrixXcd::Zero(3, 3);
    for (int i = 0; i < 3; ++i) partial(i, i) = std::norm(v[static_cast<size_t>(i)]);
    auto put = [&](int a, int b) {
      partial(a, b) = v[static_cast<size_t>(a)] * std::conj(v[static_cast<size_t>(b)]);
      partial(b, a) = std::conj(partial(a, b));
    };
    put(0, 1);
    put(1, 2);
    const Eigen::MatrixXcd full = clique_tree_complete(partial, dec);
    CHECK(std::abs(full(0, 2)) > 0.5);  // a naive zero fill fails here
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(std::abs(full(i, j) - v[static_cast<size_t>(i)] *
                                        std::conj(v[static_cast<size_t>(j)])) < 1e-10);
  }

  SUBCASE("random sparse rank-1 matrices complete exactly") {
    std::mt19937 rng(20240817);
    std::uniform_real_distribution<double> mag(0.8, 1.2), ang(-1.5, 1.5),
        coin(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 4 + static_cast<int>(rng() % 7);
      std::vector<std::pair<int, int>> pattern;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (coin(rng) < 0.35 || j == i + 1) pattern.push_back({i, j});
      const auto dec = chordal_cliques(n, pattern);
      std::vector<std::complex<double>> v;
      for (int i = 0; i < n; ++i) v.push_back(std::polar(mag(rng), ang(rng)));
      Eigen::MatrixXcd partial = Eigen::MatrixXcd::Zero(n, n);
      for (int i = 0; i < n; ++i) partial(i, i) = std::norm(v[static_cast<size_t>(i)]);
      auto fill = [&](const std::pair<int, int>& e) {
        partial(e.first, e.second) =
            v[static_cast<size_t>(e.first)] * std::conj(v[static_cast<size_t>(e.second)]);
        partial(e.second, e.first) = std::conj(partial(e.first, e.second));
      };
      for (const auto& e : pattern) fill(e);
      for (const auto& e : dec.fill_pairs) fill(e);
      const Eigen::MatrixXcd full = clique_tree_complete(partial, dec);
      double worst = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          worst = std::max(worst,
                           std::abs(full(i, j) - v[static_cast<size_t>(i)] *
                                                     std::conj(v[static_cast<size_t>(j)])));
      CHECK(worst < 1e-8);
    }
  }
}

TEST_CASE("solutions map back onto the network layout") {
  const auto c = load("case9.m");
  SolverConfig cfg;

  BuildResult socr = build(RelaxationKind::SOCR, c);
  auto sol = solver::solve(socr.program, cfg);
  REQUIRE(sol.status == SolveStatus::optimal);
  REQUIRE(sol.flows.size() == 9);
  REQUIRE(sol.gen_p.size() == 3);
  CHECK_FALSE(sol.v.has_value());
  // Injections recovered from the balance rows must equal the flow sums.
  for (int i = 0; i < 9; ++i) {
    double pacc = 0.0, qacc = 0.0;
    for (size_t k = 0; k < c.branches.size(); ++k) {
      const auto [fi, ti] = c.branch_endpoints(static_cast<int>(k));
      if (fi == i) {
        pacc += sol.flows[k].pf;
        qacc += sol.flows[k].qf;
      }
      if (ti == i) {
        pacc += sol.flows[k].pt;
        qacc += sol.flows[k].qt;
      }
    }
    CHECK(sol.p_inj[static_cast<size_t>(i)] == doctest::Approx(pacc).epsilon(1e-9));
    CHECK(sol.q_inj[static_cast<size_t>(i)] == doctest::Approx(qacc).epsilon(1e-9));
  }
  for (int i = 0; i < 9; ++i) {
    const auto diag = sol.W_entries.at({i, i});
    CHECK(diag.imag() == 0.0);
    CHECK(diag.real() > 0.5);
  }

  BuildResult tcr = build(RelaxationKind::TCR, c);
  auto tsol = solver::solve(tcr.program, cfg);
  REQUIRE(tsol.status == SolveStatus::optimal);
  REQUIRE(tsol.v.has_value());
  REQUIRE(tsol.v->size() == 9);
  const int slack = relaxation::layout_of(tcr.program).slack;
  CHECK((*tsol.v)[static_cast<size_t>(slack)].imag() == 0.0);
}

TEST_CASE("relaxation tightness orders as SOCR <= TCR <= STCR <= SDR") {
  const auto c = load("case14.m");
  SolverConfig cfg;
  std::map<RelaxationKind, double> obj;
  for (auto kind : {RelaxationKind::SOCR, RelaxationKind::TCR, RelaxationKind::STCR,
                    RelaxationKind::SDR}) {
    auto sol = solver::solve(build(kind, c).program, cfg);
    REQUIRE(sol.status == SolveStatus::optimal);
    obj[kind] = sol.objective;
  }
  const double slack = 0.05;  // dollars of solver noise on ~8e3
  CHECK(obj[RelaxationKind::SOCR] <= obj[RelaxationKind::TCR] + slack);
  CHECK(obj[RelaxationKind::TCR] <= obj[RelaxationKind::STCR] + slack);
  CHECK(obj[RelaxationKind::STCR] <= obj[RelaxationKind::SDR] + slack);
  // This case has a visible SOCR gap, so the chain is not degenerate.
  CHECK(obj[RelaxationKind::SDR] - obj[RelaxationKind::SOCR] > 1.0);
}

TEST_CASE("subprocess backend matches the native one") {
  BuildResult br = build(RelaxationKind::SOCR, load("case9.m"));
  SolverConfig cfg;
  auto native = solver::solve(br.program, cfg);
  cfg.backend = "subprocess:" + refsolve_command();
  auto external = solver::solve(br.program, cfg);
  REQUIRE(native.status == SolveStatus::optimal);
  REQUIRE(external.status == SolveStatus::optimal);
  CHECK(std::abs(native.objective - external.objective) / native.objective < 1e-6);
  CHECK(external.diag.backend == "subprocess");
  for (size_t k = 0; k < native.flows.size(); ++k)
    CHECK(std::abs(native.flows[k].pf - external.flows[k].pf) < 1e-4);
}

TEST_CASE("subprocess backend surfaces command failures") {
  BuildResult br = build(RelaxationKind::SOCR, load("case9.m"));
  SolverConfig cfg;
  cfg.backend = "subprocess:true";  // exits 0 but writes no solution
  CHECK_THROWS_AS((void)solver::solve(br.program, cfg), solver::SolveError);
  cfg.backend = "subprocess:false";
  CHECK_THROWS_AS((void)solver::solve(br.program, cfg), solver::SolveError);
}

TEST_CASE("extract_dense_W rejects sparse-support solutions") {
  BuildResult br = build(RelaxationKind::SOCR, load("case9.m"));
  auto sol = solver::solve(br.program, SolverConfig{});
  REQUIRE(sol.status == SolveStatus::optimal);
  try {
    (void)solver::extract_dense_W(sol, 9);
    FAIL("expected ProgramError");
  } catch (const relaxation::ProgramError& e) {
    CHECK(std::string(e.what()).find("completion") != std::string::npos);
  }
}

TEST_CASE("status names are stable") {
  CHECK(std::string(solver::status_name(SolveStatus::optimal)) == "optimal");
  CHECK(std::string(solver::status_name(SolveStatus::infeasible)) == "infeasible");
  CHECK(std::string(solver::status_name(SolveStatus::unbounded)) == "unbounded");
  CHECK(std::string(solver::status_name(SolveStatus::numerical_failure)) ==
        "numerical_failure");
}
