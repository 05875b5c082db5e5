#include "opfcert/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <tuple>

namespace opfcert::solver {

using relaxation::AffExpr;
using relaxation::AffRow;
using relaxation::ConeClass;
using relaxation::ConicProgram;
using relaxation::ProgramError;
using relaxation::ProgramLayout;

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

namespace detail {

namespace {

struct Triplet {
  std::size_t row;
  int col;
  double val;
};

void push_expr(std::vector<Triplet>& trips, std::size_t row, const AffExpr& e,
               double scale) {
  for (const auto& t : e.terms) trips.push_back({row, t.var, scale * t.coef});
}

}  // namespace

LoweredProblem lower_program(const ConicProgram& p) {
  LoweredProblem lp;
  lp.nvar = p.nvar();
  lp.obj_constant = p.objective.constant;
  lp.q.assign(static_cast<size_t>(lp.nvar), 0.0);
  for (const auto& t : p.objective.terms) lp.q[static_cast<size_t>(t.var)] = t.coef;
  for (double v : lp.q) lp.obj_scale = std::max(lp.obj_scale, std::abs(v));
  for (double& v : lp.q) v /= lp.obj_scale;

  std::vector<Triplet> trips;
  std::size_t row = 0;

  // Scalar rows are normalized to unit max coefficient: admittance-sized flow
  // rows otherwise dwarf the O(1) balance and bound rows and cost the
  // interior-point endgame a couple of digits. Cone rows must keep their
  // relative scale and are left alone.
  const auto row_scale = [&lp](const AffExpr& e) {
    double m = 0.0;
    for (const auto& t : e.terms) m = std::max(m, std::abs(t.coef));
    lp.raw_row_max = std::max(lp.raw_row_max, m);
    return m > 1.0 ? 1.0 / m : 1.0;
  };

  // Zero cone: eq rows L x + c = 0 become A = L, b = -c.
  if (!p.eq.empty()) {
    for (const AffRow& r : p.eq) {
      const double sc = row_scale(r.expr);
      push_expr(trips, row, r.expr, sc);
      lp.b.push_back(-sc * r.expr.constant);
      ++row;
    }
    lp.cone_tags.push_back(0);
    lp.cone_dims.push_back(p.eq.size());
  }
  // Nonnegative cone: L x + c >= 0 becomes s = b - A x with A = -L, b = c.
  if (!p.ineq.empty()) {
    for (const AffRow& r : p.ineq) {
      const double sc = row_scale(r.expr);
      push_expr(trips, row, r.expr, -sc);
      lp.b.push_back(sc * r.expr.constant);
      ++row;
    }
    lp.cone_tags.push_back(1);
    lp.cone_dims.push_back(p.ineq.size());
  }
  // SOC slices; rotated cones are rescaled into plain SOC:
  // 2uv >= |w|^2  <=>  (u+v, u-v, sqrt2 w) in SOC.
  for (const auto& cone : p.cones) {
    std::vector<AffExpr> entries;
    if (cone.kind == ConeClass::soc) {
      entries = cone.entries;
    } else {
      const AffExpr& u = cone.entries[0];
      const AffExpr& v = cone.entries[1];
      AffExpr sum = u, diff = u;
      sum.add_const(v.constant);
      diff.add_const(-v.constant);
      for (const auto& t : v.terms) {
        sum.add(t.var, t.coef);
        diff.add(t.var, -t.coef);
      }
      entries.push_back(std::move(sum));
      entries.push_back(std::move(diff));
      const double rt2 = std::sqrt(2.0);
      for (size_t i = 2; i < cone.entries.size(); ++i) {
        AffExpr w;
        w.constant = rt2 * cone.entries[i].constant;
        for (const auto& t : cone.entries[i].terms) w.terms.push_back({t.var, rt2 * t.coef});
        entries.push_back(std::move(w));
      }
    }
    for (const AffExpr& e : entries) {
      push_expr(trips, row, e, -1.0);
      lp.b.push_back(e.constant);
      ++row;
    }
    lp.cone_tags.push_back(2);
    lp.cone_dims.push_back(entries.size());
  }
  // PSD blocks in scaled-svec form: upper triangle stacked by column, the
  // off-diagonal slots scaled by sqrt2. Slots with no entry are pinned to 0,
  // which is exactly right for the structurally-zero Im W_ii slots.
  const double rt2 = std::sqrt(2.0);
  for (const auto& blk : p.psd_blocks) {
    const std::size_t base = row;
    const std::size_t nslots =
        static_cast<std::size_t>(blk.dim) * (blk.dim + 1) / 2;
    lp.b.resize(base + nslots, 0.0);
    for (const auto& pe : blk.entries) {
      const std::size_t slot =
          static_cast<std::size_t>(pe.col) * (pe.col + 1) / 2 + pe.row;
      const double scale = pe.row == pe.col ? 1.0 : rt2;
      push_expr(trips, base + slot, pe.expr, -scale);
      lp.b[base + slot] = scale * pe.expr.constant;
    }
    row += nslots;
    lp.cone_tags.push_back(3);
    lp.cone_dims.push_back(static_cast<std::size_t>(blk.dim));
  }
  lp.nrow = static_cast<int>(row);

  std::sort(trips.begin(), trips.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(a.col, a.row) < std::tie(b.col, b.row);
  });
  lp.colptr.assign(static_cast<size_t>(lp.nvar) + 1, 0);
  for (const Triplet& t : trips) ++lp.colptr[static_cast<size_t>(t.col) + 1];
  for (size_t c = 1; c < lp.colptr.size(); ++c) lp.colptr[c] += lp.colptr[c - 1];
  lp.rowidx.reserve(trips.size());
  lp.vals.reserve(trips.size());
  for (const Triplet& t : trips) {
    lp.rowidx.push_back(t.row);
    lp.vals.push_back(t.val);
  }
  return lp;
}

}  // namespace detail

std::unique_ptr<ConicBackend> make_backend(const std::string& selector) {
  std::string sel = selector;
  if (sel.empty()) {
    const char* env = std::getenv("OPFCERT_BACKEND");
    sel = env && *env ? env : "native";
  }
  if (sel == "native") return make_clarabel_backend(0);
  if (sel == "native:dense") return make_clarabel_backend(1);
  if (sel == "native:sparse") return make_clarabel_backend(2);
  if (sel.rfind("subprocess:", 0) == 0) return make_subprocess_backend(sel.substr(11));
  throw SolveError("unknown backend selector '" + sel + "'");
}

LiftedSolution solve(const ConicProgram& p, const SolverConfig& cfg) {
  if (!(cfg.tol_feas > 0.0) || !(cfg.tol_gap > 0.0))
    throw SolveError("solver tolerances must be positive");
  auto backend = make_backend(cfg.backend);
  RawSolution raw = backend->solve_raw(p, cfg);

  LiftedSolution sol;
  sol.status = raw.status;
  sol.objective = raw.objective;
  sol.duality_gap = raw.duality_gap;
  sol.diag.backend = backend->name();
  sol.diag.iterations = raw.iterations;
  sol.diag.solve_seconds = raw.seconds;
  sol.diag.embedding_mismatch = raw.embedding_mismatch;
  sol.diag.decomposed_psd = raw.decomposed;
  sol.diag.message = raw.message;
  if (raw.x.empty() || sol.status == SolveStatus::infeasible ||
      sol.status == SolveStatus::unbounded)
    return sol;
  if (raw.x.size() != static_cast<size_t>(p.nvar()))
    throw SolveError("backend returned a solution of the wrong dimension");

  const ProgramLayout& lay = relaxation::layout_of(p);
  const auto& x = raw.x;
  for (int i = 0; i < lay.n; ++i)
    sol.W_entries[{i, i}] = {x[static_cast<size_t>(lay.lifted.diag[static_cast<size_t>(i)])], 0.0};
  for (const auto& [key, pv] : lay.lifted.pairs)
    sol.W_entries[key] = {x[static_cast<size_t>(pv.re)], x[static_cast<size_t>(pv.im)]};
  if (!lay.lifted.v_re.empty()) {
    std::vector<std::complex<double>> v(static_cast<size_t>(lay.n));
    for (int i = 0; i < lay.n; ++i) {
      const double re = x[static_cast<size_t>(lay.lifted.v_re[static_cast<size_t>(i)])];
      const int imv = lay.lifted.v_im[static_cast<size_t>(i)];
      v[static_cast<size_t>(i)] = {re, imv == -1 ? 0.0 : x[static_cast<size_t>(imv)]};
    }
    sol.v = std::move(v);
  }
  for (const auto& bv : lay.branch_vars)
    sol.flows.push_back({x[static_cast<size_t>(bv.pf)], x[static_cast<size_t>(bv.qf)],
                         x[static_cast<size_t>(bv.pt)], x[static_cast<size_t>(bv.qt)]});
  for (const auto& gv : lay.gen_vars) {
    sol.gen_p.push_back(x[static_cast<size_t>(gv.p)]);
    sol.gen_q.push_back(x[static_cast<size_t>(gv.q)]);
  }

  // Injections (generation minus demand) read off the balance rows: their
  // generator terms plus the constant (-load). Rows sit after the 4-per-line
  // flow definitions, two per bus.
  std::vector<char> is_gen_p(static_cast<size_t>(p.nvar()), 0), is_gen_q = is_gen_p;
  for (const auto& gv : lay.gen_vars) {
    is_gen_p[static_cast<size_t>(gv.p)] = 1;
    is_gen_q[static_cast<size_t>(gv.q)] = 1;
  }
  const size_t balance0 = 4 * lay.branch_vars.size();
  sol.p_inj.assign(static_cast<size_t>(lay.n), 0.0);
  sol.q_inj.assign(static_cast<size_t>(lay.n), 0.0);
  for (int i = 0; i < lay.n; ++i) {
    const AffRow& pb = p.eq.at(balance0 + 2 * static_cast<size_t>(i));
    const AffRow& qb = p.eq.at(balance0 + 2 * static_cast<size_t>(i) + 1);
    if (pb.tag.rfind("p-balance", 0) != 0 || qb.tag.rfind("q-balance", 0) != 0)
      throw SolveError("program layout does not match the expected row order");
    double pi = pb.expr.constant, qi = qb.expr.constant;
    for (const auto& t : pb.expr.terms)
      if (is_gen_p[static_cast<size_t>(t.var)]) pi += t.coef * x[static_cast<size_t>(t.var)];
    for (const auto& t : qb.expr.terms)
      if (is_gen_q[static_cast<size_t>(t.var)]) qi += t.coef * x[static_cast<size_t>(t.var)];
    sol.p_inj[static_cast<size_t>(i)] = pi;
    sol.q_inj[static_cast<size_t>(i)] = qi;
  }

  // Voltage-window slack as a quality metric.
  double worst = 0.0;
  for (const AffRow& r : p.ineq) {
    if (r.tag.rfind("vmin bus", 0) != 0 && r.tag.rfind("vmax bus", 0) != 0) continue;
    worst = std::max(worst, -r.expr.eval(x));
  }
  sol.diag.max_bound_violation = std::max(0.0, worst);
  return sol;
}

Eigen::MatrixXcd extract_dense_W(const LiftedSolution& sol, int n) {
  Eigen::MatrixXcd W(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      auto it = sol.W_entries.find({i, j});
      if (it == sol.W_entries.end())
        throw ProgramError("W entry (" + std::to_string(i) + "," + std::to_string(j) +
                           ") is not in the solution support; dense extraction needs "
                           "full support — use the sparse completion path");
      W(i, j) = it->second;
      W(j, i) = std::conj(it->second);
    }
  }
  return W;
}

}  // namespace opfcert::solver
