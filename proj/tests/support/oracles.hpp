// Test-only oracles: an independent Newton-Raphson power flow (polar form,
// finite-difference Jacobian) and helpers that lift its solution into the
// variable space of a built conic program. Nothing here is used by the
// library; tests compare library output against these.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <vector>

#include "opfcert/netmodel.hpp"
#include "opfcert/relaxation.hpp"

namespace testsup {

using opfcert::netmodel::NetworkCase;
using cplx = std::complex<double>;

inline Eigen::MatrixXcd build_ybus(const NetworkCase& c) {
  const int n = c.n();
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
  for (size_t k = 0; k < c.branches.size(); ++k) {
    const auto y = opfcert::netmodel::branch_admittance(c.branches[k]);
    auto [f, t] = c.branch_endpoints(static_cast<int>(k));
    Y(f, f) += y.yff;
    Y(f, t) += y.yft;
    Y(t, f) += y.ytf;
    Y(t, t) += y.ytt;
  }
  for (int i = 0; i < n; ++i) {
    const auto& b = c.buses[static_cast<size_t>(i)];
    Y(i, i) += cplx(b.gs, b.bs);
  }
  return Y;
}

struct PfResult {
  bool converged = false;
  int iterations = 0;
  std::vector<cplx> v;       // per-unit complex voltage, slack angle 0
  std::vector<double> gen_p; // per generator, per-unit
  std::vector<double> gen_q;
};

// Newton-Raphson on the raw MATPOWER dispatch: PV buses hold Vg and net Pg-Pd,
// PQ buses hold -Pd,-Qd, the slack holds Vg at angle 0. Requires at most one
// in-service generator per bus (true for all bundled fixtures).
inline PfResult newton_pf(const NetworkCase& c,
                          const opfcert::netmodel::detail::RawCase& raw,
                          double tol = 1e-10, int max_iter = 60) {
  const int n = c.n();
  const double base = c.base_mva;
  const Eigen::MatrixXcd Y = build_ybus(c);

  enum Kind { SLACK, PV, PQ };
  std::vector<int> kind(n, PQ);
  std::vector<double> pspec(n, 0.0), qspec(n, 0.0), vset(n, 1.0);
  std::vector<int> gen_at(n, -1);
  for (int i = 0; i < n; ++i) {
    pspec[i] = -c.buses[static_cast<size_t>(i)].pd;
    qspec[i] = -c.buses[static_cast<size_t>(i)].qd;
  }
  const auto& genm = raw.matrices.at("gen");
  int live = 0;
  for (const auto& row : genm) {
    if (row[7] <= 0.0) continue;
    const int bus = c.index_of(static_cast<int>(row[0]));
    if (gen_at[bus] != -1) throw std::runtime_error("oracle: two generators on one bus");
    gen_at[bus] = live++;
    pspec[bus] += row[1] / base;
    vset[bus] = row[5];
    kind[bus] = bus == c.slack_index ? SLACK : PV;
  }
  if (kind[c.slack_index] != SLACK) throw std::runtime_error("oracle: no slack gen");

  std::vector<int> ang_idx, mag_idx;  // unknown layout
  for (int i = 0; i < n; ++i)
    if (kind[i] != SLACK) ang_idx.push_back(i);
  for (int i = 0; i < n; ++i)
    if (kind[i] == PQ) mag_idx.push_back(i);
  const int na = static_cast<int>(ang_idx.size());
  const int nm = static_cast<int>(mag_idx.size());

  Eigen::VectorXd th = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd vm(n);
  for (int i = 0; i < n; ++i) vm(i) = kind[i] == PQ ? 1.0 : vset[i];

  auto mismatch = [&](const Eigen::VectorXd& th_, const Eigen::VectorXd& vm_) {
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) v(i) = std::polar(vm_(i), th_(i));
    Eigen::VectorXcd s = v.array() * (Y * v).conjugate().array();
    Eigen::VectorXd f(na + nm);
    for (int k = 0; k < na; ++k) f(k) = s(ang_idx[static_cast<size_t>(k)]).real() - pspec[ang_idx[static_cast<size_t>(k)]];
    for (int k = 0; k < nm; ++k) f(na + k) = s(mag_idx[static_cast<size_t>(k)]).imag() - qspec[mag_idx[static_cast<size_t>(k)]];
    return f;
  };

  PfResult out;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd f = mismatch(th, vm);
    if (f.lpNorm<Eigen::Infinity>() < tol) {
      out.converged = true;
      out.iterations = it;
      break;
    }
    // Finite-difference Jacobian; plenty for n <= a few hundred.
    Eigen::MatrixXd J(na + nm, na + nm);
    const double h = 1e-7;
    for (int k = 0; k < na; ++k) {
      Eigen::VectorXd tp = th;
      tp(ang_idx[static_cast<size_t>(k)]) += h;
      J.col(k) = (mismatch(tp, vm) - f) / h;
    }
    for (int k = 0; k < nm; ++k) {
      Eigen::VectorXd vp = vm;
      vp(mag_idx[static_cast<size_t>(k)]) += h;
      J.col(na + k) = (mismatch(th, vp) - f) / h;
    }
    Eigen::VectorXd dx = J.partialPivLu().solve(f);
    for (int k = 0; k < na; ++k) th(ang_idx[static_cast<size_t>(k)]) -= dx(k);
    for (int k = 0; k < nm; ++k) vm(mag_idx[static_cast<size_t>(k)]) -= dx(na + k);
  }
  if (!out.converged) return out;

  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = std::polar(vm(i), th(i));
  Eigen::VectorXcd s = v.array() * (Y * v).conjugate().array();
  out.v.assign(v.data(), v.data() + n);
  out.gen_p.assign(static_cast<size_t>(live), 0.0);
  out.gen_q.assign(static_cast<size_t>(live), 0.0);
  for (int i = 0; i < n; ++i) {
    if (gen_at[i] == -1) continue;
    const auto& b = c.buses[static_cast<size_t>(i)];
    out.gen_p[static_cast<size_t>(gen_at[i])] = s(i).real() + b.pd;
    out.gen_q[static_cast<size_t>(gen_at[i])] = s(i).imag() + b.qd;
  }
  return out;
}

// Lifts an AC operating point into the full variable vector of a built
// program: W entries from v v^H, flows from the pi-model, epigraphs tight.
inline std::vector<double> lift_operating_point(
    const opfcert::relaxation::ConicProgram& prog, const NetworkCase& c,
    const std::vector<cplx>& v, const std::vector<double>& gen_p,
    const std::vector<double>& gen_q) {
  using namespace opfcert::relaxation;
  const ProgramLayout& lay = layout_of(prog);
  std::vector<double> x(static_cast<size_t>(prog.nvar()), 0.0);
  for (int i = 0; i < lay.n; ++i)
    x[static_cast<size_t>(lay.lifted.diag[static_cast<size_t>(i)])] = std::norm(v[static_cast<size_t>(i)]);
  for (const auto& [key, pv] : lay.lifted.pairs) {
    const cplx w = v[static_cast<size_t>(key.first)] * std::conj(v[static_cast<size_t>(key.second)]);
    x[static_cast<size_t>(pv.re)] = w.real();
    x[static_cast<size_t>(pv.im)] = w.imag();
  }
  for (size_t i = 0; i < lay.lifted.v_re.size(); ++i) {
    x[static_cast<size_t>(lay.lifted.v_re[i])] = v[i].real();
    if (lay.lifted.v_im[i] != -1) x[static_cast<size_t>(lay.lifted.v_im[i])] = v[i].imag();
  }
  for (size_t k = 0; k < c.branches.size(); ++k) {
    const auto y = opfcert::netmodel::branch_admittance(c.branches[k]);
    auto [f, t] = c.branch_endpoints(static_cast<int>(k));
    const cplx wf = v[static_cast<size_t>(f)] * std::conj(v[static_cast<size_t>(t)]);
    const cplx sf = std::conj(y.yff) * std::norm(v[static_cast<size_t>(f)]) + std::conj(y.yft) * wf;
    const cplx st = std::conj(y.ytt) * std::norm(v[static_cast<size_t>(t)]) + std::conj(y.ytf) * std::conj(wf);
    const auto& bv = lay.branch_vars[k];
    x[static_cast<size_t>(bv.pf)] = sf.real();
    x[static_cast<size_t>(bv.qf)] = sf.imag();
    x[static_cast<size_t>(bv.pt)] = st.real();
    x[static_cast<size_t>(bv.qt)] = st.imag();
  }
  for (size_t g = 0; g < lay.gen_vars.size(); ++g) {
    const auto& gv = lay.gen_vars[g];
    x[static_cast<size_t>(gv.p)] = gen_p[g];
    x[static_cast<size_t>(gv.q)] = gen_q[g];
    if (gv.cost_epi == -1) continue;
    const auto& cc = c.generators[g].cost;
    if (cc.kind == opfcert::netmodel::CostCurve::Kind::polynomial) {
      x[static_cast<size_t>(gv.cost_epi)] = gen_p[g] * gen_p[g];
    } else {
      // Tight epigraph value: the pwl curve itself.
      double t = cc.eval(gen_p[g]);
      // Subtract nothing: objective adds t directly.
      x[static_cast<size_t>(gv.cost_epi)] = t;
    }
  }
  return x;
}

// Worst constraint violation of x over all rows, cones and PSD blocks.
inline double worst_violation(const opfcert::relaxation::ConicProgram& prog,
                              const std::vector<double>& x) {
  using namespace opfcert::relaxation;
  double worst = 0.0;
  auto hit = [&](double viol) { worst = std::max(worst, viol); };
  for (const auto& row : prog.eq) hit(std::abs(row.expr.eval(x)));
  for (const auto& row : prog.ineq) hit(-row.expr.eval(x));
  for (const auto& cone : prog.cones) {
    std::vector<double> e;
    for (const auto& expr : cone.entries) e.push_back(expr.eval(x));
    if (cone.kind == ConeClass::soc) {
      double nrm = 0.0;
      for (size_t i = 1; i < e.size(); ++i) nrm += e[i] * e[i];
      hit(std::sqrt(nrm) - e[0]);
    } else {
      double sq = 0.0;
      for (size_t i = 2; i < e.size(); ++i) sq += e[i] * e[i];
      hit(sq - 2.0 * e[0] * e[1]);
      hit(-e[0]);
      hit(-e[1]);
    }
  }
  for (const auto& blk : prog.psd_blocks) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(blk.dim, blk.dim);
    for (const auto& pe : blk.entries) {
      const double val = pe.expr.eval(x);
      m(pe.row, pe.col) = val;
      m(pe.col, pe.row) = val;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    hit(-es.eigenvalues()(0));
  }
  return worst;
}

}  // namespace testsup
