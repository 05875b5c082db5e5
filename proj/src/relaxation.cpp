#include "opfcert/relaxation.hpp"

#include <cmath>
#include <sstream>

namespace opfcert::relaxation {

const char* kind_name(RelaxationKind k) {
  switch (k) {
    case RelaxationKind::SDR: return "SDR";
    case RelaxationKind::SOCR: return "SOCR";
    case RelaxationKind::TCR: return "TCR";
    case RelaxationKind::STCR: return "STCR";
  }
  return "?";
}

RelaxationKind kind_from_name(const std::string& s) {
  if (s == "SDR" || s == "sdr") return RelaxationKind::SDR;
  if (s == "SOCR" || s == "socr") return RelaxationKind::SOCR;
  if (s == "TCR" || s == "tcr") return RelaxationKind::TCR;
  if (s == "STCR" || s == "stcr") return RelaxationKind::STCR;
  throw ProgramError("unknown relaxation kind '" + s + "'");
}

bool LiftedVariableIndex::has_pair(int i, int j) const {
  if (i > j) std::swap(i, j);
  return pairs.count({i, j}) != 0;
}

const PairVars& LiftedVariableIndex::pair(int i, int j) const {
  if (i > j) std::swap(i, j);
  auto it = pairs.find({i, j});
  if (it == pairs.end())
    throw ProgramError("lifted entry (" + std::to_string(i) + "," + std::to_string(j) +
                       ") is not part of this relaxation");
  return it->second;
}

std::pair<AffExpr, AffExpr> LiftedVariableIndex::entry(int i, int j) const {
  AffExpr re, im;
  if (i == j) {
    re.add(diag[static_cast<size_t>(i)], 1.0);
    return {re, im};
  }
  const bool conj = i > j;
  const PairVars& pv = pair(i, j);
  re.add(pv.re, 1.0);
  im.add(pv.im, conj ? -1.0 : 1.0);
  return {re, im};
}

const ProgramLayout& layout_of(const ConicProgram& p) {
  if (!p.layout) throw ProgramError("program carries no layout metadata");
  return *static_cast<const ProgramLayout*>(p.layout.get());
}

LiftedVariableIndex make_lifted_index(RelaxationKind kind, const netmodel::NetworkCase& c) {
  LiftedVariableIndex idx;
  idx.n = c.n();
  idx.slack = c.slack_index;
  int next = 0;
  idx.diag.resize(static_cast<size_t>(idx.n));
  for (int i = 0; i < idx.n; ++i) idx.diag[static_cast<size_t>(i)] = next++;

  auto want_pair = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    idx.pairs.emplace(std::pair{a, b}, PairVars{});
  };
  if (kind == RelaxationKind::SDR) {
    for (int a = 0; a < idx.n; ++a)
      for (int b = a + 1; b < idx.n; ++b) want_pair(a, b);
  } else {
    for (size_t k = 0; k < c.branches.size(); ++k) {
      auto [a, b] = c.branch_endpoints(static_cast<int>(k));
      want_pair(a, b);
      if (kind == RelaxationKind::STCR) {
        // Slack-row entries W_s,i for both endpoints of every constrained block.
        if (a != idx.slack) want_pair(idx.slack, a);
        if (b != idx.slack) want_pair(idx.slack, b);
      }
    }
  }
  for (auto& [key, pv] : idx.pairs) {
    pv.re = next++;
    pv.im = next++;
  }
  if (kind == RelaxationKind::TCR) {
    idx.v_re.resize(static_cast<size_t>(idx.n));
    idx.v_im.assign(static_cast<size_t>(idx.n), -1);
    for (int i = 0; i < idx.n; ++i) {
      idx.v_re[static_cast<size_t>(i)] = next++;
      if (i != idx.slack) idx.v_im[static_cast<size_t>(i)] = next++;  // Im v = 0 at slack
    }
  }
  return idx;
}

namespace {

// Registers program variables in the exact order make_lifted_index assigned
// ids; the two functions share this convention.
void register_lifted_vars(ConicProgram& p, const LiftedVariableIndex& idx,
                          const netmodel::NetworkCase& c) {
  auto ext = [&](int i) { return std::to_string(c.buses[static_cast<size_t>(i)].id); };
  for (int i = 0; i < idx.n; ++i) {
    const int v = p.new_var("W[" + ext(i) + "][" + ext(i) + "]");
    if (v != idx.diag[static_cast<size_t>(i)])
      throw std::logic_error("lifted index out of sync (diag)");
  }
  for (const auto& [key, pv] : idx.pairs) {
    const std::string base = "W[" + ext(key.first) + "][" + ext(key.second) + "]";
    if (p.new_var(base + ".re") != pv.re || p.new_var(base + ".im") != pv.im)
      throw std::logic_error("lifted index out of sync (pairs)");
  }
  for (size_t i = 0; i < idx.v_re.size(); ++i) {
    if (p.new_var("v[" + ext(static_cast<int>(i)) + "].re") != idx.v_re[i])
      throw std::logic_error("lifted index out of sync (v.re)");
    if (idx.v_im[i] != -1 && p.new_var("v[" + ext(static_cast<int>(i)) + "].im") != idx.v_im[i])
      throw std::logic_error("lifted index out of sync (v.im)");
  }
}

std::string line_label(const netmodel::NetworkCase& c, int k) {
  const auto& br = c.branches[static_cast<size_t>(k)];
  return "line " + std::to_string(k) + " (" + std::to_string(br.from) + "-" +
         std::to_string(br.to) + ")";
}

}  // namespace

ConicProgram build_common(const netmodel::NetworkCase& c, const LiftedVariableIndex& idx) {
  ConicProgram p;
  register_lifted_vars(p, idx, c);

  auto layout = std::make_shared<ProgramLayout>();
  layout->n = idx.n;
  layout->slack = idx.slack;
  layout->lifted = idx;

  for (const netmodel::Generator& g : c.generators) {
    for (double bound : {g.pmin, g.pmax, g.qmin, g.qmax})
      if (!std::isfinite(bound))
        throw ProgramError("generator at bus " + std::to_string(g.bus) +
                           " has non-finite limits; objective would be ill-posed");
  }

  for (size_t k = 0; k < c.branches.size(); ++k) {
    BranchVars bv;
    const std::string id = std::to_string(k);
    bv.pf = p.new_var("pf[" + id + "]");
    bv.qf = p.new_var("qf[" + id + "]");
    bv.pt = p.new_var("pt[" + id + "]");
    bv.qt = p.new_var("qt[" + id + "]");
    layout->branch_vars.push_back(bv);
  }
  for (size_t g = 0; g < c.generators.size(); ++g) {
    GenVars gv;
    gv.p = p.new_var("pg[" + std::to_string(g) + "]");
    gv.q = p.new_var("qg[" + std::to_string(g) + "]");
    layout->gen_vars.push_back(gv);
  }

  // Flow definitions: S_f = y_ff* W_ff + y_ft* W_ft and the to-side analog,
  // with the stored upper-triangle entry W_ab giving W_ft = R + j*sigma*I.
  for (size_t k = 0; k < c.branches.size(); ++k) {
    const auto& br = c.branches[k];
    const auto y = netmodel::branch_admittance(br);
    auto [fi, ti] = c.branch_endpoints(static_cast<int>(k));
    const double sigma = fi < ti ? 1.0 : -1.0;
    const PairVars& pv = idx.pair(fi, ti);
    const int wff = idx.diag[static_cast<size_t>(fi)];
    const int wtt = idx.diag[static_cast<size_t>(ti)];
    const BranchVars& bv = layout->branch_vars[k];
    const std::string lbl = line_label(c, static_cast<int>(k));

    AffExpr pf;  // pf_var - Re{y_ff* W_ff + y_ft* W_ft} = 0
    pf.add(bv.pf, 1.0)
        .add(wff, -y.yff.real())
        .add(pv.re, -y.yft.real())
        .add(pv.im, -sigma * y.yft.imag());
    p.eq.push_back({std::move(pf), "pf-def " + lbl});

    AffExpr qf;
    qf.add(bv.qf, 1.0)
        .add(wff, y.yff.imag())
        .add(pv.re, y.yft.imag())
        .add(pv.im, -sigma * y.yft.real());
    p.eq.push_back({std::move(qf), "qf-def " + lbl});

    AffExpr pt;
    pt.add(bv.pt, 1.0)
        .add(wtt, -y.ytt.real())
        .add(pv.re, -y.ytf.real())
        .add(pv.im, sigma * y.ytf.imag());
    p.eq.push_back({std::move(pt), "pt-def " + lbl});

    AffExpr qt;
    qt.add(bv.qt, 1.0)
        .add(wtt, y.ytt.imag())
        .add(pv.re, y.ytf.imag())
        .add(pv.im, sigma * y.ytf.real());
    p.eq.push_back({std::move(qt), "qt-def " + lbl});
  }

  // Nodal balance with shunts: sum(gen) - load - shunt(W_ii) - sum(flows) = 0.
  for (int i = 0; i < c.n(); ++i) {
    const netmodel::Bus& bus = c.buses[static_cast<size_t>(i)];
    AffExpr pb, qb;
    pb.add_const(-bus.pd).add(idx.diag[static_cast<size_t>(i)], -bus.gs);
    qb.add_const(-bus.qd).add(idx.diag[static_cast<size_t>(i)], bus.bs);
    for (size_t g = 0; g < c.generators.size(); ++g) {
      if (c.index_of(c.generators[g].bus) != i) continue;
      pb.add(layout->gen_vars[g].p, 1.0);
      qb.add(layout->gen_vars[g].q, 1.0);
    }
    for (size_t k = 0; k < c.branches.size(); ++k) {
      auto [fi, ti] = c.branch_endpoints(static_cast<int>(k));
      if (fi == i) {
        pb.add(layout->branch_vars[k].pf, -1.0);
        qb.add(layout->branch_vars[k].qf, -1.0);
      }
      if (ti == i) {
        pb.add(layout->branch_vars[k].pt, -1.0);
        qb.add(layout->branch_vars[k].qt, -1.0);
      }
    }
    const std::string id = std::to_string(bus.id);
    p.eq.push_back({std::move(pb), "p-balance bus " + id});
    p.eq.push_back({std::move(qb), "q-balance bus " + id});
  }

  // Voltage-square windows and generator capability boxes.
  for (int i = 0; i < c.n(); ++i) {
    const netmodel::Bus& bus = c.buses[static_cast<size_t>(i)];
    const int wii = idx.diag[static_cast<size_t>(i)];
    const std::string id = std::to_string(bus.id);
    p.ineq.push_back(
        {AffExpr{}.add(wii, 1.0).add_const(-bus.vmin * bus.vmin), "vmin bus " + id});
    p.ineq.push_back(
        {AffExpr{}.add(wii, -1.0).add_const(bus.vmax * bus.vmax), "vmax bus " + id});
  }
  for (size_t g = 0; g < c.generators.size(); ++g) {
    const netmodel::Generator& gen = c.generators[g];
    const GenVars& gv = layout->gen_vars[g];
    const std::string id = std::to_string(g);
    p.ineq.push_back({AffExpr{}.add(gv.p, 1.0).add_const(-gen.pmin), "pmin gen " + id});
    p.ineq.push_back({AffExpr{}.add(gv.p, -1.0).add_const(gen.pmax), "pmax gen " + id});
    p.ineq.push_back({AffExpr{}.add(gv.q, 1.0).add_const(-gen.qmin), "qmin gen " + id});
    p.ineq.push_back({AffExpr{}.add(gv.q, -1.0).add_const(gen.qmax), "qmax gen " + id});
  }

  // Apparent-power limits on both line ends.
  for (size_t k = 0; k < c.branches.size(); ++k) {
    const auto& br = c.branches[k];
    if (!br.smax) continue;
    const BranchVars& bv = layout->branch_vars[k];
    const std::string lbl = line_label(c, static_cast<int>(k));
    AffExpr cap;
    cap.add_const(*br.smax);
    p.cones.push_back({ConeClass::soc,
                       {cap, AffExpr{}.add(bv.pf, 1.0), AffExpr{}.add(bv.qf, 1.0)},
                       "smax-from " + lbl});
    p.cones.push_back({ConeClass::soc,
                       {cap, AffExpr{}.add(bv.pt, 1.0), AffExpr{}.add(bv.qt, 1.0)},
                       "smax-to " + lbl});
  }

  // Objective and convex cost epigraphs.
  for (size_t g = 0; g < c.generators.size(); ++g) {
    const netmodel::CostCurve& cc = c.generators[g].cost;
    GenVars& gv = layout->gen_vars[g];
    const std::string id = std::to_string(g);
    if (cc.kind == netmodel::CostCurve::Kind::polynomial) {
      const double c2 = cc.quadratic_coef();
      if (cc.poly.size() > 0) p.objective.add_const(cc.poly[0]);
      if (cc.poly.size() > 1) p.objective.add(gv.p, cc.poly[1]);
      if (c2 > 0.0) {
        // Epigraph on p^2 itself, cost weight in the objective; keeps the
        // variable O(1) instead of dollar-sized, which solvers repay in
        // accuracy.
        gv.cost_epi = p.new_var("t[" + id + "]");
        p.objective.add(gv.cost_epi, c2);
        AffExpr half;
        half.add_const(0.5);
        // 2 * t * 1/2 >= p^2.
        p.cones.push_back({ConeClass::rsoc,
                           {AffExpr{}.add(gv.cost_epi, 1.0), half,
                            AffExpr{}.add(gv.p, 1.0)},
                           "cost gen " + id});
      }
    } else {
      gv.cost_epi = p.new_var("t[" + id + "]");
      p.objective.add(gv.cost_epi, 1.0);
      for (size_t s = 0; s + 1 < cc.pwl_x.size(); ++s) {
        const double slope =
            (cc.pwl_y[s + 1] - cc.pwl_y[s]) / (cc.pwl_x[s + 1] - cc.pwl_x[s]);
        AffExpr seg;  // t - slope*p - (y_s - slope*x_s) >= 0
        seg.add(gv.cost_epi, 1.0)
            .add(gv.p, -slope)
            .add_const(slope * cc.pwl_x[s] - cc.pwl_y[s]);
        p.ineq.push_back(
            {std::move(seg), "cost-seg " + std::to_string(s) + " gen " + id});
      }
    }
  }

  p.layout = layout;
  return p;
}

namespace {

void add_socr_cones(ConicProgram& p, const netmodel::NetworkCase& c,
                    const LiftedVariableIndex& idx) {
  const double rt2 = std::sqrt(2.0);
  for (size_t k = 0; k < c.branches.size(); ++k) {
    auto [fi, ti] = c.branch_endpoints(static_cast<int>(k));
    const int a = std::min(fi, ti), b = std::max(fi, ti);
    const PairVars& pv = idx.pair(a, b);
    // 2 W_aa W_bb >= 2(R^2 + I^2)  <=>  |W_ab|^2 <= W_aa W_bb, W_ii >= 0.
    p.cones.push_back({ConeClass::rsoc,
                       {AffExpr{}.add(idx.diag[static_cast<size_t>(a)], 1.0),
                        AffExpr{}.add(idx.diag[static_cast<size_t>(b)], 1.0),
                        AffExpr{}.add(pv.re, rt2), AffExpr{}.add(pv.im, rt2)},
                       "socr " + line_label(c, static_cast<int>(k))});
  }
}

AffExpr of_var(int v) { return AffExpr{}.add(v, 1.0); }

void add_sdr_block(ConicProgram& p, const LiftedVariableIndex& idx) {
  HermitianBlock h;
  h.dim = idx.n;
  h.tag = "sdr W";
  PsdBlock::ComplexStructure cs;
  cs.dim = idx.n;
  for (int i = 0; i < idx.n; ++i) {
    h.entries.push_back({i, i, of_var(idx.diag[static_cast<size_t>(i)]), {}});
    cs.pairs.push_back({i, i, idx.diag[static_cast<size_t>(i)], -1});
  }
  for (const auto& [key, pv] : idx.pairs) {
    h.entries.push_back({key.first, key.second, of_var(pv.re), of_var(pv.im)});
    cs.pairs.push_back({key.first, key.second, pv.re, pv.im});
  }
  PsdBlock blk = realify_psd_block(h);
  blk.complex_structure = std::move(cs);
  p.psd_blocks.push_back(std::move(blk));
}

void add_tcr_blocks(ConicProgram& p, const netmodel::NetworkCase& c,
                    const LiftedVariableIndex& idx) {
  for (size_t k = 0; k < c.branches.size(); ++k) {
    auto [fi, ti] = c.branch_endpoints(static_cast<int>(k));
    const int a = std::min(fi, ti), b = std::max(fi, ti);
    // [[1, v_a*, v_b*], [v_a, W_aa, W_ab], [v_b, W_ab*, W_bb]]
    HermitianBlock h;
    h.dim = 3;
    h.tag = "tcr " + line_label(c, static_cast<int>(k));
    AffExpr one;
    one.add_const(1.0);
    h.entries.push_back({0, 0, one, {}});
    auto border = [&](int row, int bus) {
      AffExpr re = of_var(idx.v_re[static_cast<size_t>(bus)]);
      AffExpr im;  // conj(v): negate; absent at the slack (Im v = 0)
      if (idx.v_im[static_cast<size_t>(bus)] != -1)
        im.add(idx.v_im[static_cast<size_t>(bus)], -1.0);
      h.entries.push_back({0, row, std::move(re), std::move(im)});
    };
    border(1, a);
    border(2, b);
    const PairVars& pv = idx.pair(a, b);
    h.entries.push_back({1, 1, of_var(idx.diag[static_cast<size_t>(a)]), {}});
    h.entries.push_back({1, 2, of_var(pv.re), of_var(pv.im)});
    h.entries.push_back({2, 2, of_var(idx.diag[static_cast<size_t>(b)]), {}});
    p.psd_blocks.push_back(realify_psd_block(h));
  }
}

void add_stcr_blocks(ConicProgram& p, const netmodel::NetworkCase& c,
                     const LiftedVariableIndex& idx) {
  const int s = idx.slack;
  auto entry_of = [&](int i, int j) { return idx.entry(i, j); };
  for (size_t k = 0; k < c.branches.size(); ++k) {
    auto [fi, ti] = c.branch_endpoints(static_cast<int>(k));
    const int a = std::min(fi, ti), b = std::max(fi, ti);
    HermitianBlock h;
    h.tag = "stcr " + line_label(c, static_cast<int>(k));
    if (a == s || b == s) {
      // The line touches the slack: the bordered block degenerates to 2x2.
      const int o = a == s ? b : a;
      h.dim = 2;
      auto [sre, sim] = entry_of(s, o);
      h.entries.push_back({0, 0, of_var(idx.diag[static_cast<size_t>(s)]), {}});
      h.entries.push_back({0, 1, std::move(sre), std::move(sim)});
      h.entries.push_back({1, 1, of_var(idx.diag[static_cast<size_t>(o)]), {}});
    } else {
      h.dim = 3;
      auto [sa_re, sa_im] = entry_of(s, a);
      auto [sb_re, sb_im] = entry_of(s, b);
      const PairVars& pv = idx.pair(a, b);
      h.entries.push_back({0, 0, of_var(idx.diag[static_cast<size_t>(s)]), {}});
      h.entries.push_back({0, 1, std::move(sa_re), std::move(sa_im)});
      h.entries.push_back({0, 2, std::move(sb_re), std::move(sb_im)});
      h.entries.push_back({1, 1, of_var(idx.diag[static_cast<size_t>(a)]), {}});
      h.entries.push_back({1, 2, of_var(pv.re), of_var(pv.im)});
      h.entries.push_back({2, 2, of_var(idx.diag[static_cast<size_t>(b)]), {}});
    }
    p.psd_blocks.push_back(realify_psd_block(h));
  }
}

}  // namespace

BuildResult build(RelaxationKind kind, const netmodel::NetworkCase& c) {
  if ((kind == RelaxationKind::TCR || kind == RelaxationKind::STCR) && c.slack_index < 0)
    throw ProgramError(std::string(kind_name(kind)) + " needs a slack bus");

  LiftedVariableIndex idx = make_lifted_index(kind, c);
  ConicProgram p = build_common(c, idx);

  switch (kind) {
    case RelaxationKind::SOCR:
      add_socr_cones(p, c, idx);
      break;
    case RelaxationKind::SDR:
      add_sdr_block(p, idx);
      break;
    case RelaxationKind::TCR: {
      add_tcr_blocks(p, c, idx);
      // W_ss <= (vmin + vmax) Re{v_s} - vmin*vmax at the slack.
      const netmodel::Bus& sb = c.buses[static_cast<size_t>(c.slack_index)];
      AffExpr cut;
      cut.add(idx.diag[static_cast<size_t>(idx.slack)], -1.0)
          .add(idx.v_re[static_cast<size_t>(idx.slack)], sb.vmin + sb.vmax)
          .add_const(-sb.vmin * sb.vmax);
      p.ineq.push_back({std::move(cut), "w11-cut bus " + std::to_string(sb.id)});
      break;
    }
    case RelaxationKind::STCR:
      add_stcr_blocks(p, c, idx);
      break;
  }

  // Stamp the kind into the layout (build_common is kind-agnostic).
  auto lay = std::make_shared<ProgramLayout>(layout_of(p));
  lay->kind = kind;
  p.layout = lay;
  p.validate();

  BuildResult out;
  BuildReport& r = out.report;
  r.n_vars = p.nvar();
  r.n_eq = static_cast<int>(p.eq.size());
  r.n_ineq = static_cast<int>(p.ineq.size());
  for (const ConeSlice& cs : p.cones)
    (cs.kind == ConeClass::soc ? r.n_soc : r.n_rsoc) += 1;
  r.n_psd = static_cast<int>(p.psd_blocks.size());
  for (const AffRow& row : p.eq) r.tags.push_back(row.tag);
  for (const AffRow& row : p.ineq) r.tags.push_back(row.tag);
  for (const ConeSlice& cs : p.cones) r.tags.push_back(cs.tag);
  for (const PsdBlock& b : p.psd_blocks) r.tags.push_back(b.tag);
  out.program = std::move(p);
  return out;
}

}  // namespace opfcert::relaxation
