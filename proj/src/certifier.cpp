#include "opfcert/certifier.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace opfcert::certifier {

namespace {

using json = nlohmann::json;

constexpr double kHermTol = 1e-9;

void require_positive(const Tolerances& tol) {
  if (tol.eps_rank <= 0.0 || tol.eps_tight <= 0.0 || tol.eps_cycle <= 0.0 ||
      tol.eps_residual <= 0.0)
    throw CertifierError("all certification tolerances must be positive");
}

std::complex<double> entry_or_throw(const solver::LiftedSolution& sol, int i, int j,
                                    const char* what) {
  const auto key = std::minmax(i, j);
  const auto it = sol.W_entries.find({key.first, key.second});
  if (it == sol.W_entries.end())
    throw CertifierError(std::string(what) + ": no W entry for pair (" +
                         std::to_string(i) + "," + std::to_string(j) + ")");
  return i <= j ? it->second : std::conj(it->second);
}

// Oriented argument of W_uv for a traversal u -> v.
double oriented_arg(const solver::LiftedSolution& sol, int u, int v) {
  return std::arg(entry_or_throw(sol, u, v, "cycle check"));
}

double wrap_pi(double a) {
  // remainder() lands in [-pi, pi]; fold the open end.
  double w = std::remainder(a, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

}  // namespace

double ConstraintViolations::worst() const {
  return std::max({vmag, gen_p, gen_q, line_flow});
}

ExactnessCertificate rank1_certificate(const Eigen::MatrixXcd& W, const Tolerances& tol) {
  require_positive(tol);
  const int n = static_cast<int>(W.rows());
  if (n == 0 || W.cols() != n) throw CertifierError("rank test needs a square matrix");
  const double scale = W.cwiseAbs().maxCoeff();
  if (scale == 0.0) throw CertifierError("rank test is undefined for the zero matrix");
  if ((W - W.adjoint()).cwiseAbs().maxCoeff() > kHermTol * std::max(1.0, scale))
    throw CertifierError("rank test needs a Hermitian matrix");

  ExactnessCertificate cert;
  cert.path = CertPath::dense_rank;
  cert.tol = tol;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(W, Eigen::EigenvaluesOnly);
  cert.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
  const double lead = cert.eigenvalues.back();
  // Ascending order puts the largest-magnitude trailing eigenvalue at either
  // end of the remaining range; this also covers the Lemma-1 consistency
  // check, since a violating negative eigenvalue would dominate the ratio.
  double second = 0.0;
  if (n > 1)
    second = std::max(std::abs(cert.eigenvalues.front()),
                      std::abs(cert.eigenvalues[static_cast<size_t>(n) - 2]));
  if (lead > 0.0) {
    cert.rank_ratio = second / lead;
    cert.verdict = cert.rank_ratio <= tol.eps_rank ? Verdict::exact : Verdict::not_certified;
  } else {
    cert.rank_ratio = 1.0;
    cert.verdict = Verdict::not_certified;
    cert.diagnostic = "leading eigenvalue is not positive";
  }
  return cert;
}

std::vector<double> tightness_check(const solver::LiftedSolution& sol,
                                    const netmodel::NetworkCase& c,
                                    const Tolerances& tol) {
  require_positive(tol);
  std::vector<double> res;
  res.reserve(c.branches.size());
  for (size_t k = 0; k < c.branches.size(); ++k) {
    const auto [fi, ti] = c.branch_endpoints(static_cast<int>(k));
    const double wii = entry_or_throw(sol, fi, fi, "tightness check").real();
    const double wjj = entry_or_throw(sol, ti, ti, "tightness check").real();
    const auto wij = entry_or_throw(sol, fi, ti, "tightness check");
    const double prod = wii * wjj;
    res.push_back(std::abs(prod - std::norm(wij)) / std::max(prod, 1.0));
  }
  return res;
}

CycleCheckResult cycle_check(const solver::LiftedSolution& sol,
                             const graph::CycleBasis& basis,
                             const graph::PowerGraph& g,
                             const Tolerances& tol) {
  require_positive(tol);
  CycleCheckResult out;
  out.residuals.reserve(basis.cycles.size());
  for (size_t ci = 0; ci < basis.cycles.size(); ++ci) {
    const auto& cyc = basis.cycles[ci];
    double sum = 0.0;
    bool bad = false;
    for (const auto& ce : cyc.edges) {
      const auto& e = g.edges[static_cast<size_t>(ce.edge_id)];
      const auto w = entry_or_throw(sol, e.u, e.v, "cycle check");
      if (w == std::complex<double>(0.0, 0.0)) {
        bad = true;
        out.zero_entry = true;
        if (!out.diagnostic.empty()) out.diagnostic += "; ";
        out.diagnostic += "W entry on cycle " + std::to_string(ci) + " edge (" +
                          std::to_string(e.u) + "," + std::to_string(e.v) +
                          ") is zero, argument undefined";
        continue;
      }
      sum += ce.sign * oriented_arg(sol, e.u, e.v);
    }
    // An undefined argument cannot certify; report the worst possible wrap.
    out.residuals.push_back(bad ? std::numbers::pi : std::abs(wrap_pi(sum)));
  }
  return out;
}

graph::PowerGraph support_graph(const solver::LiftedSolution& sol, int n) {
  std::vector<graph::Edge> edges;
  for (const auto& [key, val] : sol.W_entries) {
    (void)val;
    if (key.first == key.second) continue;
    if (key.first < 0 || key.second >= n)
      throw CertifierError("W entry outside the bus range");
    edges.push_back({key.first, key.second, -1});
  }
  return graph::PowerGraph::from_edges(n, std::move(edges));
}

Eigen::MatrixXcd complete_rank1(const solver::LiftedSolution& sol,
                                const netmodel::NetworkCase& c,
                                const graph::PowerGraph& support,
                                const graph::SpanningTree& tree) {
  const int n = c.n();
  std::vector<double> mag(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double wii = entry_or_throw(sol, i, i, "completion").real();
    mag[static_cast<size_t>(i)] = std::sqrt(std::max(wii, 0.0));
  }
  // theta_u = theta_parent - arg(W_parent,u), resolved iteratively from the
  // root so deep feeders do not recurse.
  std::vector<double> theta(static_cast<size_t>(n), 0.0);
  std::vector<char> known(static_cast<size_t>(n), 0);
  known[static_cast<size_t>(tree.root)] = 1;
  for (int v = 0; v < n; ++v) {
    std::vector<int> chain;
    for (int u = v; u >= 0 && !known[static_cast<size_t>(u)];
         u = tree.parent[static_cast<size_t>(u)])
      chain.push_back(u);
    if (!chain.empty() && tree.parent[static_cast<size_t>(chain.back())] < 0)
      throw CertifierError("completion reached a stranded vertex");
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      const int u = *it;
      const int p = tree.parent[static_cast<size_t>(u)];
      theta[static_cast<size_t>(u)] =
          theta[static_cast<size_t>(p)] - oriented_arg(sol, p, u);
      known[static_cast<size_t>(u)] = 1;
    }
  }
  (void)support;
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i)
    v(i) = std::polar(mag[static_cast<size_t>(i)], theta[static_cast<size_t>(i)]);
  return v * v.adjoint();
}

RecoveredOperatingPoint recover_voltages(const Eigen::MatrixXcd& W,
                                         const netmodel::NetworkCase& c,
                                         const solver::LiftedSolution& sol) {
  const int n = c.n();
  if (W.rows() != n || W.cols() != n)
    throw CertifierError("recovery needs a bus-count-sized matrix");
  if (c.slack_index < 0) throw CertifierError("recovery needs a slack bus");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(W);
  const double lambda = es.eigenvalues()(n - 1);
  if (lambda <= 0.0) throw CertifierError("leading eigenvalue is not positive");
  Eigen::VectorXcd v = std::sqrt(lambda) * es.eigenvectors().col(n - 1);

  RecoveredOperatingPoint out;
  const auto vs = v(c.slack_index);
  if (std::abs(vs) > 0.0) v *= std::polar(1.0, -std::arg(vs));
  v(c.slack_index) = std::complex<double>(std::abs(v(c.slack_index)), 0.0);
  out.v.assign(v.data(), v.data() + n);

  // Re-derive every flow and injection from v through the pi model; nothing
  // from the solver enters these numbers except the generator dispatch.
  std::vector<std::complex<double>> inj(static_cast<size_t>(n), {0.0, 0.0});
  double flow_excess = 0.0;
  for (size_t k = 0; k < c.branches.size(); ++k) {
    const auto& br = c.branches[k];
    const auto [fi, ti] = c.branch_endpoints(static_cast<int>(k));
    const auto y = netmodel::branch_admittance(br);
    const auto vf = v(fi), vt = v(ti);
    const auto sf = std::conj(y.yff) * std::norm(vf) + std::conj(y.yft) * vf * std::conj(vt);
    const auto st = std::conj(y.ytt) * std::norm(vt) + std::conj(y.ytf) * vt * std::conj(vf);
    inj[static_cast<size_t>(fi)] += sf;
    inj[static_cast<size_t>(ti)] += st;
    if (br.smax) {
      flow_excess = std::max(flow_excess, std::abs(sf) - *br.smax);
      flow_excess = std::max(flow_excess, std::abs(st) - *br.smax);
    }
  }
  out.violations.line_flow = std::max(0.0, flow_excess);

  for (int i = 0; i < n; ++i) {
    const auto& bus = c.buses[static_cast<size_t>(i)];
    inj[static_cast<size_t>(i)] +=
        std::complex<double>(bus.gs, -bus.bs) * std::norm(v(i));
    const double vm = std::abs(v(i));
    out.violations.vmag =
        std::max({out.violations.vmag, bus.vmin - vm, vm - bus.vmax});
  }
  out.violations.vmag = std::max(0.0, out.violations.vmag);

  out.residuals.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::complex<double> reported(sol.p_inj[static_cast<size_t>(i)],
                                        sol.q_inj[static_cast<size_t>(i)]);
    out.residuals[static_cast<size_t>(i)] = inj[static_cast<size_t>(i)] - reported;
    out.max_residual = std::max(out.max_residual,
                                std::abs(out.residuals[static_cast<size_t>(i)]));
  }

  out.gen_p = sol.gen_p;
  out.gen_q = sol.gen_q;
  double pv = 0.0, qv = 0.0;
  for (size_t g = 0; g < c.generators.size(); ++g) {
    const auto& gen = c.generators[g];
    pv = std::max({pv, gen.pmin - out.gen_p[g], out.gen_p[g] - gen.pmax});
    qv = std::max({qv, gen.qmin - out.gen_q[g], out.gen_q[g] - gen.qmax});
    out.objective += gen.cost.eval(out.gen_p[g]);
  }
  out.violations.gen_p = std::max(0.0, pv);
  out.violations.gen_q = std::max(0.0, qv);
  return out;
}

double optimality_gap(double relax_obj, double reference_obj) {
  if (reference_obj <= 0.0)
    throw CertifierError("optimality gap needs a positive reference objective");
  return std::max(0.0, 100.0 * (reference_obj - relax_obj) / reference_obj);
}

CertifiedRun certify(relaxation::RelaxationKind kind,
                     const netmodel::NetworkCase& c,
                     const solver::LiftedSolution& sol,
                     const Tolerances& tol) {
  require_positive(tol);
  if (sol.status != solver::SolveStatus::optimal)
    throw CertifierError("only optimal solutions can be certified");
  const int n = c.n();

  CertifiedRun run;
  if (kind == relaxation::RelaxationKind::SDR) {
    Eigen::MatrixXcd W = solver::extract_dense_W(sol, n);
    run.certificate = rank1_certificate(W, tol);
    if (run.certificate.verdict == Verdict::exact) {
      run.recovered = recover_voltages(W, c, sol);
      run.W_dense = std::move(W);
    }
  } else {
    auto& cert = run.certificate;
    cert.path = CertPath::sparse_completion;
    cert.tol = tol;
    cert.support = kind == relaxation::RelaxationKind::STCR ? "lines+slack-row" : "lines";

    cert.tightness_residuals = tightness_check(sol, c, tol);
    for (size_t k = 0; k < cert.tightness_residuals.size(); ++k) {
      if (cert.tightness_residuals[k] >= cert.max_tightness) {
        cert.max_tightness = cert.tightness_residuals[k];
        const auto [fi, ti] = c.branch_endpoints(static_cast<int>(k));
        cert.argmax_pair_i = fi;
        cert.argmax_pair_j = ti;
      }
    }

    bool cycles_ok = true;
    try {
      const auto support = support_graph(sol, n);
      const auto tree = graph::spanning_tree(support, c.slack_index);
      const auto basis = graph::fundamental_cycles(support, tree);
      const auto cyc = cycle_check(sol, basis, support, tol);
      cert.cycle_residuals = cyc.residuals;
      for (size_t ci = 0; ci < cyc.residuals.size(); ++ci)
        if (cyc.residuals[ci] >= cert.max_cycle) {
          cert.max_cycle = cyc.residuals[ci];
          cert.argmax_cycle = static_cast<int>(ci);
        }
      if (cyc.zero_entry) {
        cycles_ok = false;
        cert.diagnostic = cyc.diagnostic;
      } else {
        cycles_ok = cert.max_cycle <= tol.eps_cycle;
      }

      if (cycles_ok && cert.max_tightness <= tol.eps_tight) {
        cert.verdict = Verdict::exact;
        Eigen::MatrixXcd W = complete_rank1(sol, c, support, tree);
        double agree = 0.0;
        for (const auto& [key, val] : sol.W_entries)
          agree = std::max(agree, std::abs(W(key.first, key.second) - val));
        char buf[64];
        std::snprintf(buf, sizeof buf, "completion agreement max dev %.3e", agree);
        cert.diagnostic = buf;
        run.recovered = recover_voltages(W, c, sol);
        run.W_dense = std::move(W);
      }
    } catch (const graph::GraphError& e) {
      cert.verdict = Verdict::not_certified;
      cert.diagnostic = std::string("support graph: ") + e.what();
    }
  }
  run.certificate.case_name = c.name;
  run.certificate.relaxation = relaxation::kind_name(kind);
  return run;
}

std::string ExactnessCertificate::to_json() const {
  json j;
  j["verdict"] = verdict == Verdict::exact ? "exact" : "not-certified";
  j["path"] = path == CertPath::dense_rank ? "dense-rank" : "sparse-completion";
  j["case"] = case_name;
  j["relaxation"] = relaxation;
  j["tolerances"] = {{"eps_rank", tol.eps_rank},
                     {"eps_tight", tol.eps_tight},
                     {"eps_cycle", tol.eps_cycle},
                     {"eps_residual", tol.eps_residual}};
  j["eigenvalues"] = eigenvalues;
  j["rank_ratio"] = rank_ratio;
  j["tightness"] = {{"residuals", tightness_residuals},
                    {"max", max_tightness},
                    {"argmax_pair", {argmax_pair_i, argmax_pair_j}}};
  j["cycles"] = {{"residuals", cycle_residuals},
                 {"max", max_cycle},
                 {"argmax", argmax_cycle}};
  j["support"] = support;
  j["diagnostic"] = diagnostic;
  return j.dump(2);
}

ExactnessCertificate ExactnessCertificate::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CertifierError(std::string("bad certificate JSON: ") + e.what());
  }
  ExactnessCertificate cert;
  try {
    cert.verdict = j.at("verdict") == "exact" ? Verdict::exact : Verdict::not_certified;
    cert.path = j.at("path") == "dense-rank" ? CertPath::dense_rank
                                             : CertPath::sparse_completion;
    cert.case_name = j.at("case");
    cert.relaxation = j.at("relaxation");
    const auto& t = j.at("tolerances");
    cert.tol.eps_rank = t.at("eps_rank");
    cert.tol.eps_tight = t.at("eps_tight");
    cert.tol.eps_cycle = t.at("eps_cycle");
    cert.tol.eps_residual = t.at("eps_residual");
    cert.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    cert.rank_ratio = j.at("rank_ratio");
    const auto& ti = j.at("tightness");
    cert.tightness_residuals = ti.at("residuals").get<std::vector<double>>();
    cert.max_tightness = ti.at("max");
    cert.argmax_pair_i = ti.at("argmax_pair").at(0);
    cert.argmax_pair_j = ti.at("argmax_pair").at(1);
    const auto& cy = j.at("cycles");
    cert.cycle_residuals = cy.at("residuals").get<std::vector<double>>();
    cert.max_cycle = cy.at("max");
    cert.argmax_cycle = cy.at("argmax");
    cert.support = j.at("support");
    cert.diagnostic = j.at("diagnostic");
  } catch (const json::exception& e) {
    throw CertifierError(std::string("bad certificate JSON: ") + e.what());
  }
  return cert;
}

}  // namespace opfcert::certifier
