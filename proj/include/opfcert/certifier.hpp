#pragma once

#include <Eigen/Core>

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "opfcert/graph.hpp"
#include "opfcert/netmodel.hpp"
#include "opfcert/relaxation.hpp"
#include "opfcert/solver.hpp"

namespace opfcert::certifier {

class CertifierError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double eps_rank = 1e-6;      // eigenvalue-ratio rank test
  double eps_tight = 1e-4;     // per-line tightness
  double eps_cycle = 1e-3;     // cycle angle sum, radians
  double eps_residual = 1e-5;  // AC residual, per-unit
};

enum class Verdict { exact, not_certified };
enum class CertPath { dense_rank, sparse_completion };

struct ExactnessCertificate {
  Verdict verdict = Verdict::not_certified;
  CertPath path = CertPath::dense_rank;
  std::string case_name;
  std::string relaxation;
  Tolerances tol;

  // dense path evidence
  std::vector<double> eigenvalues;  // ascending
  double rank_ratio = 0.0;          // |second largest| / largest

  // sparse path evidence
  std::vector<double> tightness_residuals;  // per support pair
  std::vector<double> cycle_residuals;      // per basis cycle
  double max_tightness = 0.0;
  double max_cycle = 0.0;
  int argmax_pair_i = -1, argmax_pair_j = -1;
  int argmax_cycle = -1;
  std::string support;  // "lines" or "lines+slack-row"

  std::string diagnostic;

  std::string to_json() const;
  static ExactnessCertificate from_json(const std::string& text);
};

struct ConstraintViolations {
  double vmag = 0.0;      // voltage-square bounds
  double gen_p = 0.0;     // active injection bounds
  double gen_q = 0.0;     // reactive injection bounds
  double line_flow = 0.0; // apparent-power limits
  double worst() const;
};

struct RecoveredOperatingPoint {
  std::vector<std::complex<double>> v;  // slack angle exactly 0
  std::vector<std::complex<double>> residuals;  // per bus, recomputed - reported
  double max_residual = 0.0;
  ConstraintViolations violations;
  std::vector<double> gen_p, gen_q;
  double objective = 0.0;
};

/// Dense rank-1 test: exact iff |second largest eigenvalue| <= eps_rank *
/// largest and the largest is positive. Requires a Hermitian input (within
/// 1e-9) with positive leading diagonal entry.
ExactnessCertificate rank1_certificate(const Eigen::MatrixXcd& W, const Tolerances& tol);

/// Relative tightness residuals |W_ii W_jj - |W_ij|^2| / max(W_ii W_jj, 1)
/// over the solution's off-diagonal support. Throws if an in-service line has
/// no entry.
std::vector<double> tightness_check(const solver::LiftedSolution& sol,
                                    const netmodel::NetworkCase& c,
                                    const Tolerances& tol);

struct CycleCheckResult {
  std::vector<double> residuals;  // wrapped to (-pi, pi], absolute value
  bool zero_entry = false;
  std::string diagnostic;
};

/// Oriented angle sums over the basis cycles, wrapped mod 2pi. A zero entry
/// on a cycle edge makes the argument undefined: flagged, not thrown.
CycleCheckResult cycle_check(const solver::LiftedSolution& sol,
                             const graph::CycleBasis& basis,
                             const graph::PowerGraph& g,
                             const Tolerances& tol);

/// Support graph of the solution's off-diagonal entries (line edges keep
/// their branch index; slack-row pairs become synthetic edges).
graph::PowerGraph support_graph(const solver::LiftedSolution& sol, int n);

/// Rank-1 completion from tight entries: |v_i| = sqrt(W_ii), angles spread
/// from the slack along the spanning tree of the support graph, W = v v^H.
Eigen::MatrixXcd complete_rank1(const solver::LiftedSolution& sol,
                                const netmodel::NetworkCase& c,
                                const graph::PowerGraph& support,
                                const graph::SpanningTree& tree);

/// Leading eigenpair recovery v = sqrt(lambda) u, slack angle rotated to 0;
/// re-derives injections and flows from v through the pi model and reports
/// residuals against the solver's values plus limit violations.
RecoveredOperatingPoint recover_voltages(const Eigen::MatrixXcd& W,
                                         const netmodel::NetworkCase& c,
                                         const solver::LiftedSolution& sol);

/// 100 * (reference - relax) / reference, clamped to 0 within solver noise.
/// Requires reference > 0.
double optimality_gap(double relax_obj, double reference_obj);

struct CertifiedRun {
  ExactnessCertificate certificate;
  std::optional<RecoveredOperatingPoint> recovered;
  Eigen::MatrixXcd W_dense;  // dense or completed matrix used for recovery
};

/// Full certification pipeline: dense rank path for SDR, sparse completion
/// path otherwise; voltage recovery when the verdict is exact.
CertifiedRun certify(relaxation::RelaxationKind kind,
                     const netmodel::NetworkCase& c,
                     const solver::LiftedSolution& sol,
                     const Tolerances& tol);

}  // namespace opfcert::certifier
