#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "opfcert/conic.hpp"
#include "opfcert/netmodel.hpp"

namespace opfcert::relaxation {

enum class RelaxationKind { SDR, SOCR, TCR, STCR };

const char* kind_name(RelaxationKind k);
RelaxationKind kind_from_name(const std::string& s);

struct PairVars {
  int re = -1, im = -1;
};

/// Real-variable ids for the lifted Hermitian entries. Off-diagonal pairs are
/// keyed (a, b) with a < b over internal bus indices; the stored value is
/// W_ab, so W_ba is its conjugate. Diagonal imaginary parts do not exist.
struct LiftedVariableIndex {
  int n = 0;
  int slack = -1;
  std::vector<int> diag;                         // bus -> var of W_ii
  std::map<std::pair<int, int>, PairVars> pairs; // (a<b) -> Re/Im vars
  // TCR only: complex voltage variables; im is -1 at the slack bus.
  std::vector<int> v_re, v_im;

  bool has_pair(int i, int j) const;
  const PairVars& pair(int i, int j) const;  // throws if absent

  /// Affine (re, im) of W_ij for any orientation, applying conjugation when
  /// i > j. Diagonal entries have zero imaginary part.
  std::pair<AffExpr, AffExpr> entry(int i, int j) const;
};

struct BranchVars {
  int pf = -1, qf = -1, pt = -1, qt = -1;
};

struct GenVars {
  int p = -1, q = -1, cost_epi = -1;  // cost_epi absent for pure linear costs
};

/// Metadata attached to every built ConicProgram (via ConicProgram::layout).
struct ProgramLayout {
  RelaxationKind kind = RelaxationKind::SDR;
  int n = 0;
  int slack = -1;
  LiftedVariableIndex lifted;
  std::vector<BranchVars> branch_vars;
  std::vector<GenVars> gen_vars;
};

const ProgramLayout& layout_of(const ConicProgram& p);  // throws if absent

struct BuildReport {
  int n_vars = 0;
  int n_eq = 0;
  int n_ineq = 0;
  int n_soc = 0;
  int n_rsoc = 0;
  int n_psd = 0;
  std::vector<std::string> tags;  // provenance, emission order
};

struct BuildResult {
  ConicProgram program;
  BuildReport report;
};

/// Lifted-entry index for the given relaxation: diagonal always; line pairs
/// for SOCR/TCR/STCR; all pairs for SDR; slack-row pairs added for STCR.
LiftedVariableIndex make_lifted_index(RelaxationKind kind, const netmodel::NetworkCase& c);

/// Shared fragment: flow definitions against the lifted entries, nodal
/// balance with shunts, voltage-square / generator bounds, apparent-power
/// cones, and the convex cost epigraph + objective. The returned program's
/// layout is fully populated; kind-specific cone blocks are not yet present.
ConicProgram build_common(const netmodel::NetworkCase& c, const LiftedVariableIndex& idx);

BuildResult build(RelaxationKind kind, const netmodel::NetworkCase& c);

}  // namespace opfcert::relaxation
