#pragma once

#include <Eigen/Core>

#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "opfcert/conic.hpp"
#include "opfcert/relaxation.hpp"

namespace opfcert::solver {

using relaxation::ConicProgram;
using relaxation::ProgramError;

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  double tol_feas = 1e-8;
  double tol_gap = 1e-8;
  int max_iter = 200;
  double time_limit_s = 0.0;  // <= 0: none
  /// "native" (auto dense/decomposed PSD), "native:dense", "native:sparse",
  /// "subprocess:<command>"; empty selects $OPFCERT_BACKEND then "native".
  std::string backend = "native";
  bool verbose = false;
};

enum class SolveStatus { optimal, infeasible, unbounded, numerical_failure };

const char* status_name(SolveStatus s);

struct BranchFlow {
  double pf = 0.0, qf = 0.0, pt = 0.0, qt = 0.0;
};

struct LiftedSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  double objective = 0.0;
  /// Hermitian entries on the lifted support, keyed (i <= j); diagonal
  /// entries have zero imaginary part. For SDR this covers every pair.
  std::map<std::pair<int, int>, std::complex<double>> W_entries;
  std::optional<std::vector<std::complex<double>>> v;  // TCR only
  std::vector<double> p_inj, q_inj;  // per bus, generation minus demand
  std::vector<BranchFlow> flows;
  std::vector<double> gen_p, gen_q;
  double duality_gap = 0.0;

  struct Diagnostics {
    std::string backend;
    int iterations = 0;
    double solve_seconds = 0.0;
    /// Max mismatch between duplicated slots of the real PSD embedding.
    double embedding_mismatch = 0.0;
    /// True when the PSD block was solved via clique decomposition and the
    /// off-pattern entries were reconstructed by matrix completion.
    bool decomposed_psd = false;
    double max_bound_violation = 0.0;  // W_ii outside [vmin^2, vmax^2]
    std::string message;
  } diag;
};

/// Raw result a backend hands back: the variable vector of the (possibly
/// internally transformed) program plus solver telemetry.
struct RawSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  std::vector<double> x;
  double objective = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  double embedding_mismatch = 0.0;
  bool decomposed = false;
  std::string message;
};

class ConicBackend {
 public:
  virtual ~ConicBackend() = default;
  virtual std::string name() const = 0;
  /// Whether one backend instance may be used from several threads at once.
  virtual bool thread_safe() const = 0;
  virtual RawSolution solve_raw(const ConicProgram& p, const SolverConfig& cfg) = 0;
};

/// Native Clarabel backend. `psd_mode`: 0 auto, 1 force dense, 2 force
/// decomposed. Auto decomposes Hermitian-structured blocks of complex
/// dimension >= decompose_threshold whose off-pattern entries are free.
std::unique_ptr<ConicBackend> make_clarabel_backend(int psd_mode = 0,
                                                    int decompose_threshold = 30);

/// External-process backend: runs `command in.cb out.json` on the
/// conic-benchmark export and reads the solution JSON back.
std::unique_ptr<ConicBackend> make_subprocess_backend(std::string command);

std::unique_ptr<ConicBackend> make_backend(const std::string& selector);

LiftedSolution solve(const ConicProgram& p, const SolverConfig& cfg);

/// Dense Hermitian W from a full-support (SDR) solution; throws ProgramError
/// directing to the completion path when the support is sparse.
Eigen::MatrixXcd extract_dense_W(const LiftedSolution& sol, int n);

namespace detail {

/// Clarabel-form lowering: minimize q'x s.t. Ax + s = b, s in K, with K an
/// ordered cone list. PSD cones use scaled svec (upper triangle, column
/// stacked, off-diagonal x sqrt2).
struct LoweredProblem {
  int nvar = 0;
  int nrow = 0;
  std::vector<std::size_t> colptr;
  std::vector<std::size_t> rowidx;
  std::vector<double> vals;
  std::vector<double> b;
  std::vector<double> q;
  std::vector<int> cone_tags;   // 0 zero, 1 nonneg, 2 soc, 3 psd-triangle
  std::vector<std::size_t> cone_dims;
  double obj_constant = 0.0;
  /// q is divided by this (dollar-scale costs wreck conditioning otherwise);
  /// solver objectives must be multiplied back.
  double obj_scale = 1.0;
  /// Largest |coefficient| seen on any scalar row before row normalization.
  /// Backends use it to decide whether internal equilibration is worth its
  /// cost in endgame accuracy.
  double raw_row_max = 0.0;
};

LoweredProblem lower_program(const ConicProgram& p);

/// Chordal clique structure of an undirected pattern on [0, n).
struct CliqueDecomposition {
  std::vector<std::vector<int>> cliques;       // sorted vertex lists
  std::vector<std::pair<int, int>> fill_pairs; // extension minus pattern (a < b)
  std::vector<int> tree_parent;                // clique tree, -1 at root
};

CliqueDecomposition chordal_cliques(int n, const std::vector<std::pair<int, int>>& pattern);

/// Completes a partial Hermitian matrix given on the chordal extension
/// pattern to a full PSD-completable matrix via clique-tree propagation
/// (W[D\S, R] = W[D\S, S] pinv(W[S, S]) W[S, R]).
Eigen::MatrixXcd clique_tree_complete(const Eigen::MatrixXcd& partial,
                                      const CliqueDecomposition& dec);

}  // namespace detail

}  // namespace opfcert::solver
