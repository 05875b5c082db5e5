#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "opfcert/certifier.hpp"
#include "opfcert/relaxation.hpp"
#include "opfcert/solver.hpp"

namespace opfcert::cli {

struct RunSpec {
  std::vector<std::string> cases;  // file paths or bundled case names
  std::string case_dir;            // searched before the bundled directory
  std::vector<relaxation::RelaxationKind> kinds;
  certifier::Tolerances tol;
  solver::SolverConfig solver;
  std::string format = "table";  // table | csv | json
  std::string out_path;          // empty: stdout
  std::string reference_objectives_path;  // empty: bundled fixture
};

struct RunRecord {
  std::string case_name;
  relaxation::RelaxationKind kind = relaxation::RelaxationKind::SDR;
  bool ok = false;
  std::string error;  // set when !ok
  std::string solve_status;
  double objective = 0.0;
  std::optional<double> gap;  // percent; absent without a reference
  bool certified = false;
  std::string cert_path;  // "dense-rank" | "sparse-completion"
  double rank_ratio = 0.0;
  double max_tightness = 0.0;
  double max_cycle = 0.0;
  double max_ac_residual = 0.0;
  std::string certificate_json;
  double wall_ms = 0.0;
  int iterations = 0;
};

struct RunOutput {
  std::vector<RunRecord> records;
  std::string rendered;
  bool any_error = false;
};

/// Reference AC-OPF objectives keyed by case name.
std::map<std::string, double> load_reference_objectives(const std::string& path);

/// Bundled fixture locations: --case-dir, then $OPFCERT_CASE_DIR, then the
/// compiled-in source directory.
std::string resolve_case_path(const std::string& name_or_path, const std::string& case_dir);
std::vector<std::string> bundled_case_names();

RunOutput run(const RunSpec& spec);

std::string render(const std::vector<RunRecord>& records, const std::string& format);

}  // namespace opfcert::cli
