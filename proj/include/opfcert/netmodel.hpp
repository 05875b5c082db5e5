#pragma once

#include <complex>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace opfcert::netmodel {

/// Raised for malformed case text; `line` is 1-based within the source stream
/// (0 when the failure is not tied to a single line).
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

/// Raised when parsed data violates a model invariant (dangling references,
/// duplicate ids, bad bounds, non-convex costs, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CostCurve {
  enum class Kind { polynomial, piecewise_linear };
  Kind kind = Kind::polynomial;

  /// Ascending coefficients {c0, c1, c2} in $/h over per-unit power.
  std::vector<double> poly;

  /// Piecewise-linear breakpoints (per-unit power, strictly increasing) and
  /// cost values ($/h); slopes must be nondecreasing.
  std::vector<double> pwl_x;
  std::vector<double> pwl_y;

  double eval(double p) const;
  /// Largest quadratic coefficient (0 for linear / piecewise curves).
  double quadratic_coef() const { return poly.size() > 2 ? poly[2] : 0.0; }
};

struct Bus {
  int id = 0;  // external MATPOWER number
  double vmin = 0.0, vmax = 0.0;
  double pd = 0.0, qd = 0.0;
  double gs = 0.0, bs = 0.0;
  bool is_slack = false;
};

struct Branch {
  int from = 0, to = 0;  // external bus ids
  double r = 0.0, x = 0.0;
  double b_charge = 0.0;
  double tap = 1.0;
  double shift = 0.0;  // radians
  std::optional<double> smax;  // per-unit apparent power; absent = unbounded
};

struct Generator {
  int bus = 0;
  double pmin = 0.0, pmax = 0.0;
  double qmin = 0.0, qmax = 0.0;
  CostCurve cost;
};

struct NetworkCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::unordered_map<int, int> index_of_id;  // external id -> internal index
  int slack_index = -1;

  int index_of(int external_id) const;
  int n() const { return static_cast<int>(buses.size()); }
  /// Internal endpoint indices of branch k as (from_index, to_index).
  std::pair<int, int> branch_endpoints(int k) const;
};

struct BranchAdmittance {
  std::complex<double> yff, yft, ytf, ytt;
};

/// Two-port pi-model admittance: series 1/(r+jx), half charging jb/2 on each
/// side, off-nominal tap on the from side, phase shift in radians.
BranchAdmittance branch_admittance(const Branch& br);

NetworkCase parse_matpower(std::istream& in, std::string_view name_hint = {});
NetworkCase parse_matpower_file(const std::string& path);

/// True iff the in-service graph is a spanning tree (|L| = |N| - 1).
/// Throws for disconnected networks.
bool is_radial(const NetworkCase& c);

std::string to_canonical_json(const NetworkCase& c);
NetworkCase from_canonical_json(const std::string& text);
bool model_equal(const NetworkCase& a, const NetworkCase& b);

namespace detail {

/// Raw MATPOWER tables before conversion/validation; used by parse_matpower
/// and by test oracles that need columns the model does not keep (Vg, Pg).
struct RawCase {
  std::string name;
  double base_mva = 0.0;
  bool has_base_mva = false;
  std::map<std::string, std::vector<std::vector<double>>> matrices;
  std::map<std::string, std::vector<int>> row_lines;  // source line of each row
};

RawCase read_matpower_tables(std::istream& in);

}  // namespace detail

}  // namespace opfcert::netmodel
