#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace opfcert::relaxation {

class ProgramError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LinTerm {
  int var = -1;
  double coef = 0.0;
};

/// Sparse affine expression c + sum coef_k * x_{var_k}; terms kept sorted by
/// variable id with no duplicates.
struct AffExpr {
  std::vector<LinTerm> terms;
  double constant = 0.0;

  AffExpr& add(int var, double coef);
  AffExpr& add_const(double c) {
    constant += c;
    return *this;
  }
  double eval(const std::vector<double>& x) const;
  bool operator==(const AffExpr&) const = default;
};

struct AffRow {
  AffExpr expr;
  std::string tag;
};

enum class ConeClass {
  soc,   // entries[0] >= || entries[1..] ||
  rsoc,  // 2 * entries[0] * entries[1] >= sum entries[2..]^2, entries[0,1] >= 0
};

struct ConeSlice {
  ConeClass kind = ConeClass::soc;
  std::vector<AffExpr> entries;
  std::string tag;
};

struct PsdEntry {
  int row = 0, col = 0;  // row <= col, upper triangle
  AffExpr expr;
};

/// Variable ids of one complex Hermitian entry pair (i <= j); -1 marks a
/// structurally absent slot (diagonal imaginary parts, constants).
struct ComplexPairVar {
  int i = 0, j = 0;
  int re_var = -1, im_var = -1;
};

struct PsdBlock {
  int dim = 0;  // real symmetric dimension
  std::vector<PsdEntry> entries;  // upper triangle; omitted slots are zero
  std::string tag;

  /// Present when the block is the real embedding of a Hermitian block whose
  /// entries are plain variables; enables solver-side sparsity handling.
  struct ComplexStructure {
    int dim = 0;
    std::vector<ComplexPairVar> pairs;
  };
  std::optional<ComplexStructure> complex_structure;
};

/// Affine description of a complex Hermitian block, fed to realify_psd_block.
struct HermitianEntry {
  int i = 0, j = 0;  // i <= j
  AffExpr re, im;    // im must be zero-valued for i == j
};

struct HermitianBlock {
  int dim = 0;
  std::vector<HermitianEntry> entries;
  std::string tag;
};

/// Standard real embedding [[Re, -Im], [Im, Re]]: the 2d x 2d real block is
/// PSD iff the complex block is; each complex eigenvalue appears twice.
PsdBlock realify_psd_block(const HermitianBlock& block);

struct VarInfo {
  std::string name;
};

class ConicProgram {
 public:
  std::vector<VarInfo> vars;
  AffExpr objective;  // minimized
  std::vector<AffRow> eq;    // expr == 0
  std::vector<AffRow> ineq;  // expr >= 0
  std::vector<ConeSlice> cones;
  std::vector<PsdBlock> psd_blocks;

  /// Opaque metadata linking variables/rows to network elements; set by the
  /// relaxation builders (see relaxation.hpp).
  std::shared_ptr<const void> layout;

  int nvar() const { return static_cast<int>(vars.size()); }
  int new_var(std::string name);

  /// Enforces the structural invariants (indices in range, sorted terms,
  /// symmetric upper-triangle PSD maps, every variable referenced).
  void validate() const;
};

/// Plain-text export/import of the full program (sparse triplet sections for
/// the objective, rows and cones); round-trips exactly, including tags and
/// complex block structure.
void write_conic_benchmark(const ConicProgram& p, std::ostream& os);
ConicProgram read_conic_benchmark(std::istream& is);
std::string program_fingerprint(const ConicProgram& p);  // stable content hash

}  // namespace opfcert::relaxation
