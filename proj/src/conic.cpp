#include "opfcert/conic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>

namespace opfcert::relaxation {

AffExpr& AffExpr::add(int var, double coef) {
  if (coef == 0.0) return *this;
  auto it = std::lower_bound(terms.begin(), terms.end(), var,
                             [](const LinTerm& t, int v) { return t.var < v; });
  if (it != terms.end() && it->var == var) {
    it->coef += coef;
    if (it->coef == 0.0) terms.erase(it);
  } else {
    terms.insert(it, {var, coef});
  }
  return *this;
}

double AffExpr::eval(const std::vector<double>& x) const {
  double v = constant;
  for (const LinTerm& t : terms) v += t.coef * x[static_cast<size_t>(t.var)];
  return v;
}

PsdBlock realify_psd_block(const HermitianBlock& block) {
  const int d = block.dim;
  PsdBlock out;
  out.dim = 2 * d;
  out.tag = block.tag;
  auto zero = [](const AffExpr& e) { return e.terms.empty() && e.constant == 0.0; };
  for (const HermitianEntry& h : block.entries) {
    if (h.i > h.j || h.j >= d)
      throw ProgramError("hermitian entry (" + std::to_string(h.i) + "," +
                         std::to_string(h.j) + ") outside upper triangle of dim " +
                         std::to_string(d));
    if (h.i == h.j && !zero(h.im))
      throw ProgramError("hermitian diagonal entry " + std::to_string(h.i) +
                         " has a nonzero imaginary part");
    // [[Re, -Im], [Im, Re]] with Im antisymmetric: upper-triangle slots only.
    out.entries.push_back({h.i, h.j, h.re});
    out.entries.push_back({h.i + d, h.j + d, h.re});
    if (h.i < h.j) {
      AffExpr neg;
      neg.constant = -h.im.constant;
      for (const LinTerm& t : h.im.terms) neg.terms.push_back({t.var, -t.coef});
      out.entries.push_back({h.i, h.j + d, std::move(neg)});
      out.entries.push_back({h.j, h.i + d, h.im});
    } else if (!zero(h.im)) {
      // unreachable (checked above), kept for clarity
    }
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const PsdEntry& a, const PsdEntry& b) {
              return std::tie(a.row, a.col) < std::tie(b.row, b.col);
            });
  return out;
}

int ConicProgram::new_var(std::string name) {
  vars.push_back({std::move(name)});
  return static_cast<int>(vars.size()) - 1;
}

namespace {

void check_expr(const AffExpr& e, int nvar, const std::string& where) {
  int prev = -1;
  for (const LinTerm& t : e.terms) {
    if (t.var < 0 || t.var >= nvar)
      throw ProgramError(where + ": variable id " + std::to_string(t.var) +
                         " out of range");
    if (t.var <= prev) throw ProgramError(where + ": terms not sorted/unique");
    if (t.coef == 0.0 || !std::isfinite(t.coef))
      throw ProgramError(where + ": degenerate coefficient");
    prev = t.var;
  }
  if (!std::isfinite(e.constant)) throw ProgramError(where + ": non-finite constant");
}

void mark_expr(const AffExpr& e, std::vector<char>& used) {
  for (const LinTerm& t : e.terms) used[static_cast<size_t>(t.var)] = 1;
}

}  // namespace

void ConicProgram::validate() const {
  const int nv = nvar();
  std::vector<char> used(static_cast<size_t>(nv), 0);
  check_expr(objective, nv, "objective");
  mark_expr(objective, used);
  for (size_t k = 0; k < eq.size(); ++k) {
    check_expr(eq[k].expr, nv, "eq[" + std::to_string(k) + "]");
    mark_expr(eq[k].expr, used);
  }
  for (size_t k = 0; k < ineq.size(); ++k) {
    check_expr(ineq[k].expr, nv, "ineq[" + std::to_string(k) + "]");
    mark_expr(ineq[k].expr, used);
  }
  for (size_t k = 0; k < cones.size(); ++k) {
    const ConeSlice& c = cones[k];
    const size_t min_entries = c.kind == ConeClass::soc ? 2 : 3;
    if (c.entries.size() < min_entries)
      throw ProgramError("cone[" + std::to_string(k) + "] has too few entries");
    for (const AffExpr& e : c.entries) {
      check_expr(e, nv, "cone[" + std::to_string(k) + "]");
      mark_expr(e, used);
    }
  }
  for (size_t k = 0; k < psd_blocks.size(); ++k) {
    const PsdBlock& b = psd_blocks[k];
    const std::string where = "psd[" + std::to_string(k) + "]";
    if (b.dim < 1) throw ProgramError(where + ": empty block");
    std::pair<int, int> prev{-1, -1};
    for (const PsdEntry& e : b.entries) {
      if (e.row < 0 || e.row > e.col || e.col >= b.dim)
        throw ProgramError(where + ": entry outside upper triangle");
      if (std::pair{e.row, e.col} <= prev)
        throw ProgramError(where + ": entries not sorted/unique");
      prev = {e.row, e.col};
      check_expr(e.expr, nv, where);
      mark_expr(e.expr, used);
    }
    if (b.complex_structure) {
      const auto& cs = *b.complex_structure;
      if (2 * cs.dim != b.dim)
        throw ProgramError(where + ": complex structure dim mismatch");
      for (const ComplexPairVar& p : cs.pairs) {
        if (p.i > p.j || p.j >= cs.dim)
          throw ProgramError(where + ": complex pair outside upper triangle");
        for (int v : {p.re_var, p.im_var})
          if (v != -1 && (v < 0 || v >= nv))
            throw ProgramError(where + ": complex pair variable out of range");
      }
    }
  }
  for (int v = 0; v < nv; ++v) {
    if (!used[static_cast<size_t>(v)])
      throw ProgramError("variable " + std::to_string(v) + " (" +
                         vars[static_cast<size_t>(v)].name + ") is never referenced");
  }
}

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

void write_expr(std::ostream& os, const AffExpr& e) {
  os << e.terms.size();
  for (const LinTerm& t : e.terms) os << ' ' << t.var << ' ' << fmt(t.coef);
  os << ' ' << fmt(e.constant);
}

struct LineReader {
  std::istream& is;
  int lineno = 0;
  std::string line;

  bool next() {
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ProgramError("benchmark line " + std::to_string(lineno) + ": " + msg);
  }
};

// Splits "fields | tag"; the tag half is verbatim (may be empty).
std::pair<std::string, std::string> split_tag(const std::string& line) {
  auto pos = line.find(" | ");
  if (pos == std::string::npos) return {line, ""};
  return {line.substr(0, pos), line.substr(pos + 3)};
}

AffExpr read_expr(std::istringstream& ss, LineReader& lr) {
  size_t k = 0;
  if (!(ss >> k)) lr.fail("expected term count");
  AffExpr e;
  for (size_t i = 0; i < k; ++i) {
    LinTerm t;
    if (!(ss >> t.var >> t.coef)) lr.fail("truncated expression");
    e.terms.push_back(t);
  }
  if (!(ss >> e.constant)) lr.fail("missing constant");
  return e;
}

std::string expect_word(std::istringstream& ss, const char* want, LineReader& lr) {
  std::string w;
  if (!(ss >> w) || w != want) lr.fail(std::string("expected '") + want + "'");
  return w;
}

}  // namespace

void write_conic_benchmark(const ConicProgram& p, std::ostream& os) {
  os << "CONICBENCH 1\n";
  os << "NVAR " << p.nvar() << '\n';
  for (int v = 0; v < p.nvar(); ++v)
    os << "VAR " << v << ' ' << p.vars[static_cast<size_t>(v)].name << '\n';
  os << "OBJ ";
  write_expr(os, p.objective);
  os << '\n';
  os << "EQ " << p.eq.size() << '\n';
  for (const AffRow& r : p.eq) {
    os << "ROW ";
    write_expr(os, r.expr);
    os << " | " << r.tag << '\n';
  }
  os << "INEQ " << p.ineq.size() << '\n';
  for (const AffRow& r : p.ineq) {
    os << "ROW ";
    write_expr(os, r.expr);
    os << " | " << r.tag << '\n';
  }
  os << "CONES " << p.cones.size() << '\n';
  for (const ConeSlice& c : p.cones) {
    os << "CONE " << (c.kind == ConeClass::soc ? "soc" : "rsoc") << ' '
       << c.entries.size() << " | " << c.tag << '\n';
    for (const AffExpr& e : c.entries) {
      os << "E ";
      write_expr(os, e);
      os << '\n';
    }
  }
  os << "PSD " << p.psd_blocks.size() << '\n';
  for (const PsdBlock& b : p.psd_blocks) {
    os << "BLOCK " << b.dim << ' ' << b.entries.size() << ' '
       << (b.complex_structure ? 1 : 0) << " | " << b.tag << '\n';
    for (const PsdEntry& e : b.entries) {
      os << "P " << e.row << ' ' << e.col << ' ';
      write_expr(os, e.expr);
      os << '\n';
    }
    if (b.complex_structure) {
      os << "CS " << b.complex_structure->dim << ' '
         << b.complex_structure->pairs.size() << '\n';
      for (const ComplexPairVar& pr : b.complex_structure->pairs)
        os << "PAIR " << pr.i << ' ' << pr.j << ' ' << pr.re_var << ' ' << pr.im_var
           << '\n';
    }
  }
  os << "END\n";
}

ConicProgram read_conic_benchmark(std::istream& is) {
  LineReader lr{is};
  ConicProgram p;
  if (!lr.next() || lr.line != "CONICBENCH 1")
    throw ProgramError("not a conic benchmark stream");

  if (!lr.next()) lr.fail("missing NVAR");
  int nvar = 0;
  {
    std::istringstream ss(lr.line);
    expect_word(ss, "NVAR", lr);
    if (!(ss >> nvar) || nvar < 0) lr.fail("bad NVAR");
  }
  for (int v = 0; v < nvar; ++v) {
    if (!lr.next()) lr.fail("missing VAR line");
    std::istringstream ss(lr.line);
    int idx = 0;
    expect_word(ss, "VAR", lr);
    if (!(ss >> idx) || idx != v) lr.fail("VAR lines out of order");
    std::string name;
    std::getline(ss, name);
    if (!name.empty() && name.front() == ' ') name.erase(0, 1);
    p.vars.push_back({std::move(name)});
  }

  if (!lr.next()) lr.fail("missing OBJ");
  {
    std::istringstream ss(lr.line);
    expect_word(ss, "OBJ", lr);
    p.objective = read_expr(ss, lr);
  }

  auto read_rows = [&](const char* header, std::vector<AffRow>& out) {
    if (!lr.next()) lr.fail(std::string("missing ") + header);
    size_t count = 0;
    {
      std::istringstream ss(lr.line);
      expect_word(ss, header, lr);
      if (!(ss >> count)) lr.fail("bad row count");
    }
    for (size_t k = 0; k < count; ++k) {
      if (!lr.next()) lr.fail("missing ROW line");
      auto [fields, tag] = split_tag(lr.line);
      std::istringstream ss(fields);
      expect_word(ss, "ROW", lr);
      out.push_back({read_expr(ss, lr), tag});
    }
  };
  read_rows("EQ", p.eq);
  read_rows("INEQ", p.ineq);

  if (!lr.next()) lr.fail("missing CONES");
  size_t ncones = 0;
  {
    std::istringstream ss(lr.line);
    expect_word(ss, "CONES", lr);
    if (!(ss >> ncones)) lr.fail("bad cone count");
  }
  for (size_t k = 0; k < ncones; ++k) {
    if (!lr.next()) lr.fail("missing CONE line");
    auto [fields, tag] = split_tag(lr.line);
    std::istringstream ss(fields);
    expect_word(ss, "CONE", lr);
    std::string kind;
    size_t entries = 0;
    if (!(ss >> kind >> entries)) lr.fail("bad CONE header");
    ConeSlice c;
    if (kind == "soc")
      c.kind = ConeClass::soc;
    else if (kind == "rsoc")
      c.kind = ConeClass::rsoc;
    else
      lr.fail("unknown cone kind '" + kind + "'");
    c.tag = tag;
    for (size_t e = 0; e < entries; ++e) {
      if (!lr.next()) lr.fail("missing cone entry");
      std::istringstream es(lr.line);
      expect_word(es, "E", lr);
      c.entries.push_back(read_expr(es, lr));
    }
    p.cones.push_back(std::move(c));
  }

  if (!lr.next()) lr.fail("missing PSD");
  size_t nblocks = 0;
  {
    std::istringstream ss(lr.line);
    expect_word(ss, "PSD", lr);
    if (!(ss >> nblocks)) lr.fail("bad block count");
  }
  for (size_t k = 0; k < nblocks; ++k) {
    if (!lr.next()) lr.fail("missing BLOCK line");
    auto [fields, tag] = split_tag(lr.line);
    std::istringstream ss(fields);
    expect_word(ss, "BLOCK", lr);
    size_t entries = 0;
    int has_cs = 0;
    PsdBlock b;
    if (!(ss >> b.dim >> entries >> has_cs)) lr.fail("bad BLOCK header");
    b.tag = tag;
    for (size_t e = 0; e < entries; ++e) {
      if (!lr.next()) lr.fail("missing PSD entry");
      std::istringstream es(lr.line);
      expect_word(es, "P", lr);
      PsdEntry pe;
      if (!(es >> pe.row >> pe.col)) lr.fail("bad PSD entry indices");
      pe.expr = read_expr(es, lr);
      b.entries.push_back(std::move(pe));
    }
    if (has_cs) {
      if (!lr.next()) lr.fail("missing CS line");
      std::istringstream cs(lr.line);
      expect_word(cs, "CS", lr);
      PsdBlock::ComplexStructure st;
      size_t npairs = 0;
      if (!(cs >> st.dim >> npairs)) lr.fail("bad CS header");
      for (size_t e = 0; e < npairs; ++e) {
        if (!lr.next()) lr.fail("missing PAIR line");
        std::istringstream ps(lr.line);
        expect_word(ps, "PAIR", lr);
        ComplexPairVar pr;
        if (!(ps >> pr.i >> pr.j >> pr.re_var >> pr.im_var)) lr.fail("bad PAIR");
        st.pairs.push_back(pr);
      }
      b.complex_structure = std::move(st);
    }
    p.psd_blocks.push_back(std::move(b));
  }

  if (!lr.next() || lr.line != "END") lr.fail("missing END");
  p.validate();
  return p;
}

std::string program_fingerprint(const ConicProgram& p) {
  std::ostringstream os;
  write_conic_benchmark(p, os);
  const std::string text = os.str();
  // FNV-1a, 64-bit
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace opfcert::relaxation
