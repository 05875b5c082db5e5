#include <doctest.h>

#include <Eigen/Dense>
#include <sstream>

#include "opfcert/conic.hpp"

using namespace opfcert::relaxation;

namespace {

AffExpr constant(double c) {
  AffExpr e;
  e.constant = c;
  return e;
}

// Evaluate a PSD block with constant entries into a dense symmetric matrix.
Eigen::MatrixXd dense_of(const PsdBlock& b) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(b.dim, b.dim);
  for (const PsdEntry& e : b.entries) {
    const double v = e.expr.eval({});
    m(e.row, e.col) = v;
    m(e.col, e.row) = v;
  }
  return m;
}

}  // namespace

TEST_CASE("AffExpr keeps terms sorted and merged") {
  AffExpr e;
  e.add(5, 1.0).add(2, 3.0).add(5, 2.0).add(7, -1.0).add_const(4.0);
  REQUIRE(e.terms.size() == 3);
  CHECK(e.terms[0].var == 2);
  CHECK(e.terms[1].var == 5);
  CHECK(e.terms[1].coef == 3.0);
  CHECK(e.terms[2].var == 7);
  CHECK(e.eval({0, 0, 1, 0, 0, 10, 0, 2}) == doctest::Approx(4.0 + 3.0 + 30.0 - 2.0));

  e.add(2, -3.0);  // cancels to zero and disappears
  CHECK(e.terms.size() == 2);
  e.add(9, 0.0);  // adding zero is a no-op
  CHECK(e.terms.size() == 2);
}

TEST_CASE("realify_psd_block embeds [[2, i], [-i, 2]]") {
  // [DERIVED] complex eigenvalues 2 -+ 1 = {1, 3}; each appears twice.
  HermitianBlock h;
  h.dim = 2;
  h.entries.push_back({0, 0, constant(2.0), {}});
  h.entries.push_back({1, 1, constant(2.0), {}});
  h.entries.push_back({0, 1, constant(0.0), constant(1.0)});
  PsdBlock b = realify_psd_block(h);
  REQUIRE(b.dim == 4);

  Eigen::MatrixXd m = dense_of(b);
  CHECK(m(0, 3) == doctest::Approx(-1.0));  // -Im slot
  CHECK(m(1, 2) == doctest::Approx(1.0));   // +Im slot
  CHECK(m(0, 2) == doctest::Approx(0.0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::Vector4d ev = es.eigenvalues();
  CHECK(ev(0) == doctest::Approx(1.0));
  CHECK(ev(1) == doctest::Approx(1.0));
  CHECK(ev(2) == doctest::Approx(3.0));
  CHECK(ev(3) == doctest::Approx(3.0));
}

TEST_CASE("realify preserves affine entries and rejects bad diagonals") {
  HermitianBlock h;
  h.dim = 2;
  AffExpr re;
  re.add(0, 1.0);
  AffExpr im;
  im.add(1, 2.0).add_const(0.5);
  h.entries.push_back({0, 1, re, im});
  PsdBlock b = realify_psd_block(h);
  // Expect slots (0,1)=re, (2,3)=re, (0,3)=-im, (1,2)=+im.
  REQUIRE(b.entries.size() == 4);
  const std::vector<double> x{3.0, 1.0};
  auto at = [&](int r, int c) -> double {
    for (const PsdEntry& e : b.entries)
      if (e.row == r && e.col == c) return e.expr.eval(x);
    FAIL("missing slot");
    return 0;
  };
  CHECK(at(0, 1) == doctest::Approx(3.0));
  CHECK(at(2, 3) == doctest::Approx(3.0));
  CHECK(at(0, 3) == doctest::Approx(-2.5));
  CHECK(at(1, 2) == doctest::Approx(2.5));

  SUBCASE("nonzero diagonal imaginary part") {
    HermitianBlock bad;
    bad.dim = 1;
    bad.entries.push_back({0, 0, constant(1.0), constant(0.1)});
    CHECK_THROWS_AS(realify_psd_block(bad), ProgramError);
  }
  SUBCASE("lower-triangle entry") {
    HermitianBlock bad;
    bad.dim = 2;
    bad.entries.push_back({1, 0, constant(1.0), {}});
    CHECK_THROWS_AS(realify_psd_block(bad), ProgramError);
  }
}

TEST_CASE("validate rejects malformed programs") {
  ConicProgram p;
  const int x = p.new_var("x");
  p.objective.add(x, 1.0);
  p.ineq.push_back({AffExpr{}.add(x, 1.0).add_const(-3.0), "x lower bound"});
  p.validate();

  SUBCASE("unreferenced variable") {
    p.new_var("orphan");
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("orphan"), ProgramError);
  }
  SUBCASE("out-of-range variable id") {
    p.eq.push_back({AffExpr{}.add(12, 1.0), "bad"});
    CHECK_THROWS_AS(p.validate(), ProgramError);
  }
  SUBCASE("unsorted terms") {
    AffExpr e;
    e.terms = {{1, 1.0}, {0, 1.0}};  // bypasses add()
    p.new_var("y");
    p.eq.push_back({e, "bad"});
    CHECK_THROWS_AS(p.validate(), ProgramError);
  }
  SUBCASE("psd entry below the diagonal") {
    PsdBlock b;
    b.dim = 2;
    b.entries.push_back({1, 0, AffExpr{}.add(x, 1.0)});
    p.psd_blocks.push_back(b);
    CHECK_THROWS_AS(p.validate(), ProgramError);
  }
  SUBCASE("undersized cone") {
    p.cones.push_back({ConeClass::rsoc, {constant(1.0), constant(1.0)}, "short"});
    CHECK_THROWS_AS(p.validate(), ProgramError);
  }
}

namespace {

ConicProgram make_full_featured() {
  ConicProgram p;
  const int a = p.new_var("w[0][0]");
  const int b = p.new_var("w[0][1].re");
  const int c = p.new_var("w[0][1].im");
  const int t = p.new_var("epigraph t");
  p.objective.add(t, 1.0).add(a, 0.25).add_const(-1.5);
  p.eq.push_back({AffExpr{}.add(a, 1.0).add(b, -2.0).add_const(0.5), "p-balance bus 1"});
  p.ineq.push_back({AffExpr{}.add(a, -1.0).add_const(1.21), "vmax bus 1"});
  p.cones.push_back(
      {ConeClass::soc, {constant(2.0), AffExpr{}.add(b, 1.0), AffExpr{}.add(c, 1.0)},
       "flow limit line 1-2"});
  p.cones.push_back({ConeClass::rsoc,
                     {AffExpr{}.add(t, 1.0), constant(0.5), AffExpr{}.add(a, 0.3)},
                     "cost epigraph gen 1"});
  HermitianBlock h;
  h.dim = 2;
  h.entries.push_back({0, 0, AffExpr{}.add(a, 1.0), {}});
  h.entries.push_back({0, 1, AffExpr{}.add(b, 1.0), AffExpr{}.add(c, 1.0)});
  h.entries.push_back({1, 1, constant(1.0), {}});
  h.tag = "psd block bus pair (0,1)";
  PsdBlock blk = realify_psd_block(h);
  blk.complex_structure = PsdBlock::ComplexStructure{2, {{0, 0, a, -1}, {0, 1, b, c}}};
  p.psd_blocks.push_back(std::move(blk));
  p.validate();
  return p;
}

}  // namespace

TEST_CASE("benchmark format round-trips byte-identically") {
  ConicProgram p = make_full_featured();
  std::ostringstream first;
  write_conic_benchmark(p, first);
  std::istringstream input(first.str());
  ConicProgram q = read_conic_benchmark(input);
  std::ostringstream second;
  write_conic_benchmark(q, second);
  CHECK(first.str() == second.str());
  CHECK(program_fingerprint(p) == program_fingerprint(q));
  CHECK(q.eq[0].tag == "p-balance bus 1");
  CHECK(q.cones[1].kind == ConeClass::rsoc);
  REQUIRE(q.psd_blocks[0].complex_structure.has_value());
  CHECK(q.psd_blocks[0].complex_structure->pairs[1].im_var == 2);
  CHECK(q.vars[3].name == "epigraph t");
}

TEST_CASE("benchmark reader flags corrupt streams") {
  std::istringstream junk("hello world\n");
  CHECK_THROWS_AS(read_conic_benchmark(junk), ProgramError);

  ConicProgram p = make_full_featured();
  std::ostringstream os;
  write_conic_benchmark(p, os);
  std::string text = os.str();
  text.replace(text.find("CONE soc 3"), 10, "CONE arc 3");
  std::istringstream bad(text);
  CHECK_THROWS_WITH_AS(read_conic_benchmark(bad), doctest::Contains("arc"), ProgramError);
}

TEST_CASE("fingerprint tracks content") {
  ConicProgram p = make_full_featured();
  ConicProgram q = make_full_featured();
  CHECK(program_fingerprint(p) == program_fingerprint(q));
  q.ineq[0].expr.add_const(1e-9);
  CHECK(program_fingerprint(p) != program_fingerprint(q));
}
