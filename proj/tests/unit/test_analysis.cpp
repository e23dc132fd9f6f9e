#include "doctest.h"
#include "random_expr.hpp"

#include "sode/analysis.hpp"
#include "sode/errors.hpp"

#include <cmath>

using namespace sode;

namespace {

ChartPtr chart(std::vector<std::string> names, double lo = -1.0, double hi = 1.0) {
  std::vector<double> l(names.size(), lo), h(names.size(), hi);
  return std::make_shared<Chart>(names, l, h, 1);
}

VectorField field(const ChartPtr& c, std::vector<std::string> comps) {
  std::vector<Expression> e;
  for (const auto& s : comps) e.push_back(parse(s));
  return VectorField(c, e);
}

bool vanishes(const Expression& e, const SamplingBox& box) { return is_zero(e, box).zero_or_unknown(); }

bool same(const VectorField& a, const VectorField& b) {
  auto d = a - b;
  for (const auto& c : d.components()) {
    if (!vanishes(c, a.chart()->box())) return false;
  }
  return true;
}

// F = y d/dx + f(x,y) d/dy with V = {d/dy}.
SecondOrderProblem natural(const std::string& f, const ChartPtr& c = chart({"x", "y"})) {
  return SecondOrderProblem(c, field(c, {"y", f}), Frame(c, {field(c, {"0", "1"})}));
}

}  // namespace

TEST_CASE("regularity") {
  CHECK(check_regularity(natural("x*y^2 - x")).pass);
  auto c = chart({"x", "y"});
  SecondOrderProblem bad(c, field(c, {"x", "0"}), Frame(c, {field(c, {"0", "1"})}));
  auto r = check_regularity(bad);
  CHECK_FALSE(r.pass);
  CHECK_FALSE(r.rank.deficient_points.empty());
  auto rep = classify(bad);
  CHECK(rep.classification == AnalysisReport::Case::NotSecondOrder);
  CHECK(rep.reason == "regularity");
}

TEST_CASE("problem validation") {
  auto c = chart({"x", "y", "z"});
  CHECK_THROWS_AS(SecondOrderProblem(c, field(c, {"1", "0", "0"}), Frame(c, {field(c, {"0", "1", "0"}), field(c, {"0", "0", "1"})})),
                  InputError);
  CHECK_THROWS_AS(SecondOrderProblem(c, field(c, {"1", "0", "0"}), Frame(c, {field(c, {"1", "0", "0"}), field(c, {"0", "1", "x"})})),
                  InputError);
}

TEST_CASE("W and beta for a natural field") {
  const std::string f = "x*y^3 + sin(x)*y";
  auto p = natural(f);
  auto ef = build_W(p);
  Expression fe = parse(f);
  Expression fy = differentiate(fe, "y");
  CHECK(same(ef.W[0], VectorField(p.chart(), {Expression(-1), -fy})));
  auto b = beta_coefficients(ef);
  // [d/dy, -d/dx - f_y d/dy] = -f_yy d/dy
  CHECK(vanishes(b.alpha[0][0][0] + differentiate(fy, "y"), ef.box()));
  CHECK(b.beta[0][0][0].is_literal_zero());
  CHECK(b.all_beta_zero);
  CHECK(verify_beta_integrability(ef, b).passed());
  auto a = adapt_commuting_basis(ef, b);
  CHECK(a.method == BasisAdaptation::Method::Identity);
  CHECK(a.verification.passed());
}

TEST_CASE("rescaled basis: beta = 2y and its adaptation") {
  auto c = chart({"x", "y"});
  SecondOrderProblem p(c, field(c, {"y", "0"}), Frame(c, {field(c, {"0", "1 + y^2"})}));
  auto ef = build_W(p);
  CHECK_FALSE(ef.adapted);
  auto b = beta_coefficients(ef);
  CHECK(vanishes(b.beta[0][0][0] - parse("2*y"), ef.box()));
  CHECK(vanishes(b.alpha[0][0][0], ef.box()));
  CHECK(verify_beta_integrability(ef, b).passed());

  auto a = adapt_commuting_basis(ef, b);
  REQUIRE(a.method == BasisAdaptation::Method::Symbolic);
  CHECK(vanishes(a.A[0][0] - parse("1/(1 + y^2)"), ef.box()));
  REQUIRE(a.adapted);
  CHECK(same(a.adapted->V[0], field(c, {"0", "1"})));
  CHECK(a.adapted->adapted);

  // Vertical connection carries beta: nabla_V V = +beta V.
  auto nv = vertical_connection(ef, 0, 0);
  REQUIRE(nv.ok);
  CHECK(same(nv.field, parse("2*y") * ef.V[0]));
}

TEST_CASE("rescaled basis off the origin normalizes at the box centre") {
  auto c = std::make_shared<Chart>(std::vector<std::string>{"x", "y"}, std::vector<double>{-1, 1}, std::vector<double>{1, 3});
  SecondOrderProblem p(c, field(c, {"y", "0"}), Frame(c, {field(c, {"0", "y"})}));
  auto ef = build_W(p);
  auto b = beta_coefficients(ef);
  auto a = adapt_commuting_basis(ef, b);
  REQUIRE(a.method == BasisAdaptation::Method::Symbolic);
  // y A' + A = 0, A(2) = 1
  CHECK(vanishes(a.A[0][0] - parse("2/y"), ef.box()));
}

TEST_CASE("S on a natural field") {
  const std::string f = "x*y^2 + (1 + x^2)*y - x";
  auto p = natural(f);
  auto ef = build_W(p);
  auto sv = apply_S(ef, ef.V[0]);
  auto sw = apply_S(ef, ef.W[0]);
  auto sf = apply_S(ef, p.F());
  REQUIRE(sv.ok);
  REQUIRE(sw.ok);
  REQUIRE(sf.ok);
  CHECK(same(sv.field, VectorField::zero(p.chart())));
  CHECK(same(sw.field, -ef.V[0]));
  CHECK(same(sf.field, field(p.chart(), {"0", "y"})));
  CHECK(nijenhuis_check(ef).passed());

  auto c3 = chart({"x", "y", "z"});
  SecondOrderProblem p3(c3, field(c3, {"y", "x", "0"}), Frame(c3, {field(c3, {"0", "1", "0"})}));
  auto ef3 = build_W(p3);
  auto out = apply_S(ef3, field(c3, {"0", "0", "1"}));
  CHECK_FALSE(out.ok);
  CHECK(out.witness.size() == 3);
}

TEST_CASE("projectors and horizontal lift for a natural field") {
  const std::string f = "x^2*y^3 - cos(x)*y + x";
  auto p = natural(f);
  auto ef = build_W(p);
  Expression fy = differentiate(parse(f), "y");
  Expression half(Number(Rational(1, 2)));
  VectorField expected_h(p.chart(), {Expression(1), half * fy});

  auto ph = apply_PH(ef, ef.W[0]);
  REQUIRE(ph.ok);
  CHECK(same(ph.field, -expected_h));
  auto lfs = lie_derivative_S(ef, ef.W[0]);
  REQUIRE(lfs.ok);
  CHECK(same(lfs.field, -ef.W[0] - fy * ef.V[0]));
  auto lfs2 = lie_derivative_S(ef, lfs.field);
  REQUIRE(lfs2.ok);
  CHECK(same(lfs2.field, ef.W[0]));

  auto P = projectors(ef);
  CHECK(P.F_preserves_W.passed());
  CHECK(P.involution.passed());
  CHECK(P.complementary.passed());
  CHECK(P.idempotent.passed());
  CHECK(P.vertical.passed());
  CHECK(same(P.PV[0], ef.V[0]));
  CHECK(same(P.PH[0], VectorField::zero(p.chart())));

  auto L = horizontal_lift(ef);
  CHECK(L.verification.passed());
  CHECK(same(L.h[0], expected_h));

  auto flat = natural("0");
  auto Lf = horizontal_lift(build_W(flat));
  CHECK(same(Lf.h[0], field(flat.chart(), {"1", "0"})));
}

TEST_CASE("connection coefficients match the Berwald formulas") {
  const std::string f = "x*y^3 + exp(x/4)*y^2 - y + x^2";
  auto p = natural(f);
  auto ef = build_W(p);
  auto L = horizontal_lift(ef);
  auto C = connection_data(ef, L);
  Expression fe = parse(f);
  Expression half(Number(Rational(1, 2)));
  Expression fy = differentiate(fe, "y");
  CHECK(vanishes(C.gamma1[0][0] + half * fy, ef.box()));
  CHECK(vanishes(C.gamma2[0][0][0] + half * differentiate(fy, "y"), ef.box()));
  CHECK(C.torsion_symmetric.passed());
  CHECK(C.torsion_free.passed());
  CHECK_FALSE(C.sign_convention.empty());
}

TEST_CASE("mixed curvature: quadratic force vanishes, cubic does not") {
  auto q = natural("x*y^2 + (1 + x^2)*y - x");
  auto efq = build_W(q);
  auto Lq = horizontal_lift(efq);
  auto vq = quadratic_test(efq, mixed_curvature(efq, Lq));
  CHECK(vq.kind == QuadraticVerdict::Kind::Quadratic);

  auto cu = natural("y^3");
  auto efc = build_W(cu);
  auto Lc = horizontal_lift(efc);
  auto th = mixed_curvature(efc, Lc);
  // For a one-dimensional natural field theta = f_yyy / 2.
  CHECK(vanishes(th.theta[0][0][0][0] - Expression(3), efc.box()));
  auto vc = quadratic_test(efc, th);
  CHECK(vc.kind == QuadraticVerdict::Kind::NotQuadratic);
  CHECK(vc.check.witness.size() == 2);
  CHECK(vc.witness_magnitude == doctest::Approx(3.0));

  auto flat = natural("0");
  auto eff = build_W(flat);
  CHECK(quadratic_test(eff, mixed_curvature(eff, horizontal_lift(eff))).kind == QuadraticVerdict::Kind::Quadratic);
}

TEST_CASE("theta = f_yyy/2 on random natural forces") {
  testing::ExprGen gen({"x", "y"}, 41);
  Expression half(Number(Rational(1, 2)));
  for (int iter = 0; iter < 6; ++iter) {
    Expression f = gen.polynomial(3);
    auto c = chart({"x", "y"});
    SecondOrderProblem p(c, VectorField(c, {parse("y"), f}), Frame(c, {field(c, {"0", "1"})}));
    auto ef = build_W(p);
    auto th = mixed_curvature(ef, horizontal_lift(ef));
    Expression oracle = half * differentiate(differentiate(differentiate(f, "y"), "y"), "y");
    CHECK(vanishes(th.theta[0][0][0][0] - oracle, ef.box()));
  }
}

TEST_CASE("W not involutive on R^4") {
  auto c = chart({"x", "y", "a", "b"});
  SecondOrderProblem p(c, field(c, {"y", "0", "y^2/2", "0"}), Frame(c, {field(c, {"0", "1", "0", "0"})}));
  CHECK(check_regularity(p).pass);
  auto ef = build_W(p);
  auto v = check_W_involutive(ef);
  CHECK_FALSE(v.involutive);
  CHECK(v.witness.size() == 4);
  // Independent oracle: [d/dy, -d/dx - y d/da] = -d/da is outside span{d/dy, W}.
  VectorField bracket = lie_bracket(ef.V[0], ef.W[0]);
  CHECK(same(bracket, field(c, {"0", "0", "-1", "0"})));
  std::vector<VectorField> three{ef.V[0], ef.W[0], bracket};
  CHECK(frame_rank(three, 16, 1).claimed_rank == 3);
  auto rep = classify(p);
  CHECK(rep.classification == AnalysisReport::Case::NotSecondOrder);
}

TEST_CASE("classify scrambled oscillator") {
  auto c = chart({"z1", "z2"});
  SecondOrderProblem p(c, field(c, {"z2 - z1^2", "-z1 + 2*z1*(z2 - z1^2)"}), Frame(c, {field(c, {"0", "1"})}));
  auto rep = classify(p);
  CHECK(rep.classification == AnalysisReport::Case::Case1);
  CHECK(rep.parameters == 0);
  REQUIRE(rep.cross_section);
  REQUIRE(rep.cross_section->found);
  for (const auto& z : rep.cross_section->all_points) CHECK(z[1] == doctest::Approx(z[0] * z[0]).epsilon(1e-8));
  REQUIRE(rep.quadratic);
  CHECK(rep.quadratic->kind == QuadraticVerdict::Kind::Quadratic);
  for (const auto& chk : rep.identity_checks()) {
    INFO(chk.name);
    CHECK(chk.passed());
  }
  CHECK(rep.warnings.empty());
}

TEST_CASE("classify scrambled time-dependent instance") {
  auto c = chart({"z1", "z2", "z3"});
  SecondOrderProblem p(c,
                       field(c, {"1", "z3 - (z2 - z1^2)^2 + 2*z1",
                                 "-(z2 - z1^2) + z1 + 2*(z2 - z1^2)*(z3 - (z2 - z1^2)^2)"}),
                       Frame(c, {field(c, {"0", "0", "1"})}));
  auto rep = classify(p);
  CHECK(rep.classification == AnalysisReport::Case::Case2);
  CHECK(rep.parameters == 0);
  REQUIRE(rep.F_preserves_W);
  CHECK(rep.F_preserves_W->passed());
  REQUIRE(rep.quadratic);
  CHECK(rep.quadratic->kind == QuadraticVerdict::Kind::Quadratic);
}

TEST_CASE("classify Routh reduction") {
  auto c = chart({"x1", "x2", "v1", "v2", "mu"});
  SecondOrderProblem p(c, field(c, {"v1", "v2", "mu*v2", "-mu*v1", "0"}),
                       Frame(c, {field(c, {"0", "0", "1", "0", "0"}), field(c, {"0", "0", "0", "1", "0"})}));
  CHECK(check_regularity(p).pass);
  auto rep = classify(p);
  CHECK(rep.classification == AnalysisReport::Case::Case1);
  CHECK(rep.parameters == 1);
  REQUIRE(rep.adaptation);
  CHECK(rep.adaptation->method == BasisAdaptation::Method::Identity);
  REQUIRE(rep.quadratic);
  CHECK(rep.quadratic->kind == QuadraticVerdict::Kind::Quadratic);
  for (const auto& chk : rep.identity_checks()) {
    INFO(chk.name);
    CHECK(chk.passed());
  }
  // h(d/dv^i) = d/dx^i - Gamma^j_i d/dv^j with Gamma^j_i = -1/2 dF^j/dv^i.
  REQUIRE(rep.lifts);
  CHECK(same(rep.lifts->h[0], field(c, {"1", "0", "0", "-mu/2", "0"})));
  CHECK(same(rep.lifts->h[1], field(c, {"0", "1", "mu/2", "0", "0"})));
}

TEST_CASE("property: beta transformation law reproduces direct computation") {
  auto c = chart({"x1", "x2", "y1", "y2"});
  auto F = field(c, {"y1", "y2", "x1*y2^2 + y1*y2", "x2*y1^3 - x1"});
  std::vector<VectorField> V{field(c, {"0", "0", "1", "0"}), field(c, {"0", "0", "0", "1"})};
  AnalysisOptions opts;
  auto ef = build_W(c, F, V, opts);
  auto b = beta_coefficients(ef);
  testing::ExprGen gen({"x1", "x2", "y1", "y2"}, 5);
  for (int iter = 0; iter < 3; ++iter) {
    std::vector<std::vector<Expression>> A{{Expression(2) + gen.polynomial(1) * Expression(Rational(1, 8)), gen.polynomial(1)},
                                           {Expression(0), Expression(1)}};
    std::vector<VectorField> Vt{A[0][0] * V[0] + A[0][1] * V[1], A[1][0] * V[0] + A[1][1] * V[1]};
    auto eft = build_W(c, F, Vt, opts);
    auto direct = beta_coefficients(eft);
    auto law = transform_beta(ef, b, A);
    for (std::size_t p = 0; p < 2; ++p) {
      for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) CHECK(vanishes(law[p][i][j] - direct.beta[p][i][j], ef.box()));
      }
    }
  }
}

TEST_CASE("property: connection Leibniz rules") {
  auto p = natural("x*y^3 + y^2 - x");
  auto ef = build_W(p);
  auto L = horizontal_lift(ef);
  testing::ExprGen gen({"x", "y"}, 9);
  for (int iter = 0; iter < 5; ++iter) {
    Expression f = gen.polynomial(2);
    for (const VectorField& X : {L.h[0], ef.V[0], ef.W[0]}) {
      auto base = extended_connection(ef, L, X, ef.V[0]);
      auto scaled_dir = extended_connection(ef, L, f * X, ef.V[0]);
      auto scaled_arg = extended_connection(ef, L, X, f * ef.V[0]);
      REQUIRE(base.ok);
      REQUIRE(scaled_dir.ok);
      REQUIRE(scaled_arg.ok);
      CHECK(same(scaled_dir.field, f * base.field));
      CHECK(same(scaled_arg.field, f * base.field + X.apply(f) * ef.V[0]));
    }
    // Along vertical directions the extended connection agrees with -S[V, W].
    auto v = vertical_connection(ef, 0, 0);
    auto e = extended_connection(ef, L, ef.V[0], ef.V[0]);
    REQUIRE(v.ok);
    REQUIRE(e.ok);
    CHECK(same(v.field, e.field));
  }
}

TEST_CASE("property: classification is invariant under polynomial changes of chart") {
  // u d/dx - x d/du in (x, u), then in z2 = u + x^2; and a cubic variant.
  auto c = chart({"z1", "z2"});
  auto verdict = [&](const std::string& f1, const std::string& f2) {
    SecondOrderProblem p(c, field(c, {f1, f2}), Frame(c, {field(c, {"0", "1"})}));
    auto rep = classify(p);
    return std::make_pair(rep.classification, rep.quadratic ? rep.quadratic->kind : QuadraticVerdict::Kind::Inconclusive);
  };
  CHECK(verdict("z2", "-z1") == verdict("z2 - z1^2", "-z1 + 2*z1*(z2 - z1^2)"));
  CHECK(verdict("z2", "z2^3") == verdict("z2 - z1^2", "(z2 - z1^2)^3 + 2*z1*(z2 - z1^2)"));
  CHECK(verdict("z2", "z2^3").second == QuadraticVerdict::Kind::NotQuadratic);
}
