#include "doctest.h"
#include "random_expr.hpp"

#include "sode/errors.hpp"
#include "sode/expr.hpp"
#include "sode/zero_test.hpp"

#include <cmath>
#include <cstring>

using namespace sode;

namespace {

Expression P(const char* s) { return parse(s); }

bool same(const Expression& a, const Expression& b) { return normalize(a - b).is_literal_zero(); }

SamplingBox unit_box(std::vector<std::string> names) {
  SamplingBox b;
  b.names = std::move(names);
  b.lo.assign(b.names.size(), -1.0);
  b.hi.assign(b.names.size(), 1.0);
  return b;
}

}  // namespace

TEST_CASE("parse builds the expected trees") {
  Expression e = P("y^2 + x*y");
  REQUIRE(e.kind() == Expression::Kind::Sum);
  REQUIRE(e.children().size() == 2);
  CHECK(e.children()[0].kind() == Expression::Kind::Power);
  CHECK(e.children()[0].exponent() == 2);
  CHECK(e.children()[1].kind() == Expression::Kind::Product);

  Expression f = P("exp(x)*sin(y)");
  REQUIRE(f.kind() == Expression::Kind::Product);
  CHECK(f.children()[0].function_kind() == FunctionKind::Exp);
  CHECK(f.children()[1].function_kind() == FunctionKind::Sin);

  CHECK(same(P("sqrt(x)^2"), P("x")));
  CHECK(same(P("0.25*x"), P("x/4")));
  CHECK(same(P("1.5e2"), P("150")));
  CHECK(same(P("-x^2"), P("-(x^2)")));
  CHECK(same(P("2^3^2"), P("512")));
  CHECK(same(P("x^-1"), P("1/x")));
}

TEST_CASE("parse errors carry a location") {
  CHECK_THROWS_AS(P("y^(1/0)"), ParseError);
  CHECK_THROWS_AS(P("x^y"), ParseError);
  CHECK_THROWS_AS(P("x +"), ParseError);
  CHECK_THROWS_AS(P("foo(x)"), ParseError);
  CHECK_THROWS_AS(P("(x"), ParseError);
  try {
    P("x +\n  * y");
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(err.line() == 2);
    CHECK(err.column() == 3);
  }
}

TEST_CASE("differentiate") {
  CHECK(same(differentiate(P("y^2 + x*y"), "y"), P("2*y + x")));
  CHECK(same(differentiate(P("exp(x)*y"), "x"), P("exp(x)*y")));
  CHECK(same(differentiate(P("1+y^2"), "y"), P("2*y")));
  CHECK(same(differentiate(P("log(1+x^2)"), "x"), P("2*x/(1+x^2)")));
  CHECK(same(differentiate(P("sin(x)*cos(x)"), "x"), P("cos(x)^2 - sin(x)^2")));
  CHECK(same(differentiate(P("sqrt(1+x^2)"), "x"), P("x/sqrt(1+x^2)")));
  CHECK(same(differentiate(P("1/(1+y^2)"), "y"), P("-2*y/(1+y^2)^2")));
  CHECK(differentiate(P("x^3"), "y").is_literal_zero());
}

TEST_CASE("normalize reaches canonical forms") {
  CHECK(normalize(P("(x+y)^2 - x^2 - 2*x*y - y^2")).is_literal_zero());
  CHECK(normalize(P("x*y - y*x")).is_literal_zero());
  CHECK(normalize(P("exp(x)*exp(x)")) == normalize(P("exp(x)^2")));
  CHECK(normalize(P("(x^2-1)/(x-1) - x - 1")).is_literal_zero());
  CHECK(normalize(P("sin(x)^2 + cos(x)^2 - 1")).is_literal_zero());
  CHECK(normalize(P("sin(-x) + sin(x)")).is_literal_zero());
  CHECK(normalize(P("cos(-x) - cos(x)")).is_literal_zero());
  CHECK(normalize(P("log(exp(x+y)) - x - y")).is_literal_zero());
  CHECK(normalize(P("exp(0) + log(1) - 1")).is_literal_zero());
  CHECK(normalize(P("1/(1+y^2) - 1/(1+y^2)")).is_literal_zero());
  CHECK(normalize(P("sqrt(4)")) == Expression(2));
  CHECK(normalize(P("x/(x*y) - 1/y")).is_literal_zero());
}

TEST_CASE("evaluate") {
  CHECK(evaluate(P("y^2+x*y"), {{"x", 1.0}, {"y", 2.0}}) == 6.0);
  CHECK(evaluate(P("1/(1+y^2)"), {{"y", 0.0}}) == 1.0);
  CHECK_THROWS_AS(evaluate(P("1/x"), {{"x", 0.0}}), DomainError);
  CHECK_THROWS_AS(evaluate(P("log(x)"), {{"x", -1.0}}), DomainError);
  CHECK_THROWS_AS(evaluate(P("x+y"), {{"x", 0.0}}), MissingSymbolError);
  try {
    evaluate(P("2 + 1/x"), {{"x", 0.0}});
  } catch (const DomainError& err) {
    CHECK(err.subtree() == "1/x");
  }
  CHECK(evaluate(P("(-8)^(1/3)"), {}) == doctest::Approx(-2.0));
  CHECK(evaluate(P("x^(2/3)"), {{"x", -8.0}}) == doctest::Approx(4.0));
}

TEST_CASE("is_zero verdicts") {
  auto box = unit_box({"x", "y"});
  CHECK(is_zero(P("(x+y)^2 - x^2 - 2*x*y - y^2"), box).zero());

  SamplingBox b01 = unit_box({"x", "y"});
  b01.lo = {0, 0};
  ZeroTestOptions opt;
  opt.trials = 32;
  auto v = is_zero(P("x - y"), b01, opt);
  REQUIRE(v.nonzero());
  REQUIRE(v.witness.size() == 2);
  CHECK(v.witness[0] != v.witness[1]);

  CHECK(is_zero(P("sin(x)^2 + cos(x)^2 - 1"), box).zero_or_unknown());
  // Transcendental identity that is not structurally visible.
  auto t = is_zero(P("exp(2*x) - exp(x)^2"), box);
  CHECK(t.kind == ZeroVerdict::Kind::Unknown);
  CHECK(t.max_relative_residual < 1e-12);
  // Every trial hits a domain error.
  auto d = is_zero(P("log(-1-x^2) + x"), box);
  CHECK(d.kind == ZeroVerdict::Kind::Unknown);
  CHECK(!d.diagnostic.empty());
}

TEST_CASE("is_zero is deterministic per seed") {
  auto box = unit_box({"x", "y"});
  ZeroTestOptions opt;
  opt.seed = 7;
  auto a = is_zero(P("x*y - 1/3"), box, opt);
  auto b = is_zero(P("x*y - 1/3"), box, opt);
  REQUIRE(a.nonzero());
  CHECK(a.witness == b.witness);
}

TEST_CASE("property: derivative matches central differences") {
  std::vector<std::string> names{"x", "y", "z"};
  testing::ExprGen gen(names, 11);
  for (int iter = 0; iter < 100; ++iter) {
    Expression e = gen.polynomial(4);
    auto p = gen.point(-1.0, 1.0);
    for (const auto& s : names) {
      Expression d = differentiate(e, s);
      auto a = testing::assign(names, p);
      double exact = evaluate(d, a);
      const double h = 1e-6;
      auto ap = a;
      auto am = a;
      ap[s] += h;
      am[s] -= h;
      double fd = (evaluate(e, ap) - evaluate(e, am)) / (2 * h);
      double scale = std::max({1.0, std::abs(exact), std::abs(evaluate(e, a))});
      CHECK(std::abs(exact - fd) <= 1e-6 * scale);
    }
  }
}

TEST_CASE("property: normalize is a semantic no-op") {
  std::vector<std::string> names{"x", "y"};
  testing::ExprGen gen(names, 23);
  int checked = 0;
  for (int iter = 0; iter < 100; ++iter) {
    Expression e = gen.general(4);
    Expression n = normalize(e);
    auto a = testing::assign(names, gen.point(-1.0, 1.0));
    double ve = evaluate(e, a);
    double vn = evaluate(n, a);
    CHECK(std::abs(ve - vn) <= 1e-12 * std::max(1.0, std::abs(ve)));
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("property: normalize is idempotent through its spelling") {
  std::vector<std::string> names{"x", "y"};
  testing::ExprGen gen(names, 5);
  for (int iter = 0; iter < 100; ++iter) {
    Expression e = gen.general(3);
    Expression once = normalize(e);
    Expression reparsed = parse(to_string(once));
    CHECK(to_string(normalize(reparsed)) == to_string(once));
    CHECK(normalize(once) == once);
  }
}

TEST_CASE("property: printed form parses back to the same value") {
  std::vector<std::string> names{"x", "y"};
  testing::ExprGen gen(names, 99);
  for (int iter = 0; iter < 100; ++iter) {
    Expression e = gen.general(4);
    auto a = testing::assign(names, gen.point(-1.0, 1.0));
    double v1 = evaluate(e, a);
    double v2 = evaluate(parse(to_string(e)), a);
    CHECK(std::abs(v1 - v2) <= 1e-12 * std::max(1.0, std::abs(v1)));
  }
}

TEST_CASE("property: evaluation is bitwise deterministic") {
  std::vector<std::string> names{"x", "y"};
  testing::ExprGen gen(names, 3);
  for (int iter = 0; iter < 50; ++iter) {
    Expression e = gen.general(4);
    auto a = testing::assign(names, gen.point(-1.0, 1.0));
    double v1 = evaluate(e, a);
    double v2 = evaluate(e, a);
    CHECK(std::memcmp(&v1, &v2, sizeof v1) == 0);
  }
}

TEST_CASE("property: Zero verdicts never contradict a witness") {
  std::vector<std::string> names{"x", "y"};
  testing::ExprGen gen(names, 41);
  auto box = unit_box(names);
  for (int iter = 0; iter < 60; ++iter) {
    Expression a = gen.general(3);
    Expression b = iter % 2 ? a : gen.general(3);
    auto v = is_zero(a - b, box);
    if (v.zero()) {
      for (const auto& p : sample_points(box, 16, 9)) {
        double r = evaluate(a - b, testing::assign(names, p));
        CHECK(std::abs(r) < 1e-9);
      }
    }
    if (iter % 2) {
      CHECK(v.zero());
    }
  }
}
