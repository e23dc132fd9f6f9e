#include "doctest.h"

#include "sode/errors.hpp"
#include "sode/straighten.hpp"

#include <cmath>
#include <numbers>

using namespace sode;

namespace {

ChartPtr box_chart(std::vector<std::string> names, std::vector<double> lo, std::vector<double> hi) {
  return std::make_shared<Chart>(names, lo, hi, 1);
}

ChartPtr chart(std::vector<std::string> names, double lo = -1.0, double hi = 1.0) {
  return box_chart(names, std::vector<double>(names.size(), lo), std::vector<double>(names.size(), hi));
}

VectorField field(const ChartPtr& c, std::vector<std::string> comps) {
  std::vector<Expression> e;
  for (const auto& s : comps) e.push_back(parse(s));
  return VectorField(c, e);
}

SecondOrderProblem oscillator() {
  auto c = chart({"z1", "z2"});
  return SecondOrderProblem(c, field(c, {"z2 - z1^2", "-z1 + 2*z1*(z2 - z1^2)"}), Frame(c, {field(c, {"0", "1"})}));
}

SecondOrderProblem timedep() {
  auto c = chart({"z1", "z2", "z3"});
  return SecondOrderProblem(
      c, field(c, {"1", "z3 - (z2 - z1^2)^2 + 2*z1", "-(z2 - z1^2) + z1 + 2*(z2 - z1^2)*(z3 - (z2 - z1^2)^2)"}),
      Frame(c, {field(c, {"0", "0", "1"})}));
}

SecondOrderProblem routh() {
  auto c = chart({"x1", "x2", "v1", "v2", "mu"});
  return SecondOrderProblem(c, field(c, {"v1", "v2", "mu*v2", "-mu*v1", "0"}),
                            Frame(c, {field(c, {"0", "0", "1", "0", "0"}), field(c, {"0", "0", "0", "1", "0"})}));
}

}  // namespace

TEST_CASE("integrate_flow examples") {
  auto c = chart({"x", "y"}, -2, 2);
  std::vector<double> origin{0, 0};
  auto a = integrate_flow(field(c, {"1", "0"}), origin, 1.0);
  CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(a[1]) < 1e-14);

  auto rot = field(c, {"y", "-x"});
  std::vector<double> p{1, 0};
  auto b = integrate_flow(rot, p, std::numbers::pi / 2);
  CHECK(std::abs(b[0]) < 1e-8);
  CHECK(std::abs(b[1] + 1.0) < 1e-8);

  FlowMap flow(field(c, {"x*y + 1", "sin(x) - y^2/2"}));
  std::vector<double> z{0.3, -0.2};
  auto there = flow(z, 0.7);
  auto back = flow(there, -0.7);
  CHECK(std::abs(back[0] - z[0]) < 1e-8);
  CHECK(std::abs(back[1] - z[1]) < 1e-8);
}

TEST_CASE("property: flow group law and variational Jacobian") {
  auto c = chart({"x", "y", "w"}, -2, 2);
  for (const auto& X : {field(c, {"y", "-x + x*w", "1/(2 + x^2)"}), field(c, {"cos(w)", "x*y", "-w/3"})}) {
    FlowMap flow(X);
    std::vector<double> z{0.2, -0.1, 0.4};
    for (double s : {0.3, -0.5}) {
      for (double t : {0.2, 0.6}) {
        auto lhs = flow(flow(z, t), s);
        auto rhs = flow(z, s + t);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(lhs[i] - rhs[i]) < 1e-9);
      }
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Identity(3, 3);
    flow.flow(z, 0.8, T);
    const double h = 1e-5;
    for (int c2 = 0; c2 < 3; ++c2) {
      auto zp = z, zm = z;
      zp[c2] += h;
      zm[c2] -= h;
      auto a = flow(zp, 0.8), b = flow(zm, 0.8);
      for (int r = 0; r < 3; ++r) CHECK(std::abs((a[r] - b[r]) / (2 * h) - T(r, c2)) < 1e-5);
    }
  }
}

TEST_CASE("flow errors report the last valid point") {
  auto c = chart({"x", "y"});
  FlowMap flow(field(c, {"1", "0"}));
  std::vector<double> z{0, 0};
  try {
    flow(z, 5.0);
    FAIL("expected a box exit");
  } catch (const NumericError& e) {
    REQUIRE(e.last_point().size() == 2);
    CHECK(e.last_point()[0] <= 2.0);
  }
  FlowMap blowup(field(c, {"-1/x", "0"}));
  std::vector<double> near{-0.1, 0};
  CHECK_THROWS_AS(blowup(near, 1.0), NumericError);
}

TEST_CASE("solve_basis_ode matches the closed form for the rescaled basis") {
  auto c = chart({"x", "y"});
  SecondOrderProblem p(c, field(c, {"y", "0"}), Frame(c, {field(c, {"0", "1 + y^2"})}));
  auto ef = build_W(p);
  auto b = beta_coefficients(ef);
  auto sol = solve_basis_ode(ef, b);
  for (double sigma : {-0.7, -0.2, 0.1, 0.5, 0.75}) {
    std::vector<double> section{0.3, 0.0};
    std::vector<double> s{sigma};
    auto v = sol.at(section, s);
    double y = v.point[1];
    CHECK(std::abs(y - std::tan(sigma)) < 1e-8);
    CHECK(std::abs(v.A(0, 0) - 1.0 / (1.0 + y * y)) < 1e-8);
  }
}

TEST_CASE("solve_basis_ode for vanishing beta and two commuting directions") {
  auto p = routh();
  auto ef = build_W(p);
  auto b = beta_coefficients(ef);
  auto sol = solve_basis_ode(ef, b);
  std::vector<double> section{0.1, -0.2, 0.0, 0.0, 0.3};
  std::vector<double> s{0.4, -0.3};
  auto v = sol.at(section, s);
  CHECK((v.A - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(v.path_discrepancy < 1e-7);

  // Both directions rescaled: V1 = (1 + v1^2) d/dv1, V2 = (1 + v2^2) d/dv2.
  auto c = chart({"x1", "x2", "v1", "v2"});
  SecondOrderProblem q(c, field(c, {"v1", "v2", "0", "0"}),
                       Frame(c, {field(c, {"0", "0", "1 + v1^2", "0"}), field(c, {"0", "0", "0", "1 + v2^2"})}));
  auto efq = build_W(q);
  auto bq = beta_coefficients(efq);
  CHECK(verify_beta_integrability(efq, bq).passed());
  auto solq = solve_basis_ode(efq, bq);
  std::vector<double> sec{0.0, 0.0, 0.0, 0.0};
  std::vector<double> sig{0.3, -0.5};
  auto w = solq.at(sec, sig);
  CHECK(w.path_discrepancy < 1e-7);
  CHECK(std::abs(w.A(0, 0) - 1.0 / (1.0 + w.point[2] * w.point[2])) < 1e-8);
  CHECK(std::abs(w.A(1, 1) - 1.0 / (1.0 + w.point[3] * w.point[3])) < 1e-8);
  CHECK(std::abs(w.A(0, 1)) < 1e-10);
}

TEST_CASE("natural field: the constructed chart is a translate of the original") {
  auto c = chart({"x", "y"});
  SecondOrderProblem p(c, field(c, {"y", "x*y^2 - x + y"}), Frame(c, {field(c, {"0", "1"})}));
  auto rep = classify(p);
  REQUIRE(rep.classification == AnalysisReport::Case::Case1);
  StraightenOptions opts;
  opts.grid = 5;
  auto tr = build_normal_coordinates(rep, opts);
  auto res = pushforward_residuals(tr, p.F(), opts);
  CHECK(res.flagged == 0);
  CHECK(res.structural_max < 1e-6);
  const double x0 = tr.base_point()[0];
  for (const auto& node : res.nodes) {
    CHECK(std::abs(node.point[0] - x0 - node.q[0]) < 1e-8);
    CHECK(std::abs(node.ytilde[0] - node.point[1]) < 1e-8);
    double x = node.point[0], y = node.point[1];
    CHECK(std::abs(node.force[0] - (x * y * y - x + y)) < 1e-5);
  }
}

TEST_CASE("scrambled oscillator round trip") {
  auto p = oscillator();
  auto rep = classify(p);
  REQUIRE(rep.classification == AnalysisReport::Case::Case1);
  auto out = straighten(rep);
  const auto& res = out.residuals;
  CHECK(res.grid == 10);
  CHECK(res.nodes.size() == 100);
  CHECK(res.flagged == 0);
  CHECK(res.structural_max < 1e-6);
  CHECK(res.jacobian_agreement.max < 1e-5);
  CHECK(res.fibre_affinity.max < 1e-6);
  CHECK(res.t_residual.count == 100);
  for (const auto& node : res.nodes) {
    // Oracle: z1 = x, z2 = u + x^2, force -x.
    double x = node.point[0], u = node.point[1] - node.point[0] * node.point[0];
    CHECK(std::abs(node.ytilde[0] - u) < 1e-8);
    CHECK(std::abs(node.force[0] + x) < 1e-5);
  }
  CHECK(res.quadratic_fit_residual < 1e-5);
  REQUIRE(res.surrogate);
  CHECK(res.surrogate->agrees);
  CHECK(res.t_residual.max >= res.t_residual.median);
}

TEST_CASE("scrambled time-dependent round trip") {
  auto p = timedep();
  auto rep = classify(p);
  REQUIRE(rep.classification == AnalysisReport::Case::Case2);
  StraightenOptions opts;
  opts.grid = 6;
  auto out = straighten(rep, opts);
  const auto& res = out.residuals;
  CHECK(res.flagged == 0);
  CHECK(res.t_residual.max < 1e-6);
  CHECK(res.structural_max < 1e-6);
  // Oracle: z1 = t, z2 = x + t^2, z3 = u + x^2, force t - x. The chart measures x
  // and u relative to the F-trajectory through the base point, c(t).
  auto natural = [](const std::vector<double>& z) {
    double x = z[1] - z[0] * z[0];
    return std::make_pair(x, z[2] - x * x);
  };
  for (const auto& node : res.nodes) {
    auto [x, u] = natural(node.point);
    std::vector<double> q0{node.q[0], 0.0, 0.0};
    auto [xc, uc] = natural(out.transform.map(q0));
    CHECK(std::abs(node.ytilde[0] - (u - uc)) < 1e-8);
    CHECK(std::abs(node.force[0] + (x - xc)) < 1e-5);
  }
  REQUIRE(res.surrogate);
  CHECK(res.surrogate->agrees);
}

TEST_CASE("rescaled basis straightens through both adaptation paths") {
  auto c = chart({"x", "y"});
  SecondOrderProblem p(c, field(c, {"y", "0"}), Frame(c, {field(c, {"0", "1 + y^2"})}));
  auto rep = classify(p);
  REQUIRE(rep.classification == AnalysisReport::Case::Case1);
  REQUIRE(rep.adaptation);
  CHECK(rep.adaptation->method == BasisAdaptation::Method::Symbolic);
  StraightenOptions opts;
  opts.grid = 5;
  opts.surrogate = false;
  auto sym = pushforward_residuals(build_normal_coordinates(rep, opts), p.F(), opts);
  CHECK(sym.structural_max < 1e-6);
  opts.force_numeric_adaptation = true;
  auto tr = build_normal_coordinates(rep, opts);
  CHECK(tr.adaptation() == BasisAdaptation::Method::Numeric);
  auto num = pushforward_residuals(tr, p.F(), opts);
  CHECK(num.flagged == 0);
  CHECK(num.structural_max < 1e-6);
  CHECK(num.fibre_affinity.max < 1e-6);
  CHECK(num.jacobian_agreement.max < 1e-5);
  for (const auto& node : num.nodes) CHECK(std::abs(node.force[0]) < 1e-5);
}

TEST_CASE("Routh reduction: the momentum is a parameter of the normal form") {
  auto p = routh();
  auto rep = classify(p);
  REQUIRE(rep.classification == AnalysisReport::Case::Case1);
  StraightenOptions opts;
  opts.grid = 0;
  opts.surrogate = true;
  auto out = straighten(rep, opts);
  CHECK(out.transform.t_count() == 1);
  CHECK(out.residuals.flagged == 0);
  CHECK(out.residuals.t_residual.max < 1e-8);
  CHECK(out.residuals.structural_max < 1e-6);
  CHECK(out.residuals.grid == 5);
  REQUIRE(out.residuals.surrogate);
  CHECK(out.residuals.surrogate->agrees);
}

TEST_CASE("box excluding the cross-section") {
  auto c = box_chart({"z1", "z2"}, {-1, 2}, {1, 3});
  SecondOrderProblem p(c, field(c, {"z2 - z1^2", "-z1 + 2*z1*(z2 - z1^2)"}), Frame(c, {field(c, {"0", "1"})}));
  auto rep = classify(p);
  CHECK(rep.classification == AnalysisReport::Case::Case1);
  REQUIRE(rep.cross_section);
  CHECK_FALSE(rep.cross_section->found);
  CHECK(std::find(rep.warnings.begin(), rep.warnings.end(), "cross-section not found in box") != rep.warnings.end());
  CHECK_THROWS_AS(build_normal_coordinates(rep), NumericError);
}
