// Acceptance suite: one line per criterion, exit status nonzero if any fails.

#include "commands.hpp"
#include "corpus.hpp"
#include "fixtures/euler_lagrange.hpp"

#include "sode/errors.hpp"
#include "sode/straighten.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

using namespace sode;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

ChartPtr unit_chart(std::vector<std::string> names) {
  const std::size_t d = names.size();
  return std::make_shared<Chart>(names, std::vector<double>(d, -1.0), std::vector<double>(d, 1.0), 1);
}

VectorField field(const ChartPtr& c, std::vector<std::string> comps) {
  std::vector<Expression> e;
  for (const auto& s : comps) e.push_back(parse(s));
  return VectorField(c, e);
}

bool polynomial(const Expression& e) {
  switch (e.kind()) {
    case Expression::Kind::Constant:
    case Expression::Kind::Symbol:
      return true;
    case Expression::Kind::Sum:
    case Expression::Kind::Product:
      for (const auto& c : e.children()) {
        if (!polynomial(c)) return false;
      }
      return true;
    case Expression::Kind::Power:
      return boost::multiprecision::denominator(e.exponent()) == 1 && e.exponent() > 0 && polynomial(e.children()[0]);
    default:
      return false;
  }
}

bool polynomial(const SecondOrderProblem& p) {
  for (const auto& c : p.F().components()) {
    if (!polynomial(c)) return false;
  }
  for (const auto& v : p.V().fields()) {
    for (const auto& c : v.components()) {
      if (!polynomial(c)) return false;
    }
  }
  return true;
}

// 1. Identity suite on every corpus instance passing the gates.
Outcome identity_suite() {
  Outcome o;
  std::size_t instances = 0, checks = 0;
  for (const auto& entry : sodeform::corpus_list()) {
    auto p = sodeform::build_problem(sodeform::corpus_get(entry.name));
    auto rep = classify(p);
    if (rep.classification == AnalysisReport::Case::NotSecondOrder) continue;
    ++instances;
    const bool poly = polynomial(p);
    for (const auto& c : rep.identity_checks()) {
      ++checks;
      const bool ok = c.passed() && (poly ? c.exact : c.max_residual < 1e-9);
      o.require(ok, entry.name + ": " + c.name + " " + to_string(c.status) + (c.exact ? " exact" : " residual " + fmt(c.max_residual)));
    }
  }
  o.require(instances == sodeform::corpus_list().size(), "an instance failed the gates");
  if (o.pass) o.detail = std::to_string(checks) + " checks on " + std::to_string(instances) + " instances, all Zero";
  return o;
}

// 2. Regularity discrimination.
Outcome regularity() {
  Outcome o;
  auto c = unit_chart({"x", "y"});
  Frame V(c, {field(c, {"0", "1"})});
  for (const char* f : {"0", "-x", "x*y^2 - sin(x)", "exp(y)*x + y^3"}) {
    SecondOrderProblem p(c, field(c, {"y", f}), V);
    o.require(check_regularity(p).pass, std::string("y dx + (") + f + ") dy rejected");
  }
  SecondOrderProblem bad(c, field(c, {"x", "0"}), V);
  auto r = check_regularity(bad);
  o.require(!r.pass, "x dx accepted");
  o.require(!r.rank.deficient_points.empty(), "x dx: no witness");
  if (o.pass) {
    std::ostringstream s;
    s << "x dx rejected, witness (" << r.rank.deficient_points[0][0] << ", " << r.rank.deficient_points[0][1] << ")";
    o.detail = s.str();
  }
  return o;
}

// 3. Adapted basis for (1 + y^2) d/dy.
Outcome adaptation() {
  Outcome o;
  auto p = sodeform::build_problem(sodeform::corpus_get("beta-rescaled"));
  auto rep = classify(p);
  o.require(rep.adaptation.has_value(), "no adaptation");
  if (!rep.adaptation) return o;
  const auto& ad = *rep.adaptation;
  double worst = 0.0;
  if (ad.method == BasisAdaptation::Method::Symbolic) {
    for (const auto& z : sample_points(p.chart()->box(), 200, 3)) {
      const double a = evaluate(ad.A[0][0], {{"x", z[0]}, {"y", z[1]}});
      worst = std::max(worst, std::abs(a - 1.0 / (1.0 + z[1] * z[1])));
    }
  } else {
    o.require(false, "symbolic closed form not found");
  }
  // The numeric A-system from the section y = 0, independent of the closed form.
  auto sol = solve_basis_ode(*rep.frame, *rep.beta);
  double worst_ode = 0.0;
  for (double x0 : {-0.5, 0.0, 0.5}) {
    for (double s : {-0.6, -0.3, 0.2, 0.7}) {
      std::vector<double> z0{x0, 0.0}, sigma{s};
      auto v = sol.at(z0, sigma);
      worst_ode = std::max(worst_ode, std::abs(v.A(0, 0) - 1.0 / (1.0 + v.point[1] * v.point[1])));
    }
  }
  o.require(worst < 1e-8, "closed-form A off by " + fmt(worst));
  o.require(worst_ode < 1e-8, "integrated A off by " + fmt(worst_ode));
  o.require(ad.verification.passed() && ad.verification.max_residual < 1e-8,
            "[V~, [F, V~]] not in V: " + to_string(ad.verification.status));
  if (o.pass) {
    o.detail = "A = " + to_string(ad.A[0][0]) + ", |A - 1/(1+y^2)| " + fmt(worst) + " symbolic, " + fmt(worst_ode) +
               " integrated; adapted-basis residual " + fmt(ad.verification.max_residual);
  }
  return o;
}

// 4. Scrambled oscillator: z1 = x, z2 = u + x^2.
Outcome round_trip_case1() {
  Outcome o;
  auto p = sodeform::build_problem(sodeform::corpus_get("oscillator-scrambled"));
  auto rep = classify(p);
  o.require(rep.classification == AnalysisReport::Case::Case1, "not Case1");
  if (!o.pass) return o;
  StraightenOptions opts;
  opts.grid = 10;
  auto out = straighten(rep, opts);
  const auto& res = out.residuals;
  double fibre = 0.0, force = 0.0;
  for (const auto& node : res.nodes) {
    const double x = node.point[0], u = node.point[1] - x * x;
    fibre = std::max(fibre, std::abs(node.ytilde[0] - u));
    force = std::max(force, std::abs(node.force[0] + x));
  }
  o.require(res.nodes.size() == 100, "grid is not 10x10");
  o.require(res.flagged == 0, std::to_string(res.flagged) + " flagged nodes");
  o.require(res.structural_max < 1e-6, "structural residual " + fmt(res.structural_max));
  o.require(fibre < 1e-6, "ytilde differs from u by " + fmt(fibre));
  o.require(force < 1e-5, "force differs from -x by " + fmt(force));
  if (o.pass) o.detail = "structural " + fmt(res.structural_max) + ", |force + x| " + fmt(force) + " on 100 nodes";
  return o;
}

// 5. Scrambled time-dependent instance: z1 = t, z2 = x + t^2, z3 = u + x^2, force t - x.
Outcome round_trip_case2() {
  Outcome o;
  auto p = sodeform::build_problem(sodeform::corpus_get("timedep-scrambled"));
  auto rep = classify(p);
  o.require(rep.classification == AnalysisReport::Case::Case2, "not Case2");
  if (!o.pass) return o;
  auto out = straighten(rep);
  const auto& res = out.residuals;
  // The chart measures x and u from the F-trajectory through the base point.
  auto natural = [](const std::vector<double>& z) {
    const double x = z[1] - z[0] * z[0];
    return std::make_pair(x, z[2] - x * x);
  };
  double force = 0.0;
  for (const auto& node : res.nodes) {
    auto [x, u] = natural(node.point);
    std::vector<double> q0{node.q[0], 0.0, 0.0};
    auto [xc, uc] = natural(out.transform.map(q0));
    (void)u;
    (void)uc;
    force = std::max(force, std::abs(node.force[0] + (x - xc)));
  }
  o.require(res.flagged == 0, std::to_string(res.flagged) + " flagged nodes");
  o.require(res.structural_max < 1e-6, "structural residual " + fmt(res.structural_max));
  o.require(force < 1e-5, "force differs from the oracle by " + fmt(force));
  if (o.pass) {
    o.detail = "|F^t - 1| " + fmt(res.t_residual.max) + ", structural " + fmt(res.structural_max) + " on " +
               std::to_string(res.nodes.size()) + " nodes";
  }
  return o;
}

// 6. Quadratic criterion.
Outcome quadratic() {
  Outcome o;
  auto q = classify(sodeform::build_problem(sodeform::corpus_get("quadratic-demo")));
  o.require(q.quadratic && q.quadratic->kind == QuadraticVerdict::Kind::Quadratic, "quadratic-demo not Quadratic");
  o.require(q.quadratic && q.quadratic->check.exact, "quadratic-demo theta not a structural zero");
  auto c = classify(sodeform::build_problem(sodeform::corpus_get("cubic-demo")));
  o.require(c.quadratic && c.quadratic->kind == QuadraticVerdict::Kind::NotQuadratic, "cubic-demo not NotQuadratic");
  o.require(c.quadratic && !c.quadratic->check.witness.empty(), "cubic-demo without witness");
  o.require(c.quadratic && c.quadratic->witness_magnitude > 0.1, "cubic-demo |theta| too small");
  if (o.pass) o.detail = "theta = 0 exactly; cubic |theta| " + fmt(c.quadratic->witness_magnitude) + " at witness";
  return o;
}

// 7. Routh instance against the Euler-Lagrange oracle.
Outcome routh() {
  Outcome o;
  auto m = sodeform::corpus_get("routh-abelian");
  auto p = sodeform::build_problem(m);
  auto rep = classify(p);
  o.require(rep.classification == AnalysisReport::Case::Case1, "not Case1");
  o.require(rep.parameters == 1, "parameter count " + std::to_string(rep.parameters));
  const std::size_t mu = p.chart()->index_of("mu");
  const Expression dmu = normalize(p.F().apply(Expression::symbol("mu")));
  o.require(mu < p.m() && dmu.is_literal_zero() && p.F()[mu].is_literal_zero(), "F(mu) is not a structural zero");
  o.require(rep.quadratic && rep.quadratic->kind == QuadraticVerdict::Kind::Quadratic, "not Quadratic");
  if (!o.pass) return o;

  oracle::EulerLagrange el(m.metadata.at("lagrangian"), m.coordinates);
  VectorField rebuilt = VectorField::zero(p.chart());
  for (std::size_t i = 0; i < rep.n; ++i) rebuilt = rebuilt + rep.F_a[i] * rep.frame->V[i] + rep.F_b[i] * rep.frame->W[i];
  double worst = 0.0;
  for (const auto& z : sample_points(p.chart()->box(), 100, 11)) {
    const auto expected = el.field(z);
    const auto a = p.F().at(z), b = rebuilt.at(z);
    for (std::size_t k = 0; k < z.size(); ++k) worst = std::max({worst, std::abs(a[k] - expected[k]), std::abs(b[k] - expected[k])});
  }
  o.require(worst < 1e-8, "field differs from the oracle by " + fmt(worst));

  // The normal-form chart seen by the oracle: (D Phi)^-1 of the oracle field has
  // vanishing parameter component and x-components equal to the fibre coordinates.
  auto out = straighten(rep);
  const auto& nodes = out.residuals.nodes;
  const std::size_t stride = std::max<std::size_t>(1, nodes.size() / 100);
  double chart = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < nodes.size() && used < 100; k += stride, ++used) {
    auto ev = out.transform.evaluate(nodes[k].q);
    const auto f = el.field(ev.point);
    const Eigen::VectorXd G = ev.jacobian.fullPivLu().solve(Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size())));
    chart = std::max(chart, std::abs(G(0)));
    for (std::size_t i = 0; i < rep.n; ++i) chart = std::max(chart, std::abs(G(static_cast<Eigen::Index>(1 + i)) - nodes[k].ytilde[i]));
  }
  o.require(chart < 1e-8, "chart components differ from the oracle by " + fmt(chart));
  o.require(out.residuals.structural_max < 1e-6, "structural residual " + fmt(out.residuals.structural_max));
  if (o.pass) {
    o.detail = "Case1, 1 parameter, F(mu) = 0, oracle agreement " + fmt(worst) + " (field), " + fmt(chart) + " (chart, " +
               std::to_string(used) + " nodes)";
  }
  return o;
}

// 8. S(F) is the Liouville field in natural coordinates.
Outcome s_action() {
  Outcome o;
  struct Instance {
    std::vector<std::string> names, F, liouville;
    std::vector<std::vector<std::string>> V;
  };
  const std::vector<Instance> instances = {
      {{"x", "y"}, {"y", "x*y^2 - sin(x) + y"}, {"0", "y"}, {{"0", "1"}}},
      {{"x1", "x2", "y1", "y2"},
       {"y1", "y2", "x2*y1^2 - y2", "exp(x1)*y1*y2 + cos(y1)"},
       {"0", "0", "y1", "y2"},
       {{"0", "0", "1", "0"}, {"0", "0", "0", "1"}}},
  };
  for (const auto& in : instances) {
    auto c = unit_chart(in.names);
    std::vector<VectorField> V;
    for (const auto& v : in.V) V.push_back(field(c, v));
    SecondOrderProblem p(c, field(c, in.F), Frame(c, V));
    auto ef = build_W(p);
    auto SF = apply_S(ef, p.F());
    o.require(SF.ok, "S(F) undefined");
    if (!SF.ok) continue;
    auto diff = SF.field - field(c, in.liouville);
    auto z = zero_check("S(F) - y dy", diff.components(), c->box(), p.options().zero);
    o.require(z.passed(), "S(F) differs from the Liouville field: " + to_string(z.status));
    for (std::size_t i = 0; i < ef.n(); ++i) {
      auto SV = apply_S(ef, ef.V[i]);
      auto SW = apply_S(ef, ef.W[i]);
      o.require(SV.ok && zero_check("S(V)", SV.field.components(), c->box(), p.options().zero).passed(), "S(V) != 0");
      o.require(SW.ok && zero_check("S(W)+V", (SW.field + ef.V[i]).components(), c->box(), p.options().zero).passed(),
                "S(W) != -V");
    }
  }
  if (o.pass) o.detail = "S(F) = y^i d/dy^i for n = 1, 2; S(V) = 0, S(W) = -V";
  return o;
}

// 9. Determinism of the report command across processes.
std::string tool_path;

Outcome determinism() {
  Outcome o;
  if (tool_path.empty()) {
    o.require(false, "tool path unknown");
    return o;
  }
  std::size_t n = 0;
  for (const auto& entry : sodeform::corpus_list()) {
    std::string docs[2];
    for (int k = 0; k < 2; ++k) {
      const std::string out = "acceptance_report_" + entry.name + "_" + std::to_string(k) + ".json";
      const std::string cmd = "\"" + tool_path + "\" report --corpus " + entry.name + " --seed 5 --json " + out + " > /dev/null";
      const int rc = std::system(cmd.c_str());
      o.require(rc == 0, entry.name + ": report exited with status " + std::to_string(rc));
      std::ifstream in(out);
      json j = json::parse(in, nullptr, false);
      o.require(!j.is_discarded(), entry.name + ": unreadable report");
      if (!j.is_discarded()) docs[k] = sodeform::canonical(j);
      std::remove(out.c_str());
    }
    o.require(!docs[0].empty() && docs[0] == docs[1], entry.name + ": reports differ");
    ++n;
  }
  if (o.pass) o.detail = std::to_string(n) + " corpus reports byte-identical without timings";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  tool_path = argc > 1 ? argv[1] : SODEFORM_BINARY;
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: none
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "identity suite", 30, identity_suite},
      {2, "regularity discrimination", 1, regularity},
      {3, "basis adaptation oracle", 5, adaptation},
      {4, "round trip, case 1", 60, round_trip_case1},
      {5, "round trip, case 2", 60, round_trip_case2},
      {6, "quadratic criterion", 5, quadratic},
      {7, "Routh instance", 60, routh},
      {8, "S-action", 1, s_action},
      {9, "determinism", 0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && s >= c.limit_s) o.require(false, "runtime over " + fmt(c.limit_s) + " s");
    const std::string limit = c.limit_s > 0 ? ", limit " + std::to_string(static_cast<int>(c.limit_s)) + " s" : "";
    std::printf("[%s] %d %s (%.2f s%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, s, limit.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
