#include "corpus.hpp"

#include "sode/errors.hpp"

using nlohmann::json;

namespace sodeform {

namespace {

json unit_box(std::vector<std::string> names) {
  const std::size_t d = names.size();
  return {{"coordinates", names}, {"box", {{"lo", std::vector<double>(d, -1.0)}, {"hi", std::vector<double>(d, 1.0)}}}};
}

json oscillator() {
  return {{"name", "oscillator-scrambled"},
          {"description", "harmonic oscillator u' = -x under z1 = x, z2 = u + x^2"},
          {"chart", unit_box({"z1", "z2"})},
          {"F", {"z2 - z1^2", "-z1 + 2*z1*(z2 - z1^2)"}},
          {"V", json::array({json::array({"0", "1"})})}};
}

json timedep() {
  // t = z1, x = z2 - z1^2, u = z3 - (z2 - z1^2)^2 carries F = dt + u dx + (t - x) du.
  return {{"name", "timedep-scrambled"},
          {"description", "forced oscillator x'' = t - x under z1 = t, z2 = x + t^2, z3 = u + x^2"},
          {"chart", unit_box({"z1", "z2", "z3"})},
          {"F", {"1", "z3 - (z2 - z1^2)^2 + 2*z1", "-(z2 - z1^2) + z1 + 2*(z2 - z1^2)*(z3 - (z2 - z1^2)^2)"}},
          {"V", json::array({json::array({"0", "0", "1"})})}};
}

json quadratic_demo() {
  return {{"name", "quadratic-demo"},
          {"description", "force quadratic in the velocity"},
          {"chart", unit_box({"x", "y"})},
          {"F", {"y", "x*y^2 + (1 + x^2)*y - x"}},
          {"V", json::array({json::array({"0", "1"})})}};
}

json cubic_demo() {
  return {{"name", "cubic-demo"},
          {"description", "force cubic in the velocity"},
          {"chart", unit_box({"x", "y"})},
          {"F", {"y", "y^3"}},
          {"V", json::array({json::array({"0", "1"})})}};
}

json beta_rescaled() {
  return {{"name", "beta-rescaled"},
          {"description", "free motion with the non-adapted vertical basis (1 + y^2) d/dy"},
          {"chart", unit_box({"x", "y"})},
          {"F", {"y", "0"}},
          {"V", json::array({json::array({"0", "1 + y^2"})})}};
}

json routh() {
  // Reduced field of the Lagrange-Poincare equations
  //   d/dt dl/dv^i - dl/dx^i = K_ik v^k mu,   mu' = 0,
  // for l = (v1^2 + v2^2 + w^2)/2, A = -x2 dx1, K_12 = 1.
  json lagrangian = {
      {"configuration", {"x1", "x2", "theta"}},
      {"velocities", {"xd1", "xd2", "thetad"}},
      {"L", "(xd1^2 + xd2^2 + (thetad - x2*xd1)^2)/2"},
      {"cyclic", {"theta"}},
      {"reduced_lagrangian", "(v1^2 + v2^2 + w^2)/2"},
      {"connection_form", {"-x2", "0"}},
      {"curvature", {{"0", "1"}, {"-1", "0"}}},
      {"reduced_coordinates", {{"x1", "x1"}, {"x2", "x2"}, {"v1", "xd1"}, {"v2", "xd2"}, {"mu", "thetad - x2*xd1"}}}};
  return {{"name", "routh-abelian"},
          {"description", "Routh reduction of a circle symmetry over the plane; mu is the conserved momentum"},
          {"chart", unit_box({"x1", "x2", "v1", "v2", "mu"})},
          {"F", {"v1", "v2", "mu*v2", "-mu*v1", "0"}},
          {"V", {{"0", "0", "1", "0", "0"}, {"0", "0", "0", "1", "0"}}},
          {"metadata", {{"lagrangian", lagrangian}}}};
}

struct Builtin {
  const char* name;
  json (*make)();
};

const Builtin builtins[] = {
    {"oscillator-scrambled", oscillator}, {"timedep-scrambled", timedep}, {"quadratic-demo", quadratic_demo},
    {"cubic-demo", cubic_demo},           {"beta-rescaled", beta_rescaled}, {"routh-abelian", routh},
};

}  // namespace

std::vector<CorpusEntry> corpus_list() {
  std::vector<CorpusEntry> out;
  for (const auto& b : builtins) out.push_back({b.name, b.make().at("description").get<std::string>()});
  return out;
}

Manifest corpus_get(const std::string& name) {
  for (const auto& b : builtins) {
    if (name == b.name) return manifest_from_json(b.make());
  }
  throw sode::InputError("corpus: no builtin manifest named '" + name + "'");
}

}  // namespace sodeform
