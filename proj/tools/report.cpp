#include "report.hpp"

using nlohmann::json;

namespace sodeform {

namespace {

json strings(const std::vector<sode::Expression>& v) {
  json j = json::array();
  for (const auto& e : v) j.push_back(sode::to_string(e));
  return j;
}

json strings(const std::vector<std::vector<sode::Expression>>& v) {
  json j = json::array();
  for (const auto& row : v) j.push_back(strings(row));
  return j;
}

json strings(const std::vector<std::vector<std::vector<sode::Expression>>>& v) {
  json j = json::array();
  for (const auto& row : v) j.push_back(strings(row));
  return j;
}

json fields(const std::vector<sode::VectorField>& v) {
  json j = json::array();
  for (const auto& X : v) j.push_back(to_json(X));
  return j;
}

json matrix(const Eigen::MatrixXd& M) {
  json j = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    j.push_back(row);
  }
  return j;
}

json result_json(const sode::FieldResult& f) {
  json j = {{"ok", f.ok}};
  if (f.ok) {
    j["field"] = to_json(f.field);
  } else {
    j["witness"] = f.witness;
    j["diagnostic"] = f.diagnostic;
  }
  return j;
}

json stat_json(const sode::Stat& s) { return {{"max", s.max}, {"median", s.median}, {"count", s.count}}; }

json frame_json(const sode::ExtendedFrame& ef) {
  return {{"V", fields(ef.V)}, {"W", fields(ef.W)}, {"commuting", ef.commuting}, {"adapted", ef.adapted}};
}

}  // namespace

json to_json(const sode::VectorField& X) { return strings(X.components()); }

json to_json(const sode::Check& c) {
  json j = {{"name", c.name},
            {"status", sode::to_string(c.status)},
            {"exact", c.exact},
            {"max_residual", c.max_residual}};
  if (!c.witness.empty()) {
    j["witness"] = c.witness;
    j["witness_value"] = c.witness_value;
  }
  if (!c.detail.empty()) j["detail"] = c.detail;
  return j;
}

json to_json(const sode::RankReport& r) {
  std::size_t lo = r.claimed_rank, hi = 0;
  for (auto k : r.ranks) {
    lo = std::min(lo, k);
    hi = std::max(hi, k);
  }
  return {{"claimed_rank", r.claimed_rank},
          {"samples", r.samples},
          {"evaluated", r.ranks.size()},
          {"min_rank", r.ranks.empty() ? 0 : lo},
          {"max_rank", hi},
          {"smallest_singular_value", r.worst_conditioning},
          {"deficient_points", r.deficient_points},
          {"skipped_points", r.skipped_points}};
}

json to_json(const sode::InvolutivityVerdict& v) {
  json j = {{"involutive", v.involutive}};
  if (!v.involutive) {
    j["pair"] = {v.i, v.j};
    j["witness"] = v.witness;
    j["diagnostic"] = v.diagnostic;
  }
  return j;
}

json to_json(const sode::CrossSection& cs) {
  json j = {{"found", cs.found}, {"residual", cs.residual}, {"points", cs.all_points}};
  if (cs.found) j["point"] = cs.point;
  if (!cs.detail.empty()) j["detail"] = cs.detail;
  return j;
}

json to_json(const sode::QuadraticVerdict& q) {
  json j = {{"verdict", sode::to_string(q.kind)}, {"check", to_json(q.check)}};
  if (q.kind == sode::QuadraticVerdict::Kind::NotQuadratic) j["witness_magnitude"] = q.witness_magnitude;
  return j;
}

json sign_conventions() {
  return {{"S", "X = a^i V_i + b^i W_i => S(X) = -b^i V_i, W_i = [F, V_i]"},
          {"projectors", "P_H = (id - L_F S)/2, P_V = (id + L_F S)/2"},
          {"beta", "[V_i, W_j] = alpha^k_ij V_k + beta^k_ij W_k, indices [k][i][j]"},
          {"adaptation", "V~_i = A_i^j V_j, A stored [i][j]"},
          {"connection",
           "nabla_{V_i} V_j = +beta^k_ij V_k; h(V_i) = -P_H(W_i); "
           "Gamma^i_j = (1/2) W-coefficient i of [F, W_j] (= -1/2 dF^i/dy^j in natural coordinates); "
           "Gamma^k_ij = V-coefficient k of nabla_{h(V_i)} V_j"},
          {"theta", "theta^l_ijk = V-coefficient l of theta(V_i, V_j) V_k, indices [l][i][j][k]"},
          {"normal_form",
           "parameters (t, x, s); fibre coordinates ytilde = x-components of (D Phi)^-1 F; "
           "force^k = Q^k + P^k_i y^i + G^k_ij y^i y^j"}};
}

json classification_json(const sode::AnalysisReport& rep) {
  json gates = {{"regularity", {{"pass", rep.regularity.pass}, {"rank", to_json(rep.regularity.rank)}}},
                {"v_involutive", to_json(rep.v_involutive)}};
  if (rep.w_involutive) gates["w_involutive"] = to_json(*rep.w_involutive);
  if (rep.F_in_W) gates["F_in_W"] = to_json(*rep.F_in_W);
  if (rep.F_independent) gates["F_independent"] = to_json(*rep.F_independent);
  if (rep.F_preserves_W) gates["F_preserves_W"] = to_json(*rep.F_preserves_W);

  json j = {{"classification", sode::to_string(rep.classification)},
            {"m", rep.m},
            {"n", rep.n},
            {"gates", gates}};
  if (!rep.reason.empty()) j["reason"] = rep.reason;
  if (rep.classification != sode::AnalysisReport::Case::NotSecondOrder) j["parameters"] = rep.parameters;
  if (!rep.F_a.empty() || !rep.F_b.empty()) j["F_decomposition"] = {{"a", strings(rep.F_a)}, {"b", strings(rep.F_b)}};
  if (rep.cross_section) j["cross_section"] = to_json(*rep.cross_section);
  if (rep.frame) j["frame"] = frame_json(*rep.frame);
  j["warnings"] = rep.warnings;
  return j;
}

json connection_json(const sode::AnalysisReport& rep) {
  json j = json::object();
  if (rep.beta) {
    j["alpha"] = strings(rep.beta->alpha);
    j["beta"] = strings(rep.beta->beta);
    j["beta_symmetric"] = to_json(rep.beta->symmetric);
    j["beta_zero"] = rep.beta->all_beta_zero;
  }
  if (rep.beta_integrability) j["beta_integrability"] = to_json(*rep.beta_integrability);
  if (rep.adaptation) {
    const auto& a = *rep.adaptation;
    json ad = {{"method", sode::to_string(a.method)}, {"verification", to_json(a.verification)}};
    if (!a.A.empty()) ad["A"] = strings(a.A);
    if (!a.detail.empty()) ad["detail"] = a.detail;
    j["adaptation"] = ad;
  }
  if (!rep.working) return j;
  const sode::ExtendedFrame& wf = *rep.working;
  j["working_frame"] = frame_json(wf);

  // S on the working frame and on F.
  json s = json::object();
  json sv = json::array(), sw = json::array();
  for (const auto& V : wf.V) sv.push_back(result_json(sode::apply_S(wf, V)));
  for (const auto& W : wf.W) sw.push_back(result_json(sode::apply_S(wf, W)));
  s["V"] = sv;
  s["W"] = sw;
  s["F"] = result_json(sode::apply_S(wf, wf.F));
  j["S_action"] = s;

  if (rep.nijenhuis) j["nijenhuis"] = to_json(*rep.nijenhuis);
  if (rep.projectors) {
    const auto& P = *rep.projectors;
    j["projectors"] = {{"frame_order", "V_1..V_n, W_1..W_n"},
                       {"L_F_S", fields(P.LFS)},
                       {"P_H", fields(P.PH)},
                       {"P_V", fields(P.PV)},
                       {"F_preserves_W", to_json(P.F_preserves_W)},
                       {"involution", to_json(P.involution)},
                       {"complementary", to_json(P.complementary)},
                       {"idempotent", to_json(P.idempotent)},
                       {"vertical", to_json(P.vertical)}};
  }
  if (rep.lifts) j["horizontal_lifts"] = {{"h", fields(rep.lifts->h)}, {"verification", to_json(rep.lifts->verification)}};
  if (rep.connection) {
    const auto& C = *rep.connection;
    j["connection"] = {{"gamma1", strings(C.gamma1)},
                       {"gamma2", strings(C.gamma2)},
                       {"torsion_symmetric", to_json(C.torsion_symmetric)},
                       {"torsion_free", to_json(C.torsion_free)},
                       {"sign_convention", C.sign_convention}};
  }
  json suite = json::array();
  for (const auto& c : rep.identity_checks()) suite.push_back(to_json(c));
  j["identity_suite"] = suite;
  return j;
}

json curvature_json(const sode::AnalysisReport& rep) {
  json j = json::object();
  if (rep.theta) {
    json t = json::array();
    for (const auto& l : rep.theta->theta) t.push_back(strings(l));
    j["theta"] = t;
  }
  if (rep.quadratic) j["quadratic"] = to_json(*rep.quadratic);
  return j;
}

json to_json(const sode::CoordinateTransform& tr) {
  return {{"kind", tr.kind() == sode::CoordinateTransform::Kind::Case1 ? "Case1" : "Case2"},
          {"m", tr.m()},
          {"n", tr.n()},
          {"t_count", tr.t_count()},
          {"parameter_names", tr.parameter_names()},
          {"base_point", tr.base_point()},
          {"slice", matrix(tr.slice())},
          {"composition", tr.composition()},
          {"adaptation", sode::to_string(tr.adaptation())},
          {"base_conditioning", tr.base_conditioning()}};
}

json to_json(const sode::ResidualReport& r, bool include_nodes) {
  json j = {{"grid", r.grid},
            {"radius", r.radius},
            {"parameter_names", r.parameter_names},
            {"node_count", r.nodes.size()},
            {"flagged", r.flagged},
            {"structural_max", r.structural_max},
            {"t_residual", stat_json(r.t_residual)},
            {"x_minus_ytilde", stat_json(r.x_minus_ytilde)},
            {"x_minus_y", stat_json(r.x_minus_y)},
            {"fibre_affinity", stat_json(r.fibre_affinity)},
            {"jacobian_agreement", stat_json(r.jacobian_agreement)},
            {"conditioning", stat_json(r.conditioning)},
            {"quadratic_fit_residual", r.quadratic_fit_residual},
            {"warnings", r.warnings}};
  json fits = json::array();
  for (const auto& f : r.quadratic_fits) {
    fits.push_back({{"tx", f.tx},
                    {"Q", f.force_constant},
                    {"P", f.force_linear},
                    {"G", f.force_quadratic},
                    {"residual", f.residual}});
  }
  j["normal_form_fits"] = fits;
  if (r.surrogate) {
    const auto& s = *r.surrogate;
    json sj = {{"degree", s.degree},
               {"fit_residual", s.fit_residual},
               {"force", s.force},
               {"classification", sode::to_string(s.classification)},
               {"agrees", s.agrees}};
    if (s.quadratic) sj["quadratic"] = sode::to_string(*s.quadratic);
    if (!s.detail.empty()) sj["detail"] = s.detail;
    j["surrogate"] = sj;
  }
  if (include_nodes) {
    json nodes = json::array();
    for (const auto& n : r.nodes) {
      json nj = {{"q", n.q},
                 {"point", n.point},
                 {"ytilde", n.ytilde},
                 {"force", n.force},
                 {"t_residual", n.t_residual},
                 {"x_minus_ytilde", n.x_minus_ytilde},
                 {"x_minus_y", n.x_minus_y},
                 {"jacobian_agreement", n.jacobian_agreement},
                 {"conditioning", n.conditioning},
                 {"fibre_sigma_min", n.fibre_sigma_min},
                 {"flagged", n.flagged}};
      if (n.fibre_affinity >= 0.0) nj["fibre_affinity"] = n.fibre_affinity;
      if (!n.note.empty()) nj["note"] = n.note;
      nodes.push_back(nj);
    }
    j["nodes"] = nodes;
  }
  return j;
}

}  // namespace sodeform
