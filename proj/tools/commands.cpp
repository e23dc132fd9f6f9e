#include "commands.hpp"

#include "report.hpp"

#include "sode/errors.hpp"
#include "sode/straighten.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

using nlohmann::json;

namespace sodeform {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string point(const std::vector<double>& p) {
  std::string s = "(";
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? ", " : "") + fmt(p[i]);
  return s + ")";
}

std::string check_line(const sode::Check& c) {
  std::string s = c.name + ": " + sode::to_string(c.status);
  if (c.exact) {
    s += " (exact)";
  } else if (c.status == sode::Check::Status::Pass) {
    s += " (max residual " + fmt(c.max_residual) + ")";
  }
  if (!c.witness.empty()) s += " witness " + point(c.witness) + " value " + fmt(c.witness_value);
  return s;
}

struct Run {
  const Manifest& m;
  Command cmd;
  json doc;
  json timings = json::object();
  std::ostringstream text;
  int exit_code = Pass;

  void fail(int code) { exit_code = std::max(exit_code, code); }
  void line(const std::string& s) { text << "  " << s << "\n"; }
};

sode::StraightenOptions straighten_options(const Manifest& m) {
  sode::StraightenOptions o;
  o.grid = m.options.grid;
  return o;
}

// Regularity and both involutivity gates only.
void do_check(Run& r) {
  ParsedProblem pp = parse_problem(r.m);
  sode::Frame frame(pp.chart, pp.V, pp.options.samples, pp.options.seed);
  json gates = json::object();
  sode::InvolutivityVerdict vi = sode::is_involutive(frame, pp.options.zero);
  gates["v_involutive"] = to_json(vi);
  r.line(std::string("V involutive: ") + (vi.involutive ? "pass" : "FAIL " + vi.diagnostic));
  if (!vi.involutive) {
    r.fail(MathFail);
    r.doc["analysis"] = {{"gates", gates}};
    return;
  }
  sode::SecondOrderProblem p(pp.chart, pp.F, frame, pp.options);
  sode::RegularityResult reg = sode::check_regularity(p);
  gates["regularity"] = {{"pass", reg.pass}, {"rank", to_json(reg.rank)}};
  std::string rl = std::string("regularity rank{V, [F,V]} = 2n: ") + (reg.pass ? "pass" : "FAIL");
  if (!reg.pass && !reg.rank.deficient_points.empty()) rl += " witness " + point(reg.rank.deficient_points.front());
  r.line(rl);
  if (!reg.pass) {
    r.fail(MathFail);
  } else {
    sode::ExtendedFrame ef = sode::build_W(p);
    sode::InvolutivityVerdict wi = sode::check_W_involutive(ef);
    gates["w_involutive"] = to_json(wi);
    r.line(std::string("W involutive: ") + (wi.involutive ? "pass" : "FAIL " + wi.diagnostic));
    if (!wi.involutive) r.fail(MathFail);
  }
  r.doc["analysis"] = {{"gates", gates}};
}

void summarize_classification(Run& r, const sode::AnalysisReport& rep) {
  r.line("classification: " + sode::to_string(rep.classification) +
         (rep.reason.empty() ? "" : " (" + rep.reason + ")"));
  if (rep.classification != sode::AnalysisReport::Case::NotSecondOrder) {
    r.line("parameters: " + std::to_string(rep.parameters));
  }
  if (rep.cross_section) {
    r.line(rep.cross_section->found ? "N-point: " + point(rep.cross_section->point) : "N-point: not found in box");
  }
  for (const auto& w : rep.warnings) r.line("warning: " + w);
}

void straighten_section(Run& r, const sode::AnalysisReport& rep, bool nodes, bool decide_exit) {
  const auto t0 = Clock::now();
  json s = {{"tolerance", r.m.options.tolerance}};
  try {
    sode::StraightenResult res = sode::straighten(rep, straighten_options(r.m));
    const bool ok = res.residuals.structural_max < r.m.options.tolerance;
    s["transform"] = to_json(res.transform);
    s["residuals"] = to_json(res.residuals, nodes);
    s["pass"] = ok;
    r.line("chart: " + res.transform.composition());
    r.line("structural residual max " + fmt(res.residuals.structural_max) + " on " +
           std::to_string(res.residuals.nodes.size()) + " nodes (" + std::to_string(res.residuals.flagged) +
           " flagged), tolerance " + fmt(r.m.options.tolerance) + ": " + (ok ? "pass" : "FAIL"));
    if (res.residuals.surrogate) {
      const auto& sg = *res.residuals.surrogate;
      std::string f;
      for (std::size_t k = 0; k < sg.force.size(); ++k) f += (k ? ", " : "") + sg.force[k];
      r.line("normal-form force ~ (" + f + "), re-classified " + sode::to_string(sg.classification) +
             (sg.agrees ? " (agrees)" : " (DISAGREES)"));
    }
    for (const auto& w : res.residuals.warnings) r.line("warning: " + w);
    if (decide_exit && !ok) r.fail(NumericFail);
  } catch (const sode::NumericError& e) {
    s["error"] = {{"kind", "numeric"}, {"message", e.what()}, {"last_point", e.last_point()}};
    r.line(std::string("straightening failed: ") + e.what());
    if (decide_exit) r.fail(NumericFail);
  }
  r.doc["straighten"] = s;
  r.timings["straighten_s"] = seconds_since(t0);
}

void do_pipeline(Run& r) {
  sode::SecondOrderProblem p = build_problem(r.m);
  sode::ClassifyOptions what;
  what.connection = r.cmd != Command::Classify;
  what.curvature = r.cmd == Command::Quadratic || r.cmd == Command::Straighten || r.cmd == Command::Report;
  const auto t0 = Clock::now();
  sode::AnalysisReport rep = sode::classify(p, what);
  r.timings["analysis_s"] = seconds_since(t0);

  json a = classification_json(rep);
  summarize_classification(r, rep);
  const bool second_order = rep.classification != sode::AnalysisReport::Case::NotSecondOrder;
  if (!second_order) r.fail(MathFail);

  if (what.connection && second_order) {
    a.update(connection_json(rep));
    for (const auto& c : rep.identity_checks()) {
      r.line(check_line(c));
      if (c.status == sode::Check::Status::Fail && r.cmd != Command::Straighten) r.fail(MathFail);
    }
    if (rep.adaptation) r.line("basis adaptation: " + sode::to_string(rep.adaptation->method));
  }
  if (what.curvature && second_order) {
    a.update(curvature_json(rep));
    if (rep.quadratic) {
      std::string ql = "quadratic: " + sode::to_string(rep.quadratic->kind);
      if (rep.quadratic->kind == sode::QuadraticVerdict::Kind::NotQuadratic) {
        ql += " witness " + point(rep.quadratic->check.witness) + " |theta| " + fmt(rep.quadratic->witness_magnitude);
      }
      r.line(ql);
      if (r.cmd == Command::Quadratic) {
        if (rep.quadratic->kind == sode::QuadraticVerdict::Kind::NotQuadratic) r.fail(MathFail);
        if (rep.quadratic->kind == sode::QuadraticVerdict::Kind::Inconclusive) r.fail(NumericFail);
      }
    }
  }
  r.doc["analysis"] = a;

  if (!second_order) return;
  const bool missing_n = rep.cross_section && !rep.cross_section->found;
  switch (r.cmd) {
    case Command::Classify:
      if (missing_n) r.fail(NumericFail);
      break;
    case Command::Quadratic:
      // The coefficients Q, P, G of the normal form come from a straightened chart.
      if (rep.quadratic && rep.quadratic->kind == sode::QuadraticVerdict::Kind::Quadratic && !missing_n) {
        straighten_section(r, rep, false, false);
      }
      break;
    case Command::Straighten:
      straighten_section(r, rep, true, true);
      break;
    case Command::Report:
      straighten_section(r, rep, true, true);
      break;
    case Command::Connection:
    case Command::Check:
      break;
  }
}

}  // namespace

std::string to_string(Command c) {
  switch (c) {
    case Command::Check: return "check";
    case Command::Classify: return "classify";
    case Command::Connection: return "connection";
    case Command::Quadratic: return "quadratic";
    case Command::Straighten: return "straighten";
    case Command::Report: return "report";
  }
  return "?";
}

std::optional<Command> command_from_string(const std::string& s) {
  for (Command c : {Command::Check, Command::Classify, Command::Connection, Command::Quadratic, Command::Straighten,
                    Command::Report}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

void apply(const Overrides& o, Manifest& m) {
  if (o.seed) m.options.seed = *o.seed;
  if (o.samples) {
    if (*o.samples == 0) throw sode::InputError("--samples must be positive");
    m.options.samples = *o.samples;
  }
  if (o.grid) m.options.grid = *o.grid;
  if (o.tolerance) {
    if (!(*o.tolerance > 0.0)) throw sode::InputError("--tol must be positive");
    m.options.tolerance = *o.tolerance;
  }
}

Outcome run(Command cmd, const Manifest& m) {
  const auto t0 = Clock::now();
  Run r{m, cmd, json::object(), json::object(), {}, Pass};
  r.doc["tool"] = {{"name", tool_name}, {"version", tool_version}, {"schema", schema_version}};
  r.doc["command"] = to_string(cmd);
  r.doc["manifest"] = to_json(m);
  r.doc["conventions"] = sign_conventions();
  try {
    if (cmd == Command::Check) {
      do_check(r);
    } else {
      do_pipeline(r);
    }
  } catch (const sode::ParseError& e) {
    r.exit_code = InputFail;
    r.doc["error"] = {{"kind", "parse"}, {"message", e.what()}, {"line", e.line()}, {"column", e.column()}};
  } catch (const sode::NumericError& e) {
    r.exit_code = NumericFail;
    r.doc["error"] = {{"kind", "numeric"}, {"message", e.what()}, {"last_point", e.last_point()}};
  } catch (const sode::Error& e) {
    r.exit_code = InputFail;
    r.doc["error"] = {{"kind", "input"}, {"message", e.what()}};
  }
  if (r.doc.contains("error")) r.line("error: " + r.doc["error"]["message"].get<std::string>());

  static const char* meaning[] = {"pass", "mathematical condition failed", "input error", "numeric failure"};
  r.doc["verdict"] = {{"exit_code", r.exit_code}, {"meaning", meaning[r.exit_code]}};
  r.timings["total_s"] = seconds_since(t0);
  r.doc["timings"] = r.timings;

  Outcome out;
  out.exit_code = r.exit_code;
  out.report = std::move(r.doc);
  out.text = "sodeform " + to_string(cmd) + " " + (m.name.empty() ? "<manifest>" : m.name) + "\n" + r.text.str() +
             "result: " + meaning[out.exit_code] + " (exit " + std::to_string(out.exit_code) + ")\n";
  return out;
}

std::string canonical(const json& report) {
  json j = report;
  j.erase("timings");
  return j.dump(2);
}

}  // namespace sodeform
