#include "manifest.hpp"

#include "sode/errors.hpp"

#include <fstream>
#include <sstream>

using nlohmann::json;

namespace sodeform {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& msg) {
  throw sode::InputError("manifest: " + key + ": " + msg);
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad(where.empty() ? key : where + "." + key, "missing");
  return j.at(key);
}

std::string text(const json& j, const std::string& key) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  bad(key, "expected an expression string");
}

double number(const json& j, const std::string& key) {
  if (!j.is_number()) bad(key, "expected a number");
  return j.get<double>();
}

std::size_t count(const json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) bad(key, "expected a non-negative integer");
  return j.get<std::size_t>();
}

std::vector<double> numbers(const json& j, const std::string& key) {
  if (!j.is_array()) bad(key, "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

sode::Expression parse_at(const std::string& s, const std::string& key) {
  try {
    return sode::parse(s);
  } catch (const sode::ParseError& e) {
    std::string msg = e.what();
    const auto at = msg.rfind(" at line ");
    if (at != std::string::npos) msg.resize(at);
    throw sode::ParseError(key + ": " + msg, e.line(), e.column());
  }
}

}  // namespace

Manifest manifest_from_json(const json& j) {
  if (!j.is_object()) bad("<root>", "expected an object");
  Manifest m;
  if (j.contains("name")) m.name = j.at("name").get<std::string>();
  if (j.contains("description")) m.description = j.at("description").get<std::string>();

  const json& chart = require(j, "chart", "");
  const json& coords = require(chart, "coordinates", "chart");
  if (!coords.is_array() || coords.empty()) bad("chart.coordinates", "expected a non-empty list of names");
  for (const auto& c : coords) {
    if (!c.is_string()) bad("chart.coordinates", "expected names");
    m.coordinates.push_back(c.get<std::string>());
  }
  const std::size_t dim = m.coordinates.size();
  const json& box = require(chart, "box", "chart");
  m.lo = numbers(require(box, "lo", "chart.box"), "chart.box.lo");
  m.hi = numbers(require(box, "hi", "chart.box"), "chart.box.hi");
  if (m.lo.size() != dim || m.hi.size() != dim) bad("chart.box", "bounds must have one entry per coordinate");
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(m.lo[i] < m.hi[i])) bad("chart.box", "empty interval for " + m.coordinates[i]);
  }

  const json& F = require(j, "F", "");
  if (!F.is_array()) bad("F", "expected a list of component expressions");
  for (std::size_t i = 0; i < F.size(); ++i) m.F.push_back(text(F[i], "F[" + std::to_string(i) + "]"));
  if (m.F.size() != dim) bad("F", "has " + std::to_string(m.F.size()) + " components, chart has " + std::to_string(dim));

  const json& V = require(j, "V", "");
  if (!V.is_array() || V.empty()) bad("V", "expected a non-empty list of fields");
  for (std::size_t a = 0; a < V.size(); ++a) {
    const std::string key = "V[" + std::to_string(a) + "]";
    if (!V[a].is_array()) bad(key, "expected a list of component expressions");
    std::vector<std::string> comps;
    for (std::size_t i = 0; i < V[a].size(); ++i) comps.push_back(text(V[a][i], key + "[" + std::to_string(i) + "]"));
    if (comps.size() != dim) bad(key, "has " + std::to_string(comps.size()) + " components, chart has " + std::to_string(dim));
    m.V.push_back(std::move(comps));
  }
  if (2 * m.V.size() > dim) bad("V", "2 * |V| exceeds the chart dimension");

  if (j.contains("options")) {
    const json& o = j.at("options");
    if (!o.is_object()) bad("options", "expected an object");
    for (const auto& [key, value] : o.items()) {
      const std::string k = "options." + key;
      if (key == "samples") {
        m.options.samples = count(value, k);
        if (m.options.samples == 0) bad(k, "must be positive");
      } else if (key == "seed") {
        m.options.seed = count(value, k);
      } else if (key == "zero_tolerance") {
        m.options.zero_tolerance = number(value, k);
      } else if (key == "tolerance") {
        m.options.tolerance = number(value, k);
      } else if (key == "grid") {
        m.options.grid = count(value, k);
      } else {
        bad(k, "unknown option");
      }
    }
  }
  if (j.contains("metadata")) m.metadata = j.at("metadata");
  return m;
}

json to_json(const Manifest& m) {
  json j;
  j["name"] = m.name;
  j["description"] = m.description;
  j["chart"] = {{"coordinates", m.coordinates}, {"box", {{"lo", m.lo}, {"hi", m.hi}}}};
  j["F"] = m.F;
  j["V"] = m.V;
  j["options"] = {{"samples", m.options.samples},
                  {"seed", m.options.seed},
                  {"zero_tolerance", m.options.zero_tolerance},
                  {"tolerance", m.options.tolerance},
                  {"grid", m.options.grid}};
  if (!m.metadata.empty()) j["metadata"] = m.metadata;
  return j;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sode::InputError("cannot open manifest '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw sode::InputError(path + ": " + e.what());
  }
  return manifest_from_json(j);
}

sode::AnalysisOptions analysis_options(const Manifest& m) {
  sode::AnalysisOptions o;
  o.samples = m.options.samples;
  o.seed = m.options.seed;
  o.zero.trials = m.options.samples;
  o.zero.seed = m.options.seed;
  o.zero.tolerance = m.options.zero_tolerance;
  return o;
}

ParsedProblem parse_problem(const Manifest& m) {
  ParsedProblem out;
  out.chart = std::make_shared<sode::Chart>(m.coordinates, m.lo, m.hi, m.options.seed);
  out.options = analysis_options(m);
  auto field = [&](const std::vector<std::string>& comps, const std::string& key) {
    std::vector<sode::Expression> e;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::string k = key + "[" + std::to_string(i) + "]";
      e.push_back(parse_at(comps[i], k));
      for (const auto& s : sode::free_symbols(e.back())) {
        if (out.chart->index_of(s) == out.chart->dim()) bad(k, "unknown symbol '" + s + "'");
      }
    }
    return sode::VectorField(out.chart, std::move(e));
  };
  out.F = field(m.F, "F");
  for (std::size_t a = 0; a < m.V.size(); ++a) out.V.push_back(field(m.V[a], "V[" + std::to_string(a) + "]"));
  return out;
}

sode::SecondOrderProblem build_problem(const Manifest& m) {
  ParsedProblem p = parse_problem(m);
  sode::Frame frame(p.chart, p.V, p.options.samples, p.options.seed);
  return sode::SecondOrderProblem(p.chart, p.F, std::move(frame), p.options);
}

}  // namespace sodeform
