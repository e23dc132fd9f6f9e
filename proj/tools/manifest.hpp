#pragma once

#include "sode/analysis.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sodeform {

/// Problem definition: chart, F, V basis and run options. Expressions are
/// kept as text so the manifest echoes exactly what was given.
struct Manifest {
  std::string name;
  std::string description;
  std::vector<std::string> coordinates;
  std::vector<double> lo, hi;
  std::vector<std::string> F;
  std::vector<std::vector<std::string>> V;

  struct Options {
    std::size_t samples = 64;
    std::uint64_t seed = 1;
    double zero_tolerance = 1e-10;
    double tolerance = 1e-5;  // straightening residual
    std::size_t grid = 0;     // 0: default for the dimension
  } options;

  /// Free-form extra data carried through to the report (e.g. the Lagrangian of a reduced system).
  nlohmann::json metadata = nlohmann::json::object();
};

/// Throws sode::InputError naming the offending key.
Manifest manifest_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Manifest& m);

/// Reads a manifest file. Syntax errors carry line and column.
Manifest load_manifest(const std::string& path);

struct ParsedProblem {
  sode::ChartPtr chart;
  sode::VectorField F;
  std::vector<sode::VectorField> V;
  sode::AnalysisOptions options;
};

/// Parses the expressions; parse errors are rethrown with the manifest key
/// prefixed ("F[1]: ..."), unknown symbols are input errors.
ParsedProblem parse_problem(const Manifest& m);

/// parse_problem followed by the frame and problem constructors (which
/// validate rank and involutivity of V).
sode::SecondOrderProblem build_problem(const Manifest& m);

sode::AnalysisOptions analysis_options(const Manifest& m);

}  // namespace sodeform
