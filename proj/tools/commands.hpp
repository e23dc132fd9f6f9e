#pragma once

#include "manifest.hpp"

#include "json.hpp"

#include <optional>
#include <string>

namespace sodeform {

enum class Command { Check, Classify, Connection, Quadratic, Straighten, Report };

std::string to_string(Command c);
std::optional<Command> command_from_string(const std::string& s);

enum ExitCode { Pass = 0, MathFail = 1, InputFail = 2, NumericFail = 3 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> grid;
  std::optional<double> tolerance;
};

void apply(const Overrides& o, Manifest& m);

struct Outcome {
  int exit_code = Pass;
  nlohmann::json report;  // machine-readable document; wall-clock data only under "timings"
  std::string text;       // human-readable summary
};

/// Runs one command. Library errors are caught and mapped to exit codes 2 and 3.
Outcome run(Command c, const Manifest& m);

/// The report without its "timings" key, serialized; the determinism contract applies to this string.
std::string canonical(const nlohmann::json& report);

}  // namespace sodeform
