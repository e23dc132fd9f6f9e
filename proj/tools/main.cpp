#include "commands.hpp"
#include "corpus.hpp"
#include "report.hpp"

#include "sode/errors.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

using namespace sodeform;

namespace {

struct Args {
  std::string manifest;
  std::string corpus;
  std::string json_out;
  Overrides overrides;
};

void add_common(CLI::App* sub, Args& a) {
  sub->add_option("manifest", a.manifest, "manifest file (JSON)");
  sub->add_option("--corpus", a.corpus, "use a builtin manifest instead of a file");
  sub->add_option("--seed", a.overrides.seed, "sampling seed");
  sub->add_option("--samples", a.overrides.samples, "sample count for rank and zero tests");
  sub->add_option("--grid", a.overrides.grid, "straightening grid points per parameter");
  sub->add_option("--tol", a.overrides.tolerance, "straightening residual tolerance");
  sub->add_option("--json", a.json_out, "write the machine-readable report here ('-' for stdout)");
}

int execute(Command cmd, const Args& a) {
  Manifest m;
  try {
    if (!a.corpus.empty() && !a.manifest.empty()) throw sode::InputError("give either a manifest path or --corpus");
    if (a.corpus.empty() && a.manifest.empty()) throw sode::InputError("a manifest path or --corpus is required");
    m = a.corpus.empty() ? load_manifest(a.manifest) : corpus_get(a.corpus);
    apply(a.overrides, m);
  } catch (const sode::Error& e) {
    std::cerr << "sodeform: " << e.what() << "\n";
    return InputFail;
  }
  Outcome out = run(cmd, m);
  if (a.json_out == "-") {
    std::cout << out.report.dump(2) << "\n";
  } else {
    std::cout << out.text;
    if (!a.json_out.empty()) {
      std::ofstream f(a.json_out);
      if (!f) {
        std::cerr << "sodeform: cannot write '" << a.json_out << "'\n";
        return InputFail;
      }
      f << out.report.dump(2) << "\n";
    }
  }
  if (out.exit_code == InputFail && out.report.contains("error")) {
    std::cerr << "sodeform: " << out.report["error"]["message"].get<std::string>() << "\n";
  }
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Second-order structure of vector fields: classification, connection data and normal forms"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version);

  Args args;
  std::optional<Command> chosen;
  for (Command c : {Command::Check, Command::Classify, Command::Connection, Command::Quadratic, Command::Straighten,
                    Command::Report}) {
    auto* sub = app.add_subcommand(to_string(c));
    add_common(sub, args);
    sub->callback([&chosen, c] { chosen = c; });
  }
  app.get_subcommand("check")->description("regularity and involutivity gates");
  app.get_subcommand("classify")->description("classify into the parametrized or time-dependent case");
  app.get_subcommand("connection")->description("beta, S, projectors, lifts, connection coefficients");
  app.get_subcommand("quadratic")->description("mixed curvature and the quadratic-force verdict");
  app.get_subcommand("straighten")->description("construct normal coordinates and check residuals");
  app.get_subcommand("report")->description("everything applicable in one document");

  auto* corpus = app.add_subcommand("corpus", "builtin manifests");
  corpus->require_subcommand(1);
  auto* list = corpus->add_subcommand("list", "list builtin manifests");
  std::string show_name;
  auto* show = corpus->add_subcommand("show", "print a builtin manifest");
  show->add_option("name", show_name)->required();

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& e : corpus_list()) std::cout << e.name << "\t" << e.summary << "\n";
    return Pass;
  }
  if (show->parsed()) {
    try {
      std::cout << to_json(corpus_get(show_name)).dump(2) << "\n";
      return Pass;
    } catch (const sode::Error& e) {
      std::cerr << "sodeform: " << e.what() << "\n";
      return InputFail;
    }
  }
  if (!chosen) return InputFail;
  return execute(*chosen, args);
}
