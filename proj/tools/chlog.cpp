// chlog: command-line front end for the Cahn-Hilliard / Allen-Cahn solvers.
//
//   chlog --config FILE [--seed N] [--serial] [--dump-config] <run|convergence|mg-bench|compare>
//
// Exit codes: 0 success, 2 config error, 3 solver non-convergence, 4 I/O error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chlog/commands.hpp"

namespace {

chlog::RunConfig load(const std::string& path, std::optional<std::uint64_t> seed, const std::string& output) {
  chlog::RunConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw chlog::ConfigError("--config", "cannot open " + path);
    c = chlog::parse_config(in);
  }
  if (seed) c.init.seed = *seed;
  if (!output.empty()) c.output.directory = output;
  chlog::validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cahn-Hilliard and Allen-Cahn solver with the logarithmic Flory-Huggins potential"};
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  bool dump = false;
  bool serial = false;
  app.add_option("-c,--config", config_path, "INI configuration file");
  app.add_option("--seed", seed, "override init.seed");
  app.add_option("-o,--output", output_dir, "override output.directory");
  app.add_flag("--dump-config", dump, "print the effective configuration and exit");
  app.add_flag("--serial", serial, "deterministic serial execution (the solver is always serial)");
  app.require_subcommand(0, 1);
  app.add_subcommand("run", "time integration: series.csv and snapshots");
  app.add_subcommand("convergence", "refinement-path convergence table: convergence.csv");
  app.add_subcommand("mg-bench", "multigrid residual histories: mg_residuals.csv");
  app.add_subcommand("compare", "scheme comparison against a small-step target: comparison.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : chlog::exit_config;
  }
  (void)serial;

  try {
    const chlog::RunConfig cfg = load(config_path, seed, output_dir);
    if (dump) {
      chlog::dump_config(cfg, std::cout);
      return chlog::exit_ok;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << "chlog: no subcommand given (run, convergence, mg-bench, compare)\n";
      return chlog::exit_config;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "run")
      chlog::cmd_run(cfg, std::cerr);
    else if (cmd == "convergence")
      chlog::cmd_convergence(cfg, std::cerr);
    else if (cmd == "mg-bench")
      chlog::cmd_mg_bench(cfg, std::cerr);
    else
      chlog::cmd_compare(cfg, std::cerr);
    return chlog::exit_ok;
  } catch (const chlog::IoError& e) {
    std::cerr << "chlog: I/O error: " << e.what() << "\n";
    return chlog::exit_io;
  } catch (const chlog::SimulationFailure& e) {
    std::cerr << "chlog: solver failure: " << e.what() << "\n";
    return chlog::exit_solver;
  } catch (const chlog::SolverNonConvergence& e) {
    std::cerr << "chlog: solver failure: " << e.what() << "\n";
    return chlog::exit_solver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "chlog: config error: " << e.what() << "\n";
    return chlog::exit_config;
  }
}
