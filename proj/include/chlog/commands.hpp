#pragma once

// The experiment subcommands behind the chlog executable. Each one takes a
// validated RunConfig, writes its artifacts under output.directory and
// returns normally on success. Failures surface as exceptions: ConfigError
// (exit 2), SimulationFailure or SolverNonConvergence (exit 3) and IoError
// (exit 4).

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "chlog/config.hpp"
#include "chlog/diagnostics.hpp"
#include "chlog/io.hpp"

namespace chlog {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_solver = 3, exit_io = 4 };

/// Snapshot as of a given state, named phi_<step> inside snapshots/.
inline void write_state_snapshot(const RunConfig& c, const SchemeState& s) {
  std::ostringstream name;
  name << "phi_" << std::setw(8) << std::setfill('0') << s.step;
  SnapshotMeta m;
  m.time = s.time;
  m.step = s.step;
  m.scheme = to_string(c.scheme);
  m.params = c.params();
  m.mobility = c.mobility;
  write_snapshot(std::filesystem::path(c.output.directory) / "snapshots" / name.str(), s.phi, m);
}

inline void write_table(const std::filesystem::path& path, const auto& writer) {
  std::ofstream out = open_output(path);
  writer(out);
  finish_output(out, path);
}

/// Time integration. Writes series.csv and snapshots; on a failed solve the
/// partial series is still written before the failure propagates.
inline Trajectory cmd_run(const RunConfig& c, std::ostream& log) {
  const std::filesystem::path dir(c.output.directory);
  const ModelParams p = c.params();
  RunOptions opt;
  opt.record_every = c.output.record_every;
  opt.compute_modified_energy = is_second_order(c.scheme);
  const long nsteps = steps_to_reach(c.t_final, c.dt);
  opt.on_step = [&](const SchemeState& s) {
    const bool periodic = c.output.snapshot_every > 0 && s.step % c.output.snapshot_every == 0;
    if (periodic || s.step == nsteps) write_state_snapshot(c, s);
  };
  Trajectory t;
  try {
    t = run_simulation(initial_state(initial_field(c), p), c.scheme, p, c.dt, c.t_final, c.mg, opt);
  } catch (const SimulationFailure& f) {
    write_table(dir / "series.csv", [&](std::ostream& o) { write_series_csv(o, f.partial().records); });
    throw;
  }
  write_table(dir / "series.csv", [&](std::ostream& o) { write_series_csv(o, t.records); });
  log << "run: " << t.steps << " steps, phi in [" << detail::format_double(t.phi_min) << ", "
      << detail::format_double(t.phi_max) << "], average V-cycles " << t.average_vcycles() << "\n";
  return t;
}

inline std::vector<ConvergenceRow> cmd_convergence(const RunConfig& c, std::ostream& log) {
  if (c.dim != 2 || c.length != 3.2) throw ConfigError("model.length", "the convergence study needs dim = 2 and length = 3.2");
  ConvergenceSetup s;
  s.kind = c.scheme;
  s.params = c.params();
  s.length = c.length;
  s.t_final = c.t_final;
  s.dt_over_h2 = c.convergence.dt_over_h2;
  s.mg = c.mg;
  const auto rows = convergence_study(s, c.convergence.resolutions, [&](int n, const Trajectory& t) {
    log << "convergence: n = " << n << " done, " << t.steps << " steps\n";
  });
  write_table(std::filesystem::path(c.output.directory) / "convergence.csv",
              [&](std::ostream& o) { write_convergence_csv(o, rows); });
  return rows;
}

inline std::vector<ComplexityCurve> cmd_mg_bench(const RunConfig& c, std::ostream& log) {
  if (c.dim != 2 || c.length != 3.2) throw ConfigError("model.length", "mg-bench needs dim = 2 and length = 3.2");
  ComplexitySetup s;
  s.kind = c.scheme;
  s.params = c.params();
  s.length = c.length;
  s.dt = c.mg_bench.dt;
  s.steps = c.mg_bench.steps;
  s.mg = c.mg;
  const auto curves = mg_complexity_study(s, c.mg_bench.theta0s, c.mg_bench.sizes);
  for (const ComplexityCurve& k : curves)
    log << "mg-bench: theta0 = " << k.theta0 << ", n = " << k.grid_n << ", " << k.residuals.size() - 1
        << " V-cycles at the final step\n";
  write_table(std::filesystem::path(c.output.directory) / "mg_residuals.csv",
              [&](std::ostream& o) { write_mg_residuals_csv(o, curves); });
  return curves;
}

inline std::vector<ComparisonRow> cmd_compare(const RunConfig& c, std::ostream& log) {
  ComparisonSetup s;
  s.params = c.params();
  s.mg = c.mg;
  s.probe_times = c.compare.probe_times;
  s.target_kind = parse_scheme_kind(c.compare.target_scheme);
  s.target_dt = c.compare.target_dt;
  std::vector<ComparisonEntry> entries;
  for (const std::string& e : c.compare.schemes) entries.push_back(parse_comparison_entry(e));
  const auto rows = comparison_study(s, initial_field(c), entries, c.compare.dts);
  for (const ComparisonRow& r : rows)
    log << "compare: " << r.label << " dt = " << r.dt << " final error " << r.errors.back() << "\n";
  write_table(std::filesystem::path(c.output.directory) / "comparison.csv",
              [&](std::ostream& o) { write_comparison_csv(o, rows, s.probe_times); });
  return rows;
}

}  // namespace chlog
