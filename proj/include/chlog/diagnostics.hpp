#pragma once

// Trajectory instrumentation and the experiment harnesses: refinement-path
// convergence, multigrid complexity and the scheme comparison against a
// small-time-step target.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chlog/grid.hpp"
#include "chlog/multigrid.hpp"
#include "chlog/potential.hpp"
#include "chlog/schemes.hpp"

namespace chlog {

struct StepRecord {
  long step = 0;
  double time = 0.0;
  double energy = 0.0;
  std::optional<double> modified_energy;
  double mass = 0.0;
  double phi_min = 0.0;
  double phi_max = 0.0;
  int vcycles = 0;
  double final_residual = 0.0;
  bool saturation_flag = false;
};

struct Trajectory {
  std::vector<StepRecord> records;
  SchemeState final_state;
  long steps = 0;
  long total_vcycles = 0;
  // Extremes over every iterate, recorded or not, including phi^0.
  double phi_min = std::numeric_limits<double>::infinity();
  double phi_max = -std::numeric_limits<double>::infinity();
  double max_mass_drift = 0.0;

  double average_vcycles() const { return steps > 0 ? static_cast<double>(total_vcycles) / steps : 0.0; }
};

class SimulationFailure : public std::runtime_error {
public:
  SimulationFailure(const std::string& what, Trajectory partial, std::vector<double> history)
      : std::runtime_error(what), partial_(std::move(partial)), history_(std::move(history)) {}
  const Trajectory& partial() const { return partial_; }
  const std::vector<double>& residual_history() const { return history_; }

private:
  Trajectory partial_;
  std::vector<double> history_;
};

struct RunOptions {
  long record_every = 1;
  bool compute_energy = true;
  bool compute_modified_energy = false;
  /// Called after every accepted step (and once for the initial state).
  std::function<void(const SchemeState&)> on_step;
};

/// Number of dt steps that lands on t exactly, or throws.
inline long steps_to_reach(double t, double dt) {
  if (t == 0.0) return 0;
  if (!(dt > 0.0) || !(t > 0.0)) throw std::invalid_argument("steps_to_reach: need t >= 0 and dt > 0");
  const double q = t / dt;
  const long n = std::lround(q);
  if (n < 1 || std::abs(q - static_cast<double>(n)) > 1.0e-9 * q) {
    throw std::invalid_argument("dt = " + std::to_string(dt) + " does not divide t = " + std::to_string(t));
  }
  return n;
}

namespace detail {

inline StepRecord make_record(const SchemeState& s, const ModelParams& p, double dt, const StepReport* rep,
                              const RunOptions& opt) {
  StepRecord r;
  r.step = s.step;
  r.time = s.time;
  if (opt.compute_energy) {
    const EnergyValue e = discrete_energy(s.phi, p);
    r.energy = e.value;
    r.saturation_flag = e.saturated;
  }
  if (opt.compute_modified_energy && s.phi_prev) r.modified_energy = modified_energy_bdf2(s.phi, *s.phi_prev, dt, p);
  r.mass = mean(s.phi);
  r.phi_min = min_value(s.phi);
  r.phi_max = max_value(s.phi);
  if (rep) {
    r.vcycles = rep->vcycles;
    r.final_residual = rep->final_residual;
  }
  return r;
}

}  // namespace detail

/// Steps from init.time to t_final with fixed dt. Records step 0, every
/// record_every-th step and the final step. A failed solve raises
/// SimulationFailure carrying everything recorded so far.
inline Trajectory run_simulation(const SchemeState& init, SchemeKind kind, const ModelParams& p, double dt,
                                 double t_final, const MgConfig& mg, const RunOptions& opt = {}) {
  p.validate();
  mg.validate();
  if (opt.record_every < 1) throw std::invalid_argument("run_simulation: record_every must be >= 1");
  const long nsteps = steps_to_reach(t_final - init.time, dt);

  Trajectory traj;
  SchemeState s = init;
  const double mass0 = mean(s.phi);
  auto track = [&](const SchemeState& st) {
    traj.phi_min = std::min(traj.phi_min, min_value(st.phi));
    traj.phi_max = std::max(traj.phi_max, max_value(st.phi));
    traj.max_mass_drift = std::max(traj.max_mass_drift, std::abs(mean(st.phi) - mass0));
  };
  track(s);
  traj.records.push_back(detail::make_record(s, p, dt, nullptr, opt));
  if (opt.on_step) opt.on_step(s);

  for (long n = 1; n <= nsteps; ++n) {
    StepResult res;
    try {
      res = step(s, kind, p, dt, mg);
    } catch (const SolverNonConvergence& e) {
      traj.final_state = s;
      traj.steps = n - 1;
      throw SimulationFailure("step " + std::to_string(n) + ": " + e.what(), std::move(traj), e.residual_history());
    }
    s = std::move(res.state);
    s.time = init.time + n * dt;
    traj.total_vcycles += res.report.vcycles;
    track(s);
    if (n % opt.record_every == 0 || n == nsteps) traj.records.push_back(detail::make_record(s, p, dt, &res.report, opt));
    if (opt.on_step) opt.on_step(s);
  }
  traj.steps = nsteps;
  traj.final_state = std::move(s);
  return traj;
}

// ---------------------------------------------------------------------------
// Initial data.

/// phi(x, y) = 1.8 (1 - cos(4 pi x / 3.2))/2 (1 - cos(2 pi y / 3.2))/2 - 0.9.
inline CellField init_convergence_profile(const GridSpec& g) {
  if (g.dim() != 2 || g.length() != 3.2) {
    throw std::invalid_argument("init_convergence_profile: needs a 2-D grid with length 3.2");
  }
  constexpr double pi = std::numbers::pi;
  return sample(g, [](double x, double y, double) {
    return 1.8 * ((1.0 - std::cos(4.0 * x * pi / 3.2)) / 2.0) * ((1.0 - std::cos(2.0 * y * pi / 3.2)) / 2.0) - 0.9;
  });
}

/// Cell values mean + amplitude * (2u - 1), u uniform on [0, 1) taken as the
/// top 53 bits of successive std::mt19937_64 outputs, in storage order.
inline CellField random_field(const GridSpec& g, double mean_value, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CellField out(g);
  for (double& v : out.values()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = mean_value + amplitude * (2.0 * u - 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Refinement-path convergence.

struct ConvergenceRow {
  double h_coarse = 0.0;
  double h_fine = 0.0;
  double error_l2 = 0.0;
  std::optional<double> rate;
};

/// Root-mean-square difference between a coarse solution and the fine one
/// restricted to the coarse grid, i.e. ||.||_2 / |Omega|^{1/2}.
inline double coarse_fine_difference(const CellField& coarse, const CellField& fine) {
  CellField r = fine;
  while (r.grid().n() > coarse.grid().n()) r = restrict_field(r);
  require_same_grid(r.grid(), coarse.grid(), "coarse_fine_difference");
  return norm_l2(coarse - r) / std::sqrt(coarse.grid().domain_volume());
}

inline std::vector<ConvergenceRow> rows_from_errors(const std::vector<double>& hs, const std::vector<double>& errs) {
  std::vector<ConvergenceRow> rows;
  for (std::size_t i = 0; i < errs.size(); ++i) {
    ConvergenceRow row{hs[i], hs[i + 1], errs[i], std::nullopt};
    if (i > 0) row.rate = std::log2(errs[i - 1] / errs[i]);
    rows.push_back(row);
  }
  return rows;
}

inline void require_doubling(const std::vector<int>& resolutions) {
  if (resolutions.size() < 2) throw std::invalid_argument("convergence study needs at least two resolutions");
  for (std::size_t i = 1; i < resolutions.size(); ++i)
    if (resolutions[i] != 2 * resolutions[i - 1])
      throw std::invalid_argument("convergence study: consecutive resolutions must differ by a factor of 2");
}

struct ConvergenceSetup {
  SchemeKind kind = SchemeKind::CS1;
  ModelParams params;
  double length = 3.2;
  double t_final = 0.4;
  double dt_over_h2 = 0.4;  // refinement path dt = factor * h^2
  MgConfig mg;
  bool record_energy = false;  // keep a record with the energy at every step
};

/// Runs every resolution to t_final on the path dt = factor h^2 from the
/// convergence profile, then compares adjacent pairs on the coarse grid.
/// on_final, when set, receives each final field.
inline std::vector<ConvergenceRow> convergence_study(const ConvergenceSetup& setup, const std::vector<int>& resolutions,
                                                     const std::function<void(int, const Trajectory&)>& on_final = {}) {
  require_doubling(resolutions);
  std::vector<CellField> finals;
  std::vector<double> hs;
  for (int n : resolutions) {
    const GridSpec g(2, n, setup.length);
    const double dt = setup.dt_over_h2 * g.spacing() * g.spacing();
    RunOptions opt;
    opt.record_every = setup.record_energy ? 1 : std::numeric_limits<long>::max();
    opt.compute_energy = setup.record_energy;
    Trajectory t = run_simulation(initial_state(init_convergence_profile(g), setup.params), setup.kind, setup.params,
                                  dt, setup.t_final, setup.mg, opt);
    if (on_final) on_final(n, t);
    finals.push_back(t.final_state.phi);
    hs.push_back(g.spacing());
  }
  std::vector<double> errs;
  for (std::size_t i = 0; i + 1 < finals.size(); ++i) errs.push_back(coarse_fine_difference(finals[i], finals[i + 1]));
  return rows_from_errors(hs, errs);
}

// ---------------------------------------------------------------------------
// Multigrid complexity.

struct ComplexityCurve {
  double theta0 = 0.0;
  int grid_n = 0;
  /// Combined residual after 0, 1, 2, ... V-cycles at the final step.
  std::vector<double> residuals;
  std::vector<int> vcycles_per_step;
};

struct ComplexitySetup {
  SchemeKind kind = SchemeKind::CS1;
  ModelParams params;  // theta0 is overridden per curve
  double length = 3.2;
  double dt = 0.1;
  int steps = 10;
  MgConfig mg;
};

inline std::vector<ComplexityCurve> mg_complexity_study(const ComplexitySetup& setup, const std::vector<double>& theta0s,
                                                        const std::vector<int>& grid_sizes) {
  std::vector<ComplexityCurve> curves;
  for (double th : theta0s) {
    for (int n : grid_sizes) {
      ModelParams p = setup.params;
      p.theta0 = th;
      const GridSpec g(2, n, setup.length);
      ComplexityCurve curve{th, n, {}, {}};
      SchemeState s = initial_state(init_convergence_profile(g), p);
      for (int k = 0; k < setup.steps; ++k) {
        StepResult r = step(s, setup.kind, p, setup.dt, setup.mg);
        curve.vcycles_per_step.push_back(r.report.vcycles);
        if (k + 1 == setup.steps) curve.residuals = r.report.residual_history;
        s = std::move(r.state);
      }
      curves.push_back(std::move(curve));
    }
  }
  return curves;
}

/// Successive reduction factors r[c+1]/r[c] for c >= first.
inline std::vector<double> reduction_factors(const std::vector<double>& residuals, std::size_t first = 1) {
  std::vector<double> out;
  for (std::size_t c = first; c + 1 < residuals.size(); ++c) out.push_back(residuals[c + 1] / residuals[c]);
  return out;
}

/// (max - min) / mean of the values; 0 for fewer than two values.
inline double relative_spread(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double lo = v.front(), hi = v.front(), s = 0.0;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    s += x;
  }
  return (hi - lo) / (s / static_cast<double>(v.size()));
}

// ---------------------------------------------------------------------------
// Scheme comparison against a small-time-step target.

struct ComparisonEntry {
  std::string label;
  SchemeKind kind = SchemeKind::CS1;
  std::optional<double> stabilization_a;  // overrides params.stabilization_a
};

struct ComparisonRow {
  std::string label;
  double dt = 0.0;
  std::vector<double> errors;  // one per probe time
  double avg_vcycles = 0.0;
  double max_phi = 0.0;
};

struct ComparisonSetup {
  ModelParams params;
  MgConfig mg;
  std::vector<double> probe_times{0.1, 0.5, 1.0};
  SchemeKind target_kind = SchemeKind::BDF2;
  double target_dt = 5.0e-6;
};

struct ProbedRun {
  std::vector<CellField> probes;
  Trajectory trajectory;
};

/// Runs to the last probe time and keeps phi at each probe time.
inline ProbedRun run_with_probes(const CellField& phi0, SchemeKind kind, const ModelParams& p, double dt,
                                 const std::vector<double>& probe_times, const MgConfig& mg) {
  if (probe_times.empty()) throw std::invalid_argument("comparison: probe_times must not be empty");
  std::map<long, std::size_t> at;
  for (std::size_t i = 0; i < probe_times.size(); ++i) at[steps_to_reach(probe_times[i], dt)] = i;
  ProbedRun out;
  out.probes.resize(probe_times.size());
  RunOptions opt;
  opt.record_every = std::numeric_limits<long>::max();
  opt.compute_energy = false;
  opt.on_step = [&](const SchemeState& s) {
    auto it = at.find(s.step);
    if (it != at.end()) out.probes[it->second] = s.phi;
  };
  double t_end = 0.0;
  for (double t : probe_times) t_end = std::max(t_end, t);
  out.trajectory = run_simulation(initial_state(phi0, p), kind, p, dt, t_end, mg, opt);
  return out;
}

inline std::vector<ComparisonRow> comparison_study(const ComparisonSetup& setup, const CellField& phi0,
                                                   const std::vector<ComparisonEntry>& entries,
                                                   const std::vector<double>& dts,
                                                   const ProbedRun* precomputed_target = nullptr) {
  ProbedRun target_storage;
  if (!precomputed_target) {
    target_storage = run_with_probes(phi0, setup.target_kind, setup.params, setup.target_dt, setup.probe_times, setup.mg);
    precomputed_target = &target_storage;
  }
  std::vector<ComparisonRow> rows;
  for (double dt : dts) {
    for (const ComparisonEntry& e : entries) {
      ModelParams p = setup.params;
      if (e.stabilization_a) p.stabilization_a = *e.stabilization_a;
      const ProbedRun run = run_with_probes(phi0, e.kind, p, dt, setup.probe_times, setup.mg);
      ComparisonRow row{e.label, dt, {}, run.trajectory.average_vcycles(), run.trajectory.phi_max};
      for (std::size_t i = 0; i < setup.probe_times.size(); ++i)
        row.errors.push_back(norm_l2(run.probes[i] - precomputed_target->probes[i]));
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Energy audit.

struct AuditReport {
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::vector<long> violating_steps;
  /// Largest increase E[k+1] - E[k] seen, positive or not.
  double max_increase = -std::numeric_limits<double>::infinity();
};

/// Flags E[k+1] > E[k] + max(abs_slack, rel_slack |E[k]|) between
/// consecutive records. With use_modified only records carrying a modified
/// energy take part.
inline AuditReport energy_audit(const std::vector<StepRecord>& records, bool use_modified, double abs_slack,
                                double rel_slack = 0.0) {
  AuditReport rep;
  std::optional<double> prev;
  for (const StepRecord& r : records) {
    std::optional<double> e = use_modified ? r.modified_energy : std::optional<double>(r.energy);
    if (!e) continue;
    if (prev) {
      ++rep.checked;
      const double inc = *e - *prev;
      rep.max_increase = std::max(rep.max_increase, inc);
      if (inc > std::max(abs_slack, rel_slack * std::abs(*prev))) {
        ++rep.violations;
        rep.violating_steps.push_back(r.step);
      }
    }
    prev = e;
  }
  return rep;
}

}  // namespace chlog
