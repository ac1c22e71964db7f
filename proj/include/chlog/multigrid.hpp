#pragma once

// Nonlinear full approximation storage (FAS) multigrid on cell-centered
// periodic grids.
//
// The cycle is generic over a level operator type satisfying LevelOperator:
// it owns the discrete operator N on one grid, knows how to relax
// N(u) = f in place, and can build the operator one level coarser. The
// coupled Cahn-Hilliard systems, the scalar Allen-Cahn system and the linear
// Poisson problem used for -1,h norms all run through the same cycle.

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chlog/grid.hpp"

namespace chlog {

enum class SweepOrder { red_black, lexicographic };

struct MgConfig {
  int sweeps = 2;          // lambda: pre- and post-smoothing sweeps per level
  double tol = 1.0e-9;     // tau: stop when the combined residual l2 norm is <= tol
  int max_vcycles = 100;
  int coarsest_n = 4;
  int coarse_sweeps = 20;
  SweepOrder order = SweepOrder::red_black;

  void validate() const {
    if (sweeps < 1) throw std::invalid_argument("MgConfig: sweeps (lambda) must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("MgConfig: tol (tau) must be positive");
    if (max_vcycles < 1) throw std::invalid_argument("MgConfig: max_vcycles must be >= 1");
    if (coarsest_n < 2) throw std::invalid_argument("MgConfig: coarsest_n must be >= 2");
    if (coarse_sweeps < 1) throw std::invalid_argument("MgConfig: coarse_sweeps must be >= 1");
  }
};

/// n halves cleanly down to exactly coarsest_n.
inline bool coarsens_to(int n, int coarsest_n) {
  while (n > coarsest_n) {
    if (n % 2 != 0) return false;
    n /= 2;
  }
  return n == coarsest_n;
}

// ---------------------------------------------------------------------------
// Transfer operators.

/// Each coarse cell receives the mean of its 2^dim children.
inline CellField restrict_field(const CellField& fine) {
  const GridSpec& fg = fine.grid();
  if (fg.n() % 2 != 0) throw std::invalid_argument("restrict_field: fine n must be even");
  const GridSpec cg = fg.coarsened();
  CellField out(cg);
  const int nc = cg.n();
  if (fg.dim() == 2) {
    for (int j = 0; j < nc; ++j)
      for (int i = 0; i < nc; ++i) {
        const double s = (fine.at(2 * i, 2 * j) + fine.at(2 * i + 1, 2 * j)) +
                         (fine.at(2 * i, 2 * j + 1) + fine.at(2 * i + 1, 2 * j + 1));
        out.at(i, j) = 0.25 * s;
      }
  } else {
    for (int k = 0; k < nc; ++k)
      for (int j = 0; j < nc; ++j)
        for (int i = 0; i < nc; ++i) {
          const int fi = 2 * i, fj = 2 * j, fk = 2 * k;
          const double lo = (fine.at(fi, fj, fk) + fine.at(fi + 1, fj, fk)) +
                            (fine.at(fi, fj + 1, fk) + fine.at(fi + 1, fj + 1, fk));
          const double hi = (fine.at(fi, fj, fk + 1) + fine.at(fi + 1, fj, fk + 1)) +
                            (fine.at(fi, fj + 1, fk + 1) + fine.at(fi + 1, fj + 1, fk + 1));
          out.at(i, j, k) = 0.125 * (lo + hi);
        }
  }
  return out;
}

/// Piecewise-constant interpolation: every child copies its parent.
inline CellField prolong_field(const CellField& coarse) {
  const GridSpec& cg = coarse.grid();
  const GridSpec fg = cg.refined();
  CellField out(fg);
  const int nf = fg.n();
  const int nz = fg.dim() == 3 ? nf : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < nf; ++j)
      for (int i = 0; i < nf; ++i) out.at(i, j, k) = coarse.at(i / 2, j / 2, k / 2);
  return out;
}

// ---------------------------------------------------------------------------
// Multi-component states.

template <std::size_t K>
using Fields = std::array<CellField, K>;

template <std::size_t K>
Fields<K> restrict_fields(const Fields<K>& u) {
  Fields<K> out;
  for (std::size_t c = 0; c < K; ++c) out[c] = restrict_field(u[c]);
  return out;
}

template <std::size_t K>
Fields<K> prolong_fields(const Fields<K>& u) {
  Fields<K> out;
  for (std::size_t c = 0; c < K; ++c) out[c] = prolong_field(u[c]);
  return out;
}

template <std::size_t K>
Fields<K> difference(const Fields<K>& a, const Fields<K>& b) {
  Fields<K> out = a;
  for (std::size_t c = 0; c < K; ++c) out[c] -= b[c];
  return out;
}

template <std::size_t K>
Fields<K> sum(const Fields<K>& a, const Fields<K>& b) {
  Fields<K> out = a;
  for (std::size_t c = 0; c < K; ++c) out[c] += b[c];
  return out;
}

/// sqrt of the sum of squared component l2 norms.
template <std::size_t K>
double combined_norm(const Fields<K>& r) {
  double acc = 0.0;
  for (const CellField& f : r) acc += inner_product(f, f);
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Level operators.

template <class Op>
concept LevelOperator = requires(const Op& op, typename Op::State& u, const typename Op::State& f,
                                 int sweeps, SweepOrder order) {
  typename Op::State;
  { op.grid() } -> std::convertible_to<GridSpec>;
  { op.apply(f) } -> std::same_as<typename Op::State>;
  op.smooth(u, f, sweeps, order);
  { op.coarsen() } -> std::same_as<Op>;
};

/// Operators whose coefficients depend on the current iterate (lagged
/// mobility) expose relag(); the hierarchy recomputes them before each cycle.
template <class Op>
concept RelaggingOperator = LevelOperator<Op> && requires(Op& op, const typename Op::State& u) {
  { op.lags_on_iterate() } -> std::convertible_to<bool>;
  op.relag(u);
};

/// Operators that pin an invariant of the exact solution after each cycle:
/// the zero mean of a periodic Poisson solution, or the conserved mass of a
/// Cahn-Hilliard step.
/// Operators whose iterates must stay in an admissible set may shorten a
/// coarse-grid correction before it is added.
template <class Op>
concept LimitingOperator = LevelOperator<Op> && requires(const Op& op, const typename Op::State& u,
                                                         typename Op::State& c) {
  op.limit_correction(u, c);
};

template <class Op>
concept GaugedOperator = LevelOperator<Op> && requires(const Op& op, typename Op::State& u,
                                                       const typename Op::State& f) {
  op.fix_gauge(u, f);
};

template <LevelOperator Op>
typename Op::State residual(const Op& op, const typename Op::State& u, const typename Op::State& f) {
  return difference(f, op.apply(u));
}

// ---------------------------------------------------------------------------

class SolverNonConvergence : public std::runtime_error {
public:
  SolverNonConvergence(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const { return history_; }

private:
  std::vector<double> history_;
};

struct SolveReport {
  int vcycles = 0;
  double final_residual = 0.0;
  /// residual_history[c] is the combined residual after c V-cycles.
  std::vector<double> residual_history;
};

template <LevelOperator Op>
class MgHierarchy {
public:
  using State = typename Op::State;

  MgHierarchy(Op fine, const MgConfig& cfg) {
    cfg.validate();
    levels_.push_back(std::move(fine));
    // Grids must keep an even cell count, so a level coarsens only when
    // n is divisible by 4.
    for (int n = levels_.back().grid().n(); n > cfg.coarsest_n && n % 4 == 0 && n / 2 >= cfg.coarsest_n;
         n = levels_.back().grid().n()) {
      levels_.push_back(levels_.back().coarsen());
    }
  }

  std::size_t depth() const { return levels_.size(); }
  const Op& level(std::size_t l) const { return levels_[l]; }
  Op& level(std::size_t l) { return levels_[l]; }
  const Op& finest() const { return levels_.front(); }

  /// Re-evaluates iterate-dependent coefficients on every level from the
  /// current fine approximation. No-op for operators without lagging.
  void relag(const State& fine_u) {
    if constexpr (RelaggingOperator<Op>) {
      if (!levels_.front().lags_on_iterate()) return;
      State u = fine_u;
      levels_.front().relag(u);
      for (std::size_t l = 1; l < levels_.size(); ++l) {
        u = restrict_fields(u);
        levels_[l].relag(u);
      }
    } else {
      (void)fine_u;
    }
  }

private:
  std::vector<Op> levels_;
};

/// One FAS V-cycle on `level`, improving u for N(u) = f in place. The
/// coarsest level of a multilevel hierarchy gets coarse_sweeps sweeps; a
/// single-level hierarchy gets its 2 lambda pre- and post-sweeps only.
template <LevelOperator Op>
void v_cycle(const MgHierarchy<Op>& hier, std::size_t level, typename Op::State& u,
             const typename Op::State& f, const MgConfig& cfg) {
  const Op& op = hier.level(level);
  if (level + 1 == hier.depth()) {
    op.smooth(u, f, hier.depth() == 1 ? 2 * cfg.sweeps : cfg.coarse_sweeps, cfg.order);
    return;
  }
  op.smooth(u, f, cfg.sweeps, cfg.order);

  const Op& coarse = hier.level(level + 1);
  const auto r = residual(op, u, f);
  const auto u_coarse = restrict_fields(u);
  const auto f_coarse = sum(restrict_fields(r), coarse.apply(u_coarse));

  auto v = u_coarse;
  v_cycle(hier, level + 1, v, f_coarse, cfg);

  auto correction = prolong_fields(difference(v, u_coarse));
  if constexpr (LimitingOperator<Op>) op.limit_correction(u, correction);
  for (std::size_t c = 0; c < u.size(); ++c) u[c] += correction[c];

  op.smooth(u, f, cfg.sweeps, cfg.order);
}

/// Runs V-cycles until the combined residual norm is <= cfg.tol. Throws
/// SolverNonConvergence when the budget runs out or the iteration blows up.
template <LevelOperator Op>
SolveReport solve(MgHierarchy<Op>& hier, typename Op::State& u, const typename Op::State& f,
                  const MgConfig& cfg) {
  SolveReport report;
  for (int cycle = 0;; ++cycle) {
    hier.relag(u);
    const double r = combined_norm(residual(hier.finest(), u, f));
    report.residual_history.push_back(r);
    if (!std::isfinite(r)) {
      throw SolverNonConvergence("multigrid: non-finite residual after " + std::to_string(cycle) +
                                     " V-cycles",
                                 report.residual_history);
    }
    if (r <= cfg.tol) {
      report.vcycles = cycle;
      report.final_residual = r;
      return report;
    }
    if (cycle == cfg.max_vcycles) {
      std::ostringstream msg;
      msg << "multigrid: residual " << r << " above tolerance " << cfg.tol << " after " << cycle
          << " V-cycles";
      throw SolverNonConvergence(msg.str(), report.residual_history);
    }
    v_cycle(hier, 0, u, f, cfg);
    if constexpr (GaugedOperator<Op>) hier.finest().fix_gauge(u, f);
  }
}

template <LevelOperator Op>
SolveReport solve(const Op& fine, typename Op::State& u, const typename Op::State& f,
                  const MgConfig& cfg) {
  MgHierarchy<Op> hier(fine, cfg);
  return solve(hier, u, f, cfg);
}

}  // namespace chlog
