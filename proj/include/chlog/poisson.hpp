#pragma once

// Zero-mean periodic Poisson solves, -lap(psi) = rhs, and the discrete
// -1,h norm built on them. Solved with the linear specialization of the FAS
// cycle.

#include <cmath>
#include <stdexcept>

#include "chlog/grid.hpp"
#include "chlog/multigrid.hpp"

namespace chlog {

/// N(psi) = -lap(psi). Singular on constants; the gauge is fixed to zero
/// mean after every cycle.
class PoissonOperator {
public:
  using State = Fields<1>;

  explicit PoissonOperator(const GridSpec& grid) : grid_(grid) {}

  const GridSpec& grid() const { return grid_; }

  State apply(const State& u) const {
    State out{laplacian(u[0])};
    out[0] *= -1.0;
    return out;
  }

  void smooth(State& u, const State& f, int sweeps, SweepOrder order) const {
    const double h2 = grid_.spacing() * grid_.spacing();
    const double inv_diag = 1.0 / (2.0 * grid_.dim());
    const int dim = grid_.dim();
    auto& psi = u[0];
    const auto& rhs = f[0];
    auto relax = [&](std::size_t idx, const Neighbors& nb) {
      double s = 0.0;
      for (int a = 0; a < dim; ++a) s += psi[nb.minus[a]] + psi[nb.plus[a]];
      psi[idx] = (h2 * rhs[idx] + s) * inv_diag;
    };
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      if (order == SweepOrder::red_black) {
        detail::for_each_cell(grid_, relax, 0);
        detail::for_each_cell(grid_, relax, 1);
      } else {
        detail::for_each_cell(grid_, relax);
      }
    }
  }

  PoissonOperator coarsen() const { return PoissonOperator(grid_.coarsened()); }

  void fix_gauge(State& u, const State&) const {
    const double m = mean(u[0]);
    for (double& v : u[0].values()) v -= m;
  }

private:
  GridSpec grid_;
};

class NonZeroMean : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline MgConfig poisson_config(double tol) {
  MgConfig cfg;
  cfg.sweeps = 2;
  cfg.tol = tol;
  cfg.max_vcycles = 400;
  cfg.coarsest_n = 2;
  cfg.coarse_sweeps = 40;
  return cfg;
}

}  // namespace detail

/// Returns the zero-mean psi with ||-lap(psi) - rhs||_2 <= tol. The mean of
/// rhs must vanish up to tol * max(1, ||rhs||_inf); that residual mean is
/// projected out before solving.
inline CellField solve_poisson_zero_mean(const CellField& rhs, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_poisson_zero_mean: tol must be positive");
  const double m = mean(rhs);
  if (std::abs(m) > tol * std::max(1.0, norm_linf(rhs))) {
    throw NonZeroMean("solve_poisson_zero_mean: right-hand side mean " + std::to_string(m) +
                      " is not zero");
  }
  PoissonOperator::State f{rhs};
  for (double& v : f[0].values()) v -= m;
  PoissonOperator::State psi{CellField(rhs.grid())};
  const MgConfig cfg = detail::poisson_config(tol);
  solve(PoissonOperator(rhs.grid()), psi, f, cfg);
  return psi[0];
}

/// ||u||_{-1,h} = sqrt(<u, (-lap)^{-1} u>).
inline double norm_h_minus_one(const CellField& u, double tol) {
  const CellField psi = solve_poisson_zero_mean(u, tol);
  return std::sqrt(std::max(0.0, inner_product(u, psi)));
}

}  // namespace chlog
