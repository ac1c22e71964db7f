#pragma once

// Time steppers for the Cahn-Hilliard and Allen-Cahn equations with the
// regularized logarithmic potential.
//
// Every Cahn-Hilliard scheme is posed as N(phi, mu) = S with
//
//   N1 = phi - c div(M grad mu)
//   N2 = mu - f_c'(phi) + kappa lap(phi) + sigma phi
//
// and differs only in (c, kappa, sigma), in where the face mobility M is
// evaluated, and in the source S:
//
//   scheme    c        kappa          sigma  mobility at    S1                  S2
//   CS1       dt       eps^2          0      phi^n          phi^n               -phi^n
//   BE        dt       eps^2          1      iterate        phi^n               0
//   BDF2_ES   2dt/3    eps^2 + A dt   0      2phi^n-phi^n-1 4/3phi^n-1/3phi^n-1 A dt lap(phi^n) - (2phi^n-phi^n-1)
//   BDF2      2dt/3    eps^2          1      iterate        4/3phi^n-1/3phi^n-1 0

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chlog/grid.hpp"
#include "chlog/multigrid.hpp"
#include "chlog/potential.hpp"

namespace chlog {

enum class SchemeKind { CS1, BE, BDF2_ES, BDF2, AC1 };

inline std::string to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::CS1: return "CS1";
    case SchemeKind::BE: return "BE";
    case SchemeKind::BDF2_ES: return "BDF2_ES";
    case SchemeKind::BDF2: return "BDF2";
    case SchemeKind::AC1: return "AC1";
  }
  return "?";
}

inline SchemeKind parse_scheme_kind(const std::string& s) {
  for (SchemeKind k : {SchemeKind::CS1, SchemeKind::BE, SchemeKind::BDF2_ES, SchemeKind::BDF2, SchemeKind::AC1})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown scheme '" + s + "' (expected CS1, BE, BDF2_ES, BDF2 or AC1)");
}

inline bool is_second_order(SchemeKind k) { return k == SchemeKind::BDF2_ES || k == SchemeKind::BDF2; }
inline bool is_cahn_hilliard(SchemeKind k) { return k != SchemeKind::AC1; }

struct SchemeState {
  CellField phi;                       // phi^n
  std::optional<CellField> phi_prev;   // phi^{n-1}, second-order schemes only
  CellField mu;                        // latest chemical potential
  double time = 0.0;
  long step = 0;
};

/// State at t = 0 with the chemical potential consistent with phi0.
inline SchemeState initial_state(const CellField& phi0, const ModelParams& p) {
  SchemeState s;
  s.phi = phi0;
  s.mu = chemical_potential(phi0, p);
  return s;
}

// ---------------------------------------------------------------------------
// Coupled (phi, mu) operator.

struct CoupledCoefficients {
  double mobility_dt = 0.0;     // c
  double gradient_coeff = 0.0;  // kappa
  double linear_coeff = 0.0;    // sigma
};

class CoupledOperator {
public:
  using State = Fields<2>;

  /// mobility_source is the cell field whose face averages feed M; with
  /// lag_on_iterate it is replaced by the current phi before every cycle.
  CoupledOperator(ModelParams params, CoupledCoefficients coef, CellField mobility_source,
                  bool lag_on_iterate)
      : grid_(mobility_source.grid()),
        params_(std::move(params)),
        coef_(coef),
        lag_(std::move(mobility_source)),
        lag_on_iterate_(lag_on_iterate && !params_.mobility.is_constant()) {
    update_mobility();
  }

  const GridSpec& grid() const { return grid_; }
  const ModelParams& params() const { return params_; }
  const CoupledCoefficients& coefficients() const { return coef_; }
  const FaceField& mobility_faces() const { return mobility_; }
  const CellField& mobility_source() const { return lag_; }

  bool lags_on_iterate() const { return lag_on_iterate_; }
  void relag(const State& u) {
    lag_ = u[0];
    update_mobility();
  }

  State apply(const State& u) const {
    State out{CellField(grid_), CellField(grid_)};
    detail::dispatch_dim(grid_.dim(), [&](auto d) { apply_impl<decltype(d)::value>(u, out); });
    return out;
  }

  /// Block nonlinear Gauss-Seidel. At each cell the pair (phi, mu) solves
  /// the 2x2 system obtained by freezing neighbours at their latest values
  /// and linearizing f_c' about the current phi; the sigma*phi term is taken
  /// at the current value so the determinant stays positive. An update that
  /// would reach |phi| >= 1 - delta from inside is cut to half that distance.
  void smooth(State& u, const State& f, int sweeps, SweepOrder order) const {
    detail::dispatch_dim(grid_.dim(), [&](auto d) {
      if (params_.mobility.is_constant())
        smooth_impl<decltype(d)::value, true>(u, f, sweeps, order);
      else
        smooth_impl<decltype(d)::value, false>(u, f, sweeps, order);
    });
  }

  /// Determinant of the local 2x2 system the smoother solves at cell idx.
  double local_determinant(const State& u, std::size_t idx) const {
    const double inv_h2 = 1.0 / (grid_.spacing() * grid_.spacing());
    double msum = 0.0;
    detail::for_each_cell(grid_, [&](std::size_t i, const Neighbors& nb) {
      if (i != idx) return;
      for (int a = 0; a < grid_.dim(); ++a) msum += mobility_.axis(a)[i] + mobility_.axis(a)[nb.minus[a]];
    });
    const double a12 = coef_.mobility_dt * inv_h2 * msum;
    const double a21 = -fc_double_prime(u[0][idx], params_) - 2.0 * grid_.dim() * coef_.gradient_coeff * inv_h2;
    return 1.0 - a12 * a21;
  }

  /// Where u + c would put |phi| at or beyond 1 - delta, the cell's
  /// correction is scaled so that phi moves halfway to that bound.
  void limit_correction(const State& u, State& c) const {
    const double bound = 1.0 - params_.delta;
    for (std::size_t i = 0; i < grid_.cells(); ++i) {
      const double x = u[0][i];
      const double dx = c[0][i];
      if (std::abs(x + dx) < bound || std::abs(x) >= bound) continue;
      const double theta = 0.5 * (std::copysign(bound, dx) - x) / dx;
      c[0][i] *= theta;
      c[1][i] *= theta;
    }
  }

  /// The phi equation's operator part is a divergence with zero sum, so the
  /// exact solution has mean(phi) = mean(f[0]). Shifts phi onto that mean.
  void fix_gauge(State& u, const State& f) const {
    const double shift = mean(f[0]) - mean(u[0]);
    for (double& v : u[0].values()) v += shift;
  }

  CoupledOperator coarsen() const {
    return CoupledOperator(params_, coef_, restrict_field(lag_), lag_on_iterate_);
  }

private:
  template <int D>
  void apply_impl(const State& u, State& out) const {
    const double inv_h = 1.0 / grid_.spacing();
    const auto phi = u[0].values();
    const auto mu = u[1].values();
    const double c = coef_.mobility_dt;
    const double kappa = coef_.gradient_coeff;
    const double sigma = coef_.linear_coeff;
    detail::for_each_cell(grid_, [&](std::size_t idx, const Neighbors& nb) {
      out[0][idx] = phi[idx] - c * detail::div_mobility_grad_at(mobility_, mu, idx, nb, D, inv_h);
      out[1][idx] = mu[idx] - fc_prime(phi[idx], params_) + kappa * detail::laplacian_at(phi, idx, nb, D, inv_h) +
                    sigma * phi[idx];
    });
  }

  template <int D, bool ConstantMobility>
  void smooth_impl(State& u, const State& f, int sweeps, SweepOrder order) const {
    const double inv_h2 = 1.0 / (grid_.spacing() * grid_.spacing());
    const double c = coef_.mobility_dt * inv_h2;
    const double k = coef_.gradient_coeff * inv_h2;
    const double sigma = coef_.linear_coeff;
    const double bound = 1.0 - params_.delta;
    const double m0 = ConstantMobility ? params_.mobility.constant_value() : 0.0;
    std::array<const double*, 3> mob{};
    for (int a = 0; a < D; ++a) mob[a] = mobility_.axis(a).data();
    double* phi = u[0].values().data();
    double* mu = u[1].values().data();
    const double* s1 = f[0].values().data();
    const double* s2 = f[1].values().data();
    auto relax = [&](std::size_t idx, const Neighbors& nb) {
      double msum = 0.0;
      double mmu = 0.0;
      double phin = 0.0;
      for (int a = 0; a < D; ++a) {
        phin += phi[nb.plus[a]] + phi[nb.minus[a]];
        if constexpr (ConstantMobility) {
          mmu += mu[nb.plus[a]] + mu[nb.minus[a]];
        } else {
          const double mp = mob[a][idx];
          const double mm = mob[a][nb.minus[a]];
          msum += mp + mm;
          mmu += mp * mu[nb.plus[a]] + mm * mu[nb.minus[a]];
        }
      }
      if constexpr (ConstantMobility) {
        msum = 2.0 * D * m0;
        mmu *= m0;
      }
      const double p0 = phi[idx];
      const double d1 = fc_prime(p0, params_);
      const double d2 = fc_double_prime(p0, params_);
      const double a12 = c * msum;
      const double a21 = -d2 - 2.0 * D * k;
      const double b1 = s1[idx] + c * mmu;
      const double b2 = s2[idx] + d1 - p0 * d2 - sigma * p0 - k * phin;
      const double det = 1.0 - a12 * a21;
      double pn = (b1 - a12 * b2) / det;
      double mn = (b2 - a21 * b1) / det;
      // A linearization far from the singular end can overshoot past it;
      // such an update goes halfway to the bound instead.
      if (std::abs(pn) >= bound && std::abs(p0) < bound) {
        const double theta = 0.5 * (std::copysign(bound, pn) - p0) / (pn - p0);
        mn = mu[idx] + theta * (mn - mu[idx]);
        pn = p0 + theta * (pn - p0);
      }
      phi[idx] = pn;
      mu[idx] = mn;
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

  void update_mobility() {
    if (params_.mobility.is_constant()) {
      mobility_ = FaceField(grid_, params_.mobility.constant_value());
      return;
    }
    mobility_ = face_average(lag_);
    for (int a = 0; a < grid_.dim(); ++a)
      for (double& v : mobility_.axis(a)) v = params_.mobility(v);
    detail::require_positive_mobility(mobility_);
  }

  GridSpec grid_;
  ModelParams params_;
  CoupledCoefficients coef_;
  CellField lag_;
  FaceField mobility_;
  bool lag_on_iterate_ = false;
};

struct SystemAssembly {
  SchemeKind kind = SchemeKind::CS1;
  double dt = 0.0;
  CoupledOperator op;
  Fields<2> source;

  Fields<2> apply_n(const CellField& phi, const CellField& mu) const { return op.apply({phi, mu}); }
};

namespace detail {

inline void require_history(const SchemeState& s, const char* where) {
  if (!s.phi_prev) throw std::invalid_argument(std::string(where) + ": second-order scheme needs phi^{n-1}");
  require_same_grid(s.phi.grid(), s.phi_prev->grid(), where);
}

inline CellField bdf2_source(const SchemeState& s) {
  CellField out = (4.0 / 3.0) * s.phi;
  out.axpy(-1.0 / 3.0, *s.phi_prev);
  return out;
}

inline CellField extrapolated(const SchemeState& s) {
  CellField out = 2.0 * s.phi;
  out -= *s.phi_prev;
  return out;
}

}  // namespace detail

inline SystemAssembly assemble_cs1(const SchemeState& s, const ModelParams& p, double dt) {
  const double eps2 = p.epsilon * p.epsilon;
  return SystemAssembly{SchemeKind::CS1, dt, CoupledOperator(p, {dt, eps2, 0.0}, s.phi, false),
                        {s.phi, -1.0 * s.phi}};
}

inline SystemAssembly assemble_be(const SchemeState& s, const ModelParams& p, double dt) {
  const double eps2 = p.epsilon * p.epsilon;
  return SystemAssembly{SchemeKind::BE, dt, CoupledOperator(p, {dt, eps2, 1.0}, s.phi, true),
                        {s.phi, CellField(s.phi.grid())}};
}

inline SystemAssembly assemble_bdf2es(const SchemeState& s, const ModelParams& p, double dt) {
  detail::require_history(s, "assemble_bdf2es");
  const double eps2 = p.epsilon * p.epsilon;
  const double stab = p.stabilization_a * dt;
  CellField check = detail::extrapolated(s);
  CellField s2 = stab * laplacian(s.phi);
  s2 -= check;
  return SystemAssembly{SchemeKind::BDF2_ES, dt,
                        CoupledOperator(p, {2.0 * dt / 3.0, eps2 + stab, 0.0}, check, false),
                        {detail::bdf2_source(s), std::move(s2)}};
}

inline SystemAssembly assemble_bdf2(const SchemeState& s, const ModelParams& p, double dt) {
  detail::require_history(s, "assemble_bdf2");
  const double eps2 = p.epsilon * p.epsilon;
  return SystemAssembly{SchemeKind::BDF2, dt, CoupledOperator(p, {2.0 * dt / 3.0, eps2, 1.0}, s.phi, true),
                        {detail::bdf2_source(s), CellField(s.phi.grid())}};
}

inline SystemAssembly assemble(SchemeKind kind, const SchemeState& s, const ModelParams& p, double dt) {
  switch (kind) {
    case SchemeKind::CS1: return assemble_cs1(s, p, dt);
    case SchemeKind::BE: return assemble_be(s, p, dt);
    case SchemeKind::BDF2_ES: return assemble_bdf2es(s, p, dt);
    case SchemeKind::BDF2: return assemble_bdf2(s, p, dt);
    case SchemeKind::AC1: break;
  }
  throw std::invalid_argument("assemble: AC1 is not a coupled Cahn-Hilliard system");
}

// ---------------------------------------------------------------------------
// Allen-Cahn, scalar system
//   phi + dt M (f_c'(phi) - eps^2 lap(phi)) = phi^n + dt M phi^n.

class AllenCahnOperator {
public:
  using State = Fields<1>;

  AllenCahnOperator(const GridSpec& grid, ModelParams params, double dt_mobility)
      : grid_(grid), params_(std::move(params)), dtm_(dt_mobility) {}

  const GridSpec& grid() const { return grid_; }

  State apply(const State& u) const {
    const double inv_h = 1.0 / grid_.spacing();
    const double eps2 = params_.epsilon * params_.epsilon;
    const auto phi = u[0].values();
    State out{CellField(grid_)};
    detail::for_each_cell(grid_, [&](std::size_t idx, const Neighbors& nb) {
      out[0][idx] = phi[idx] + dtm_ * (fc_prime(phi[idx], params_) -
                                       eps2 * detail::laplacian_at(phi, idx, nb, grid_.dim(), inv_h));
    });
    return out;
  }

  /// Pointwise Newton-linearized Gauss-Seidel.
  void smooth(State& u, const State& f, int sweeps, SweepOrder order) const {
    const double inv_h2 = 1.0 / (grid_.spacing() * grid_.spacing());
    const double k = dtm_ * params_.epsilon * params_.epsilon * inv_h2;
    const int dim = grid_.dim();
    auto& phi = u[0];
    const auto& rhs = f[0];
    auto relax = [&](std::size_t idx, const Neighbors& nb) {
      double phin = 0.0;
      for (int a = 0; a < dim; ++a) phin += phi[nb.plus[a]] + phi[nb.minus[a]];
      const double p0 = phi[idx];
      const double d2 = fc_double_prime(p0, params_);
      const double diag = 1.0 + dtm_ * d2 + 2.0 * dim * k;
      phi[idx] = (rhs[idx] - dtm_ * (fc_prime(p0, params_) - d2 * p0) + k * phin) / diag;
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

  AllenCahnOperator coarsen() const { return AllenCahnOperator(grid_.coarsened(), params_, dtm_); }

private:
  GridSpec grid_;
  ModelParams params_;
  double dtm_;
};

// ---------------------------------------------------------------------------
// Step drivers.

struct StepReport {
  int vcycles = 0;
  double final_residual = 0.0;
  std::vector<double> residual_history;
  double phi_min = 0.0;
  double phi_max = 0.0;
};

struct StepResult {
  SchemeState state;
  StepReport report;
};

namespace detail {

inline StepReport make_report(const SolveReport& r, const CellField& phi) {
  return StepReport{r.vcycles, r.final_residual, r.residual_history, min_value(phi), max_value(phi)};
}

}  // namespace detail

/// Solves an assembled Cahn-Hilliard system from the initial guess (phi, mu).
inline std::pair<Fields<2>, SolveReport> solve_system(const SystemAssembly& sys, const CellField& phi0,
                                                      const CellField& mu0, const MgConfig& mg) {
  Fields<2> u{phi0, mu0};
  MgHierarchy<CoupledOperator> hier(sys.op, mg);
  SolveReport r = solve(hier, u, sys.source, mg);
  return {std::move(u), std::move(r)};
}

inline StepResult ac1_step(const SchemeState& s, const ModelParams& p, double dt, const MgConfig& mg) {
  if (!p.mobility.is_constant()) {
    throw std::invalid_argument("ac1_step: Allen-Cahn supports constant mobility only");
  }
  const double dtm = dt * p.mobility.constant_value();
  AllenCahnOperator op(s.phi.grid(), p, dtm);
  Fields<1> rhs{s.phi};
  rhs[0].axpy(dtm, s.phi);
  Fields<1> u{s.phi};
  const SolveReport r = solve(op, u, rhs, mg);

  StepResult out;
  out.state.phi = std::move(u[0]);
  out.state.mu = map_fc_prime(out.state.phi, p);
  out.state.mu -= s.phi;
  out.state.mu.axpy(-p.epsilon * p.epsilon, laplacian(out.state.phi));
  out.state.time = s.time + dt;
  out.state.step = s.step + 1;
  out.report = detail::make_report(r, out.state.phi);
  return out;
}

/// Advances one step. Second-order schemes without phi^{n-1} take one CS1
/// step to generate it.
inline StepResult step(const SchemeState& s, SchemeKind kind, const ModelParams& p, double dt, const MgConfig& mg) {
  if (!(dt >= 0.0)) throw std::invalid_argument("step: dt must be >= 0");
  if (kind == SchemeKind::AC1) return ac1_step(s, p, dt, mg);

  const SchemeKind effective = (is_second_order(kind) && !s.phi_prev) ? SchemeKind::CS1 : kind;
  const SystemAssembly sys = assemble(effective, s, p, dt);
  auto [u, r] = solve_system(sys, s.phi, s.mu, mg);

  StepResult out;
  if (is_second_order(kind)) out.state.phi_prev = s.phi;
  out.state.phi = std::move(u[0]);
  out.state.mu = std::move(u[1]);
  out.state.time = s.time + dt;
  out.state.step = s.step + 1;
  out.report = detail::make_report(r, out.state.phi);
  return out;
}

}  // namespace chlog
