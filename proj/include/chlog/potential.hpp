#pragma once

// Logarithmic Flory-Huggins free energy in the Ginzburg-Landau scaling
//
//   f(phi)   = f_c(phi) - f_e(phi)
//   f_c(phi) = [(1-phi) ln(1-phi) + (1+phi) ln(1+phi)] / (2 theta0)
//   f_e(phi) = (phi^2 - 1) / 2
//
// with the logarithm continued linearly below delta so every quantity is a
// total function of phi.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include "chlog/grid.hpp"
#include "chlog/poisson.hpp"

namespace chlog {

class Mobility {
public:
  Mobility() = default;

  static Mobility constant(double value) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw std::invalid_argument("mobility: constant value must be positive and finite");
    }
    Mobility m;
    m.constant_ = true;
    m.value_ = value;
    return m;
  }

  /// A mobility given as a function of phi; it must be positive for every
  /// argument the solver may pass, including iterates outside [-1, 1].
  static Mobility function(std::function<double(double)> fn, std::string name) {
    Mobility m;
    m.constant_ = false;
    m.fn_ = std::move(fn);
    m.name_ = std::move(name);
    return m;
  }

  bool is_constant() const { return constant_; }
  double constant_value() const { return value_; }
  const std::string& name() const { return name_; }

  double operator()(double phi) const { return constant_ ? value_ : fn_(phi); }

private:
  bool constant_ = true;
  double value_ = 1.0;
  std::function<double(double)> fn_;
  std::string name_;
};

struct ModelParams {
  double epsilon = 0.2;
  double theta0 = 3.0;
  double delta = 1.0e-5;
  double stabilization_a = 1.0 / 16.0;
  Mobility mobility = Mobility::constant(1.0);

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    if (!(theta0 > 0.0)) throw std::invalid_argument("theta0 must be > 0");
    if (!(delta > 0.0 && delta < 0.25)) throw std::invalid_argument("delta must lie in (0, 0.25)");
    if (!(stabilization_a >= 0.0)) throw std::invalid_argument("stabilization_a must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Scalar potential functions.

inline double ln_delta(double x, double delta) {
  return x > delta ? std::log(x) : std::log(delta) + (x - delta) / delta;
}

inline double ln_delta_prime(double x, double delta) { return x > delta ? 1.0 / x : 1.0 / delta; }

/// Antiderivative of ln_delta(x) + 1: x ln x above delta, continued as the
/// C^1 quadratic below.
inline double x_ln_x_delta(double x, double delta) {
  if (x > delta) return x * std::log(x);
  const double d = x - delta;
  return delta * std::log(delta) + (std::log(delta) + 1.0) * d + 0.5 * d * d / delta;
}

/// f_c'. Evaluated on |phi| so that it is exactly odd; where both
/// logarithms are on their unregularized branch a single log is used.
inline double fc_prime(double phi, const ModelParams& p) {
  const double a = std::abs(phi);
  const double k = 0.5 / p.theta0;
  const double v = (1.0 - a > p.delta) ? std::log((1.0 + a) / (1.0 - a))
                                       : ln_delta(1.0 + a, p.delta) - ln_delta(1.0 - a, p.delta);
  return std::copysign(k * v, phi);
}

/// The unregularized f_c' for |phi| < 1, same expression as fc_prime's
/// logarithmic branch.
inline double fc_prime_unregularized(double phi, const ModelParams& p) {
  const double a = std::abs(phi);
  return std::copysign((0.5 / p.theta0) * std::log((1.0 + a) / (1.0 - a)), phi);
}

inline double fc_double_prime(double phi, const ModelParams& p) {
  const double a = std::abs(phi);
  const double k = 0.5 / p.theta0;
  if (1.0 - a > p.delta) return k * 2.0 / ((1.0 - a) * (1.0 + a));
  return k * (ln_delta_prime(1.0 + a, p.delta) + ln_delta_prime(1.0 - a, p.delta));
}

/// Regularized convex part, consistent with fc_prime.
inline double fc(double phi, const ModelParams& p) {
  return (0.5 / p.theta0) * (x_ln_x_delta(1.0 + phi, p.delta) + x_ln_x_delta(1.0 - phi, p.delta));
}

inline double fe(double phi) { return 0.5 * (phi * phi - 1.0); }

// ---------------------------------------------------------------------------
// Field-level helpers and energies.

inline CellField map_fc_prime(const CellField& phi, const ModelParams& p) {
  CellField out(phi.grid());
  for (std::size_t c = 0; c < phi.size(); ++c) out[c] = fc_prime(phi[c], p);
  return out;
}

/// mu = f_c'(phi) - phi - eps^2 lap(phi).
inline CellField chemical_potential(const CellField& phi, const ModelParams& p) {
  CellField mu = map_fc_prime(phi, p);
  mu -= phi;
  mu.axpy(-p.epsilon * p.epsilon, laplacian(phi));
  return mu;
}

struct EnergyValue {
  double value = 0.0;
  /// Some |phi| exceeded 1 - delta, so the regularized branch was used.
  bool saturated = false;
};

inline EnergyValue discrete_energy(const CellField& phi, const ModelParams& p) {
  EnergyValue e;
  double bulk = 0.0;
  for (double v : phi.values()) {
    bulk += fc(v, p) - fe(v);
    if (std::abs(v) > 1.0 - p.delta) e.saturated = true;
  }
  const double g = norm_grad_l2(phi);
  e.value = phi.grid().cell_volume() * bulk + 0.5 * p.epsilon * p.epsilon * g * g;
  return e;
}

struct ModifiedEnergyTerms {
  double energy = 0.0;
  double h_minus_one_term = 0.0;  // ||phi_new - phi_old||_{-1,h}^2 / (4 dt)
  double l2_term = 0.0;           // ||phi_new - phi_old||_2^2 / 2
  double total() const { return energy + h_minus_one_term + l2_term; }
};

/// Pieces of E(phi_new) + ||d||_{-1,h}^2/(4dt) + ||d||_2^2/2, d = phi_new - phi_old.
/// The mean of d must vanish to within mass_tol; what is left of it is
/// projected out before the -1,h solve. tol is relative to ||d||_2.
inline ModifiedEnergyTerms modified_energy_terms(const CellField& phi_new, const CellField& phi_old,
                                                 double dt, const ModelParams& p, double tol = 1.0e-10,
                                                 double mass_tol = 1.0e-6) {
  require_same_grid(phi_new.grid(), phi_old.grid(), "modified_energy_bdf2");
  if (!(dt > 0.0)) throw std::invalid_argument("modified_energy_bdf2: dt must be positive");
  ModifiedEnergyTerms t;
  t.energy = discrete_energy(phi_new, p).value;
  CellField d = phi_new - phi_old;
  const double m = mean(d);
  if (std::abs(m) > mass_tol) {
    throw NonZeroMean("modified_energy_bdf2: phi_new and phi_old differ in mass by " + std::to_string(m));
  }
  const double l2 = norm_l2(d);
  t.l2_term = 0.5 * l2 * l2;
  if (l2 > 0.0) {
    for (double& v : d.values()) v -= m;
    const double hm1 = norm_h_minus_one(d, tol * l2);
    t.h_minus_one_term = hm1 * hm1 / (4.0 * dt);
  }
  return t;
}

inline double modified_energy_bdf2(const CellField& phi_new, const CellField& phi_old, double dt,
                                   const ModelParams& p, double tol = 1.0e-10) {
  return modified_energy_terms(phi_new, phi_old, dt, p, tol).total();
}

}  // namespace chlog
