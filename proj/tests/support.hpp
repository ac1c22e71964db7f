#pragma once

// Independent reference implementations for the tests: explicit-index
// stencils and a dense exact-Jacobian Newton solver for the coupled
// Cahn-Hilliard step systems. Nothing here calls the library's operators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "chlog/grid.hpp"
#include "chlog/schemes.hpp"

namespace testing_support {

using chlog::CellField;
using chlog::GridSpec;

inline CellField uniform_field(const GridSpec& g, double lo, double hi, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  CellField f(g);
  for (double& v : f.values()) v = dist(rng);
  return f;
}

inline double max_abs_diff(const CellField& a, const CellField& b) {
  double m = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) m = std::max(m, std::abs(a[c] - b[c]));
  return m;
}

/// Cell index helper with wrap-around written out per axis.
struct Lattice {
  int dim;
  int n;
  std::size_t at(int i, int j, int k) const {
    auto w = [this](int v) { return static_cast<std::size_t>((v % n + n) % n); };
    return w(i) + static_cast<std::size_t>(n) * (w(j) + static_cast<std::size_t>(n) * (dim == 3 ? w(k) : 0));
  }
  std::size_t cells() const { return dim == 3 ? std::size_t(n) * n * n : std::size_t(n) * n; }
  /// Calls f(idx, i, j, k) for every cell.
  template <class F>
  void each(F&& f) const {
    const int nz = dim == 3 ? n : 1;
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) f(at(i, j, k), i, j, k);
  }
  std::size_t shift(int i, int j, int k, int axis, int s) const {
    int c[3] = {i, j, k};
    c[axis] += s;
    return at(c[0], c[1], c[2]);
  }
};

inline CellField naive_laplacian(const CellField& u) {
  const GridSpec& g = u.grid();
  const Lattice L{g.dim(), g.n()};
  const double h2 = g.spacing() * g.spacing();
  CellField out(g);
  L.each([&](std::size_t c, int i, int j, int k) {
    double acc = 0.0;
    for (int a = 0; a < g.dim(); ++a) acc += u[L.shift(i, j, k, a, 1)] + u[L.shift(i, j, k, a, -1)] - 2.0 * u[c];
    out[c] = acc / h2;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Dense Newton oracle for
//
//   phi - c div(M grad mu)              = S1
//   mu - f_c'(phi) + kappa lap(phi) + sigma phi = S2
//
// with face mobility M(avg of lag) where lag is either a fixed field or the
// unknown phi itself. f_c' is the plain logarithm (states stay in (-1, 1)).

struct DenseProblem {
  GridSpec grid;
  double theta0 = 3.0;
  double c = 0.0;
  double kappa = 0.0;
  double sigma = 0.0;
  std::function<double(double)> mobility = [](double) { return 1.0; };
  std::function<double(double)> mobility_prime = [](double) { return 0.0; };
  bool mobility_on_unknown = false;
  std::vector<double> lag;  // used when !mobility_on_unknown
  std::vector<double> s1, s2;
};

struct DenseSolution {
  std::vector<double> phi, mu;
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

inline double fcp(double x, double theta0) { return 0.5 / theta0 * (std::log(1.0 + x) - std::log(1.0 - x)); }
inline double fcpp(double x, double theta0) { return 0.5 / theta0 * (1.0 / (1.0 + x) + 1.0 / (1.0 - x)); }

}  // namespace detail

inline Eigen::VectorXd dense_residual(const DenseProblem& P, const Eigen::VectorXd& x) {
  const Lattice L{P.grid.dim(), P.grid.n()};
  const std::size_t N = L.cells();
  const double h2 = P.grid.spacing() * P.grid.spacing();
  Eigen::VectorXd F(2 * N);
  auto lagv = [&](std::size_t c) { return P.mobility_on_unknown ? x[c] : P.lag[c]; };
  L.each([&](std::size_t c, int i, int j, int k) {
    double div = 0.0, lap = 0.0;
    for (int a = 0; a < P.grid.dim(); ++a) {
      const std::size_t p = L.shift(i, j, k, a, 1), m = L.shift(i, j, k, a, -1);
      const double Mp = P.mobility(0.5 * (lagv(c) + lagv(p)));
      const double Mm = P.mobility(0.5 * (lagv(c) + lagv(m)));
      div += Mp * (x[N + p] - x[N + c]) - Mm * (x[N + c] - x[N + m]);
      lap += x[p] + x[m] - 2.0 * x[c];
    }
    F[c] = x[c] - P.c * div / h2 - P.s1[c];
    F[N + c] = x[N + c] - detail::fcp(x[c], P.theta0) + P.kappa * lap / h2 + P.sigma * x[c] - P.s2[c];
  });
  return F;
}

inline Eigen::MatrixXd dense_jacobian(const DenseProblem& P, const Eigen::VectorXd& x) {
  const Lattice L{P.grid.dim(), P.grid.n()};
  const std::size_t N = L.cells();
  const double h2 = P.grid.spacing() * P.grid.spacing();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * N, 2 * N);
  auto lagv = [&](std::size_t c) { return P.mobility_on_unknown ? x[c] : P.lag[c]; };
  L.each([&](std::size_t c, int i, int j, int k) {
    J(c, c) += 1.0;
    J(N + c, N + c) += 1.0;
    J(N + c, c) += -detail::fcpp(x[c], P.theta0) + P.sigma;
    for (int a = 0; a < P.grid.dim(); ++a) {
      for (int s : {1, -1}) {
        const std::size_t q = L.shift(i, j, k, a, s);
        const double avg = 0.5 * (lagv(c) + lagv(q));
        const double M = P.mobility(avg);
        // Face flux term: -c/h2 * M (mu_q - mu_c)
        J(c, N + q) += -P.c * M / h2;
        J(c, N + c) += P.c * M / h2;
        if (P.mobility_on_unknown) {
          const double dM = 0.5 * P.mobility_prime(avg);
          const double g = x[N + q] - x[N + c];
          J(c, c) += -P.c * dM * g / h2;
          J(c, q) += -P.c * dM * g / h2;
        }
        J(N + c, q) += P.kappa / h2;
        J(N + c, c) += -P.kappa / h2;
      }
    }
  });
  return J;
}

/// Damped Newton from (phi0, mu0); damping keeps every phi in (-1, 1).
inline DenseSolution dense_newton(const DenseProblem& P, const std::vector<double>& phi0,
                                  const std::vector<double>& mu0, double tol = 1.0e-13, int max_iter = 60) {
  const std::size_t N = phi0.size();
  Eigen::VectorXd x(2 * N);
  for (std::size_t c = 0; c < N; ++c) {
    x[c] = phi0[c];
    x[N + c] = mu0[c];
  }
  DenseSolution out;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd F = dense_residual(P, x);
    out.residual = F.lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.residual < tol) break;
    const Eigen::VectorXd dx = dense_jacobian(P, x).partialPivLu().solve(-F);
    double t = 1.0;
    for (;;) {
      const Eigen::VectorXd trial = x + t * dx;
      bool inside = true;
      for (std::size_t c = 0; c < N; ++c) inside = inside && std::abs(trial[c]) < 1.0;
      if (inside && (t < 1.0 / 1024 || dense_residual(P, trial).lpNorm<Eigen::Infinity>() < out.residual)) {
        x = trial;
        break;
      }
      if (t < 1.0e-6) throw std::runtime_error("dense_newton: line search failed");
      t *= 0.5;
    }
  }
  if (out.residual >= tol) throw std::runtime_error("dense_newton: no convergence");
  out.phi.assign(x.data(), x.data() + N);
  out.mu.assign(x.data() + N, x.data() + 2 * N);
  return out;
}

/// Oracle-side assembly of one step of the given scheme, built from the
/// equations directly. phi_prev is ignored by CS1 and BE.
inline DenseProblem scheme_problem(chlog::SchemeKind kind, const CellField& phi_n, const CellField& phi_prev,
                                   double epsilon, double theta0, double stab_a, double dt) {
  using chlog::SchemeKind;
  DenseProblem P;
  P.grid = phi_n.grid();
  P.theta0 = theta0;
  const std::size_t N = phi_n.size();
  const double eps2 = epsilon * epsilon;
  P.s1.resize(N);
  P.s2.resize(N);
  P.lag.resize(N);
  const CellField lap_n = naive_laplacian(phi_n);
  for (std::size_t c = 0; c < N; ++c) {
    switch (kind) {
      case SchemeKind::CS1:
        P.s1[c] = phi_n[c];
        P.s2[c] = -phi_n[c];
        P.lag[c] = phi_n[c];
        break;
      case SchemeKind::BE:
        P.s1[c] = phi_n[c];
        P.s2[c] = 0.0;
        break;
      case SchemeKind::BDF2_ES: {
        const double ext = 2.0 * phi_n[c] - phi_prev[c];
        P.s1[c] = 4.0 / 3.0 * phi_n[c] - 1.0 / 3.0 * phi_prev[c];
        P.s2[c] = stab_a * dt * lap_n[c] - ext;
        P.lag[c] = ext;
        break;
      }
      case SchemeKind::BDF2:
        P.s1[c] = 4.0 / 3.0 * phi_n[c] - 1.0 / 3.0 * phi_prev[c];
        P.s2[c] = 0.0;
        break;
      default: throw std::invalid_argument("scheme_problem: Cahn-Hilliard schemes only");
    }
  }
  const bool bdf = kind == SchemeKind::BDF2_ES || kind == SchemeKind::BDF2;
  P.c = bdf ? 2.0 * dt / 3.0 : dt;
  P.kappa = kind == SchemeKind::BDF2_ES ? eps2 + stab_a * dt : eps2;
  P.sigma = (kind == SchemeKind::BE || kind == SchemeKind::BDF2) ? 1.0 : 0.0;
  P.mobility_on_unknown = (kind == SchemeKind::BE || kind == SchemeKind::BDF2);
  return P;
}

}  // namespace testing_support
