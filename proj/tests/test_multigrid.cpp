#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <random>

#include <Eigen/Dense>

#include "chlog/multigrid.hpp"
#include "chlog/poisson.hpp"
#include "chlog/schemes.hpp"
#include "support.hpp"

using namespace chlog;
using testing_support::Lattice;
using testing_support::max_abs_diff;
using testing_support::uniform_field;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ModelParams model(double eps = 0.2, double theta0 = 3.0) {
  ModelParams p;
  p.epsilon = eps;
  p.theta0 = theta0;
  return p;
}

Mobility degenerate_mobility(double m0) {
  return Mobility::function([m0](double x) { return m0 + std::max(0.0, 1.0 - x * x); }, "test");
}

}  // namespace

TEST_CASE("restriction averages children", "[multigrid]") {
  const GridSpec g(2, 4, 1.0);
  CHECK(restrict_field(CellField(g, 0.7)) == CellField(g.coarsened(), 0.7));
  CellField checker(g);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) checker.at(i, j) = ((i + j) % 2 == 0) ? 1.0 : -1.0;
  CHECK(restrict_field(checker) == CellField(g.coarsened(), 0.0));

  for (int dim : {2, 3}) {
    const GridSpec f(dim, 8, 2.0);
    const CellField u = uniform_field(f, -1.0, 1.0, 17u);
    CHECK_THAT(mean(restrict_field(u)), WithinAbs(mean(u), 1e-15));
    const CellField r = restrict_field(u);
    double s = 0.0;
    for (int dk = 0; dk < (dim == 3 ? 2 : 1); ++dk)
      for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) s += u.at(2 + di, 4 + dj, dk);
    CHECK_THAT(r.at(1, 2, 0), WithinRel(s / (dim == 3 ? 8.0 : 4.0), 1e-15));
  }
}

TEST_CASE("restrict after prolong is the identity, exactly", "[multigrid]") {
  for (int dim : {2, 3}) {
    const GridSpec c(dim, 4, 1.0);
    const CellField u = uniform_field(c, -3.0, 3.0, 7u);
    CHECK(restrict_field(prolong_field(u)) == u);
    CHECK(prolong_field(CellField(c, 2.5)) == CellField(c.refined(), 2.5));
  }
}

TEST_CASE("prolongation and restriction are adjoint", "[multigrid]") {
  for (int dim : {2, 3}) {
    const GridSpec c(dim, 4, 1.7);
    const GridSpec f = c.refined();
    const CellField u = uniform_field(c, -1.0, 1.0, 1u);
    const CellField v = uniform_field(f, -1.0, 1.0, 2u);
    // With h-weighted inner products the scale factor is 1.
    CHECK_THAT(inner_product(prolong_field(u), v), WithinRel(inner_product(u, restrict_field(v)), 1e-13));
    // Unweighted sums pick up 2^dim.
    double fine = 0.0, coarse = 0.0;
    const CellField pu = prolong_field(u), rv = restrict_field(v);
    for (std::size_t k = 0; k < pu.size(); ++k) fine += pu[k] * v[k];
    for (std::size_t k = 0; k < u.size(); ++k) coarse += u[k] * rv[k];
    CHECK_THAT(fine, WithinRel(std::pow(2.0, dim) * coarse, 1e-13));
  }
}

TEST_CASE("hierarchy depth", "[multigrid]") {
  MgConfig cfg;
  CHECK(coarsens_to(64, 4));
  CHECK_FALSE(coarsens_to(12, 4));
  const ModelParams p = model();
  auto depth = [&](int n, int coarsest) {
    MgConfig c = cfg;
    c.coarsest_n = coarsest;
    const GridSpec g(2, n, 3.2);
    SchemeState s = initial_state(CellField(g, 0.1), p);
    return MgHierarchy<CoupledOperator>(assemble_cs1(s, p, 0.01).op, c).depth();
  };
  CHECK(depth(64, 4) == 5);
  CHECK(depth(64, 64) == 1);
  CHECK(depth(12, 4) == 2);
}

TEST_CASE("Poisson Gauss-Seidel on a 2x2 grid matches a hand-rolled sweep", "[multigrid]") {
  const GridSpec g(2, 2, 1.0);  // h = 1/2
  const PoissonOperator op(g);
  PoissonOperator::State u{CellField(g)}, f{CellField(g)};
  const double u0[4] = {0.3, -0.2, 0.5, 0.1};
  const double f0[4] = {1.0, 2.0, -1.0, 0.5};
  for (int c = 0; c < 4; ++c) {
    u[0][c] = u0[c];
    f[0][c] = f0[c];
  }
  auto hand = [&](const int* order) {
    double w[4] = {u0[0], u0[1], u0[2], u0[3]};
    // On a 2-periodic lattice both neighbours along an axis are the same cell.
    const int xn[4] = {1, 0, 3, 2};
    const int yn[4] = {2, 3, 0, 1};
    for (int s = 0; s < 4; ++s) {
      const int c = order[s];
      w[c] = (0.25 * f0[c] + 2.0 * w[xn[c]] + 2.0 * w[yn[c]]) / 4.0;
    }
    return std::vector<double>(w, w + 4);
  };
  const int lex[4] = {0, 1, 2, 3};
  const int rb[4] = {0, 3, 1, 2};
  PoissonOperator::State a = u;
  op.smooth(a, f, 1, SweepOrder::lexicographic);
  const auto hl = hand(lex);
  for (int c = 0; c < 4; ++c) CHECK_THAT(a[0][c], WithinAbs(hl[c], 1e-15));
  PoissonOperator::State b = u;
  op.smooth(b, f, 1, SweepOrder::red_black);
  const auto hr = hand(rb);
  for (int c = 0; c < 4; ++c) CHECK_THAT(b[0][c], WithinAbs(hr[c], 1e-15));
}

TEST_CASE("coupled smoother matches a hand-rolled local Newton sweep", "[multigrid]") {
  const GridSpec g(2, 4, 3.2);
  ModelParams p = model();
  p.mobility = degenerate_mobility(0.1);
  const CellField phin = uniform_field(g, -0.7, 0.7, 3u);
  SchemeState s = initial_state(phin, p);
  const SystemAssembly sys = assemble_cs1(s, p, 0.05);
  Fields<2> u{uniform_field(g, -0.6, 0.6, 4u), uniform_field(g, -1.0, 1.0, 5u)};
  Fields<2> mg = u;
  sys.op.smooth(mg, sys.source, 1, SweepOrder::lexicographic);

  // Oracle: visit cells in storage order and solve the linearized 2x2
  // system built from the equations with Eigen.
  const Lattice L{2, 4};
  std::vector<double> phi(u[0].values().begin(), u[0].values().end());
  std::vector<double> mu(u[1].values().begin(), u[1].values().end());
  const double h2 = g.spacing() * g.spacing(), dt = 0.05, eps2 = 0.04, k = 0.5 / 3.0;
  auto M = [&](double x) { return 0.1 + std::max(0.0, 1.0 - x * x); };
  L.each([&](std::size_t c, int i, int j, int kk) {
    double msum = 0.0, mmu = 0.0, nphi = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int sgn : {1, -1}) {
        const std::size_t q = L.shift(i, j, kk, a, sgn);
        const double m = M(0.5 * (phin[c] + phin[q]));
        msum += m;
        mmu += m * mu[q];
        nphi += phi[q];
      }
    const double x = phi[c];
    const double f1 = k * (std::log(1 + x) - std::log(1 - x));
    const double f2 = k * (1 / (1 + x) + 1 / (1 - x));
    Eigen::Matrix2d A;
    A << 1.0, dt * msum / h2, -f2 - 4.0 * eps2 / h2, 1.0;
    Eigen::Vector2d b(sys.source[0][c] + dt * mmu / h2, sys.source[1][c] + f1 - f2 * x - eps2 * nphi / h2);
    const Eigen::Vector2d z = A.lu().solve(b);
    phi[c] = z[0];
    mu[c] = z[1];
  });
  for (std::size_t c = 0; c < phi.size(); ++c) {
    CHECK_THAT(mg[0][c], WithinAbs(phi[c], 1e-12));
    CHECK_THAT(mg[1][c], WithinAbs(mu[c], 1e-12));
  }
}

TEST_CASE("Cramer determinant is positive over random states", "[multigrid]") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const GridSpec g(2, 4, 1.0);
  long checked = 0;
  double smallest = 1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    ModelParams p = model(0.01 + 0.5 * U(rng), 0.5 + 5.0 * U(rng));
    p.delta = std::pow(10.0, -1.0 - 5.0 * U(rng));
    if (trial % 2) p.mobility = degenerate_mobility(1e-3 + U(rng));
    p.stabilization_a = U(rng);
    const double dt = std::pow(10.0, -6.0 + 6.0 * U(rng));
    SchemeState s = initial_state(uniform_field(g, -1.5, 1.5, 1000u + trial), p);
    s.phi_prev = uniform_field(g, -1.5, 1.5, 5000u + trial);
    const SchemeKind kinds[4] = {SchemeKind::CS1, SchemeKind::BE, SchemeKind::BDF2_ES, SchemeKind::BDF2};
    const SystemAssembly sys = assemble(kinds[trial % 4], s, p, dt);
    for (int rep = 0; rep < 100 / 16 + 1; ++rep) {
      const Fields<2> u{uniform_field(g, -2.0, 2.0, 9000u + 16 * trial + rep), CellField(g)};
      for (std::size_t c = 0; c < g.cells(); ++c) {
        const double det = sys.op.local_determinant(u, c);
        smallest = std::min(smallest, det);
        ++checked;
        REQUIRE(det > 0.0);
      }
    }
  }
  CHECK(checked >= 100000);
  CHECK(smallest >= 1.0);
}

TEST_CASE("residual is affine in mu and scales with the perturbation", "[multigrid]") {
  const GridSpec g(2, 8, 3.2);
  ModelParams p = model();
  SchemeState s = initial_state(uniform_field(g, -0.5, 0.5, 1u), p);
  for (SchemeKind k : {SchemeKind::CS1, SchemeKind::BE}) {
    const SystemAssembly sys = assemble(k, s, p, 0.01);
    const CellField phi = uniform_field(g, -0.5, 0.5, 2u);
    const CellField m1 = uniform_field(g, -1.0, 1.0, 3u), m2 = uniform_field(g, -1.0, 1.0, 4u);
    auto r = [&](const CellField& mu) { return residual(sys.op, Fields<2>{phi, mu}, sys.source); };
    const auto a = r(m1 + m2), b = r(CellField(g)), c = r(m1), d = r(m2);
    for (int comp = 0; comp < 2; ++comp) {
      const CellField lhs = a[comp] + b[comp], rhs = c[comp] + d[comp];
      CHECK(max_abs_diff(lhs, rhs) <= 1e-12 * std::max(1.0, norm_linf(rhs)));
    }
  }
  // A field that is exact by construction: f = N(u).
  const SystemAssembly sys = assemble_cs1(s, p, 0.01);
  const Fields<2> exact{uniform_field(g, -0.5, 0.5, 5u), uniform_field(g, -1.0, 1.0, 6u)};
  const Fields<2> f = sys.op.apply(exact);
  CHECK(combined_norm(residual(sys.op, exact, f)) <= 1e-13 * combined_norm(f));
  const Fields<2> dir{uniform_field(g, -1.0, 1.0, 7u), uniform_field(g, -1.0, 1.0, 8u)};
  std::vector<double> ratio;
  for (double eta : {1e-3, 1e-4, 1e-5}) {
    Fields<2> u = exact;
    u[0].axpy(eta, dir[0]);
    u[1].axpy(eta, dir[1]);
    ratio.push_back(combined_norm(residual(sys.op, u, f)) / eta);
  }
  CHECK_THAT(ratio[1], WithinRel(ratio[0], 0.05));
  CHECK_THAT(ratio[2], WithinRel(ratio[1], 0.05));
}

TEST_CASE("a V-cycle leaves an exact solution unchanged", "[multigrid]") {
  for (int dim : {2, 3}) {
    const GridSpec g(dim, dim == 2 ? 32 : 8, 3.2);
    ModelParams p = model();
    SchemeState s = initial_state(uniform_field(g, -0.5, 0.5, 1u), p);
    s.phi_prev = uniform_field(g, -0.5, 0.5, 2u);
    for (SchemeKind k : {SchemeKind::CS1, SchemeKind::BDF2_ES}) {
      const SystemAssembly sys = assemble(k, s, p, 0.01);
      const Fields<2> exact{uniform_field(g, -0.5, 0.5, 3u), uniform_field(g, -1.0, 1.0, 4u)};
      const Fields<2> f = sys.op.apply(exact);
      MgConfig cfg;
      MgHierarchy<CoupledOperator> hier(sys.op, cfg);
      Fields<2> u = exact;
      v_cycle(hier, 0, u, f, cfg);
      CHECK(max_abs_diff(u[0], exact[0]) <= 1e-12);
      CHECK(max_abs_diff(u[1], exact[1]) <= 1e-11);
      cfg.tol = 1e-9;
      u = exact;
      CHECK(solve(hier, u, f, cfg).vcycles == 0);
    }
  }
}

TEST_CASE("a single-level hierarchy smooths 2 lambda times", "[multigrid]") {
  const GridSpec g(2, 8, 3.2);
  const ModelParams p = model();
  SchemeState s = initial_state(uniform_field(g, -0.5, 0.5, 1u), p);
  const SystemAssembly sys = assemble_cs1(s, p, 0.01);
  MgConfig cfg;
  cfg.coarsest_n = 8;
  cfg.sweeps = 3;
  MgHierarchy<CoupledOperator> hier(sys.op, cfg);
  REQUIRE(hier.depth() == 1);
  Fields<2> a{s.phi, s.mu}, b = a;
  v_cycle(hier, 0, a, sys.source, cfg);
  sys.op.smooth(b, sys.source, 6, cfg.order);
  CHECK(a[0] == b[0]);
  CHECK(a[1] == b[1]);
}

TEST_CASE("Poisson V-cycle contraction on 64^2", "[multigrid]") {
  const GridSpec g(2, 64, 1.0);
  CellField rhs = uniform_field(g, -1.0, 1.0, 12u);
  const double m = mean(rhs);
  for (double& v : rhs.values()) v -= m;
  PoissonOperator::State psi{CellField(g)}, f{rhs};
  MgConfig cfg = detail::poisson_config(1e-10);
  const SolveReport rep = solve(PoissonOperator(g), psi, f, cfg);
  const auto& h = rep.residual_history;
  REQUIRE(h.size() >= 3);
  const double factor = std::pow(h.back() / h[1], 1.0 / (h.size() - 2));
  std::printf("Poisson 64^2 mean contraction factor: %.4f over %zu cycles\n", factor, h.size() - 1);
  CHECK(factor <= 0.2);
  // The solution satisfies -lap(psi) = rhs and has zero mean.
  CellField lap = laplacian(psi[0]);
  lap *= -1.0;
  CHECK(norm_l2(lap - rhs) <= 1e-10);
  CHECK(std::abs(mean(psi[0])) <= 1e-14);
}

TEST_CASE("both sweep orders converge on a Cahn-Hilliard step", "[multigrid]") {
  const GridSpec g(2, 64, 3.2);
  const ModelParams p = model();
  SchemeState s = initial_state(uniform_field(g, 0.15, 0.25, 1u), p);
  const SystemAssembly sys = assemble_cs1(s, p, 0.01);
  int cycles[2];
  for (int o = 0; o < 2; ++o) {
    MgConfig cfg;
    cfg.order = o == 0 ? SweepOrder::red_black : SweepOrder::lexicographic;
    auto [u, rep] = solve_system(sys, s.phi, s.mu, cfg);
    CHECK(rep.final_residual <= cfg.tol);
    cycles[o] = rep.vcycles;
  }
  std::printf("CS1 step cycles: red-black %d, lexicographic %d\n", cycles[0], cycles[1]);
  CHECK(cycles[0] <= 2 * cycles[1]);
  CHECK(cycles[1] <= 2 * cycles[0]);
}

TEST_CASE("an exhausted budget raises with the residual history", "[multigrid]") {
  const GridSpec g(2, 32, 3.2);
  const ModelParams p = model();
  SchemeState s = initial_state(uniform_field(g, 0.15, 0.25, 1u), p);
  const SystemAssembly sys = assemble_cs1(s, p, 0.1);
  MgConfig cfg;
  cfg.max_vcycles = 1;
  cfg.tol = 1e-14;
  try {
    solve_system(sys, s.phi, s.mu, cfg);
    FAIL("expected SolverNonConvergence");
  } catch (const SolverNonConvergence& e) {
    CHECK(e.residual_history().size() == 2);
    CHECK(e.residual_history()[1] < e.residual_history()[0]);
  }
}
