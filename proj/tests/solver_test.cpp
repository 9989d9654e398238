#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nsmix/forcing.hpp"
#include "nsmix/solver.hpp"
#include "test_support.hpp"

using namespace nsmix;
using nsmix::testing::random_field;

namespace {

CylinderSpec default_cylinder() {
  const double pi = std::numbers::pi;
  return {0.25, 0.75, pi / 2, 3 * pi / 2, pi / 2, 3 * pi / 2};
}

ForcingProfile random_forcing(const GridPtr& g, std::mt19937_64& rng, double scale) {
  ForcingProfile f(g);
  f.add_harmonic(0, random_field(g, rng, scale, 1.5), SpectralVelocity(g));
  f.add_harmonic(1, random_field(g, rng, scale, 1.5), random_field(g, rng, scale, 1.5));
  f.add_harmonic(3, random_field(g, rng, 0.5 * scale, 1.5), random_field(g, rng, 0.5 * scale, 1.5));
  return f;
}

}  // namespace

TEST(Step, ShearDecayAndZero) {
  auto g = build_grid(4);
  const double nu = 0.5, dt = 1e-2;
  const auto u = shear_mode(g, 0.8);
  const SpectralVelocity zero(g);
  const auto v = step(u, zero, zero, 0.0, dt, nu);
  EXPECT_NEAR(std::abs(v.coeffs()[g->index_of({0, 1})] / u.coeffs()[g->index_of({0, 1})]), std::exp(-nu * dt), 1e-15);
  EXPECT_EQ(step(zero, zero, zero, 0.0, dt, nu).norm(), 0.0);
  EXPECT_THROW(step(u, zero, zero, 0.0, 2e-2, nu), ValidationError);
  EXPECT_THROW(step(u, zero, zero, 0.0, dt, 0.0), ValidationError);
}

TEST(Step, SecondOrderConvergence) {
  auto g = build_grid(4);
  std::mt19937_64 rng(1);
  const auto u0 = random_field(g, rng, 0.6);
  const auto f = random_forcing(g, rng, 0.5);
  const double nu = 0.5;
  // Error of one interval [0, 0.1] at dt against the same run at dt/2.
  auto run = [&](double dt) {
    SpectralVelocity u = u0;
    const int n = static_cast<int>(std::round(0.1 / dt));
    for (int i = 0; i < n; ++i) u = step(u, f, i * dt, dt, nu);
    return u;
  };
  std::vector<double> dts{1e-2, 5e-3, 2.5e-3}, errs;
  for (double dt : dts) errs.push_back((run(dt) - run(dt / 2)).norm());
  for (std::size_t i = 1; i < errs.size(); ++i) {
    EXPECT_GE(std::log(errs[i - 1] / errs[i]) / std::log(2.0), 1.9);
  }
}

TEST(TimeOneMap, ShearHeatDecay) {
  auto g = build_grid(8);
  const SolverParams p{0.5, 1e-3};
  const auto u = time_one_map(shear_mode(g, 1.3), ForcingProfile::zero(g), p);
  const cplx expect = shear_mode(g, 1.3).coeffs()[g->index_of({0, 1})] * std::exp(-p.nu);
  EXPECT_LE(std::abs(u.coeffs()[g->index_of({0, 1})] - expect), 1e-6 * std::abs(expect));
  EXPECT_EQ(time_one_map(SpectralVelocity(g), ForcingProfile::zero(g), p).norm(), 0.0);
}

TEST(TimeOneMap, EnergyBound) {
  // d/dt ||u|| <= -nu ||u|| + ||f|| gives ||S(u, f)|| <= e^{-nu} ||u|| + C1 ||f||_{L2(D1)}
  // with C1 = sqrt((1 - e^{-2 nu}) / (2 nu)).
  auto g = build_grid(4);
  std::mt19937_64 rng(2);
  const SolverParams p{0.5, 1e-3};
  const double kappa = std::exp(-p.nu);
  const double c1 = std::sqrt((1 - std::exp(-2 * p.nu)) / (2 * p.nu));
  auto basis = build_noise_basis(default_cylinder(), 8, AmplitudeRule{0.3, 1.0, {}}, g);
  std::uniform_real_distribution<double> amp(0.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto u = random_field(g, rng, amp(rng));
    ForcingProfile f = random_forcing(g, rng, amp(rng));
    if (trial % 2 == 0) {
      RngStream s(3, static_cast<std::uint64_t>(trial), 0);
      f = f.with_dictionary(basis, noise_weights(*basis, sample_noise(*basis, s)));
    }
    const double lhs = time_one_map(u, f, p).norm();
    EXPECT_LE(lhs, kappa * u.norm() + c1 * f.rendered_l2_norm() + 1e-9);
  }
}

TEST(TimeOneMap, UnforcedEnergyDecreases) {
  auto g = build_grid(6);
  std::mt19937_64 rng(4);
  Trajectory tr;
  time_one_map(random_field(g, rng, 3.0), ForcingProfile::zero(g), SolverParams{0.5, 1e-3}, &tr);
  ASSERT_EQ(tr.snapshots.size(), 1001u);
  for (std::size_t i = 1; i < tr.snapshots.size(); ++i) EXPECT_LT(tr.at(i).norm(), tr.at(i - 1).norm());
}

TEST(TimeOneMap, BlowUpGuardAndMeshChecks) {
  auto g = build_grid(4);
  std::mt19937_64 rng(5);
  EXPECT_THROW(time_one_map(random_field(g, rng, 1e8), ForcingProfile::zero(g), SolverParams{0.5, 1e-2}),
               IntegrationFailure);
  EXPECT_THROW(time_one_map(SpectralVelocity(g), ForcingProfile::zero(g), SolverParams{0.5, 3e-3}), ValidationError);
}

TEST(Linearized, ZeroSuperpositionAndStokes) {
  auto g = build_grid(4);
  std::mt19937_64 rng(6);
  const SolverParams p{0.5, 1e-2};
  Trajectory uh;
  time_one_map(random_field(g, rng, 1.0), random_forcing(g, rng, 0.3), p, &uh);
  const SpectralVelocity zero(g);
  const auto w0 = solve_linearized(zero, ForcingProfile::zero(g), uh, p);
  EXPECT_EQ(w0.final_state().norm(), 0.0);

  const auto v0 = random_field(g, rng);
  const auto gf = random_forcing(g, rng, 1.0);
  const auto a = solve_linearized(v0, gf, uh, p).final_state();
  const auto b = solve_linearized(v0, ForcingProfile::zero(g), uh, p).final_state() +
                 solve_linearized(zero, gf, uh, p).final_state();
  EXPECT_LE((a - b).norm(), 1e-12 * a.norm());

  const auto still = Trajectory::constant(zero, p.dt);
  SpectralVelocity mode(g);
  const auto k = g->index_of({2, -1});
  mode.coeffs()[k] = cplx(0.3, -0.7);
  const auto tr = solve_linearized(mode, ForcingProfile::zero(g), still, p);
  for (std::size_t i = 0; i < tr.snapshots.size(); i += 10) {
    const cplx expect = mode.coeffs()[k] * std::exp(-p.nu * 5.0 * tr.time(i));
    EXPECT_LE(std::abs(tr.snapshots[i][k] - expect), 1e-14);
  }

  Trajectory other;
  time_one_map(zero, ForcingProfile::zero(g), SolverParams{0.5, 5e-3}, &other);
  EXPECT_THROW(solve_linearized(v0, ForcingProfile::zero(g), other, p), ValidationError);
}

TEST(Linearized, MatchesFiniteDifferenceOfSolver) {
  auto g = build_grid(4);
  std::mt19937_64 rng(7);
  const SolverParams p{0.5, 1e-2};
  const auto u0 = random_field(g, rng, 1.5);
  const auto h = random_forcing(g, rng, 0.5);
  Trajectory uh;
  time_one_map(u0, h, p, &uh);
  const auto v0 = random_field(g, rng);
  const auto gf = random_forcing(g, rng, 1.0);
  const auto w = solve_linearized(v0, gf, uh, p).final_state();
  const double eps = 1e-5;
  auto perturbed = [&](double s) {
    ForcingProfile f = h;
    for (const auto& hm : gf.harmonics()) {
      f.add_harmonic(hm.ell, s * SpectralVelocity(g, hm.cos_part), s * SpectralVelocity(g, hm.sin_part));
    }
    return time_one_map(u0 + s * v0, f, p);
  };
  const auto fd = (1.0 / (2 * eps)) * (perturbed(eps) - perturbed(-eps));
  EXPECT_LE((fd - w).norm(), 1e-7 * w.norm());
}

TEST(Adjoint, StokesDecayAndZero) {
  auto g = build_grid(4);
  const SolverParams p{0.5, 1e-3};
  const auto still = Trajectory::constant(SpectralVelocity(g), p.dt);
  SpectralVelocity g1(g);
  const auto k = g->index_of({1, 2});
  g1.coeffs()[k] = cplx(-0.4, 0.9);
  const auto th = solve_adjoint(g1, still, p);
  EXPECT_LE(std::abs(th.theta.snapshots.front()[k] - g1.coeffs()[k] * std::exp(-p.nu * 5.0)), 1e-14);
  EXPECT_EQ(solve_adjoint(SpectralVelocity(g), still, p).theta.snapshots.front().norm(), 0.0);
}

TEST(Adjoint, DualityIdentity) {
  auto g = build_grid(6);
  std::mt19937_64 rng(8);
  const SolverParams p{0.5, 1e-2};
  Trajectory uh;
  time_one_map(random_field(g, rng, 2.0), random_forcing(g, rng, 0.5), p, &uh);
  for (int trial = 0; trial < 50; ++trial) {
    const auto v0 = random_field(g, rng);
    const auto gf = random_forcing(g, rng, 1.0);
    const auto th1 = random_field(g, rng);
    const auto w1 = solve_linearized(v0, gf, uh, p).final_state();
    const auto adj = solve_adjoint(th1, uh, p);
    const double lhs = inner(w1, th1);
    const double rhs = inner(v0, adj.theta.at(0)) + adj.pair_with(gf, p);
    EXPECT_LE(std::abs(lhs - rhs), 1e-8 * (std::abs(lhs) + w1.norm() * th1.norm() * 1e-3));
  }
}

TEST(Adjoint, SensitivitiesApproximateTimeIntegral) {
  // sum_n <g_n, G_n> is a quadrature of int_0^1 <g, theta> dt with O(dt^2) error.
  auto g = build_grid(4);
  std::mt19937_64 rng(9);
  const SolverParams p{0.5, 1e-3};
  Trajectory uh;
  time_one_map(random_field(g, rng, 1.0), random_forcing(g, rng, 0.3), p, &uh);
  const auto th1 = random_field(g, rng);
  const auto gf = random_forcing(g, rng, 1.0);
  const auto adj = solve_adjoint(th1, uh, p);
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < adj.theta.snapshots.size(); ++i) {
    integral += 0.5 * p.dt *
                (inner(gf.at(uh.time(i)), adj.theta.at(i)) + inner(gf.at(uh.time(i + 1)), adj.theta.at(i + 1)));
  }
  EXPECT_NEAR(adj.pair_with(gf, p), integral, 1e-4 * std::abs(integral) + 1e-6);
}

TEST(ChainStep, ZeroNoiseAndDeterminism) {
  auto g = build_grid(4);
  auto basis = build_noise_basis(default_cylinder(), 8, AmplitudeRule{0.3, 1.0, {}}, g);
  const SolverParams p{0.5, 1e-2};
  std::mt19937_64 rng(10);
  const auto u = random_field(g, rng);
  const auto h = reference_forcing(g, 0.2);
  NoiseSample zero{Eigen::VectorXd::Zero(8)};
  EXPECT_EQ((chain_step(u, h, basis, zero, p) - time_one_map(u, h, p)).norm(), 0.0);
  auto run = [&] {
    SpectralVelocity v = u;
    for (int k = 0; k < 5; ++k) {
      RngStream s(99, 0, static_cast<std::uint64_t>(k));
      v = chain_step(v, h, basis, sample_noise(*basis, s), p);
    }
    return v;
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.coeffs(), b.coeffs());
}

TEST(ChainStep, AbsorbingBall) {
  auto g = build_grid(4);
  auto basis = build_noise_basis(default_cylinder(), 16, AmplitudeRule{0.3, 1.0, {}}, g);
  const SolverParams p{0.5, 1e-2};
  const auto h = reference_forcing(g, 0.2);
  // Almost-sure bound on ||h + eta||_{L2(D1)} for the rendered forcing.
  double r = h.rendered_l2_norm();
  for (int j = 0; j < basis->size(); ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(basis->size());
    e[j] = basis->amplitude(j);
    r += render(basis, e).rendered_l2_norm();
  }
  const double kappa = std::exp(-p.nu), c1 = std::sqrt((1 - std::exp(-2 * p.nu)) / (2 * p.nu));
  const double radius = 2 * c1 * r / (1 - kappa);
  std::mt19937_64 rng(11);
  auto u = random_field(g, rng, 1.0);
  u *= 10.0 * radius / u.norm();
  int k = 0;
  for (; u.norm() > radius && k < 100; ++k) {
    RngStream s(5, 0, static_cast<std::uint64_t>(k));
    u = chain_step(u, h, basis, sample_noise(*basis, s), p);
  }
  ASSERT_LE(u.norm(), radius);
  // Entry time from ||u0|| = 10 R: kappa^k 10 R + R/2 <= R once k >= ln 20 / nu.
  EXPECT_LE(k, static_cast<int>(std::ceil(std::log(20.0) / p.nu)));
  for (int i = 0; i < 2000; ++i) {
    RngStream s(5, 1, static_cast<std::uint64_t>(i));
    u = chain_step(u, h, basis, sample_noise(*basis, s), p);
    ASSERT_LE(u.norm(), radius);
  }
}
