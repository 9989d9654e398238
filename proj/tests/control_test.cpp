#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nsmix/control.hpp"
#include "test_support.hpp"

using namespace nsmix;
using nsmix::testing::random_field;

namespace {

struct Setup {
  GridPtr g;
  BasisPtr basis;
  SolverParams sp{0.5, 1e-2};
  ForcingProfile h;
  SpectralVelocity uh0;
};

Setup small_setup(int K = 4, int J = 32) {
  Setup s;
  s.g = build_grid(K);
  s.basis = build_noise_basis(CylinderSpec{}, J, AmplitudeRule{}, s.g);
  s.h = reference_forcing(s.g, 0.5);
  std::mt19937_64 rng(21);
  s.uh0 = random_field(s.g, rng, 0.4, 1.0);
  return s;
}

}  // namespace

TEST(Assembly, LinearizationAroundRestIsDiagonalDecay) {
  auto g = build_grid(3);
  const SolverParams sp{0.5, 1e-2};
  const auto rest = Trajectory::constant(SpectralVelocity(g), sp.dt);
  const auto L = assemble_L(rest, sp);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double expect = std::exp(-sp.nu * g->eigenvalue(i));
    for (int c = 0; c < 2; ++c) {
      const auto r = static_cast<Eigen::Index>(2 * i + c);
      EXPECT_NEAR(L(r, r), expect, 1e-13);
      EXPECT_NEAR(L.col(r).norm(), expect, 1e-13);
    }
  }
}

TEST(Assembly, ColumnsMatchLinearizedSolves) {
  auto s = small_setup();
  Trajectory uh;
  time_one_map(s.uh0, s.h, s.sp, &uh);
  const auto L = assemble_L(uh, s.sp);
  const auto A = assemble_A(uh, *s.basis, 6, s.sp);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 3; ++trial) {
    const auto v0 = random_field(s.g, rng);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(s.basis->size());
    for (int j = 0; j < 6; ++j) c[j] = std::normal_distribution<double>()(rng);
    const auto w = solve_linearized(v0, render(s.basis, c), uh, s.sp).final_state();
    const Eigen::VectorXd expect = L * v0.to_real() + A * c.head(6);
    EXPECT_LE((w.to_real() - expect).norm(), 1e-11 * expect.norm());
  }
}

TEST(Assembly, AdjointRouteMatchesForwardRows) {
  auto s = small_setup();
  Trajectory uh;
  time_one_map(s.uh0, s.h, s.sp, &uh);
  const int N = 5, m = 12;
  const auto L = assemble_L(uh, s.sp);
  const auto A = assemble_A(uh, *s.basis, m, s.sp);
  const auto rows = low_mode_rows(*s.g, N);
  const auto sys = low_mode_system(uh, *s.basis, N, m, s.sp);
  const Eigen::MatrixXd PL = L(rows, Eigen::all), PA = A(rows, Eigen::all);
  EXPECT_LE((sys.PL - PL).norm(), 1e-10 * PL.norm());
  EXPECT_LE((sys.PA - PA).norm(), 1e-10 * PA.norm());
}

TEST(Quadratic, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 6, m = 5, dim = 10;
    const Eigen::MatrixXd PA = Eigen::MatrixXd::NullaryExpr(rows, m, [&] { return n(rng); });
    const Eigen::MatrixXd PL = Eigen::MatrixXd::NullaryExpr(rows, dim, [&] { return n(rng); });
    const Eigen::VectorXd v0 = Eigen::VectorXd::NullaryExpr(dim, [&] { return n(rng); });
    const Eigen::VectorXd c = Eigen::VectorXd::NullaryExpr(m, [&] { return n(rng); });
    const double delta = std::pow(10.0, -(trial % 4));
    const auto grad = quadratic_gradient(PA, PL, v0, c, delta);
    Eigen::VectorXd fd(m);
    const double step = 1e-5;
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd cp = c, cm = c;
      cp[j] += step;
      cm[j] -= step;
      fd[j] = (quadratic_objective(PA, PL, v0, cp, delta) - quadratic_objective(PA, PL, v0, cm, delta)) / (2 * step);
    }
    EXPECT_LE((fd - grad).norm(), 1e-5 * grad.norm());
  }
}

TEST(Quadratic, MinimizerResidualAndTrivialCases) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  const Eigen::MatrixXd PA = Eigen::MatrixXd::NullaryExpr(8, 6, [&] { return n(rng); });
  const Eigen::MatrixXd PL = Eigen::MatrixXd::NullaryExpr(8, 12, [&] { return n(rng); });
  const Eigen::VectorXd v0 = Eigen::VectorXd::NullaryExpr(12, [&] { return n(rng); });
  for (double delta : {1.0, 1e-2, 1e-4}) {
    const auto sol = solve_quadratic_min_low(PA, PL, v0, delta);
    EXPECT_LE(sol.residual, 1e-10);
    EXPECT_LE(quadratic_gradient(PA, PL, v0, sol.c, delta).norm(), 1e-8 * (1.0 + (PL * v0).norm() / delta));
  }
  EXPECT_EQ(solve_quadratic_min_low(PA, PL, Eigen::VectorXd::Zero(12), 1e-2).c.norm(), 0.0);
  EXPECT_LE(solve_quadratic_min_low(PA, PL, v0, 1e12).c.norm(), 1e-10);
  EXPECT_THROW(solve_quadratic_min_low(PA, PL, v0, 0.0), ValidationError);
}

TEST(Gain, ClosedFormEqualsColumnSolves) {
  auto s = small_setup();
  Trajectory uh;
  time_one_map(s.uh0, s.h, s.sp, &uh);
  const int N = 4, m = 16;
  const double delta = 1e-3;
  const auto L = assemble_L(uh, s.sp);
  const auto A = assemble_A(uh, *s.basis, m, s.sp);
  const auto rows = low_mode_rows(*s.g, N);
  const auto gain = feedback_gain(A(rows, Eigen::all), L(rows, Eigen::all), delta);
  for (Eigen::Index c = 0; c < L.cols(); ++c) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(L.cols(), c);
    const auto sol = solve_quadratic_min(A, L, e, *s.g, N, delta);
    EXPECT_LE(sol.residual, 1e-10);
    EXPECT_LE((gain.col(c) - sol.c).norm(), 1e-10 * (1.0 + gain.col(c).norm()));
  }
}

TEST(Gain, BuildPhiBasics) {
  auto s = small_setup();
  ControlParams cp;
  cp.N = 4;
  cp.m = 16;
  Trajectory uh;
  auto op = build_phi(s.h, s.uh0, s.basis, cp, s.sp, &uh);
  EXPECT_EQ(op.gain.rows(), 16);
  EXPECT_EQ(op.apply(SpectralVelocity(s.g)).norm(), 0.0);
  EXPECT_EQ(op.digest, trajectory_digest(uh));
  certify(op, uh, s.sp);
  EXPECT_LE(op.low_mode_norm, op.full_norm + 1e-12);

  cp.m = 0;
  auto none = build_phi(s.h, s.uh0, s.basis, cp, s.sp);
  EXPECT_EQ(none.gain.rows(), 0);
  certify(none, uh, s.sp);
  EXPECT_NEAR(none.full_norm, largest_singular_value(assemble_L(uh, s.sp)), 1e-14);

  cp.m = 99;
  EXPECT_THROW(build_phi(s.h, s.uh0, s.basis, cp, s.sp), ValidationError);
  cp.m = 8;
  cp.delta = 0.0;
  EXPECT_THROW(build_phi(s.h, s.uh0, s.basis, cp, s.sp), ValidationError);
}

TEST(Gain, LowModeNormDecreasesWithDelta) {
  auto s = small_setup();
  Trajectory uh;
  time_one_map(s.uh0, s.h, s.sp, &uh);
  SweepGrid grid;
  grid.N = {4};
  grid.m = {16};
  const auto rep = parameter_sweep(uh, s.basis, 0.25, s.sp, grid);
  ASSERT_EQ(rep.entries.size(), 4u);
  for (std::size_t i = 1; i < rep.entries.size(); ++i) {
    EXPECT_LT(rep.entries[i].delta, rep.entries[i - 1].delta);
    EXPECT_LE(rep.entries[i].low_mode_norm, rep.entries[i - 1].low_mode_norm * (1.0 + 1e-10));
  }
  if (!rep.certified()) {
    EXPECT_FALSE(rep.obstruction.empty());
  }
}

TEST(Observability, RankFlagAndMonotoneConstant) {
  auto s = small_setup(4, 64);
  Trajectory uh;
  time_one_map(s.uh0, s.h, s.sp, &uh);
  const auto one = observability_check(uh, *s.basis, 1, 16, s.sp);
  EXPECT_TRUE(one.full_rank);
  EXPECT_TRUE(std::isfinite(one.c_obs));

  const auto thin = observability_check(uh, *s.basis, 4, 4, s.sp);
  EXPECT_FALSE(thin.full_rank);
  EXPECT_LT(thin.rank, 8);

  double prev = std::numeric_limits<double>::infinity();
  for (int m : {8, 16, 32, 64}) {
    const auto r = observability_check(uh, *s.basis, 2, m, s.sp);
    if (r.full_rank) {
      EXPECT_LE(r.c_obs, prev * (1.0 + 1e-9));
      prev = r.c_obs;
    }
  }
  EXPECT_TRUE(std::isfinite(prev));
}

TEST(Contraction, IdenticalStartAndRemainderScaling) {
  auto s = small_setup();
  ControlParams cp;
  cp.N = 4;
  cp.m = 16;
  cp.delta = 1e-2;
  Trajectory uh;
  const auto op = build_phi(s.h, s.uh0, s.basis, cp, s.sp, &uh);
  const auto uh1 = uh.final_state();
  const auto same = contraction_sample(op, s.h, s.uh0, uh1, uh, SpectralVelocity(s.g), s.sp);
  EXPECT_EQ(same.ratio, 0.0);
  const auto rs = remainder_scaling(op, s.h, s.uh0, 1e-2, 5, 4, s.sp, 9);
  EXPECT_NEAR(rs.slope, 2.0, 0.2);
  const auto st = verify_contraction(op, s.h, s.uh0, 5, 0.25, 1e-3, s.sp, 3);
  EXPECT_EQ(st.trials, 5);
  EXPECT_GE(st.worst_ratio, 0.0);
}

TEST(Lipschitz, RatioStableAcrossMagnitudes) {
  auto s = small_setup(3, 16);
  ControlParams cp;
  cp.N = 3;
  cp.m = 12;
  cp.delta = 1e-2;
  const auto rep = lipschitz_check(s.h, s.uh0, s.basis, cp, s.sp, 10, {1e-3, 1e-4}, 5);
  ASSERT_EQ(rep.max_ratio.size(), 2u);
  EXPECT_GT(rep.max_ratio[0], 0.0);
  EXPECT_LE(rep.max_ratio[0] / rep.max_ratio[1], 2.0);
  EXPECT_LE(rep.max_ratio[1] / rep.max_ratio[0], 2.0);
}

TEST(Loglog, RecoversPowerLaw) {
  std::vector<double> x{1, 2, 4, 8}, y;
  for (double v : x) y.push_back(3.0 * v * v);
  EXPECT_NEAR(loglog_slope(x, y), 2.0, 1e-12);
  EXPECT_THROW(loglog_slope({1.0}, {1.0}), ValidationError);
  EXPECT_THROW(loglog_slope({1.0, 2.0}, {0.0, 1.0}), ValidationError);
}
