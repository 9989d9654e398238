#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nsmix/forcing.hpp"
#include "nsmix/noise.hpp"
#include "test_support.hpp"

using namespace nsmix;

namespace {

CylinderSpec default_cylinder() {
  const double pi = std::numbers::pi;
  return {0.25, 0.75, pi / 2, 3 * pi / 2, pi / 2, 3 * pi / 2};
}

// Five-point Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree <= 9.
constexpr std::array<double, 5> kGaussNodes{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                            0.9061798459386640};
constexpr std::array<double, 5> kGaussWeights{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                              0.4786286704993665, 0.2369268850561891};

// Trapezoid over [a, b] with n panels; end values are zero for the bump-supported integrands used here.
template <class F>
double trapezoid(double a, double b, int n, F&& f) {
  const double h = (b - a) / n;
  double s = 0.0;
  for (int i = 1; i < n; ++i) s += f(a + i * h);
  return s * h;
}

}  // namespace

TEST(Cylinder, Validation) {
  auto c = default_cylinder();
  EXPECT_NO_THROW(c.validate());
  c.t_a = 0.8;
  EXPECT_THROW(c.validate(), ConfigError);
  c = default_cylinder();
  c.x_b = 7.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Dictionary, DiagonalEnumeration) {
  const auto d = enumerate_dictionary(8);
  ASSERT_EQ(d.size(), 8u);
  EXPECT_EQ(d[0].n_t + d[0].n_x + d[0].n_y, 3);
  EXPECT_EQ(d[0].pol, 0);
  EXPECT_EQ(d[1].pol, 1);
  for (std::size_t i = 1; i < d.size(); ++i) {
    EXPECT_LE(d[i - 1].n_t + d[i - 1].n_x + d[i - 1].n_y, d[i].n_t + d[i].n_x + d[i].n_y);
  }
}

TEST(NoiseBasis, SingleElementAndSupport) {
  auto g = build_grid(4);
  auto b1 = build_noise_basis(default_cylinder(), 1, {}, g);
  EXPECT_EQ(b1->size(), 1);
  EXPECT_GT(b1->gram()(0, 0), 0.0);

  auto basis = build_noise_basis(default_cylinder(), 12, {}, g);
  const auto& cyl = basis->cylinder();
  const int n = 128;
  double worst = 0.0;
  for (int j = 0; j < basis->size(); ++j) {
    for (double t : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      for (int ix = 0; ix < n; ++ix) {
        for (int iy = 0; iy < n; ++iy) {
          const double x = 2 * std::numbers::pi * ix / n, y = 2 * std::numbers::pi * iy / n;
          if (cyl.contains(t, x, y)) continue;
          const auto v = basis->evaluate(j, t, x, y);
          worst = std::max({worst, std::abs(v[0]), std::abs(v[1])});
        }
      }
    }
  }
  EXPECT_EQ(worst, 0.0);
}

TEST(NoiseBasis, NonDegeneracyAndSizeChecks) {
  auto g = build_grid(2);
  AmplitudeRule zero{0.0, 1.0, {}};
  EXPECT_THROW(build_noise_basis(default_cylinder(), 4, zero, g, 1), ConfigError);
  EXPECT_THROW(build_noise_basis(default_cylinder(), 0, {}, g), ConfigError);
  EXPECT_THROW(build_noise_basis(default_cylinder(), 257, {}, g), ConfigError);
  AmplitudeRule partial{0.0, 0.0, {1.0, 0.0, 1.0}};
  EXPECT_NO_THROW(build_noise_basis(default_cylinder(), 3, partial, g, 1));
  EXPECT_THROW(build_noise_basis(default_cylinder(), 3, partial, g, 2), ConfigError);
}

TEST(NoiseBasis, WeightedH1SumMatchesQuadrature) {
  auto g = build_grid(2);
  AmplitudeRule rule{0.3, 1.0, {}};
  auto basis = build_noise_basis(default_cylinder(), 3, rule, g);
  const auto& c = basis->cylinder();
  const int n = 96;
  const double fd = 1e-6;
  double B = 0.0;
  for (int j = 0; j < basis->size(); ++j) {
    const int pol = basis->index(j).pol;
    auto comp = [&](double t, double x, double y) { return basis->evaluate(j, t, x, y)[static_cast<std::size_t>(pol)]; };
    const double sq = trapezoid(c.t_a, c.t_b, n, [&](double t) {
      return trapezoid(c.x_a, c.x_b, n, [&](double x) {
        return trapezoid(c.y_a, c.y_b, n, [&](double y) {
          const double v = comp(t, x, y);
          const double dt = (comp(t + fd, x, y) - comp(t - fd, x, y)) / (2 * fd);
          const double dx = (comp(t, x + fd, y) - comp(t, x - fd, y)) / (2 * fd);
          const double dy = (comp(t, x, y + fd) - comp(t, x, y - fd)) / (2 * fd);
          return v * v + dt * dt + dx * dx + dy * dy;
        });
      });
    });
    B += basis->amplitude(j) * std::sqrt(sq / (4 * std::numbers::pi * std::numbers::pi));
  }
  EXPECT_NEAR(basis->weighted_h1_sum(), B, 1e-6 * B);
}

TEST(NoiseBasis, GramMatchesQuadrature) {
  auto g = build_grid(2);
  auto basis = build_noise_basis(default_cylinder(), 4, {}, g);
  const auto& c = basis->cylinder();
  const int n = 80;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double v = trapezoid(c.t_a, c.t_b, n, [&](double t) {
        return trapezoid(c.x_a, c.x_b, n, [&](double x) {
          return trapezoid(c.y_a, c.y_b, n, [&](double y) {
            const auto a = basis->evaluate(i, t, x, y), b = basis->evaluate(j, t, x, y);
            return a[0] * b[0] + a[1] * b[1];
          });
        });
      }) / (4 * std::numbers::pi * std::numbers::pi);
      EXPECT_NEAR(basis->gram()(i, j), v, 1e-8);
    }
  }
  EXPECT_GE(basis->gram_condition(), 1.0);
}

TEST(Sampling, MomentsAndBounds) {
  auto g = build_grid(1);
  auto basis = build_noise_basis(default_cylinder(), 1, {}, g);
  RngStream rng(42, 0, 0);
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_noise(*basis, rng).xi[0];
    ASSERT_LE(std::abs(x), 1.0);
    s += x;
    s2 += x * x;
  }
  // Second moment of rho by exact Gauss quadrature (degree 6 integrand).
  double var = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const double r = kGaussNodes[i];
    var += kGaussWeights[i] * r * r * CoefficientDensity::pdf(r);
  }
  EXPECT_NEAR(var, 1.0 / 7.0, 1e-14);
  const double mean = s / n;
  EXPECT_LE(std::abs(mean), 3.0 * std::sqrt(var / n));
  const double emp_var = s2 / n - mean * mean;
  EXPECT_NEAR(emp_var, var, 4.0 * std::sqrt(var * var * 0.6 / n));
}

TEST(Sampling, ChiSquareAgainstDensity) {
  RngStream rng(7, 3, 1);
  const int n = 100000, bins = 20;
  std::vector<int> counts(bins, 0);
  for (int i = 0; i < n; ++i) {
    const double x = CoefficientDensity::sample(rng);
    counts[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>((x + 1.0) / 2.0 * bins)))]++;
  }
  double chi2 = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = -1.0 + 2.0 * b / bins, hi = -1.0 + 2.0 * (b + 1) / bins;
    const double expect = n * (CoefficientDensity::cdf(hi) - CoefficientDensity::cdf(lo));
    chi2 += std::pow(counts[static_cast<std::size_t>(b)] - expect, 2) / expect;
  }
  EXPECT_LT(chi2, 36.191);  // 99th percentile of chi-square with 19 degrees of freedom
}

TEST(Sampling, StreamsAreDeterministic) {
  RngStream a(1, 2, 3), b(1, 2, 3), c(1, 2, 4);
  const auto x = a.bits();
  EXPECT_EQ(x, b.bits());
  EXPECT_NE(x, c.bits());
}

TEST(Density, ClosedFormsAndNormalization) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
  EXPECT_DOUBLE_EQ(density(z), (15.0 / 16.0) * (15.0 / 16.0));
  Eigen::VectorXd edge(2);
  edge << 1.0, 0.2;
  EXPECT_EQ(density(edge), 0.0);
  EXPECT_EQ(log_density(edge), -std::numeric_limits<double>::infinity());
  edge << 0.3, -1.2;
  EXPECT_EQ(density(edge), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      Eigen::VectorXd p(2);
      p << kGaussNodes[i], kGaussNodes[j];
      total += kGaussWeights[i] * kGaussWeights[j] * density(p);
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-8);
  Eigen::VectorXd q(3);
  q << 0.1, -0.4, 0.7;
  EXPECT_NEAR(std::log(density(q)), log_density(q), 1e-13);
  EXPECT_NEAR(CoefficientDensity::cdf(1.0 - 1e-15), 1.0, 1e-12);
  EXPECT_NEAR(CoefficientDensity::cdf(0.0), 0.5, 1e-15);
}

TEST(Render, ZeroLinearAndLocalized) {
  auto g = build_grid(4);
  auto basis = build_noise_basis(default_cylinder(), 16, AmplitudeRule{0.3, 1.0, {}}, g);
  NoiseSample zero{Eigen::VectorXd::Zero(16)};
  EXPECT_EQ(render(basis, zero).at(0.5).norm(), 0.0);
  RngStream rng(5, 0, 0);
  const auto a = sample_noise(*basis, rng), b = sample_noise(*basis, rng);
  NoiseSample sum{a.xi + b.xi};
  for (double t : {0.3, 0.5, 0.6}) {
    const auto lhs = render(basis, sum).at(t);
    const auto rhs = render(basis, a).at(t) + render(basis, b).at(t);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * (rhs.norm() + 1e-300));
  }
  const auto f = render(basis, a);
  const double dt = 1e-3;
  for (int i = 0; i <= 1000; ++i) {
    const double t = i * dt;
    if (t > 0.25 && t < 0.75) continue;
    EXPECT_LE(f.at(t).coeffs().cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Render, NormsMatchQuadrature) {
  auto g = build_grid(3);
  auto basis = build_noise_basis(default_cylinder(), 6, AmplitudeRule{0.3, 1.0, {}}, g);
  RngStream rng(9, 1, 0);
  const auto s = sample_noise(*basis, rng);
  const auto f = render(basis, s);
  const auto w = noise_weights(*basis, s);
  const auto& c = basis->cylinder();

  // Raw dictionary field by space-time quadrature.
  const int n = 80;
  const double raw = trapezoid(c.t_a, c.t_b, n, [&](double t) {
    return trapezoid(c.x_a, c.x_b, n, [&](double x) {
      return trapezoid(c.y_a, c.y_b, n, [&](double y) {
        double vx = 0.0, vy = 0.0;
        for (int j = 0; j < basis->size(); ++j) {
          const auto v = basis->evaluate(j, t, x, y);
          vx += w[j] * v[0];
          vy += w[j] * v[1];
        }
        return vx * vx + vy * vy;
      });
    });
  }) / (4 * std::numbers::pi * std::numbers::pi);
  EXPECT_NEAR(f.l2_norm(), std::sqrt(raw), 1e-6 * std::sqrt(raw));

  // Rendered (projected, truncated) field by collocation in space and trapezoid in time.
  const int nt = 400;
  double rendered = 0.0;
  for (int i = 1; i < nt; ++i) {
    const double t = c.t_a + (c.t_b - c.t_a) * i / nt;
    const auto p = nsmix::testing::synthesize(f.at(t), 8);
    double e = 0.0;
    for (std::size_t k = 0; k < p.ux.size(); ++k) e += p.ux[k] * p.ux[k] + p.uy[k] * p.uy[k];
    rendered += e / static_cast<double>(p.ux.size());
  }
  rendered *= (c.t_b - c.t_a) / nt;
  EXPECT_NEAR(f.rendered_l2_norm(), std::sqrt(rendered), 1e-6 * std::sqrt(rendered));
  EXPECT_LE(f.rendered_l2_norm(), f.l2_norm() * (1 + 1e-12));
}

TEST(Forcing, PeriodicAndNorms) {
  auto g = build_grid(3);
  const auto h = reference_forcing(g, 0.2);
  for (double t : {0.0, 0.13, 0.5, 0.77}) EXPECT_LE((h.at(t) - h.at(t + 1.0)).norm(), 1e-13);
  // Steady part: amplitude 0.2 cos(y) e_1 has L2 norm^2 0.02; pulsating part averages to half of its peak.
  const double expect_l2 = std::sqrt(0.02 + 0.5 * 0.02);
  EXPECT_NEAR(h.l2_norm(), expect_l2, 1e-14);
  EXPECT_NEAR(h.rendered_l2_norm(), expect_l2, 1e-12);
  const double pi2 = 4 * std::numbers::pi * std::numbers::pi;
  const double expect_h1 = std::sqrt(0.02 * 2.0 + 0.5 * 0.02 * (1.0 + pi2 + 2.0));
  EXPECT_NEAR(h.h1_norm(), expect_h1, 1e-13);
}

TEST(Forcing, H1CrossTermsMatchQuadrature) {
  auto g = build_grid(3);
  auto basis = build_noise_basis(default_cylinder(), 4, AmplitudeRule{0.3, 1.0, {}}, g);
  Eigen::VectorXd w(4);
  w << 0.5, -0.3, 0.2, 0.1;
  const auto h = reference_forcing(g, 0.2);
  const auto f = h.with_dictionary(basis, w);
  const auto d = render(basis, w);
  // ||h + d||^2 = ||h||^2 + ||d||^2 + 2 <h, d> and <h, d> only sees the projected part of d.
  const int nt = 2000;
  double cross = 0.0;
  for (int i = 0; i < nt; ++i) {
    const double t = (i + 0.5) / nt;
    cross += inner(h.at(t), d.at(t)) / nt;
  }
  const double l2sq = f.l2_norm() * f.l2_norm();
  EXPECT_NEAR(l2sq, h.l2_norm() * h.l2_norm() + d.l2_norm() * d.l2_norm() + 2 * cross, 1e-8);
}

TEST(NoiseCsv, Schema) {
  auto g = build_grid(1);
  auto basis = build_noise_basis(default_cylinder(), 2, AmplitudeRule{0.3, 1.0, {}}, g);
  std::ostringstream os;
  NoiseSample s{Eigen::Vector2d(0.25, -0.5)};
  write_noise_csv(os, *basis, &s);
  EXPECT_EQ(os.str(), "j,b_j,xi_j\n1,0.29999999999999999,0.25\n2,0.14999999999999999,-0.5\n");
}
