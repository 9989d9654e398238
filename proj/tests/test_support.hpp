#pragma once

// Shared helpers for the unit tests: seeded random fields and a direct
// physical-space evaluator used as an independent quadrature oracle.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "nsmix/spectral.hpp"

namespace nsmix::testing {

inline SpectralVelocity random_field(const GridPtr& g, std::mt19937_64& rng, double scale = 1.0, double decay = 1.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  SpectralVelocity u(g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double w = scale / std::pow(1.0 + g->eigenvalue(i), decay);
    u.coeffs()[static_cast<Eigen::Index>(i)] = cplx(n(rng), n(rng)) * w;
  }
  return u;
}

/// Values on an n x n collocation grid x_i = 2 pi i / n, row-major in (x, y).
struct PhysicalField {
  int n = 0;
  std::vector<double> ux, uy;
  std::vector<double> dux_dx, dux_dy, duy_dx, duy_dy;
};

/// Direct synthesis u(x) = sum over +-k of a_k sigma_k e^{i k.x}.
inline PhysicalField synthesize(const SpectralVelocity& u, int n) {
  const auto& g = *u.grid();
  PhysicalField f;
  f.n = n;
  const std::size_t nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  f.ux.assign(nn, 0.0);
  f.uy.assign(nn, 0.0);
  f.dux_dx.assign(nn, 0.0);
  f.dux_dy.assign(nn, 0.0);
  f.duy_dx.assign(nn, 0.0);
  f.duy_dy.assign(nn, 0.0);
  const double h = 2.0 * std::numbers::pi / n;
  for (std::size_t m = 0; m < g.size(); ++m) {
    const auto k = g.wavevector(m);
    const auto s = WaveGrid::sigma(k);
    const cplx a = u.coeffs()[static_cast<Eigen::Index>(m)];
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double ph = k.k1 * i * h + k.k2 * j * h;
        // a e^{i ph} + conj(a) e^{-i ph} along sigma = 2 Re(a e^{i ph}) sigma.
        const cplx e = a * cplx(std::cos(ph), std::sin(ph));
        const double re = 2.0 * e.real();
        const double dre = -2.0 * e.imag();  // d/d(phase) of 2 Re(a e^{i ph})
        const std::size_t idx = static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
        f.ux[idx] += s[0] * re;
        f.uy[idx] += s[1] * re;
        f.dux_dx[idx] += s[0] * k.k1 * dre;
        f.dux_dy[idx] += s[0] * k.k2 * dre;
        f.duy_dx[idx] += s[1] * k.k1 * dre;
        f.duy_dy[idx] += s[1] * k.k2 * dre;
      }
    }
  }
  return f;
}

/// Fourier analysis of a real vector field sampled on the n x n grid, onto the grid representatives.
inline RawField analyze(const GridPtr& g, const std::vector<double>& fx, const std::vector<double>& fy, int n) {
  RawField r = RawField::zeros(g);
  const double h = 2.0 * std::numbers::pi / n;
  for (std::size_t m = 0; m < g->size(); ++m) {
    const auto k = g->wavevector(m);
    cplx c1 = 0.0, c2 = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double ph = k.k1 * i * h + k.k2 * j * h;
        const cplx e(std::cos(ph), -std::sin(ph));
        const std::size_t idx = static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
        c1 += fx[idx] * e;
        c2 += fy[idx] * e;
      }
    }
    r.c1[static_cast<Eigen::Index>(m)] = c1 / static_cast<double>(n * n);
    r.c2[static_cast<Eigen::Index>(m)] = c2 / static_cast<double>(n * n);
  }
  return r;
}

inline double grid_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace nsmix::testing
