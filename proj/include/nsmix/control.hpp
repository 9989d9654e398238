#pragma once

// Finite-dimensional feedback synthesis. Around a reference trajectory uh the
// time-1 linearization is w(1) = L v0 + A c, with c the coefficients of the
// control sum_j c_j psi_j. The feedback c = Phi v0 minimizes
//   J(c) = 1/2 |c|^2 + (1/delta) |P_N (L v0 + A c)|^2,
// i.e. solves (I + (2/delta) A^T P A) c = -(2/delta) A^T P L v0.
// All matrices act on real coordinates where the Euclidean norm is the L2 norm.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsmix/errors.hpp"
#include "nsmix/forcing.hpp"
#include "nsmix/noise.hpp"
#include "nsmix/solver.hpp"
#include "nsmix/spectral.hpp"

namespace nsmix {

struct ControlParams {
  int N = 8;
  double delta = 1e-2;
  int m = 32;
  double q = 0.25;
  double d = 0.0;  // admissible ||u0 - uh0||; 0 until calibrated

  void validate(const WaveGrid& g, const NoiseBasis& basis) const {
    if (N < 1 || static_cast<std::size_t>(N) > g.size()) throw ValidationError("control: N out of range");
    if (!(delta > 0.0)) throw ValidationError("control: delta must be positive");
    if (m < 0 || m > basis.size()) throw ValidationError("control: m must lie in [0, J]");
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("control: q must lie in (0, 1)");
    if (!(d >= 0.0)) throw ValidationError("control: d must be non-negative");
  }
};

/// FNV-1a digest of the snapshot bytes of a trajectory.
inline std::uint64_t trajectory_digest(const Trajectory& tr) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : tr.snapshots) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(s.data());
    const std::size_t n = static_cast<std::size_t>(s.size()) * sizeof(cplx);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

/// Time factors tau_j(t_n) of the first m dictionary elements at mesh node n.
inline Eigen::VectorXd dictionary_time_factors(const NoiseBasis& basis, int m, double t) {
  Eigen::VectorXd tau(m);
  for (int j = 0; j < m; ++j) tau[j] = basis.time_profile(j, t);
  return tau;
}

/// L: v0 -> w(1) for zero forcing, 2M x 2M.
inline Eigen::MatrixXd assemble_L(const Trajectory& uh, const SolverParams& p) {
  const auto nd = static_cast<Eigen::Index>(uh.grid->real_dim());
  return propagate_tangent(uh, Eigen::MatrixXd::Identity(nd, nd), p);
}

/// A: c -> w(1) for v0 = 0 and forcing sum_j c_j psi_j, 2M x m.
inline Eigen::MatrixXd assemble_A(const Trajectory& uh, const NoiseBasis& basis, int m, const SolverParams& p) {
  if (m < 0 || m > basis.size()) throw ValidationError("assemble_A: m must lie in [0, J]");
  const auto nd = static_cast<Eigen::Index>(uh.grid->real_dim());
  if (m == 0) return Eigen::MatrixXd(nd, 0);
  if (basis.grid()->max_wavenumber() != uh.grid->max_wavenumber()) throw ValidationError("assemble_A: grid mismatch");
  const auto R = basis.rendering_matrix().leftCols(m);
  detail::BatchForcing forcing = [&](int node, Eigen::MatrixXd& F) {
    F = R * dictionary_time_factors(basis, m, node * p.dt).asDiagonal();
  };
  return propagate_tangent(uh, Eigen::MatrixXd::Zero(nd, m), p, forcing);
}

/// Low-mode rows of L and A obtained from 2N adjoint solves: P L (2N x 2M) and P A (2N x m).
struct LowModeSystem {
  Eigen::MatrixXd PL;
  Eigen::MatrixXd PA;
};

inline LowModeSystem low_mode_system(const Trajectory& uh, const NoiseBasis& basis, int N, int m,
                                     const SolverParams& p) {
  const auto& g = *uh.grid;
  const auto rows = low_mode_rows(g, static_cast<std::size_t>(N));
  const auto nd = static_cast<Eigen::Index>(g.real_dim());
  const auto nr = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd theta1 = Eigen::MatrixXd::Zero(nd, nr);
  for (Eigen::Index c = 0; c < nr; ++c) theta1(rows[static_cast<std::size_t>(c)], c) = 1.0;
  Eigen::MatrixXd AtP = Eigen::MatrixXd::Zero(m, nr);
  const auto R = basis.rendering_matrix().leftCols(m);
  const auto& cyl = basis.cylinder();
  auto accumulate = [&](int node, const Eigen::MatrixXd& G) {
    const double t = node * p.dt;
    if (m == 0 || t <= cyl.t_a || t >= cyl.t_b) return;
    AtP.noalias() += dictionary_time_factors(basis, m, t).asDiagonal() * (R.transpose() * G);
  };
  auto res = propagate_adjoint(uh, theta1, p, false, accumulate);
  return {res.theta0.transpose(), AtP.transpose()};
}

/// Gradient of J at c, used by tests and diagnostics.
inline Eigen::VectorXd quadratic_gradient(const Eigen::MatrixXd& PA, const Eigen::MatrixXd& PL,
                                          const Eigen::VectorXd& v0, const Eigen::VectorXd& c, double delta) {
  return c + (2.0 / delta) * PA.transpose() * (PL * v0 + PA * c);
}

inline double quadratic_objective(const Eigen::MatrixXd& PA, const Eigen::MatrixXd& PL, const Eigen::VectorXd& v0,
                                  const Eigen::VectorXd& c, double delta) {
  return 0.5 * c.squaredNorm() + (PL * v0 + PA * c).squaredNorm() / delta;
}

struct QuadraticSolution {
  Eigen::VectorXd c;
  double residual = 0.0;  // relative residual of the normal equations
};

/// Minimizer of J for low-mode rows PA = P A, PL = P L.
inline QuadraticSolution solve_quadratic_min_low(const Eigen::MatrixXd& PA, const Eigen::MatrixXd& PL,
                                                 const Eigen::VectorXd& v0, double delta) {
  if (!(delta > 0.0)) throw ValidationError("solve_quadratic_min: delta must be positive");
  if (PA.rows() != PL.rows() || PL.cols() != v0.size()) throw ValidationError("solve_quadratic_min: size mismatch");
  const auto m = PA.cols();
  if (m == 0) return {Eigen::VectorXd(0), 0.0};
  const double s = 2.0 / delta;
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(m, m);
  S.noalias() += s * PA.transpose() * PA;
  const Eigen::VectorXd rhs = -s * (PA.transpose() * (PL * v0));
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw NumericalError("solve_quadratic_min: normal matrix not positive definite");
  QuadraticSolution out{llt.solve(rhs), 0.0};
  const double scale = S.norm() * out.c.norm() + rhs.norm();
  out.residual = scale > 0.0 ? (S * out.c - rhs).norm() / scale : 0.0;
  return out;
}

/// Minimizer of J for full matrices A (2M x m) and L (2M x 2M).
inline QuadraticSolution solve_quadratic_min(const Eigen::MatrixXd& A, const Eigen::MatrixXd& L,
                                             const Eigen::VectorXd& v0, const WaveGrid& g, int N, double delta) {
  if (N < 1 || static_cast<std::size_t>(N) > g.size()) throw ValidationError("solve_quadratic_min: N out of range");
  const auto rows = low_mode_rows(g, static_cast<std::size_t>(N));
  return solve_quadratic_min_low(A(rows, Eigen::all), L(rows, Eigen::all), v0, delta);
}

/// Phi = -(2/delta) (I + (2/delta) PA^T PA)^{-1} PA^T PL, m x 2M.
inline Eigen::MatrixXd feedback_gain(const Eigen::MatrixXd& PA, const Eigen::MatrixXd& PL, double delta) {
  const auto m = PA.cols();
  if (m == 0) return Eigen::MatrixXd(0, PL.cols());
  const double s = 2.0 / delta;
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(m, m);
  S.noalias() += s * PA.transpose() * PA;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw NumericalError("feedback_gain: normal matrix not positive definite");
  return -s * llt.solve(PA.transpose() * PL);
}

/// Phi(h, uh0): v0 -> control coefficients on the first m dictionary elements.
struct ControlOperator {
  Eigen::MatrixXd gain;  // m x 2M
  ControlParams params;
  GridPtr grid;
  BasisPtr basis;
  std::uint64_t digest = 0;
  double low_mode_norm = std::numeric_limits<double>::quiet_NaN();  // ||P_N (L + A Phi)||
  double full_norm = std::numeric_limits<double>::quiet_NaN();      // ||L + A Phi||

  int m() const { return static_cast<int>(gain.rows()); }

  Eigen::VectorXd apply(const SpectralVelocity& v0) const {
    if (v0.grid()->max_wavenumber() != grid->max_wavenumber()) throw ValidationError("control: grid mismatch");
    return gain * v0.to_real();
  }
  /// Weights over the whole dictionary (zero beyond m).
  Eigen::VectorXd weights(const SpectralVelocity& v0) const {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(basis->size());
    w.head(m()) = apply(v0);
    return w;
  }
  ForcingProfile controlled_forcing(const ForcingProfile& h, const SpectralVelocity& v0) const {
    return h.with_dictionary(basis, weights(v0));
  }
};

/// Builds Phi around the trajectory from (uh0, h). The trajectory is returned through ref when given.
inline ControlOperator build_phi(const ForcingProfile& h, const SpectralVelocity& uh0, const BasisPtr& basis,
                                 const ControlParams& cp, const SolverParams& sp, Trajectory* ref = nullptr) {
  cp.validate(*uh0.grid(), *basis);
  Trajectory uh;
  time_one_map(uh0, h, sp, &uh);
  ControlOperator op{Eigen::MatrixXd(0, static_cast<Eigen::Index>(uh0.grid()->real_dim())), cp, uh0.grid(), basis,
                     trajectory_digest(uh)};
  if (cp.m > 0) {
    const auto sys = low_mode_system(uh, *basis, cp.N, cp.m, sp);
    op.gain = feedback_gain(sys.PA, sys.PL, cp.delta);
    op.low_mode_norm = (sys.PL + sys.PA * op.gain).norm() > 0.0
                           ? Eigen::JacobiSVD<Eigen::MatrixXd>(sys.PL + sys.PA * op.gain).singularValues()(0)
                           : 0.0;
  }
  if (ref) *ref = std::move(uh);
  return op;
}

inline double largest_singular_value(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::BDCSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

/// Closed-loop linear map L + A Phi; with m = 0 it is L.
inline Eigen::MatrixXd closed_loop(const Eigen::MatrixXd& L, const Eigen::MatrixXd& A, const Eigen::MatrixXd& gain) {
  if (gain.rows() == 0) return L;
  return L + A.leftCols(gain.rows()) * gain;
}

/// Fills full_norm and low_mode_norm from forward-assembled L and A.
inline void certify(ControlOperator& op, const Trajectory& uh, const SolverParams& sp) {
  const auto L = assemble_L(uh, sp);
  const auto A = assemble_A(uh, *op.basis, op.m(), sp);
  const auto C = closed_loop(L, A, op.gain);
  op.full_norm = largest_singular_value(C);
  const auto rows = low_mode_rows(*op.grid, static_cast<std::size_t>(op.params.N));
  op.low_mode_norm = largest_singular_value(C(rows, Eigen::all));
}

/// Observability of the low modes through the first m dictionary functionals.
struct ObservabilityReport {
  int N = 0;
  int m = 0;
  int rank = 0;
  bool full_rank = false;
  double c_obs = std::numeric_limits<double>::infinity();
  Eigen::VectorXd singular_values;  // of the observation map theta(1) -> (<theta, psi_j>)_{j <= m}
};

/// Assembles O: theta(1) in H_N -> (<theta, psi_j>_{L2(D_1)})_{j<=m} and G0: theta(1) -> theta(0) by adjoint
/// solves, then C_obs = max ||G0 x|| / ||O x|| over H_N.
inline ObservabilityReport observability_check(const Trajectory& uh, const NoiseBasis& basis, int N, int m,
                                               const SolverParams& sp, double rank_tol = 1e-10) {
  const auto& g = *uh.grid;
  if (N < 1 || static_cast<std::size_t>(N) > g.size()) throw ValidationError("observability: N out of range");
  if (m < 0 || m > basis.size()) throw ValidationError("observability: m out of range");
  const auto sys = low_mode_system(uh, basis, N, m, sp);
  const Eigen::MatrixXd O = sys.PA.transpose();   // m x 2N
  const Eigen::MatrixXd G0 = sys.PL.transpose();  // 2M x 2N
  ObservabilityReport r;
  r.N = N;
  r.m = m;
  const auto dim = 2 * N;
  if (m == 0) {
    r.singular_values = Eigen::VectorXd(0);
    return r;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(O, Eigen::ComputeFullV);
  r.singular_values = svd.singularValues();
  const double smax = r.singular_values.size() ? r.singular_values(0) : 0.0;
  r.rank = 0;
  for (Eigen::Index i = 0; i < r.singular_values.size(); ++i) {
    if (r.singular_values(i) > rank_tol * smax) ++r.rank;
  }
  r.full_rank = r.rank == dim;
  if (!r.full_rank) return r;
  // x = V S^{-1} y maps the unit sphere of observations onto H_N; C_obs = ||G0 V S^{-1}||.
  const Eigen::VectorXd sinv = r.singular_values.head(dim).cwiseInverse();
  r.c_obs = largest_singular_value(G0 * svd.matrixV() * sinv.asDiagonal());
  return r;
}

/// Row of the parameter sweep.
struct SweepEntry {
  int N = 0;
  double delta = 0.0;
  int m = 0;
  double full_norm = 0.0;
  double low_mode_norm = 0.0;
  double gain_norm = 0.0;
  bool certified = false;
};

struct SweepReport {
  std::vector<SweepEntry> entries;
  int selected = -1;  // index into entries, -1 when no combination certifies
  std::vector<ObservabilityReport> obstruction;  // filled only when the sweep is exhausted
  double best_norm = std::numeric_limits<double>::infinity();
  bool certified() const { return selected >= 0; }
};

struct SweepGrid {
  std::vector<int> N{4, 8, 16, 32};
  std::vector<double> delta{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<int> m{16, 32, 64};
};

/// Increases N, then m, then decreases delta until ||L + A Phi|| <= q/2. All combinations are tabulated.
inline SweepReport parameter_sweep(const Trajectory& uh, const BasisPtr& basis, double q, const SolverParams& sp,
                                   const SweepGrid& grid = {}) {
  const auto& g = *uh.grid;
  const int J = basis->size();
  const auto L = assemble_L(uh, sp);
  const auto A = assemble_A(uh, *basis, J, sp);
  SweepReport rep;
  for (int N : grid.N) {
    if (N < 1 || static_cast<std::size_t>(N) > g.size()) continue;
    const auto rows = low_mode_rows(g, static_cast<std::size_t>(N));
    const Eigen::MatrixXd PL = L(rows, Eigen::all);
    std::vector<int> ms;
    for (int m : grid.m) {
      const int mm = std::min(m, J);
      if (std::find(ms.begin(), ms.end(), mm) == ms.end()) ms.push_back(mm);
    }
    for (int m : ms) {
      const Eigen::MatrixXd PA = A(rows, Eigen::seqN(0, m));
      for (double delta : grid.delta) {
        SweepEntry e{N, delta, m};
        const auto gain = feedback_gain(PA, PL, delta);
        const auto C = closed_loop(L, A, gain);
        e.full_norm = largest_singular_value(C);
        e.low_mode_norm = largest_singular_value(C(rows, Eigen::all));
        e.gain_norm = largest_singular_value(gain);
        e.certified = e.full_norm <= q / 2.0;
        rep.best_norm = std::min(rep.best_norm, e.full_norm);
        rep.entries.push_back(e);
        if (e.certified && rep.selected < 0) rep.selected = static_cast<int>(rep.entries.size()) - 1;
      }
    }
  }
  if (!rep.certified()) {
    for (int N : grid.N) {
      if (N < 1 || static_cast<std::size_t>(N) > g.size()) continue;
      rep.obstruction.push_back(observability_check(uh, *basis, N, std::min(grid.m.back(), J), sp));
    }
  }
  return rep;
}

/// Random perturbation direction with smooth spectrum, normalized to unit L2 norm.
inline SpectralVelocity random_direction(const GridPtr& g, RngStream& rng) {
  SpectralVelocity v(g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    // Box-Muller on the stream's uniforms keeps the draw portable.
    const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double w = 1.0 / (1.0 + g->eigenvalue(i));
    v.coeffs()[static_cast<Eigen::Index>(i)] = w * std::polar(r, 2.0 * std::numbers::pi * u2);
  }
  return (1.0 / v.norm()) * v;
}

/// Nonlinear closed-loop evaluation for one initial offset v0 = u0 - uh0.
struct ContractionSample {
  double distance = 0.0;   // ||v0||
  double ratio = 0.0;      // ||S(u0, h + Phi v0) - S(uh0, h)|| / ||v0||
  double remainder = 0.0;  // ||z(1)||, the part beyond the linearization
};

inline ContractionSample contraction_sample(const ControlOperator& op, const ForcingProfile& h,
                                            const SpectralVelocity& uh0, const SpectralVelocity& uh1,
                                            const Trajectory& uh, const SpectralVelocity& v0, const SolverParams& sp) {
  ContractionSample s;
  s.distance = v0.norm();
  if (s.distance == 0.0) return s;
  const auto c = op.weights(v0);
  const auto u1 = time_one_map(uh0 + v0, op.controlled_forcing(h, v0), sp);
  const auto diff = u1 - uh1;
  s.ratio = diff.norm() / s.distance;
  // Linear part (L + A Phi) v0 by one tangent solve with the control forcing.
  const auto& basis = *op.basis;
  const int m = op.m();
  const auto R = basis.rendering_matrix().leftCols(m);
  detail::BatchForcing forcing = [&](int node, Eigen::MatrixXd& F) {
    if (m == 0) return;
    F.col(0) = R * dictionary_time_factors(basis, m, node * sp.dt).cwiseProduct(c.head(m));
  };
  const Eigen::VectorXd w = propagate_tangent(uh, v0.to_real(), sp, forcing);
  s.remainder = (diff.to_real() - w).norm();
  return s;
}

struct ContractionStats {
  int trials = 0;
  int successes = 0;
  double worst_ratio = 0.0;
  double success_rate() const { return trials ? static_cast<double>(successes) / trials : 1.0; }
  std::vector<ContractionSample> samples;
};

/// Runs nonlinear closed-loop solves from uh0 + v0 with ||v0|| <= d (radius uniform in (0, d]).
inline ContractionStats verify_contraction(const ControlOperator& op, const ForcingProfile& h,
                                           const SpectralVelocity& uh0, int trials, double q, double d,
                                           const SolverParams& sp, std::uint64_t seed) {
  Trajectory uh;
  const auto uh1 = time_one_map(uh0, h, sp, &uh);
  ContractionStats st;
  for (int i = 0; i < trials; ++i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i), 0);
    const double radius = d * (1.0 - rng.uniform());
    const auto v0 = radius * random_direction(uh0.grid(), rng);
    const auto s = contraction_sample(op, h, uh0, uh1, uh, v0, sp);
    ++st.trials;
    if (s.ratio <= q) ++st.successes;
    st.worst_ratio = std::max(st.worst_ratio, s.ratio);
    st.samples.push_back(s);
  }
  return st;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("loglog_slope: need two or more points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ValidationError("loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

/// Remainder ||z(1)|| along fixed directions at radii d, d/2, ..., d/2^(levels-1); returns the fitted slope.
struct RemainderScaling {
  std::vector<double> radii;
  std::vector<double> remainders;  // averaged over directions
  double slope = 0.0;
};

inline RemainderScaling remainder_scaling(const ControlOperator& op, const ForcingProfile& h,
                                          const SpectralVelocity& uh0, double d, int levels, int directions,
                                          const SolverParams& sp, std::uint64_t seed) {
  Trajectory uh;
  const auto uh1 = time_one_map(uh0, h, sp, &uh);
  RemainderScaling r;
  for (int l = 0; l < levels; ++l) {
    const double radius = d * std::pow(0.5, l);
    double acc = 0.0;
    for (int k = 0; k < directions; ++k) {
      RngStream rng(seed, static_cast<std::uint64_t>(k), 1);
      const auto v0 = radius * random_direction(uh0.grid(), rng);
      acc += contraction_sample(op, h, uh0, uh1, uh, v0, sp).remainder;
    }
    r.radii.push_back(radius);
    r.remainders.push_back(acc / directions);
  }
  r.slope = loglog_slope(r.radii, r.remainders);
  return r;
}

/// Largest d (bisection in log scale) with ||z(1)|| <= (q/2) ||v0|| along the probe directions at radius d.
inline double calibrate_d(const ControlOperator& op, const ForcingProfile& h, const SpectralVelocity& uh0, double q,
                          const SolverParams& sp, std::uint64_t seed, int directions = 16, double d_max = 1.0,
                          int iterations = 30) {
  Trajectory uh;
  const auto uh1 = time_one_map(uh0, h, sp, &uh);
  std::vector<SpectralVelocity> dirs;
  for (int k = 0; k < directions; ++k) {
    RngStream rng(seed, static_cast<std::uint64_t>(k), 2);
    dirs.push_back(random_direction(uh0.grid(), rng));
  }
  auto ok = [&](double d) {
    for (const auto& v : dirs) {
      try {
        if (contraction_sample(op, h, uh0, uh1, uh, d * v, sp).remainder > 0.5 * q * d) return false;
      } catch (const IntegrationFailure&) {
        return false;
      }
    }
    return true;
  };
  if (ok(d_max)) return d_max;
  double lo = d_max * 1e-8, hi = d_max;
  if (!ok(lo)) return 0.0;
  for (int i = 0; i < iterations; ++i) {
    const double mid = std::sqrt(lo * hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

/// Finite-difference Lipschitz ratios ||Phi(h + dh, u + du) - Phi(h, u)|| / (||dh||_1 + ||du||).
struct LipschitzReport {
  std::vector<double> magnitudes;
  std::vector<double> max_ratio;  // per magnitude, over directions
};

inline LipschitzReport lipschitz_check(const ForcingProfile& h, const SpectralVelocity& uh0, const BasisPtr& basis,
                                       const ControlParams& cp, const SolverParams& sp, int directions,
                                       const std::vector<double>& magnitudes, std::uint64_t seed) {
  const auto base = build_phi(h, uh0, basis, cp, sp);
  LipschitzReport rep{magnitudes, {}};
  const auto& g = uh0.grid();
  for (double eps : magnitudes) {
    double worst = 0.0;
    for (int k = 0; k < directions; ++k) {
      RngStream rng(seed, static_cast<std::uint64_t>(k), 3);
      const auto du = eps * random_direction(g, rng);
      const auto dir = random_direction(g, rng);
      const double scale = eps / ForcingProfile::steady(dir).h1_norm();  // ||dh||_{H1(D_1)} = eps
      ForcingProfile hp = h.grid() ? h : ForcingProfile::zero(g);
      hp.add_harmonic(0, scale * dir, SpectralVelocity(g));
      const auto op = build_phi(hp, uh0 + du, basis, cp, sp);
      const double num = largest_singular_value(op.gain - base.gain);
      worst = std::max(worst, num / (eps + du.norm()));
    }
    rep.max_ratio.push_back(worst);
  }
  return rep;
}

}  // namespace nsmix
