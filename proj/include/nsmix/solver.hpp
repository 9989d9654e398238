#pragma once

// Time integration on J_1 = [0, 1] of the Galerkin Navier-Stokes system
//   u' + nu A u + B(u, u) = f,
// its tangent (linearized) system around a reference trajectory, and the exact
// discrete adjoint of that tangent scheme.
//
// Scheme: integrating factor E = exp(-nu |k|^2 dt) for the viscous term, Heun for
// the rest:
//   u*      = E (u + dt N(u, t))
//   u_{n+1} = E u + dt/2 (E N(u, t) + N(u*, t + dt)),   N(u, t) = f(t) - B(u, u).
// The tangent scheme is the exact derivative of this map, so linearized solves are
// consistent with finite differences of the nonlinear solver to roundoff.

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "nsmix/errors.hpp"
#include "nsmix/forcing.hpp"
#include "nsmix/noise.hpp"
#include "nsmix/spectral.hpp"

namespace nsmix {

struct SolverParams {
  double nu = 0.5;
  double dt = 1e-3;

  static constexpr double kMaxDt = 1e-2;
  static constexpr double kBlowUp = 1e8;

  int steps() const {
    const double n = std::round(1.0 / dt);
    if (!(dt > 0.0) || dt > kMaxDt * (1.0 + 1e-12) || std::abs(n * dt - 1.0) > 1e-9) {
      throw ValidationError("solver: dt must divide 1 and satisfy 0 < dt <= 1e-2");
    }
    return static_cast<int>(n);
  }
  void validate() const {
    if (!(nu > 0.0)) throw ValidationError("solver: viscosity must be positive");
    (void)steps();
  }
};

/// Snapshots u(t_i), t_i = i dt on [0, 1]; predictor states are kept for the tangent scheme.
struct Trajectory {
  GridPtr grid;
  double dt = 1e-3;
  std::vector<Eigen::VectorXcd> snapshots;  // steps + 1
  std::vector<Eigen::VectorXcd> stages;     // steps (predictor u*), may be empty

  std::size_t steps() const { return snapshots.empty() ? 0 : snapshots.size() - 1; }
  SpectralVelocity at(std::size_t i) const { return {grid, snapshots.at(i)}; }
  SpectralVelocity final_state() const { return {grid, snapshots.back()}; }
  double time(std::size_t i) const { return static_cast<double>(i) * dt; }

  /// u(t) = u for all t.
  static Trajectory constant(const SpectralVelocity& u, double dt) {
    Trajectory tr{u.grid(), dt, {}, {}};
    const int n = SolverParams{1.0, dt}.steps();
    tr.snapshots.assign(static_cast<std::size_t>(n + 1), u.coeffs());
    tr.stages.assign(static_cast<std::size_t>(n), u.coeffs());
    return tr;
  }

  void check_mesh(const GridPtr& g, double dt_other) const {
    if (!grid || g->max_wavenumber() != grid->max_wavenumber()) throw ValidationError("trajectory grid mismatch");
    if (std::abs(dt - dt_other) > 1e-15 || steps() != static_cast<std::size_t>(SolverParams{1.0, dt_other}.steps())) {
      throw ValidationError("trajectory mesh mismatch");
    }
  }
};

namespace detail {

inline Eigen::VectorXd decay_factors(const WaveGrid& g, double nu, double dt) {
  Eigen::VectorXd e(static_cast<Eigen::Index>(g.real_dim()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = std::exp(-nu * g.eigenvalue(i) * dt);
    e[static_cast<Eigen::Index>(2 * i)] = v;
    e[static_cast<Eigen::Index>(2 * i + 1)] = v;
  }
  return e;
}

inline Eigen::VectorXcd decay_factors_complex(const WaveGrid& g, double nu, double dt) {
  Eigen::VectorXcd e(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) e[static_cast<Eigen::Index>(i)] = std::exp(-nu * g.eigenvalue(i) * dt);
  return e;
}

inline void guard(const Eigen::VectorXcd& u, double t) {
  const double m = u.cwiseAbs().maxCoeff();
  if (!(m <= SolverParams::kBlowUp)) {
    throw IntegrationFailure("integration failure at t=" + std::to_string(t) +
                             ": coefficient magnitude " + std::to_string(m) + " exceeds guard");
  }
}

inline Eigen::VectorXcd cplx_from_real(const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXcd c(x.size() / 2);
  const double s = 1.0 / std::sqrt(2.0);
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = cplx(s * x[2 * i], s * x[2 * i + 1]);
  return c;
}

inline Eigen::VectorXd real_from_cplx(const Eigen::VectorXcd& c) {
  Eigen::VectorXd x(2 * c.size());
  const double s = std::sqrt(2.0);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    x[2 * i] = s * c[i].real();
    x[2 * i + 1] = s * c[i].imag();
  }
  return x;
}

/// Forcing sampled on the mesh, complex coefficients per node.
inline std::vector<Eigen::VectorXcd> sample_forcing(const ForcingProfile& f, const GridPtr& g, int steps, double dt) {
  std::vector<Eigen::VectorXcd> out(static_cast<std::size_t>(steps + 1));
  if (!f.grid()) {
    for (auto& v : out) v.setZero(static_cast<Eigen::Index>(g->size()));
    return out;
  }
  if (f.grid()->max_wavenumber() != g->max_wavenumber()) throw ValidationError("forcing grid mismatch");
  for (int n = 0; n <= steps; ++n) f.eval_into(n * dt, out[static_cast<std::size_t>(n)]);
  return out;
}

}  // namespace detail

/// One integrating-factor Heun step with forcing values at t and t + dt.
inline SpectralVelocity step(const SpectralVelocity& u, const SpectralVelocity& f_now, const SpectralVelocity& f_next,
                             double t, double dt, double nu) {
  if (!(dt > 0.0) || dt > SolverParams::kMaxDt * (1 + 1e-12)) throw ValidationError("step: need 0 < dt <= 1e-2");
  if (!(nu > 0.0)) throw ValidationError("step: viscosity must be positive");
  u.check_same(f_now);
  u.check_same(f_next);
  const auto E = detail::decay_factors_complex(*u.grid(), nu, dt);
  std::vector<cplx> scratch;
  Eigen::VectorXcd q;
  quadratic_into(u.grid(), u.coeffs(), q, scratch);
  const Eigen::VectorXcd k1 = f_now.coeffs() - q;
  const Eigen::VectorXcd us = E.cwiseProduct(u.coeffs() + dt * k1);
  quadratic_into(u.grid(), us, q, scratch);
  const Eigen::VectorXcd k2 = f_next.coeffs() - q;
  SpectralVelocity out(u.grid(), E.cwiseProduct(u.coeffs()) + 0.5 * dt * (E.cwiseProduct(k1) + k2));
  detail::guard(out.coeffs(), t + dt);
  return out;
}

inline SpectralVelocity step(const SpectralVelocity& u, const ForcingProfile& f, double t, double dt, double nu) {
  return step(u, f.grid() ? f.at(t) : SpectralVelocity(u.grid()), f.grid() ? f.at(t + dt) : SpectralVelocity(u.grid()),
              t, dt, nu);
}

/// S(u0, f): the solution at t = 1. Optionally records the full trajectory.
inline SpectralVelocity time_one_map(const SpectralVelocity& u0, const ForcingProfile& f, const SolverParams& p,
                                     Trajectory* record = nullptr) {
  p.validate();
  const int n = p.steps();
  const auto& g = u0.grid();
  const auto E = detail::decay_factors_complex(*g, p.nu, p.dt);
  const auto forcing = detail::sample_forcing(f, g, n, p.dt);
  if (record) {
    *record = Trajectory{g, p.dt, {}, {}};
    record->snapshots.reserve(static_cast<std::size_t>(n + 1));
    record->stages.reserve(static_cast<std::size_t>(n));
    record->snapshots.push_back(u0.coeffs());
  }
  std::vector<cplx> scratch;
  Eigen::VectorXcd u = u0.coeffs(), q, k1, us;
  for (int i = 0; i < n; ++i) {
    quadratic_into(g, u, q, scratch);
    k1 = forcing[static_cast<std::size_t>(i)] - q;
    us = E.cwiseProduct(u + p.dt * k1);
    quadratic_into(g, us, q, scratch);
    u = E.cwiseProduct(u) + (0.5 * p.dt) * (E.cwiseProduct(k1) + forcing[static_cast<std::size_t>(i + 1)] - q);
    detail::guard(u, (i + 1) * p.dt);
    if (record) {
      record->stages.push_back(us);
      record->snapshots.push_back(u);
    }
  }
  return {g, std::move(u)};
}

namespace detail {

/// Per-column forcing for batched tangent solves: fills F (n x r) at mesh node i.
using BatchForcing = std::function<void(int node, Eigen::MatrixXd& F)>;

}  // namespace detail

/// Batched tangent propagation W(0) = W0 -> W(1) around uh, columns are independent solves.
/// forcing may be empty (zero forcing). When keep is non-null it receives W at every node.
inline Eigen::MatrixXd propagate_tangent(const Trajectory& uh, const Eigen::MatrixXd& W0, const SolverParams& p,
                                         const detail::BatchForcing& forcing = {},
                                         std::vector<Eigen::MatrixXd>* keep = nullptr) {
  p.validate();
  uh.check_mesh(uh.grid, p.dt);
  const auto& g = uh.grid;
  const int n = p.steps();
  const auto nd = static_cast<Eigen::Index>(g->real_dim());
  if (W0.rows() != nd) throw ValidationError("propagate_tangent: state dimension mismatch");
  const Eigen::VectorXd E = detail::decay_factors(*g, p.nu, p.dt);
  const double dt = p.dt;
  Eigen::MatrixXd W = W0, K1, Ws, K2, Fn, Fn1, J;
  std::vector<cplx> scratch;
  const bool forced = static_cast<bool>(forcing);
  if (forced) {
    Fn.setZero(nd, W0.cols());
    forcing(0, Fn);
  }
  if (keep) {
    keep->clear();
    keep->push_back(W);
  }
  for (int i = 0; i < n; ++i) {
    tangent_matrix_into(g, uh.snapshots[static_cast<std::size_t>(i)], J, scratch);
    K1.noalias() = -J * W;
    if (forced) K1 += Fn;
    Ws = E.asDiagonal() * (W + dt * K1);
    const auto& stage = uh.stages.empty() ? uh.snapshots[static_cast<std::size_t>(i + 1)]
                                          : uh.stages[static_cast<std::size_t>(i)];
    tangent_matrix_into(g, stage, J, scratch);
    K2.noalias() = -J * Ws;
    if (forced) {
      Fn1.setZero(nd, W0.cols());
      forcing(i + 1, Fn1);
      K2 += Fn1;
      std::swap(Fn, Fn1);
    }
    W = E.asDiagonal() * (W + (0.5 * dt) * K1) + (0.5 * dt) * K2;
    if (keep) keep->push_back(W);
  }
  return W;
}

/// Result of a backward adjoint sweep.
struct AdjointResult {
  Eigen::MatrixXd theta0;  // adjoint state at t = 0
  // Sensitivity of <w(1), theta(1)> to the forcing value at every node:
  // <w(1), theta(1)> = <w(0), theta(0)> + sum_n <g(t_n), G_n>. G_n ~ dt * theta(t_n).
  std::vector<Eigen::MatrixXd> forcing_sensitivity;
  std::vector<Eigen::MatrixXd> theta;  // theta at every node (when requested)
};

/// Exact discrete adjoint of propagate_tangent, swept backward from theta(1) = Theta1.
/// When on_sensitivity is set, forcing sensitivities are streamed to it (node order n, n-1, ..., 0)
/// instead of being stored.
inline AdjointResult propagate_adjoint(const Trajectory& uh, const Eigen::MatrixXd& Theta1, const SolverParams& p,
                                       bool keep_states = true,
                                       const std::function<void(int, const Eigen::MatrixXd&)>& on_sensitivity = {}) {
  p.validate();
  uh.check_mesh(uh.grid, p.dt);
  const auto& g = uh.grid;
  const int n = p.steps();
  const auto nd = static_cast<Eigen::Index>(g->real_dim());
  if (Theta1.rows() != nd) throw ValidationError("propagate_adjoint: state dimension mismatch");
  const Eigen::VectorXd E = detail::decay_factors(*g, p.nu, p.dt);
  const double dt = p.dt;
  AdjointResult res;
  const bool stream = static_cast<bool>(on_sensitivity);
  if (!stream) res.forcing_sensitivity.assign(static_cast<std::size_t>(n + 1), Eigen::MatrixXd());
  if (keep_states) res.theta.assign(static_cast<std::size_t>(n + 1), Eigen::MatrixXd());
  auto emit = [&](int node, Eigen::MatrixXd& s) {
    if (stream) {
      on_sensitivity(node, s);
    } else {
      res.forcing_sensitivity[static_cast<std::size_t>(node)] = s;
    }
  };
  Eigen::MatrixXd L = Theta1, lK1, lK2, lWs, lW, J;
  Eigen::MatrixXd pending = Eigen::MatrixXd::Zero(nd, Theta1.cols());
  std::vector<cplx> scratch;
  if (keep_states) res.theta[static_cast<std::size_t>(n)] = L;
  for (int i = n - 1; i >= 0; --i) {
    // Reverse of: K1 = -J_i W + F_i; Ws = E(W + dt K1); K2 = -J*_i Ws + F_{i+1};
    //             W' = E W + dt/2 E K1 + dt/2 K2.
    lK2 = (0.5 * dt) * L;
    lK1 = (0.5 * dt) * (E.asDiagonal() * L);
    lW = E.asDiagonal() * L;
    const auto& stage = uh.stages.empty() ? uh.snapshots[static_cast<std::size_t>(i + 1)]
                                          : uh.stages[static_cast<std::size_t>(i)];
    tangent_matrix_into(g, stage, J, scratch);
    lWs.noalias() = -J.transpose() * lK2;
    pending += lK2;
    emit(i + 1, pending);
    lWs = E.asDiagonal() * lWs;
    lW += lWs;
    lK1 += dt * lWs;
    tangent_matrix_into(g, uh.snapshots[static_cast<std::size_t>(i)], J, scratch);
    lW.noalias() -= J.transpose() * lK1;
    pending = lK1;
    L = lW;
    if (keep_states) res.theta[static_cast<std::size_t>(i)] = L;
  }
  emit(0, pending);
  res.theta0 = L;
  return res;
}

/// w = R^uh(v0, g): tangent solution as a Trajectory.
inline Trajectory solve_linearized(const SpectralVelocity& v0, const ForcingProfile& g, const Trajectory& uh,
                                   const SolverParams& p) {
  uh.check_mesh(v0.grid(), p.dt);
  const int n = p.steps();
  const auto forcing = detail::sample_forcing(g, v0.grid(), n, p.dt);
  detail::BatchForcing bf = [&](int node, Eigen::MatrixXd& F) {
    F.col(0) = detail::real_from_cplx(forcing[static_cast<std::size_t>(node)]);
  };
  std::vector<Eigen::MatrixXd> keep;
  propagate_tangent(uh, v0.to_real(), p, bf, &keep);
  Trajectory out{v0.grid(), p.dt, {}, {}};
  out.snapshots.reserve(keep.size());
  for (const auto& w : keep) out.snapshots.push_back(detail::cplx_from_real(w.col(0)));
  return out;
}

/// Adjoint trajectory theta with theta(1) = g1 plus forcing sensitivities.
struct AdjointTrajectory {
  Trajectory theta;
  std::vector<SpectralVelocity> sensitivity;  // G_n, the discrete dt * theta(t_n) weights

  /// sum_n <g(t_n), G_n>: the discrete counterpart of int_0^1 <g(t), theta(t)> dt.
  double pair_with(const ForcingProfile& g, const SolverParams& p) const {
    const auto forcing = detail::sample_forcing(g, theta.grid, p.steps(), p.dt);
    double s = 0.0;
    for (std::size_t i = 0; i < forcing.size(); ++i) s += inner(SpectralVelocity(theta.grid, forcing[i]), sensitivity[i]);
    return s;
  }
};

inline AdjointTrajectory solve_adjoint(const SpectralVelocity& g1, const Trajectory& uh, const SolverParams& p) {
  uh.check_mesh(g1.grid(), p.dt);
  auto res = propagate_adjoint(uh, g1.to_real(), p, true);
  AdjointTrajectory out{Trajectory{g1.grid(), p.dt, {}, {}}, {}};
  for (const auto& th : res.theta) out.theta.snapshots.push_back(detail::cplx_from_real(th.col(0)));
  for (const auto& s : res.forcing_sensitivity) out.sensitivity.emplace_back(SpectralVelocity::from_real(g1.grid(), s.col(0)));
  return out;
}

/// u_k = S(u_{k-1}, h + eta_k).
inline SpectralVelocity chain_step(const SpectralVelocity& u, const ForcingProfile& h, const BasisPtr& basis,
                                   const NoiseSample& eta, const SolverParams& p) {
  return time_one_map(u, h.with_dictionary(basis, noise_weights(*basis, eta)), p);
}

/// Energy 1/2 ||u||^2 and enstrophy 1/2 ||curl u||^2.
inline double energy(const SpectralVelocity& u) { return 0.5 * u.norm() * u.norm(); }
inline double enstrophy(const SpectralVelocity& u) { return 0.5 * u.norm_h1() * u.norm_h1(); }

}  // namespace nsmix
