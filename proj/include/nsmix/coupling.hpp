#pragma once

// Couplings of the noise law lambda (product of rho on [-1, 1]^J) with its image
// under the control shift xi -> xi + e(xi), the coupled one-step kernel built on
// them, and the extension chain that runs it near the diagonal.
//
// With v0 = u' - u, the shift carries the control Phi(h + eta, u) v0 into noise
// coordinates: b_j e_j = chi(||h + eta||_1) (Phi v0)_j for j <= m, e_j = 0 beyond.
// When the coupled noises agree after the shift, u' receives exactly the feedback
// that steers it towards the trajectory of u.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsmix/control.hpp"
#include "nsmix/errors.hpp"
#include "nsmix/forcing.hpp"
#include "nsmix/noise.hpp"
#include "nsmix/solver.hpp"
#include "nsmix/stats.hpp"

namespace nsmix {

enum class ShiftMode { frozen, exact };

inline const char* to_string(ShiftMode m) { return m == ShiftMode::frozen ? "frozen" : "exact"; }

inline ShiftMode parse_shift_mode(const std::string& s) {
  if (s == "frozen") return ShiftMode::frozen;
  if (s == "exact") return ShiftMode::exact;
  throw ConfigError("mode must be 'frozen' or 'exact', got '" + s + "'");
}

/// Smooth non-increasing cutoff: 1 for r <= R - 1, 0 for r >= R.
inline double cutoff(double r, double R) {
  const double s = r - (R - 1.0);
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / s), b = std::exp(-1.0 / (1.0 - s));
  return b / (a + b);
}

/// R = ||h||_1 + sum_j b_j ||psi_j||_1 + 1, so ||h + eta||_1 <= R - 1 for every admissible noise.
inline double cutoff_radius(const ForcingProfile& h, const NoiseBasis& basis) {
  const double hn = h.grid() ? h.h1_norm() : 0.0;
  return hn + basis.weighted_h1_sum() + 1.0;
}

/// xi -> xi + e(xi) on [-1, 1]^J, with e supported on the first m coordinates.
class ShiftMap {
 public:
  using Rule = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  static constexpr int kMaxFixedPointIterations = 100;
  static constexpr double kInversionTolerance = 1e-10;

  static ShiftMap identity(int J) {
    ShiftMap s;
    s.J_ = J;
    s.e_ = Eigen::VectorXd::Zero(J);
    return s;
  }

  /// Frozen mode: translation by a constant vector supported on the first m coordinates.
  static ShiftMap translation(const Eigen::VectorXd& e, int m) {
    if (m < 0 || m > e.size()) throw ValidationError("shift: active block out of range");
    if (m < e.size() && e.tail(e.size() - m).cwiseAbs().maxCoeff() != 0.0) {
      throw ValidationError("shift: translation must vanish beyond the active block");
    }
    ShiftMap s;
    s.J_ = static_cast<int>(e.size());
    s.m_ = m;
    s.e_ = e;
    return s;
  }

  /// Exact mode: e(xi) recomputed from xi by `rule`.
  static ShiftMap from_rule(int J, int m, Rule rule) {
    if (m < 0 || m > J) throw ValidationError("shift: active block out of range");
    ShiftMap s;
    s.J_ = J;
    s.m_ = m;
    s.mode_ = ShiftMode::exact;
    s.rule_ = std::move(rule);
    s.e_ = Eigen::VectorXd::Zero(J);
    return s;
  }

  ShiftMode mode() const { return mode_; }
  int dimension() const { return J_; }
  int active() const { return m_; }
  bool is_identity() const { return mode_ == ShiftMode::frozen && e_.cwiseAbs().maxCoeff() == 0.0; }
  /// Set when the control could not be built and the coupling degrades to independent noise.
  bool fallback = false;

  /// Constant shift (frozen mode); zero vector in exact mode.
  const Eigen::VectorXd& translation_vector() const { return e_; }

  Eigen::VectorXd shift(const Eigen::VectorXd& xi) const {
    check(xi);
    if (mode_ == ShiftMode::frozen) return e_;
    Eigen::VectorXd e = rule_(xi);
    if (e.size() != J_) throw ValidationError("shift: rule returned a vector of the wrong size");
    if (m_ < J_) e.tail(J_ - m_).setZero();
    return e;
  }
  Eigen::VectorXd apply(const Eigen::VectorXd& xi) const { return xi + shift(xi); }

  /// Theta with Theta + e(Theta) = y, by fixed-point iteration Theta <- y - e(Theta).
  Eigen::VectorXd invert(const Eigen::VectorXd& y, double* residual = nullptr) const {
    check(y);
    if (mode_ == ShiftMode::frozen) {
      if (residual) *residual = 0.0;
      return y - e_;
    }
    Eigen::VectorXd theta = y;
    for (int it = 0; it < kMaxFixedPointIterations; ++it) {
      const Eigen::VectorXd e = shift(theta);
      const double r = (theta + e - y).norm();
      if (r <= kInversionTolerance) {
        if (residual) *residual = r;
        return theta;
      }
      theta = y - e;
    }
    throw NumericalError("shift: fixed-point inversion did not converge in 100 iterations");
  }

  /// m x m central-difference Jacobian of e with respect to the active coordinates.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& xi, double step = 1e-6) const {
    check(xi);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m_, m_);
    if (mode_ == ShiftMode::frozen) return D;
    for (int c = 0; c < m_; ++c) {
      Eigen::VectorXd xp = xi, xm = xi;
      xp[c] += step;
      xm[c] -= step;
      D.col(c) = (shift(xp).head(m_) - shift(xm).head(m_)) / (2.0 * step);
    }
    return D;
  }

  /// log |det D(xi + e(xi))|; the Jacobian is block upper-triangular, so only the active block counts.
  double log_jacobian_det(const Eigen::VectorXd& xi) const {
    if (mode_ == ShiftMode::frozen || m_ == 0) return 0.0;
    const Eigen::MatrixXd D = Eigen::MatrixXd::Identity(m_, m_) + jacobian(xi);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(D);
    const Eigen::MatrixXd U = lu.matrixLU().triangularView<Eigen::Upper>();
    double s = 0.0;
    for (int i = 0; i < m_; ++i) s += std::log(std::abs(U(i, i)));
    return s;
  }

  /// Log density of the image law at y.
  double log_pushforward_density(const Eigen::VectorXd& y) const {
    const auto theta = invert(y);
    const double lp = log_density(theta);
    if (!std::isfinite(lp)) return lp;
    return lp - log_jacobian_det(theta);
  }
  double pushforward_density(const Eigen::VectorXd& y) const { return std::exp(log_pushforward_density(y)); }

 private:
  void check(const Eigen::VectorXd& xi) const {
    if (xi.size() != J_) throw ValidationError("shift: noise vector has the wrong dimension");
  }

  int J_ = 0;
  int m_ = 0;
  ShiftMode mode_ = ShiftMode::frozen;
  Eigen::VectorXd e_;
  Rule rule_;
};

/// Everything a coupled step needs besides the two states.
struct CouplingSetup {
  ForcingProfile h;
  BasisPtr basis;
  ControlParams control;
  SolverParams solver;
  ShiftMode mode = ShiftMode::frozen;
  double radius = 0.0;  // cutoff radius R; computed from (h, basis) when 0
};

namespace detail {

inline Eigen::VectorXd coefficients_to_shift(const NoiseBasis& basis, const Eigen::VectorXd& c, double chi) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(basis.size());
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    const double b = basis.amplitude(static_cast<int>(j));
    if (b == 0.0) throw ValidationError("shift: control acts on a dictionary element with zero amplitude");
    e[j] = chi * c[j] / b;
  }
  return e;
}

}  // namespace detail

/// Builds the shift for the pair (u, u'). Control failures give the identity with `fallback` set.
inline ShiftMap shift_map_build(const SpectralVelocity& u, const SpectralVelocity& up, const CouplingSetup& cs) {
  const auto& basis = *cs.basis;
  const int J = basis.size();
  const SpectralVelocity v0 = up - u;
  if (v0.norm() == 0.0 || cs.control.m == 0) return ShiftMap::identity(J);
  const double R = cs.radius > 0.0 ? cs.radius : cutoff_radius(cs.h, basis);
  try {
    if (cs.mode == ShiftMode::frozen) {
      const auto op = build_phi(cs.h, u, cs.basis, cs.control, cs.solver);
      const double chi = cutoff(cs.h.grid() ? cs.h.h1_norm() : 0.0, R);
      return ShiftMap::translation(detail::coefficients_to_shift(basis, op.apply(v0), chi), cs.control.m);
    }
    auto rule = [u, v0, cs, R](const Eigen::VectorXd& xi) {
      const auto& b = *cs.basis;
      const auto f = cs.h.with_dictionary(cs.basis, noise_weights(b, NoiseSample{xi}));
      const auto op = build_phi(f, u, cs.basis, cs.control, cs.solver);
      return detail::coefficients_to_shift(b, op.apply(v0), cutoff(f.h1_norm(), R));
    };
    auto map = ShiftMap::from_rule(J, cs.control.m, rule);
    (void)map.shift(Eigen::VectorXd::Zero(J));  // surfaces build failures here
    return map;
  } catch (const NumericalError&) {
    auto id = ShiftMap::identity(J);
    id.fallback = true;
    return id;
  }
}

/// Output of one maximal-coupling draw: x_q ~ q, x_p ~ p, equal with probability 1 - TV(p, q).
struct CouplingDraw {
  Eigen::VectorXd x_q;
  Eigen::VectorXd x_p;
  bool same = false;
  double accept_probability = 1.0;  // min(1, p(x_q)/q(x_q)); 1 minus it estimates TV without bias
  long residual_attempts = 0;
};

/// Densities and samplers for the two marginals. sample_q returns a draw together with log q at the draw.
struct CouplingPair {
  std::function<Eigen::VectorXd(RngStream&)> sample_p;
  std::function<std::pair<Eigen::VectorXd, double>(RngStream&)> sample_q;
  std::function<double(const Eigen::VectorXd&)> log_p;
  std::function<double(const Eigen::VectorXd&)> log_q;
};

inline constexpr long kMaxResidualAttempts = 1000000;

/// Gamma-coupling: X ~ q kept for p with probability min(1, p/q); otherwise Y from the residual (p - q)^+.
inline CouplingDraw maximal_coupling_sample(const CouplingPair& pq, RngStream& rng) {
  CouplingDraw out;
  auto [x, lq] = pq.sample_q(rng);
  const double lp = pq.log_p(x);
  out.accept_probability = std::isfinite(lp) ? std::exp(std::min(0.0, lp - lq)) : 0.0;
  out.x_q = x;
  if (rng.uniform() < out.accept_probability) {
    out.x_p = std::move(x);
    out.same = true;
    return out;
  }
  for (out.residual_attempts = 1; out.residual_attempts <= kMaxResidualAttempts; ++out.residual_attempts) {
    Eigen::VectorXd y = pq.sample_p(rng);
    const double ly = pq.log_p(y), lqy = pq.log_q(y);
    const double keep = std::isfinite(lqy) ? 1.0 - std::exp(std::min(0.0, lqy - ly)) : 1.0;
    if (rng.uniform() < keep) {
      out.x_p = std::move(y);
      return out;
    }
  }
  throw NumericalError("maximal coupling: residual sampling exceeded 1e6 attempts");
}

/// Coupling of (Psi_* lambda, lambda): q-draws are images of lambda-draws under the shift.
inline CouplingPair shifted_noise_pair(const ShiftMap& map, const NoiseBasis& basis,
                                       Eigen::VectorXd* preimage = nullptr) {
  CouplingPair pq;
  pq.sample_p = [&basis](RngStream& rng) { return sample_noise(basis, rng).xi; };
  pq.sample_q = [&map, &basis, preimage](RngStream& rng) {
    Eigen::VectorXd zeta = sample_noise(basis, rng).xi;
    const double lq = log_density(zeta) - map.log_jacobian_det(zeta);
    Eigen::VectorXd x = map.apply(zeta);
    if (preimage) *preimage = std::move(zeta);
    return std::pair{std::move(x), lq};
  };
  pq.log_p = [](const Eigen::VectorXd& y) { return log_density(y); };
  pq.log_q = [&map](const Eigen::VectorXd& y) { return map.log_pushforward_density(y); };
  return pq;
}

/// Monte Carlo estimate of TV(lambda, Psi_* lambda) = E_zeta (1 - p(Psi zeta)/q(Psi zeta))^+.
inline MeanStat shift_tv_estimate(const ShiftMap& map, const NoiseBasis& basis, int samples, RngStream& rng) {
  if (map.is_identity()) return {0.0, 0.0};
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    const Eigen::VectorXd zeta = sample_noise(basis, rng).xi;
    const double lq = log_density(zeta) - map.log_jacobian_det(zeta);
    const double lp = log_density(map.apply(zeta));
    v.push_back(std::isfinite(lp) ? 1.0 - std::exp(std::min(0.0, lp - lq)) : 1.0);
  }
  return mean_stat(v);
}

/// Result of one coupled step from (u, u').
struct KernelOutcome {
  SpectralVelocity V;
  SpectralVelocity Vp;
  bool same_noise = false;
  bool fallback = false;
  double accept_probability = 1.0;
  Eigen::VectorXd zeta;   // noise for u
  Eigen::VectorXd zetap;  // noise for u'
};

inline SpectralVelocity step_with_noise(const SpectralVelocity& u, const CouplingSetup& cs, const Eigen::VectorXd& xi) {
  return time_one_map(u, cs.h.with_dictionary(cs.basis, noise_weights(*cs.basis, NoiseSample{xi})), cs.solver);
}

/// (V, V') = (S(u, h + zeta), S(u', h + zeta')) with (Psi zeta, zeta') maximally coupled, for a shift
/// already built for the pair.
inline KernelOutcome coupled_kernel(const SpectralVelocity& u, const SpectralVelocity& up, const CouplingSetup& cs,
                                    const ShiftMap& map, RngStream& rng) {
  const auto& basis = *cs.basis;
  KernelOutcome out;
  if ((up - u).norm() == 0.0) {
    out.zeta = sample_noise(basis, rng).xi;
    out.zetap = out.zeta;
    out.V = step_with_noise(u, cs, out.zeta);
    out.Vp = out.V;
    out.same_noise = true;
    return out;
  }
  if (map.fallback) {
    out.fallback = true;
    out.zeta = sample_noise(basis, rng).xi;
    out.zetap = sample_noise(basis, rng).xi;
    out.accept_probability = 0.0;
  } else {
    Eigen::VectorXd zeta;
    const auto pq = shifted_noise_pair(map, basis, &zeta);
    try {
      auto draw = maximal_coupling_sample(pq, rng);
      out.zeta = std::move(zeta);
      out.zetap = std::move(draw.x_p);
      out.same_noise = draw.same;
      out.accept_probability = draw.accept_probability;
    } catch (const NumericalError&) {
      if (map.mode() == ShiftMode::frozen) throw;
      out.fallback = true;
      out.zeta = sample_noise(basis, rng).xi;
      out.zetap = sample_noise(basis, rng).xi;
      out.accept_probability = 0.0;
    }
  }
  out.V = step_with_noise(u, cs, out.zeta);
  out.Vp = step_with_noise(up, cs, out.zetap);
  return out;
}

inline KernelOutcome coupled_kernel(const SpectralVelocity& u, const SpectralVelocity& up, const CouplingSetup& cs,
                                    RngStream& rng) {
  if ((up - u).norm() == 0.0) return coupled_kernel(u, up, cs, ShiftMap::identity(cs.basis->size()), rng);
  return coupled_kernel(u, up, cs, shift_map_build(u, up, cs), rng);
}

/// Pair of chain states.
struct CoupledState {
  SpectralVelocity u;
  SpectralVelocity up;
  int k = 0;
  bool same_noise = false;
  bool near = false;              // branch used for the last step
  double accept_probability = 0;  // of the last near step; 1 - it estimates the TV of the shift
  bool fallback = false;

  double distance() const { return (up - u).norm(); }
};

/// Coupled kernel within distance d, independent noises beyond.
inline CoupledState extension_step(const CoupledState& s, const CouplingSetup& cs, double d, RngStream& rng) {
  CoupledState next;
  next.k = s.k + 1;
  if (s.distance() <= d) {
    auto o = coupled_kernel(s.u, s.up, cs, rng);
    next.u = std::move(o.V);
    next.up = std::move(o.Vp);
    next.near = true;
    next.same_noise = o.same_noise;
    next.accept_probability = o.accept_probability;
    next.fallback = o.fallback;
    return next;
  }
  const auto zeta = sample_noise(*cs.basis, rng).xi;
  const auto zetap = sample_noise(*cs.basis, rng).xi;
  next.u = step_with_noise(s.u, cs, zeta);
  next.up = step_with_noise(s.up, cs, zetap);
  next.accept_probability = 0.0;
  return next;
}

/// Coupling event log: k, dist, branch, same_noise, tv_estimate (dist is measured before the step).
struct CouplingLogRow {
  int k = 0;
  double dist = 0.0;
  bool near = false;
  bool same_noise = false;
  double tv_estimate = 0.0;
};

// ---------------------------------------------------------------------------
// Total variation of shifted coefficient densities.

/// TV(rho, rho(. - kappa)) in closed form: F(kappa/2) - F(-kappa/2), and 1 once the supports separate.
inline double tv_shift_closed_form_1d(double kappa) {
  const double a = std::abs(kappa);
  if (a >= 2.0) return 1.0;
  return CoefficientDensity::cdf(a / 2.0) - CoefficientDensity::cdf(-a / 2.0);
}

namespace detail {

inline constexpr std::array<double, 5> kGaussNodes{-0.9061798459386640, -0.5384693101056831, 0.0,
                                                   0.5384693101056831, 0.9061798459386640};
inline constexpr std::array<double, 5> kGaussWeights{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                     0.4786286704993665, 0.2369268850561891};

/// Panels of [lo, hi] split at the given breakpoints, each subdivided `per` times.
inline std::vector<double> panel_edges(double lo, double hi, std::vector<double> breaks, int per) {
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> edges;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = std::clamp(breaks[i], lo, hi), b = std::clamp(breaks[i + 1], lo, hi);
    if (!(b > a)) continue;
    for (int p = 0; p < per; ++p) edges.push_back(a + (b - a) * p / per);
  }
  edges.push_back(hi);
  return edges;
}

}  // namespace detail

/// 1/2 int |rho(v) - rho(v - kappa)| dv by Gauss-Legendre on the pieces where the integrand is polynomial.
inline double tv_shift_quadrature_1d(double kappa) {
  const double a = std::abs(kappa);
  const auto edges = detail::panel_edges(-1.0, 1.0 + a, {-1.0 + a, a / 2.0, 1.0}, 1);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double c = 0.5 * (edges[i] + edges[i + 1]), r = 0.5 * (edges[i + 1] - edges[i]);
    for (int q = 0; q < 5; ++q) {
      const double v = c + r * detail::kGaussNodes[static_cast<std::size_t>(q)];
      s += r * detail::kGaussWeights[static_cast<std::size_t>(q)] *
           std::abs(CoefficientDensity::pdf(v) - CoefficientDensity::pdf(v - a));
    }
  }
  return 0.5 * s;
}

/// 1/2 int |rho(x)rho(y) - rho(x - s1)rho(y - s2)| by composite tensor Gauss-Legendre.
inline double tv_shift_quadrature_2d(double s1, double s2, int panels = 200) {
  const auto ex = detail::panel_edges(std::min(-1.0, -1.0 + s1), std::max(1.0, 1.0 + s1), {-1.0 + s1, 1.0}, panels / 2);
  const auto ey = detail::panel_edges(std::min(-1.0, -1.0 + s2), std::max(1.0, 1.0 + s2), {-1.0 + s2, 1.0}, panels / 2);
  std::vector<double> xs, wx, ys, wy;
  auto nodes = [](const std::vector<double>& e, std::vector<double>& pts, std::vector<double>& w) {
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
      const double c = 0.5 * (e[i] + e[i + 1]), r = 0.5 * (e[i + 1] - e[i]);
      for (int q = 0; q < 5; ++q) {
        pts.push_back(c + r * detail::kGaussNodes[static_cast<std::size_t>(q)]);
        w.push_back(r * detail::kGaussWeights[static_cast<std::size_t>(q)]);
      }
    }
  };
  nodes(ex, xs, wx);
  nodes(ey, ys, wy);
  std::vector<double> px(xs.size()), qx(xs.size()), py(ys.size()), qy(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    px[i] = CoefficientDensity::pdf(xs[i]);
    qx[i] = CoefficientDensity::pdf(xs[i] - s1);
  }
  for (std::size_t j = 0; j < ys.size(); ++j) {
    py[j] = CoefficientDensity::pdf(ys[j]);
    qy[j] = CoefficientDensity::pdf(ys[j] - s2);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < ys.size(); ++j) row += wy[j] * std::abs(px[i] * py[j] - qx[i] * qy[j]);
    s += wx[i] * row;
  }
  return 0.5 * s;
}

struct TvShiftPoint {
  double kappa = 0.0;
  double tv = 0.0;           // quadrature
  double closed_form = 0.0;  // 1D only; NaN in 2D
};

struct TvShiftReport {
  int dimension = 1;
  std::vector<TvShiftPoint> points;
  LineFit fit;                          // tv against kappa
  double max_closed_form_error = 0.0;  // 1D only
};

/// Unit direction of the 2D frozen shift.
inline constexpr std::array<double, 2> kShiftDirection2d{0.6, 0.8};

inline TvShiftReport tv_shift_experiment(int dimension, const std::vector<double>& kappas) {
  if (dimension != 1 && dimension != 2) throw ValidationError("tv_shift_experiment: dimension must be 1 or 2");
  TvShiftReport rep;
  rep.dimension = dimension;
  std::vector<double> x, y;
  for (double k : kappas) {
    if (!(k >= 0.0 && k <= 0.2)) throw ValidationError("tv_shift_experiment: kappa must lie in [0, 0.2]");
    TvShiftPoint p{k, 0.0, std::numeric_limits<double>::quiet_NaN()};
    if (dimension == 1) {
      p.tv = tv_shift_quadrature_1d(k);
      p.closed_form = tv_shift_closed_form_1d(k);
      rep.max_closed_form_error = std::max(rep.max_closed_form_error, std::abs(p.tv - p.closed_form));
    } else {
      p.tv = tv_shift_quadrature_2d(k * kShiftDirection2d[0], k * kShiftDirection2d[1]);
    }
    rep.points.push_back(p);
    x.push_back(k);
    y.push_back(p.tv);
  }
  if (x.size() >= 2) rep.fit = fit_line(x, y);
  return rep;
}

}  // namespace nsmix
