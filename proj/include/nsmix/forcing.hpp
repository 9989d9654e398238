#pragma once

// Forcing on J_1 = [0, 1]: a 1-periodic deterministic part given by a truncated
// time-Fourier series of spectral fields, plus an optional dictionary part
// sum_j w_j psi_j rendered through a NoiseBasis.

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "nsmix/noise.hpp"
#include "nsmix/spectral.hpp"

namespace nsmix {

/// cos(2 pi l t) * cos_part + sin(2 pi l t) * sin_part.
struct TimeHarmonic {
  int ell = 0;
  Eigen::VectorXcd cos_part;
  Eigen::VectorXcd sin_part;
};

class ForcingProfile {
 public:
  ForcingProfile() = default;
  explicit ForcingProfile(GridPtr grid) : grid_(std::move(grid)) {}

  static ForcingProfile zero(GridPtr grid) { return ForcingProfile(std::move(grid)); }

  /// Time-independent field.
  static ForcingProfile steady(const SpectralVelocity& f) {
    ForcingProfile p(f.grid());
    p.add_harmonic(0, f, SpectralVelocity(f.grid()));
    return p;
  }

  void add_harmonic(int ell, const SpectralVelocity& c, const SpectralVelocity& s) {
    if (ell < 0) throw ValidationError("forcing harmonic index must be non-negative");
    c.check_same(s);
    if (grid_ && grid_->max_wavenumber() != c.grid()->max_wavenumber()) {
      throw ValidationError("forcing harmonic on a different grid");
    }
    if (!grid_) grid_ = c.grid();
    harmonics_.push_back({ell, c.coeffs(), ell == 0 ? Eigen::VectorXcd::Zero(c.coeffs().size()) : s.coeffs()});
  }

  /// Copy with dictionary weights w (sum_j w_j psi_j) added to the existing dictionary part.
  ForcingProfile with_dictionary(BasisPtr basis, const Eigen::VectorXd& w) const {
    if (!basis) throw ValidationError("with_dictionary: null basis");
    if (w.size() > basis->size()) throw ValidationError("with_dictionary: more weights than dictionary elements");
    ForcingProfile p = *this;
    if (!p.grid_) p.grid_ = basis->grid();
    if (p.basis_ && p.basis_ != basis) throw ValidationError("with_dictionary: dictionary from a different basis");
    p.basis_ = std::move(basis);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(p.basis_->size());
    full.head(w.size()) = w;
    if (p.weights_.size() == full.size()) full += p.weights_;
    p.weights_ = std::move(full);
    return p;
  }

  const GridPtr& grid() const { return grid_; }
  const std::vector<TimeHarmonic>& harmonics() const { return harmonics_; }
  const BasisPtr& basis() const { return basis_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  bool has_dictionary() const { return basis_ && weights_.size() > 0 && weights_.cwiseAbs().maxCoeff() > 0.0; }

  /// Spectral coefficients of the Leray-projected forcing at time t (t taken mod 1 for h).
  void eval_into(double t, Eigen::VectorXcd& out) const {
    out.setZero(static_cast<Eigen::Index>(grid_->size()));
    for (const auto& h : harmonics_) {
      if (h.ell == 0) {
        out += h.cos_part;
      } else {
        const double w = 2.0 * std::numbers::pi * h.ell * t;
        out += std::cos(w) * h.cos_part + std::sin(w) * h.sin_part;
      }
    }
    if (has_dictionary()) {
      Eigen::VectorXd tw(weights_.size());
      for (Eigen::Index j = 0; j < weights_.size(); ++j) tw[j] = weights_[j] * basis_->time_profile(static_cast<int>(j), t);
      const Eigen::VectorXd x = basis_->rendering_matrix() * tw;
      const double s = 1.0 / std::sqrt(2.0);
      for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += cplx(s * x[2 * i], s * x[2 * i + 1]);
    }
  }

  SpectralVelocity at(double t) const {
    SpectralVelocity f(grid_);
    eval_into(t, f.coeffs());
    return f;
  }

  /// ||h||^2_{H1(D_1)} of the deterministic part, exactly from the harmonics.
  double h1_norm_sq_deterministic() const {
    double s = 0.0;
    for (const auto& h : harmonics_) {
      const double tw = h.ell == 0 ? 1.0 : 0.5;
      const double dt2 = std::pow(2.0 * std::numbers::pi * h.ell, 2);
      const SpectralVelocity c(grid_, h.cos_part), sn(grid_, h.sin_part);
      s += tw * ((1.0 + dt2) * (c.norm() * c.norm() + sn.norm() * sn.norm()) +
                 c.norm_h1() * c.norm_h1() + sn.norm_h1() * sn.norm_h1());
    }
    return s;
  }

  /// ||h + sum_j w_j psi_j||_{H1(D_1)} (raw dictionary fields, cross terms included).
  double h1_norm() const {
    double s = h1_norm_sq_deterministic();
    if (has_dictionary()) {
      s += weights_.dot(basis_->gram_h1() * weights_);
      s += 2.0 * weights_.dot(h1_cross_terms());
    }
    return std::sqrt(std::max(s, 0.0));
  }

  /// L2(D_1) norm of the projected, truncated forcing the solver actually sees.
  /// Periodic trapezoid rule in time; the integrand is smooth and 1-periodic.
  double rendered_l2_norm(int nodes = 2048) const {
    Eigen::VectorXcd f;
    double s = 0.0;
    for (int n = 0; n < nodes; ++n) {
      eval_into(static_cast<double>(n) / nodes, f);
      s += 2.0 * f.squaredNorm();
    }
    return std::sqrt(s / nodes);
  }

  /// ||f||_{L2(D_1)} including dictionary cross terms (raw dictionary fields).
  double l2_norm() const {
    double s = 0.0;
    for (const auto& h : harmonics_) {
      const double tw = h.ell == 0 ? 1.0 : 0.5;
      const SpectralVelocity c(grid_, h.cos_part), sn(grid_, h.sin_part);
      s += tw * (c.norm() * c.norm() + sn.norm() * sn.norm());
    }
    if (has_dictionary()) {
      s += weights_.dot(basis_->gram() * weights_);
      s += 2.0 * weights_.dot(l2_cross_terms());
    }
    return std::sqrt(std::max(s, 0.0));
  }

 private:
  // <h, psi_j> in L2(D_1) and H1(D_1). h is divergence-free and band-limited, so
  // pairing with the projected, truncated rendering of psi_j is exact in space.
  Eigen::VectorXd cross_terms(bool h1) const {
    const int J = basis_->size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(J);
    const auto& R = basis_->rendering_matrix();
    const auto& cyl = basis_->cylinder();
    for (const auto& h : harmonics_) {
      const SpectralVelocity c(grid_, h.cos_part), sn(grid_, h.sin_part);
      Eigen::VectorXd cx = c.to_real(), sx = sn.to_real();
      Eigen::VectorXd cxg = cx, sxg = sx;
      for (Eigen::Index i = 0; i < cx.size(); ++i) {
        const double lam = grid_->eigenvalue(static_cast<std::size_t>(i / 2));
        cxg[i] *= lam;
        sxg[i] *= lam;
      }
      const double w = 2.0 * std::numbers::pi * h.ell;
      for (int j = 0; j < J; ++j) {
        const auto tf = basis_->time_factor(basis_->index(j).n_t);
        auto integral = [&](auto&& g) { return detail::bump_integral(cyl.t_a, cyl.t_b, g); };
        const double ic = integral([&](double t) { return tf.value(t) * std::cos(w * t); });
        const double is = integral([&](double t) { return tf.value(t) * std::sin(w * t); });
        double v = ic * R.col(j).dot(cx) + is * R.col(j).dot(sx);
        if (h1) {
          v += ic * R.col(j).dot(cxg) + is * R.col(j).dot(sxg);
          const double dc = integral([&](double t) { return tf.derivative(t) * (-w * std::sin(w * t)); });
          const double ds = integral([&](double t) { return tf.derivative(t) * (w * std::cos(w * t)); });
          v += dc * R.col(j).dot(cx) + ds * R.col(j).dot(sx);
        }
        out[j] += v;
      }
    }
    return out;
  }
  Eigen::VectorXd l2_cross_terms() const { return cross_terms(false); }
  Eigen::VectorXd h1_cross_terms() const { return cross_terms(true); }

  GridPtr grid_;
  std::vector<TimeHarmonic> harmonics_;
  BasisPtr basis_;
  Eigen::VectorXd weights_;
};

/// Forcing part sum_j c_j psi_j (controls) or sum_j b_j xi_j psi_j (noise).
inline ForcingProfile render(const BasisPtr& basis, const Eigen::VectorXd& weights) {
  return ForcingProfile(basis->grid()).with_dictionary(basis, weights);
}
inline ForcingProfile render(const BasisPtr& basis, const NoiseSample& s) {
  return render(basis, noise_weights(*basis, s));
}

/// Small 1-periodic reference forcing used by the default configuration:
/// a steady Kolmogorov-type shear on mode (0, 1) and a pulsating mode (1, 1).
inline ForcingProfile reference_forcing(const GridPtr& g, double amplitude) {
  ForcingProfile f(g);
  if (amplitude == 0.0) return f;
  SpectralVelocity steady(g), c1(g), s1(g);
  steady.coeffs()[g->index_of({0, 1})] = cplx(amplitude / 2.0, 0.0);
  s1.coeffs()[g->index_of({1, 1})] = cplx(0.0, amplitude / 2.0);
  f.add_harmonic(0, steady, SpectralVelocity(g));
  f.add_harmonic(1, c1, s1);
  return f;
}

}  // namespace nsmix
