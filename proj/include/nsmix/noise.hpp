#pragma once

// Space-time localized forcing dictionary psi_j = chi * phi_j on a cylinder
// Q = (t_a, t_b) x S, bounded i.i.d. coefficients, and their densities.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsmix/errors.hpp"
#include "nsmix/spectral.hpp"

namespace nsmix {

struct CylinderSpec {
  double t_a = 0.25;
  double t_b = 0.75;
  double x_a = std::numbers::pi / 2;
  double x_b = 3 * std::numbers::pi / 2;
  double y_a = std::numbers::pi / 2;
  double y_b = 3 * std::numbers::pi / 2;

  void validate() const {
    if (!(0.0 < t_a && t_a < t_b && t_b < 1.0)) {
      throw ConfigError("cylinder: need 0 < t_a < t_b < 1");
    }
    constexpr double two_pi = 2 * std::numbers::pi;
    if (!(0.0 < x_a && x_a < x_b && x_b < two_pi) || !(0.0 < y_a && y_a < y_b && y_b < two_pi)) {
      throw ConfigError("cylinder: spatial box must lie strictly inside (0, 2pi)^2 with a < b");
    }
  }

  bool contains(double t, double x, double y) const {
    return t > t_a && t < t_b && x > x_a && x < x_b && y > y_a && y < y_b;
  }
};

/// C-infinity bump exp(1 - 1/(1 - s^2)) on an interval, rescaled to (-1, 1).
struct Bump {
  double a = 0.0;
  double b = 1.0;

  double scaled(double s) const { return (2.0 * s - a - b) / (b - a); }
  double value(double s) const {
    const double z = scaled(s);
    if (std::abs(z) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - z * z));
  }
  double derivative(double s) const {
    const double z = scaled(s);
    if (std::abs(z) >= 1.0) return 0.0;
    const double w = 1.0 - z * z;
    return std::exp(1.0 - 1.0 / w) * (-2.0 * z / (w * w)) * (2.0 / (b - a));
  }
};

/// One factor of a separable dictionary element: bump(s) * sin(pi n (s - a) / (b - a)).
struct SineBump {
  Bump bump;
  int n = 1;

  double value(double s) const {
    return bump.value(s) * std::sin(std::numbers::pi * n * (s - bump.a) / (bump.b - bump.a));
  }
  double derivative(double s) const {
    const double w = std::numbers::pi * n / (bump.b - bump.a);
    const double arg = w * (s - bump.a);
    return bump.derivative(s) * std::sin(arg) + bump.value(s) * w * std::cos(arg);
  }
};

namespace detail {

/// Trapezoid rule on [a, b] for integrands vanishing with all derivatives at the ends.
template <class F>
double bump_integral(double a, double b, F&& f, int n = 4096) {
  const double h = (b - a) / n;
  double s = 0.0;
  for (int i = 1; i < n; ++i) s += f(a + i * h);
  return s * h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Per-trajectory random stream keyed by (master seed, trajectory id, step).
class RngStream {
 public:
  RngStream(std::uint64_t master, std::uint64_t trajectory, std::uint64_t step)
      : engine_(detail::splitmix64(master ^ detail::splitmix64(trajectory ^ detail::splitmix64(step + 0x51ED2701ULL)))) {}
  explicit RngStream(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

  /// Uniform on [0, 1) with 53 random bits; portable across standard libraries.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Coefficient density rho(r) = (15/16)(1 - r^2)^2 on [-1, 1], C^1 on the line.
struct CoefficientDensity {
  static double pdf(double r) {
    if (!(std::abs(r) < 1.0)) return 0.0;
    const double w = 1.0 - r * r;
    return (15.0 / 16.0) * w * w;
  }
  static double log_pdf(double r) {
    if (!(std::abs(r) < 1.0)) return -std::numeric_limits<double>::infinity();
    return std::log(15.0 / 16.0) + 2.0 * std::log1p(-r * r);
  }
  static double cdf(double r) {
    if (r <= -1.0) return 0.0;
    if (r >= 1.0) return 1.0;
    return (15.0 / 16.0) * (r - 2.0 * r * r * r / 3.0 + std::pow(r, 5) / 5.0 + 8.0 / 15.0);
  }
  /// Median of five uniforms is Beta(3, 3); mapped to [-1, 1] it has density rho.
  static double sample(RngStream& rng) {
    std::array<double, 5> u{};
    for (auto& x : u) x = rng.uniform();
    std::nth_element(u.begin(), u.begin() + 2, u.end());
    return 2.0 * u[2] - 1.0;
  }
};

struct NoiseSample {
  Eigen::VectorXd xi;

  void validate() const {
    for (Eigen::Index j = 0; j < xi.size(); ++j) {
      if (!(std::abs(xi[j]) <= 1.0)) throw ValidationError("noise sample coefficient outside [-1, 1]");
    }
  }
};

/// Amplitude rule b_j = b0 * j^{-s}, or an explicit list.
struct AmplitudeRule {
  double b0 = 0.3;
  double decay_s = 1.0;
  std::vector<double> explicit_values;

  std::vector<double> make(int J) const {
    std::vector<double> b(static_cast<std::size_t>(J));
    if (!explicit_values.empty()) {
      if (static_cast<int>(explicit_values.size()) != J) {
        throw ConfigError("noise: explicit amplitude list length differs from J");
      }
      return explicit_values;
    }
    for (int j = 1; j <= J; ++j) b[static_cast<std::size_t>(j - 1)] = b0 * std::pow(static_cast<double>(j), -decay_s);
    return b;
  }
};

/// Index triple of a dictionary element: time mode, two spatial modes, polarization.
struct DictionaryIndex {
  int n_t = 1;
  int n_x = 1;
  int n_y = 1;
  int pol = 0;  // 0: e1, 1: e2
};

/// Diagonal enumeration by total index n_t + n_x + n_y, then lexicographic, polarization innermost.
inline std::vector<DictionaryIndex> enumerate_dictionary(int J) {
  std::vector<DictionaryIndex> out;
  for (int total = 3; static_cast<int>(out.size()) < J; ++total) {
    for (int nt = 1; nt <= total - 2; ++nt) {
      for (int nx = 1; nx <= total - nt - 1; ++nx) {
        const int ny = total - nt - nx;
        for (int pol = 0; pol < 2; ++pol) {
          if (static_cast<int>(out.size()) < J) out.push_back({nt, nx, ny, pol});
        }
      }
    }
  }
  return out;
}

class NoiseBasis {
 public:
  static constexpr int kMaxElements = 256;
  static constexpr double kMaxGramCondition = 1e12;

  /// n_active: number of leading amplitudes that must be non-zero.
  static std::shared_ptr<const NoiseBasis> build(const CylinderSpec& cyl, int J, const AmplitudeRule& rule,
                                                 GridPtr grid, int n_active = 1) {
    cyl.validate();
    if (J < 1 || J > kMaxElements) throw ConfigError("noise: J must lie in [1, 256]");
    auto b = rule.make(J);
    if (n_active > J) throw ConfigError("noise: N_active exceeds J");
    for (int j = 0; j < n_active; ++j) {
      if (!(b[static_cast<std::size_t>(j)] != 0.0)) {
        throw ConfigError("noise: non-degeneracy b_j != 0 for j <= N_active violated at j=" + std::to_string(j + 1));
      }
    }
    for (double v : b) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("noise: amplitudes must be finite and non-negative");
    }
    return std::shared_ptr<const NoiseBasis>(new NoiseBasis(cyl, std::move(b), std::move(grid)));
  }

  const CylinderSpec& cylinder() const { return cyl_; }
  int size() const { return static_cast<int>(index_.size()); }
  const GridPtr& grid() const { return grid_; }
  const std::vector<double>& amplitudes() const { return b_; }
  double amplitude(int j) const { return b_[static_cast<std::size_t>(j)]; }
  const DictionaryIndex& index(int j) const { return index_[static_cast<std::size_t>(j)]; }
  double normalization() const { return norm_const_; }

  /// Time factor of psi_j (bump times sine in t, without the spatial normalization).
  double time_profile(int j, double t) const { return time_factor(index(j).n_t).value(t); }
  double time_profile_derivative(int j, double t) const { return time_factor(index(j).n_t).derivative(t); }

  /// Pointwise value of the raw (not projected) psi_j.
  std::array<double, 2> evaluate(int j, double t, double x, double y) const {
    const auto& id = index(j);
    const double v = norm_const_ * time_factor(id.n_t).value(t) * space_factor_x(id.n_x).value(x) *
                     space_factor_y(id.n_y).value(y);
    return id.pol == 0 ? std::array<double, 2>{v, 0.0} : std::array<double, 2>{0.0, v};
  }

  /// Leray-projected, grid-truncated spatial part of psi_j (time factor excluded), real coordinates.
  const Eigen::MatrixXd& rendering_matrix() const { return render_; }
  SpectralVelocity spatial_rendering(int j) const {
    return SpectralVelocity::from_real(grid_, render_.col(j));
  }

  /// Gram matrix of the raw psi_j in L2(D_1).
  const Eigen::MatrixXd& gram() const { return gram_; }
  /// Gram matrix of the raw psi_j in H1(D_1).
  const Eigen::MatrixXd& gram_h1() const { return gram_h1_; }
  double gram_condition() const { return gram_cond_; }
  double h1_norm(int j) const { return std::sqrt(gram_h1_(j, j)); }
  /// B = sum_j b_j ||psi_j||_{H1(D_1)}.
  double weighted_h1_sum() const {
    double s = 0.0;
    for (int j = 0; j < size(); ++j) s += b_[static_cast<std::size_t>(j)] * h1_norm(j);
    return s;
  }

  /// Distinct time modes used by the dictionary.
  int max_time_mode() const { return max_nt_; }

  SineBump time_factor(int n) const { return {{cyl_.t_a, cyl_.t_b}, n}; }
  SineBump space_factor_x(int n) const { return {{cyl_.x_a, cyl_.x_b}, n}; }
  SineBump space_factor_y(int n) const { return {{cyl_.y_a, cyl_.y_b}, n}; }

 private:
  NoiseBasis(const CylinderSpec& cyl, std::vector<double> b, GridPtr grid)
      : cyl_(cyl), b_(std::move(b)), grid_(std::move(grid)) {
    const int J = static_cast<int>(b_.size());
    index_ = enumerate_dictionary(J);
    for (const auto& id : index_) max_nt_ = std::max(max_nt_, id.n_t);

    const double T = cyl_.t_b - cyl_.t_a;
    const double Lx = cyl_.x_b - cyl_.x_a;
    const double Ly = cyl_.y_b - cyl_.y_a;
    const double area = 4.0 * std::numbers::pi * std::numbers::pi;
    norm_const_ = 1.0 / std::sqrt((T / 2.0) * (Lx / 2.0) * (Ly / 2.0) / area);

    build_rendering();
    build_gram();
  }

  /// (1/2pi) int f(x) e^{-ikx} dx for k = -K..K.
  std::vector<cplx> fourier_1d(const SineBump& f) const {
    const int K = grid_->max_wavenumber();
    std::vector<cplx> out(static_cast<std::size_t>(2 * K + 1));
    constexpr int nq = 2048;
    std::vector<double> samples(nq);
    const double h = 2.0 * std::numbers::pi / nq;
    for (int i = 0; i < nq; ++i) samples[static_cast<std::size_t>(i)] = f.value(i * h);
    for (int k = -K; k <= K; ++k) {
      cplx s = 0.0;
      for (int i = 0; i < nq; ++i) s += samples[static_cast<std::size_t>(i)] * std::polar(1.0, -k * i * h);
      out[static_cast<std::size_t>(k + K)] = s / static_cast<double>(nq);
    }
    return out;
  }

  void build_rendering() {
    const int J = size();
    const int K = grid_->max_wavenumber();
    const auto M = static_cast<Eigen::Index>(grid_->size());
    int max_nx = 1, max_ny = 1;
    for (const auto& id : index_) {
      max_nx = std::max(max_nx, id.n_x);
      max_ny = std::max(max_ny, id.n_y);
    }
    std::vector<std::vector<cplx>> fx(static_cast<std::size_t>(max_nx + 1)), fy(static_cast<std::size_t>(max_ny + 1));
    for (int n = 1; n <= max_nx; ++n) fx[static_cast<std::size_t>(n)] = fourier_1d(space_factor_x(n));
    for (int n = 1; n <= max_ny; ++n) fy[static_cast<std::size_t>(n)] = fourier_1d(space_factor_y(n));

    render_.resize(2 * M, J);
    for (int j = 0; j < J; ++j) {
      const auto& id = index_[static_cast<std::size_t>(j)];
      Eigen::VectorXcd c(M);
      for (Eigen::Index i = 0; i < M; ++i) {
        const auto k = grid_->wavevector(static_cast<std::size_t>(i));
        const auto s = WaveGrid::sigma(k);
        const cplx amp = fx[static_cast<std::size_t>(id.n_x)][static_cast<std::size_t>(k.k1 + K)] *
                         fy[static_cast<std::size_t>(id.n_y)][static_cast<std::size_t>(k.k2 + K)];
        c[i] = norm_const_ * s[static_cast<std::size_t>(id.pol)] * amp;
      }
      render_.col(j) = SpectralVelocity(grid_, c).to_real();
    }
  }

  void build_gram() {
    const int J = size();
    const double area = 4.0 * std::numbers::pi * std::numbers::pi;
    auto prod = [](const SineBump& f, const SineBump& g, bool df, bool dg) {
      return detail::bump_integral(f.bump.a, f.bump.b, [&](double s) {
        return (df ? f.derivative(s) : f.value(s)) * (dg ? g.derivative(s) : g.value(s));
      });
    };
    gram_.setZero(J, J);
    gram_h1_.setZero(J, J);
    const double c2 = norm_const_ * norm_const_ / area;
    for (int i = 0; i < J; ++i) {
      for (int j = i; j < J; ++j) {
        const auto& a = index_[static_cast<std::size_t>(i)];
        const auto& b = index_[static_cast<std::size_t>(j)];
        if (a.pol != b.pol) continue;
        const auto ta = time_factor(a.n_t), tb = time_factor(b.n_t);
        const auto xa = space_factor_x(a.n_x), xb = space_factor_x(b.n_x);
        const auto ya = space_factor_y(a.n_y), yb = space_factor_y(b.n_y);
        const double t00 = prod(ta, tb, false, false), t11 = prod(ta, tb, true, true);
        const double x00 = prod(xa, xb, false, false), x11 = prod(xa, xb, true, true);
        const double y00 = prod(ya, yb, false, false), y11 = prod(ya, yb, true, true);
        const double l2 = c2 * t00 * x00 * y00;
        const double h1 = l2 + c2 * (t11 * x00 * y00 + t00 * x11 * y00 + t00 * x00 * y11);
        gram_(i, j) = gram_(j, i) = l2;
        gram_h1_(i, j) = gram_h1_(j, i) = h1;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    gram_cond_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(gram_cond_ <= kMaxGramCondition)) {
      throw ConfigError("noise: dictionary Gram matrix is degenerate (condition " + std::to_string(gram_cond_) + ")");
    }
  }

  CylinderSpec cyl_;
  std::vector<double> b_;
  GridPtr grid_;
  std::vector<DictionaryIndex> index_;
  int max_nt_ = 1;
  double norm_const_ = 1.0;
  Eigen::MatrixXd render_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd gram_h1_;
  double gram_cond_ = 1.0;
};

using BasisPtr = std::shared_ptr<const NoiseBasis>;

inline BasisPtr build_noise_basis(const CylinderSpec& cyl, int J, const AmplitudeRule& rule, GridPtr grid,
                                  int n_active = 1) {
  return NoiseBasis::build(cyl, J, rule, std::move(grid), n_active);
}

inline NoiseSample sample_noise(const NoiseBasis& basis, RngStream& rng) {
  NoiseSample s{Eigen::VectorXd(basis.size())};
  for (int j = 0; j < basis.size(); ++j) s.xi[j] = CoefficientDensity::sample(rng);
  return s;
}

/// Product density prod_j rho(xi_j); zero when any coefficient leaves (-1, 1).
inline double density(const Eigen::Ref<const Eigen::VectorXd>& xi) {
  double p = 1.0;
  for (Eigen::Index j = 0; j < xi.size(); ++j) p *= CoefficientDensity::pdf(xi[j]);
  return p;
}
inline double log_density(const Eigen::Ref<const Eigen::VectorXd>& xi) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < xi.size(); ++j) s += CoefficientDensity::log_pdf(xi[j]);
  return s;
}
inline double density(const NoiseSample& s) { return density(s.xi); }
inline double log_density(const NoiseSample& s) { return log_density(s.xi); }

/// Dictionary weights w_j = b_j xi_j of eta = sum_j b_j xi_j psi_j.
inline Eigen::VectorXd noise_weights(const NoiseBasis& basis, const NoiseSample& s) {
  if (s.xi.size() != basis.size()) throw ValidationError("noise sample size differs from basis size");
  Eigen::VectorXd w(basis.size());
  for (int j = 0; j < basis.size(); ++j) w[j] = basis.amplitude(j) * s.xi[j];
  return w;
}

/// CSV rows "j,b_j,xi_j" (j is 1-based).
inline void write_noise_csv(std::ostream& os, const NoiseBasis& basis, const NoiseSample* s = nullptr) {
  os << "j,b_j,xi_j\n";
  os.precision(17);
  for (int j = 0; j < basis.size(); ++j) {
    os << (j + 1) << ',' << basis.amplitude(j) << ',' << (s ? s->xi[j] : 0.0) << '\n';
  }
}

}  // namespace nsmix
