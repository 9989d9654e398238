#pragma once

// Divergence-free Fourier Galerkin fields on the periodic box [0, 2pi)^2.
//
// A velocity field is stored as one complex amplitude per representative
// wavevector k, along the unit divergence-free direction sigma_k = k_perp/|k|.
// The partner -k is implied by reality: a_{-k} = -conj(a_k).
// Inner products use the area-averaged measure dx / (2pi)^2, so
// ||u||^2 = sum_k 2 |a_k|^2 over representatives.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "nsmix/errors.hpp"

namespace nsmix {

using cplx = std::complex<double>;

struct Wavevector {
  int k1 = 0;
  int k2 = 0;

  int norm2() const { return k1 * k1 + k2 * k2; }
  Wavevector operator-() const { return {-k1, -k2}; }
  friend bool operator==(const Wavevector&, const Wavevector&) = default;
};

/// Mode-space interaction list for the quadratic term, truncated to the grid.
struct TriadTable {
  // Ordered triads p + q = k, k a representative; coefficient (sigma_p.q)(sigma_q.sigma_k).
  std::vector<int> k, p, q;
  std::vector<double> coef;
  // Unordered pairs {p, q} with the two orderings merged; used for B(u, u).
  std::vector<int> sk, sp, sq;
  std::vector<double> scoef;
};

class WaveGrid {
 public:
  static constexpr int kMaxWavenumber = 64;

  static std::shared_ptr<const WaveGrid> build(int K) {
    if (K < 1 || K > kMaxWavenumber) {
      throw ValidationError("build_grid: max wavenumber must lie in [1, 64], got " +
                            std::to_string(K));
    }
    return std::shared_ptr<const WaveGrid>(new WaveGrid(K));
  }

  int max_wavenumber() const { return K_; }
  /// Number of representative modes M = ((2K+1)^2 - 1) / 2.
  std::size_t size() const { return modes_.size(); }
  /// Dimension of the real coordinate space, 2M.
  std::size_t real_dim() const { return 2 * modes_.size(); }

  const Wavevector& wavevector(std::size_t i) const { return modes_[i]; }
  double eigenvalue(std::size_t i) const { return static_cast<double>(modes_[i].norm2()); }

  /// Mode indices sorted by (|k|^2, lexicographic k); the first N span H_N.
  const std::vector<int>& spectral_order() const { return order_; }
  /// Position of mode i in spectral_order().
  int spectral_rank(std::size_t i) const { return rank_[i]; }
  /// alpha_j in the spectral ordering, j = 1..M.
  double ordered_eigenvalue(std::size_t j) const {
    return eigenvalue(static_cast<std::size_t>(order_.at(j - 1)));
  }

  /// Index of representative k, or -1 when k is not a representative on the grid.
  int index_of(Wavevector k) const {
    const int f = full_index(k);
    return (f >= 0 && f < static_cast<int>(size())) ? f : -1;
  }

  /// Index into the full (both signs) list: [0, M) representatives, [M, 2M) their negatives.
  int full_index(Wavevector k) const {
    if (std::abs(k.k1) > K_ || std::abs(k.k2) > K_) return -1;
    return lookup_[static_cast<std::size_t>((k.k1 + K_) * (2 * K_ + 1) + (k.k2 + K_))];
  }

  Wavevector full_wavevector(int f) const {
    const int M = static_cast<int>(size());
    return f < M ? modes_[f] : -modes_[f - M];
  }

  /// sigma_k = k_perp / |k| = (-k2, k1) / |k|.
  static std::array<double, 2> sigma(Wavevector k) {
    const double n = std::sqrt(static_cast<double>(k.norm2()));
    return {-k.k2 / n, k.k1 / n};
  }

  static bool is_representative(Wavevector k) {
    return k.k1 > 0 || (k.k1 == 0 && k.k2 > 0);
  }

  const TriadTable& triads() const {
    std::call_once(triad_once_, [this] { build_triads(); });
    return triads_;
  }

 private:
  explicit WaveGrid(int K) : K_(K) {
    for (int k1 = 0; k1 <= K; ++k1) {
      for (int k2 = -K; k2 <= K; ++k2) {
        const Wavevector k{k1, k2};
        if (is_representative(k)) modes_.push_back(k);
      }
    }
    const std::size_t M = modes_.size();
    lookup_.assign(static_cast<std::size_t>((2 * K + 1) * (2 * K + 1)), -1);
    for (std::size_t i = 0; i < M; ++i) {
      const auto& k = modes_[i];
      lookup_[static_cast<std::size_t>((k.k1 + K) * (2 * K + 1) + (k.k2 + K))] = static_cast<int>(i);
      lookup_[static_cast<std::size_t>((-k.k1 + K) * (2 * K + 1) + (-k.k2 + K))] =
          static_cast<int>(i + M);
    }
    order_.resize(M);
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [this](int a, int b) {
      return modes_[a].norm2() < modes_[b].norm2();
    });
    rank_.resize(M);
    for (std::size_t r = 0; r < M; ++r) rank_[order_[r]] = static_cast<int>(r);
  }

  void build_triads() const {
    const int M = static_cast<int>(size());
    auto& t = triads_;
    for (int i = 0; i < M; ++i) {
      const Wavevector k = modes_[i];
      const auto sk = sigma(k);
      for (int fp = 0; fp < 2 * M; ++fp) {
        const Wavevector p = full_wavevector(fp);
        const Wavevector q{k.k1 - p.k1, k.k2 - p.k2};
        const int fq = (q.k1 == 0 && q.k2 == 0) ? -1 : full_index(q);
        if (fq < 0) continue;
        const auto sp = sigma(p);
        const auto sq = sigma(q);
        const double c = (sp[0] * q.k1 + sp[1] * q.k2) * (sq[0] * sk[0] + sq[1] * sk[1]);
        if (c != 0.0) {
          t.k.push_back(i);
          t.p.push_back(fp);
          t.q.push_back(fq);
          t.coef.push_back(c);
        }
        if (fp > fq) continue;
        const auto sp_k = sigma(p);
        double cs = c;
        if (fp != fq) {
          // Swapped ordering: (sigma_q . p)(sigma_p . sigma_k).
          cs += (sq[0] * p.k1 + sq[1] * p.k2) * (sp_k[0] * sk[0] + sp_k[1] * sk[1]);
        }
        if (cs != 0.0) {
          t.sk.push_back(i);
          t.sp.push_back(fp);
          t.sq.push_back(fq);
          t.scoef.push_back(cs);
        }
      }
    }
  }

  int K_;
  std::vector<Wavevector> modes_;
  std::vector<int> lookup_;
  std::vector<int> order_;
  std::vector<int> rank_;
  mutable std::once_flag triad_once_;
  mutable TriadTable triads_;
};

using GridPtr = std::shared_ptr<const WaveGrid>;

inline GridPtr build_grid(int K) { return WaveGrid::build(K); }

/// Divergence-free velocity field on a WaveGrid.
class SpectralVelocity {
 public:
  SpectralVelocity() = default;
  explicit SpectralVelocity(GridPtr grid)
      : grid_(std::move(grid)), coeffs_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(grid_->size()))) {}
  SpectralVelocity(GridPtr grid, Eigen::VectorXcd coeffs) : grid_(std::move(grid)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != static_cast<Eigen::Index>(grid_->size())) {
      throw ValidationError("SpectralVelocity: coefficient count does not match grid");
    }
  }

  /// Build from real coordinates x (length 2M) with ||u|| = |x|_2.
  static SpectralVelocity from_real(GridPtr grid, const Eigen::Ref<const Eigen::VectorXd>& x) {
    const auto M = static_cast<Eigen::Index>(grid->size());
    if (x.size() != 2 * M) throw ValidationError("SpectralVelocity::from_real: size mismatch");
    Eigen::VectorXcd c(M);
    const double s = 1.0 / std::sqrt(2.0);
    for (Eigen::Index i = 0; i < M; ++i) c[i] = cplx(s * x[2 * i], s * x[2 * i + 1]);
    return {std::move(grid), std::move(c)};
  }

  Eigen::VectorXd to_real() const {
    const auto M = coeffs_.size();
    Eigen::VectorXd x(2 * M);
    const double s = std::sqrt(2.0);
    for (Eigen::Index i = 0; i < M; ++i) {
      x[2 * i] = s * coeffs_[i].real();
      x[2 * i + 1] = s * coeffs_[i].imag();
    }
    return x;
  }

  const GridPtr& grid() const { return grid_; }
  const Eigen::VectorXcd& coeffs() const { return coeffs_; }
  Eigen::VectorXcd& coeffs() { return coeffs_; }
  std::size_t size() const { return static_cast<std::size_t>(coeffs_.size()); }

  double norm() const { return std::sqrt(2.0 * coeffs_.squaredNorm()); }
  double norm_h1() const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < coeffs_.size(); ++i) {
      s += grid_->eigenvalue(static_cast<std::size_t>(i)) * std::norm(coeffs_[i]);
    }
    return std::sqrt(2.0 * s);
  }

  SpectralVelocity& operator+=(const SpectralVelocity& o) {
    check_same(o);
    coeffs_ += o.coeffs_;
    return *this;
  }
  SpectralVelocity& operator-=(const SpectralVelocity& o) {
    check_same(o);
    coeffs_ -= o.coeffs_;
    return *this;
  }
  SpectralVelocity& operator*=(double a) {
    coeffs_ *= a;
    return *this;
  }
  friend SpectralVelocity operator+(SpectralVelocity a, const SpectralVelocity& b) { return a += b; }
  friend SpectralVelocity operator-(SpectralVelocity a, const SpectralVelocity& b) { return a -= b; }
  friend SpectralVelocity operator*(double s, SpectralVelocity a) { return a *= s; }

  void check_same(const SpectralVelocity& o) const {
    if (grid_ != o.grid_ && (!grid_ || !o.grid_ || grid_->max_wavenumber() != o.grid_->max_wavenumber())) {
      throw ValidationError("grid mismatch between spectral fields");
    }
  }

 private:
  GridPtr grid_;
  Eigen::VectorXcd coeffs_;
};

/// L2 inner product <u, v> (area-averaged).
inline double inner(const SpectralVelocity& u, const SpectralVelocity& v) {
  u.check_same(v);
  return 2.0 * (u.coeffs().conjugate().cwiseProduct(v.coeffs())).sum().real();
}

/// Vector Fourier coefficients (one complex pair per representative) of a
/// field that need not be divergence-free.
struct RawField {
  GridPtr grid;
  Eigen::VectorXcd c1;
  Eigen::VectorXcd c2;

  static RawField zeros(GridPtr g) {
    const auto M = static_cast<Eigen::Index>(g->size());
    return {g, Eigen::VectorXcd::Zero(M), Eigen::VectorXcd::Zero(M)};
  }
  static RawField lift(const SpectralVelocity& u) {
    RawField r = zeros(u.grid());
    for (std::size_t i = 0; i < u.size(); ++i) {
      const auto s = WaveGrid::sigma(u.grid()->wavevector(i));
      r.c1[static_cast<Eigen::Index>(i)] = s[0] * u.coeffs()[static_cast<Eigen::Index>(i)];
      r.c2[static_cast<Eigen::Index>(i)] = s[1] * u.coeffs()[static_cast<Eigen::Index>(i)];
    }
    return r;
  }
};

inline double inner(const RawField& a, const RawField& b) {
  return 2.0 * ((a.c1.conjugate().cwiseProduct(b.c1)).sum() + (a.c2.conjugate().cwiseProduct(b.c2)).sum()).real();
}

/// Leray projection: keep the component along sigma_k, drop the gradient part along k.
inline SpectralVelocity leray_project(const RawField& raw) {
  if (!raw.grid || raw.c1.size() != static_cast<Eigen::Index>(raw.grid->size()) ||
      raw.c2.size() != raw.c1.size()) {
    throw ValidationError("leray_project: raw field does not match its grid");
  }
  SpectralVelocity u(raw.grid);
  for (std::size_t i = 0; i < raw.grid->size(); ++i) {
    const auto s = WaveGrid::sigma(raw.grid->wavevector(i));
    const auto ii = static_cast<Eigen::Index>(i);
    u.coeffs()[ii] = s[0] * raw.c1[ii] + s[1] * raw.c2[ii];
  }
  return u;
}

namespace detail {

/// Coefficients over both signs: [a_0..a_{M-1}, -conj(a_0)..-conj(a_{M-1})].
inline void expand_full(const Eigen::VectorXcd& a, std::vector<cplx>& full) {
  const auto M = a.size();
  full.resize(static_cast<std::size_t>(2 * M));
  for (Eigen::Index i = 0; i < M; ++i) {
    full[static_cast<std::size_t>(i)] = a[i];
    full[static_cast<std::size_t>(i + M)] = -std::conj(a[i]);
  }
}

}  // namespace detail

/// Galerkin-truncated B(u, v) = Pi(<u, grad> v).
inline SpectralVelocity bilinear(const SpectralVelocity& u, const SpectralVelocity& v) {
  u.check_same(v);
  const auto& t = u.grid()->triads();
  std::vector<cplx> fu, fv;
  detail::expand_full(u.coeffs(), fu);
  detail::expand_full(v.coeffs(), fv);
  SpectralVelocity out(u.grid());
  auto& o = out.coeffs();
  for (std::size_t n = 0; n < t.coef.size(); ++n) {
    o[t.k[n]] += t.coef[n] * fu[static_cast<std::size_t>(t.p[n])] * fv[static_cast<std::size_t>(t.q[n])];
  }
  o *= cplx(0.0, 1.0);
  return out;
}

/// B(u, u) using the symmetric interaction list; about half the work of bilinear(u, u).
inline void quadratic_into(const GridPtr& grid, const Eigen::VectorXcd& a, Eigen::VectorXcd& out,
                           std::vector<cplx>& scratch) {
  const auto& t = grid->triads();
  detail::expand_full(a, scratch);
  out.setZero(a.size());
  const cplx* f = scratch.data();
  const std::size_t n_tri = t.scoef.size();
  const int* sk = t.sk.data();
  const int* sp = t.sp.data();
  const int* sq = t.sq.data();
  const double* sc = t.scoef.data();
  for (std::size_t n = 0; n < n_tri; ++n) out[sk[n]] += sc[n] * (f[sp[n]] * f[sq[n]]);
  out *= cplx(0.0, 1.0);
}

inline SpectralVelocity quadratic(const SpectralVelocity& u) {
  SpectralVelocity out(u.grid());
  std::vector<cplx> scratch;
  quadratic_into(u.grid(), u.coeffs(), out.coeffs(), scratch);
  return out;
}

/// Real 2M x 2M matrix of w -> B(uh, w) + B(w, uh) in real coordinates.
inline void tangent_matrix_into(const GridPtr& grid, const Eigen::VectorXcd& uh, Eigen::MatrixXd& J,
                                std::vector<cplx>& scratch) {
  const auto& t = grid->triads();
  const int M = static_cast<int>(grid->size());
  detail::expand_full(uh, scratch);
  J.setZero(2 * M, 2 * M);
  const cplx I(0.0, 1.0);
  auto add = [&](int k, int f, cplx c) {
    const int r = f < M ? f : f - M;
    const double s = f < M ? 1.0 : -1.0;
    J(2 * k, 2 * r) += c.real() * s;
    J(2 * k, 2 * r + 1) -= c.imag();
    J(2 * k + 1, 2 * r) += c.imag() * s;
    J(2 * k + 1, 2 * r + 1) += c.real();
  };
  for (std::size_t n = 0; n < t.coef.size(); ++n) {
    const int k = t.k[n];
    const cplx ic = I * t.coef[n];
    add(k, t.q[n], ic * scratch[static_cast<std::size_t>(t.p[n])]);  // B(uh, w)
    add(k, t.p[n], ic * scratch[static_cast<std::size_t>(t.q[n])]);  // B(w, uh)
  }
}

/// Orthogonal projection onto H_N, the span of the N lowest Stokes modes.
inline SpectralVelocity project_N(const SpectralVelocity& u, std::size_t N) {
  const auto& g = *u.grid();
  if (N < 1 || N > g.size()) {
    throw ValidationError("project_N: N must lie in [1, mode count], got " + std::to_string(N));
  }
  SpectralVelocity out(u.grid());
  for (std::size_t r = 0; r < N; ++r) {
    const auto i = static_cast<Eigen::Index>(g.spectral_order()[r]);
    out.coeffs()[i] = u.coeffs()[i];
  }
  return out;
}

/// Real-coordinate row indices spanned by H_N.
inline std::vector<int> low_mode_rows(const WaveGrid& g, std::size_t N) {
  if (N > g.size()) throw ValidationError("low_mode_rows: N exceeds mode count");
  std::vector<int> rows;
  rows.reserve(2 * N);
  for (std::size_t r = 0; r < N; ++r) {
    rows.push_back(2 * g.spectral_order()[r]);
    rows.push_back(2 * g.spectral_order()[r] + 1);
  }
  return rows;
}

/// Shear mode a cos(x2) e_1, i.e. wavevector (0, 1).
inline SpectralVelocity shear_mode(const GridPtr& g, double a) {
  SpectralVelocity u(g);
  // cos(y) e1 = (e^{iy} + e^{-iy})/2 e1; sigma_(0,1) = (-1, 0) so a_k = -a/2.
  u.coeffs()[g->index_of({0, 1})] = cplx(-0.5 * a, 0.0);
  return u;
}

}  // namespace nsmix
