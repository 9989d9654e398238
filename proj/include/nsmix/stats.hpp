#pragma once

// Small statistics toolkit for the Monte Carlo experiments: least-squares line
// fits, exponential fits, Kolmogorov-Smirnov statistics and binomial errors.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "nsmix/errors.hpp"

namespace nsmix {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_stderr = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope x.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("fit_line: need two or more points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("fit_line: abscissae are all equal");
  LineFit f;
  f.points = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  f.slope_stderr = x.size() > 2 ? std::sqrt(sse / (n - 2.0) / sxx) : 0.0;
  return f;
}

/// Fit of y_k = C exp(-rate k) by least squares on log y.
struct ExponentialFit {
  double rate = 0.0;       // decay rate (positive for decay)
  double intercept = 0.0;  // log C
  double r2 = 0.0;
  double rate_stderr = 0.0;
  std::size_t points = 0;
};

/// Entries with censored[i] set are left out. Remaining values must be positive; at least five are required.
inline ExponentialFit fit_exponential(const std::vector<double>& k, const std::vector<double>& y,
                                      const std::vector<bool>& censored = {}) {
  if (k.size() != y.size() || (!censored.empty() && censored.size() != y.size())) {
    throw ValidationError("fit_exponential: size mismatch");
  }
  std::vector<double> xs, ls;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!censored.empty() && censored[i]) continue;
    if (!(y[i] > 0.0)) throw ValidationError("fit_exponential: values must be positive");
    xs.push_back(k[i]);
    ls.push_back(std::log(y[i]));
  }
  if (xs.size() < 5) throw ValidationError("fit_exponential: need at least five points");
  const auto f = fit_line(xs, ls);
  return {-f.slope, f.intercept, f.r2, f.slope_stderr, f.points};
}

/// sup |F_n - F| for a sample against a continuous CDF.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw ValidationError("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

/// sup |F_a - F_b| between two empirical distributions.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ValidationError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic 1% critical values of the KS statistics.
inline double ks_critical_one_sample(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }
inline double ks_critical_two_sample(std::size_t n, std::size_t m) {
  const auto a = static_cast<double>(n), b = static_cast<double>(m);
  return 1.6276 * std::sqrt((a + b) / (a * b));
}

/// Standard error of a Bernoulli proportion estimate.
inline double proportion_stderr(double p, std::size_t n) {
  if (n == 0) return std::numeric_limits<double>::infinity();
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

struct MeanStat {
  double mean = 0.0;
  double std_error = 0.0;
};

inline MeanStat mean_stat(const std::vector<double>& v) {
  if (v.empty()) return {};
  const auto n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / (n - 1.0) / n) : 0.0};
}

}  // namespace nsmix
