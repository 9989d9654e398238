#pragma once

// Monte Carlo experiments on the randomly forced chain u_k = S(u_{k-1}, h + eta_k):
// feedback stabilization, recurrence to the near-diagonal set, squeezing, mixing
// rate estimation and the zero-noise stability check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "nsmix/control.hpp"
#include "nsmix/coupling.hpp"
#include "nsmix/io.hpp"
#include "nsmix/parallel.hpp"
#include "nsmix/stats.hpp"
#include "nsmix/transport.hpp"

namespace nsmix {

/// Per-step table, fitted quantities and verdicts of one experiment.
struct ExperimentRecord {
  std::string kind;
  std::uint64_t config_digest = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> metrics;
  std::map<std::string, bool> verdicts;
  std::vector<std::string> notes;

  bool passed() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const auto& kv) { return kv.second; });
  }

  void write_csv(std::ostream& os) const {
    CsvWriter w(os);
    w.comment(stamp_line(config_digest, seed));
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
    os << '\n';
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << r[c];
      os << '\n';
    }
  }

  nlohmann::ordered_json summary() const {
    nlohmann::ordered_json j;
    j["kind"] = kind;
    j["config_digest"] = hex64(config_digest);
    j["seed"] = seed;
    auto& m = j["metrics"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : metrics) m[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
    auto& v = j["verdicts"] = nlohmann::ordered_json::object();
    for (const auto& [k, b] : verdicts) v[k] = b;
    j["notes"] = notes;
    j["passed"] = passed();
    return j;
  }
};

/// Resolved physical and numerical setup shared by the experiments.
struct Lab {
  GridPtr grid;
  BasisPtr basis;
  ForcingProfile h;
  SolverParams solver;
  ControlParams control;
  ShiftMode mode = ShiftMode::frozen;
  unsigned threads = 1;
  std::uint64_t seed = 1;
  std::uint64_t config_digest = 0;

  CouplingSetup coupling() const { return {h, basis, control, solver, mode, 0.0}; }
  ExperimentRecord record(const std::string& kind) const {
    ExperimentRecord r;
    r.kind = kind;
    r.config_digest = config_digest;
    r.seed = seed;
    return r;
  }
};

/// Stream salts keep the experiments' random numbers disjoint.
enum class Salt : std::uint64_t {
  burn_in = 1,
  stabilization,
  recurrence,
  squeezing,
  mixing,
  reference,
  pairs,
  contraction,
  coupling,
  tv,
  h2,
  simulate
};

inline std::uint64_t stream_id(Salt salt, std::uint64_t chain) {
  return (static_cast<std::uint64_t>(salt) << 40) | chain;
}

/// One chain step with noise drawn from the (seed, stream, step) generator.
inline SpectralVelocity noisy_step(const Lab& lab, const SpectralVelocity& u, std::uint64_t stream, int step) {
  RngStream rng(lab.seed, stream, static_cast<std::uint64_t>(step));
  return chain_step(u, lab.h, lab.basis, sample_noise(*lab.basis, rng), lab.solver);
}

/// State after `steps` noisy steps from rest.
inline SpectralVelocity burn_in_state(const Lab& lab, std::uint64_t chain, int steps) {
  SpectralVelocity u(lab.grid);
  for (int k = 0; k < steps; ++k) u = noisy_step(lab, u, stream_id(Salt::burn_in, chain), k);
  return u;
}

/// Radius 2 C1 r / (1 - e^{-nu}) of a ball every chain enters and never leaves, where
/// r bounds the L2(D_1) norm of every admissible forcing h + eta.
inline double absorbing_radius(const Lab& lab) {
  const double nu = lab.solver.nu;
  const double c1 = std::sqrt((1.0 - std::exp(-2.0 * nu)) / (2.0 * nu));
  double r = lab.h.grid() ? lab.h.rendered_l2_norm() : 0.0;
  for (int j = 0; j < lab.basis->size(); ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(lab.basis->size());
    e[j] = lab.basis->amplitude(j);
    r += render(lab.basis, e).rendered_l2_norm(512);
  }
  return 2.0 * c1 * r / (1.0 - std::exp(-nu));
}

// ---------------------------------------------------------------------------
// Stabilization by feedback on each unit interval.

inline ExperimentRecord run_stabilization(const Lab& lab, const SpectralVelocity& uh0, const SpectralVelocity& u0,
                                          int steps, double rate_tolerance = 0.1) {
  auto rec = lab.record("stabilize");
  rec.columns = {"k", "distance", "control_cost", "ratio"};
  const int m = lab.control.m;
  const Eigen::MatrixXd gram = lab.basis->gram().topLeftCorner(m, m);
  SpectralVelocity uh = uh0, u = u0;
  std::vector<double> ks, dist, cost;
  int failures = 0;
  for (int k = 0; k <= steps; ++k) {
    const double dk = (u - uh).norm();
    double ck = 0.0, ratio = 0.0;
    if (k < steps) {
      const auto op = build_phi(lab.h, uh, lab.basis, lab.control, lab.solver);
      const Eigen::VectorXd c = op.apply(u - uh);
      ck = std::sqrt(std::max(0.0, c.dot(gram * c)));
      const auto uh_next = time_one_map(uh, lab.h, lab.solver);
      const auto u_next = time_one_map(u, op.controlled_forcing(lab.h, u - uh), lab.solver);
      const double dn = (u_next - uh_next).norm();
      ratio = dk > 0.0 ? dn / dk : 0.0;
      if (ratio > lab.control.q) ++failures;
      uh = uh_next;
      u = u_next;
    }
    rec.rows.push_back({static_cast<double>(k), dk, ck, ratio});
    ks.push_back(k);
    dist.push_back(dk);
    if (k < steps) cost.push_back(ck);
  }
  rec.metrics["contraction_failures"] = failures;
  const double target = std::log(1.0 / lab.control.q);
  rec.metrics["target_rate"] = target;
  if (dist.front() == 0.0) {
    rec.notes.push_back("identical initial states: distance and control vanish identically");
    rec.verdicts["distance_rate"] = std::all_of(dist.begin(), dist.end(), [](double x) { return x == 0.0; });
    rec.verdicts["control_rate"] = std::all_of(cost.begin(), cost.end(), [](double x) { return x == 0.0; });
    return rec;
  }
  if (cost.size() < 5) {
    rec.notes.push_back("fewer than five controlled steps: decay rates not assessable");
    rec.verdicts["distance_rate"] = false;
    rec.verdicts["control_rate"] = false;
    return rec;
  }
  const auto fd = fit_exponential(ks, dist);
  rec.metrics["distance_rate"] = fd.rate;
  rec.metrics["distance_r2"] = fd.r2;
  rec.verdicts["distance_rate"] = fd.rate >= target - rate_tolerance;
  const std::vector<double> kc(ks.begin(), ks.begin() + static_cast<std::ptrdiff_t>(cost.size()));
  const auto fc = fit_exponential(kc, cost);
  rec.metrics["control_rate"] = fc.rate;
  rec.metrics["control_r2"] = fc.r2;
  rec.verdicts["control_rate"] = std::abs(fc.rate - fd.rate) <= 0.2 * std::abs(fd.rate);
  return rec;
}

// ---------------------------------------------------------------------------
// Recurrence: hitting time of B = {||u - u'|| <= d} for the extension chain.

struct PairList {
  std::vector<SpectralVelocity> u;
  std::vector<SpectralVelocity> up;
  std::size_t size() const { return u.size(); }
};

/// Independent pairs spread over the absorbing ball: radius R sqrt(U) times a random smooth direction.
inline PairList absorbing_set_pairs(const Lab& lab, int count) {
  const double R = absorbing_radius(lab);
  PairList p;
  for (int i = 0; i < count; ++i) {
    RngStream rng(lab.seed, stream_id(Salt::pairs, static_cast<std::uint64_t>(i)), 0);
    const double r1 = R * std::sqrt(rng.uniform());
    const auto d1 = random_direction(lab.grid, rng);
    const double r2 = R * std::sqrt(rng.uniform());
    const auto d2 = random_direction(lab.grid, rng);
    p.u.push_back(r1 * d1);
    p.up.push_back(r2 * d2);
  }
  return p;
}

inline ExperimentRecord run_recurrence(const Lab& lab, const PairList& pairs, double d, int horizon) {
  auto rec = lab.record("recurrence");
  rec.columns = {"k", "survival", "at_risk"};
  const auto cs = lab.coupling();
  const std::size_t n = pairs.size();
  std::vector<int> tau(n, -1);
  parallel_for(n, lab.threads, [&](std::size_t c) {
    CoupledState s{pairs.u[c], pairs.up[c]};
    for (int k = 0; k <= horizon; ++k) {
      if (s.distance() <= d) {
        tau[c] = k;
        return;
      }
      if (k == horizon) return;
      RngStream rng(lab.seed, stream_id(Salt::recurrence, c), static_cast<std::uint64_t>(k));
      s = extension_step(s, cs, d, rng);
    }
  });
  std::size_t censored = 0;
  for (int t : tau) censored += t < 0 ? 1 : 0;
  rec.metrics["chains"] = static_cast<double>(n);
  rec.metrics["censored"] = static_cast<double>(censored);
  std::vector<double> ks, surv;
  for (int k = 0; k <= horizon; ++k) {
    std::size_t alive = 0;
    for (int t : tau) alive += (t < 0 || t > k) ? 1 : 0;
    const double S = static_cast<double>(alive) / static_cast<double>(n);
    rec.rows.push_back({static_cast<double>(k), S, static_cast<double>(alive)});
    if (alive > 0) {
      ks.push_back(k);
      surv.push_back(S);
    }
  }
  rec.metrics["points_in_fit"] = static_cast<double>(ks.size());
  if (ks.size() >= 5) {
    const auto f = fit_exponential(ks, surv);
    rec.metrics["tail_rate"] = f.rate;
    rec.metrics["tail_r2"] = f.r2;
    rec.verdicts["tail_slope_negative"] = f.rate > 0.0;
    rec.verdicts["tail_geometric"] = f.r2 >= 0.9;
    // Plug-in exponential moment at half the fitted rate; censored chains count at the horizon.
    const double delta1 = 0.5 * f.rate;
    double mom = 0.0;
    for (int t : tau) mom += std::exp(delta1 * (t < 0 ? horizon : t));
    rec.metrics["exp_moment_delta"] = delta1;
    rec.metrics["exp_moment"] = mom / static_cast<double>(n);
    rec.verdicts["exp_moment_finite"] = std::isfinite(mom);
  } else {
    rec.notes.push_back("survival curve has fewer than five positive points; geometric tail not assessable");
    rec.verdicts["tail_geometric"] = false;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Squeezing: sigma = first k with ||u_k - u'_k|| > d 2^{-k}.

/// Pairs (u, u + r v) around burn-in states, with r cycling over d * levels.
inline PairList near_pairs(const Lab& lab, int count, double d, const std::vector<double>& levels, int burn_in,
                           int sources = 16) {
  std::vector<SpectralVelocity> base(static_cast<std::size_t>(sources));
  parallel_for(base.size(), lab.threads,
               [&](std::size_t i) { base[i] = burn_in_state(lab, static_cast<std::uint64_t>(i), burn_in); });
  PairList p;
  for (int i = 0; i < count; ++i) {
    RngStream rng(lab.seed, stream_id(Salt::pairs, 1000000 + static_cast<std::uint64_t>(i)), 0);
    const auto& u = base[static_cast<std::size_t>(i % sources)];
    const double r = d * levels[static_cast<std::size_t>(i) % levels.size()];
    p.u.push_back(u);
    p.up.push_back(u + r * random_direction(lab.grid, rng));
  }
  return p;
}

inline ExperimentRecord run_squeezing(const Lab& lab, const PairList& pairs, double d, int horizon) {
  auto rec = lab.record("squeeze");
  rec.columns = {"n", "count", "probability", "ratio_to_2pow_minus_n", "stderr"};
  const auto cs = lab.coupling();
  const std::size_t n = pairs.size();
  std::vector<int> sigma(n, -1);  // -1: no exit within the horizon
  std::vector<double> start(n);
  parallel_for(n, lab.threads, [&](std::size_t c) {
    CoupledState s{pairs.u[c], pairs.up[c]};
    start[c] = s.distance();
    if (start[c] > d) {
      sigma[c] = 0;
      return;
    }
    for (int k = 1; k <= horizon; ++k) {
      RngStream rng(lab.seed, stream_id(Salt::squeezing, c), static_cast<std::uint64_t>(k));
      auto o = coupled_kernel(s.u, s.up, cs, rng);
      s.u = std::move(o.V);
      s.up = std::move(o.Vp);
      if (s.distance() > d * std::ldexp(1.0, -k)) {
        sigma[c] = k;
        return;
      }
    }
  });
  std::vector<double> ratio(static_cast<std::size_t>(horizon + 1), 0.0);
  for (int k = 1; k <= horizon; ++k) {
    const auto cnt = static_cast<std::size_t>(std::count(sigma.begin(), sigma.end(), k));
    const double P = static_cast<double>(cnt) / static_cast<double>(n);
    ratio[static_cast<std::size_t>(k)] = P * std::ldexp(1.0, k);
    rec.rows.push_back({static_cast<double>(k), static_cast<double>(cnt), P, ratio[static_cast<std::size_t>(k)],
                        proportion_stderr(P, n)});
  }
  const auto never = static_cast<std::size_t>(std::count(sigma.begin(), sigma.end(), -1));
  rec.metrics["chains"] = static_cast<double>(n);
  rec.metrics["p_sigma_infinite_lower"] = static_cast<double>(never) / static_cast<double>(n);
  const int split = horizon / 2;
  double head = 0.0, tail = 0.0;
  for (int k = 1; k <= horizon; ++k) {
    double& slot = k <= split ? head : tail;
    slot = std::max(slot, ratio[static_cast<std::size_t>(k)]);
  }
  rec.metrics["max_ratio_head"] = head;
  rec.metrics["max_ratio_tail"] = tail;
  rec.verdicts["tail_ratio_bounded"] = tail <= head;
  rec.verdicts["p_sigma_infinite_positive"] = never > 0;
  // P{sigma = infinity} against the initial distance, one point per distinct start level.
  std::map<double, std::pair<std::size_t, std::size_t>> by_level;  // rounded distance -> (never, total)
  for (std::size_t c = 0; c < n; ++c) {
    auto& e = by_level[std::round(start[c] / d * 1e6) / 1e6];
    e.first += sigma[c] < 0 ? 1 : 0;
    ++e.second;
  }
  if (by_level.size() >= 2 && by_level.size() <= 16) {
    std::vector<double> x, y;
    for (const auto& [lvl, cnt] : by_level) {
      x.push_back(lvl * d);
      y.push_back(1.0 - static_cast<double>(cnt.first) / static_cast<double>(cnt.second));
    }
    const auto f = fit_line(x, y);
    rec.metrics["escape_vs_distance_slope"] = f.slope;
    rec.metrics["escape_vs_distance_r2"] = f.r2;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Mixing rate: coupled distance (a) and empirical W1 to a reference cloud (b).

/// 16 burn-in chains of 50 steps each, then four further states per chain: 64 pooled points.
inline std::vector<SpectralVelocity> reference_cloud(const Lab& lab, int sources = 16, int burn_in = 50,
                                                     int per_source = 4) {
  std::vector<std::vector<SpectralVelocity>> parts(static_cast<std::size_t>(sources));
  parallel_for(parts.size(), lab.threads, [&](std::size_t i) {
    SpectralVelocity u(lab.grid);
    const auto stream = stream_id(Salt::reference, i);
    for (int k = 0; k < burn_in + per_source; ++k) {
      u = noisy_step(lab, u, stream, k);
      if (k >= burn_in) parts[i].push_back(u);
    }
  });
  std::vector<SpectralVelocity> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline DiscreteMeasure cloud_measure(const std::vector<SpectralVelocity>& states, std::size_t limit = 64) {
  std::vector<Eigen::VectorXd> pts;
  const std::size_t n = std::min(limit, states.size());
  const double stride = static_cast<double>(states.size()) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(states[static_cast<std::size_t>(i * stride)].to_real());
  return DiscreteMeasure::uniform(std::move(pts));
}

inline ExperimentRecord run_mixing(const Lab& lab, const std::vector<SpectralVelocity>& starts, double d, int k_max,
                                   int chains) {
  if (starts.size() < 2) throw ValidationError("run_mixing: need at least two starting points");
  auto rec = lab.record("mix");
  rec.columns = {"k", "coupled_distance", "coupled_stderr", "w1_to_reference", "same_noise_fraction"};
  const auto cs = lab.coupling();
  const auto nc = static_cast<std::size_t>(chains);
  const std::size_t pairs = starts.size() * (starts.size() - 1) / 2;
  std::vector<std::pair<std::size_t, std::size_t>> pair_index;
  for (std::size_t i = 0; i < starts.size(); ++i)
    for (std::size_t j = i + 1; j < starts.size(); ++j) pair_index.push_back({i, j});
  // dist[c][k], first[c][k] (first component, for the ensemble cloud), same[c][k]
  std::vector<std::vector<double>> dist(nc, std::vector<double>(static_cast<std::size_t>(k_max + 1)));
  std::vector<std::vector<SpectralVelocity>> first(nc);
  std::vector<std::vector<char>> same(nc, std::vector<char>(static_cast<std::size_t>(k_max + 1), 0));
  parallel_for(nc, lab.threads, [&](std::size_t c) {
    const auto [i, j] = pair_index[c % pairs];
    CoupledState s{starts[i], starts[j]};
    first[c].push_back(s.u);
    dist[c][0] = s.distance();
    for (int k = 1; k <= k_max; ++k) {
      RngStream rng(lab.seed, stream_id(Salt::mixing, c), static_cast<std::uint64_t>(k));
      s = extension_step(s, cs, d, rng);
      dist[c][static_cast<std::size_t>(k)] = s.distance();
      same[c][static_cast<std::size_t>(k)] = s.same_noise ? 1 : 0;
      first[c].push_back(s.u);
    }
  });
  const auto reference = cloud_measure(reference_cloud(lab));
  std::vector<double> ks, est_a;
  std::vector<double> w1(static_cast<std::size_t>(k_max + 1));
  // Ensemble (b) uses chains started from starts[0] (first component of pairs containing index 0).
  std::vector<std::size_t> from_first;
  for (std::size_t c = 0; c < nc; ++c)
    if (pair_index[c % pairs].first == 0) from_first.push_back(c);
  parallel_for(w1.size(), lab.threads, [&](std::size_t k) {
    std::vector<SpectralVelocity> cloud;
    for (std::size_t c : from_first) cloud.push_back(first[c][k]);
    w1[k] = wasserstein1(cloud_measure(cloud), reference).cost;
  });
  for (int k = 0; k <= k_max; ++k) {
    std::vector<double> v;
    double sn = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      v.push_back(std::min(1.0, dist[c][static_cast<std::size_t>(k)]));
      sn += same[c][static_cast<std::size_t>(k)];
    }
    const auto ms = mean_stat(v);
    rec.rows.push_back({static_cast<double>(k), ms.mean, ms.std_error, w1[static_cast<std::size_t>(k)],
                        sn / static_cast<double>(nc)});
    ks.push_back(k);
    est_a.push_back(ms.mean);
  }
  rec.metrics["chains"] = static_cast<double>(nc);
  rec.metrics["ensemble_size"] = static_cast<double>(std::min<std::size_t>(64, from_first.size()));
  rec.metrics["reference_points"] = static_cast<double>(reference.size());
  std::vector<bool> censored(est_a.size());
  for (std::size_t k = 0; k < est_a.size(); ++k) censored[k] = !(est_a[k] > 0.0);
  const auto positive = static_cast<std::size_t>(std::count(censored.begin(), censored.end(), false));
  if (positive >= 5) {
    const auto f = fit_exponential(ks, est_a, censored);
    rec.metrics["gamma"] = f.rate;
    rec.metrics["gamma_stderr"] = f.rate_stderr;
    rec.metrics["gamma_r2"] = f.r2;
    rec.verdicts["coupled_rate_positive"] = f.rate > 0.0;
    rec.verdicts["coupled_fit_r2"] = f.r2 >= 0.95;
  } else {
    rec.notes.push_back("coupled distance vanished too early for an exponential fit");
    rec.verdicts["coupled_fit_r2"] = false;
  }
  // Smoothed medians (window 3) of estimator (a) should not increase.
  bool monotone = true;
  for (std::size_t k = 2; k + 1 < est_a.size(); ++k) {
    const double prev = (est_a[k - 2] + est_a[k - 1] + est_a[k]) / 3.0;
    const double cur = (est_a[k - 1] + est_a[k] + est_a[k + 1]) / 3.0;
    const double tol = 3.0 * rec.rows[k + 1][2] + 1e-12;
    if (cur > prev + tol) monotone = false;
  }
  rec.verdicts["coupled_nonincreasing"] = monotone;
  const std::size_t tail = std::min<std::size_t>(5, est_a.size());
  double plateau = 0.0;
  for (std::size_t k = est_a.size() - tail; k < est_a.size(); ++k) plateau += est_a[k] / static_cast<double>(tail);
  rec.metrics["coupled_plateau"] = plateau;
  rec.metrics["w1_at_kmax"] = w1.back();
  rec.verdicts["estimators_within_2x"] = plateau > 0.0 && w1.back() <= 2.0 * plateau && plateau <= 2.0 * w1.back();
  return rec;
}

// ---------------------------------------------------------------------------
// Zero-noise stability: every start enters the eps-ball around the periodic state.

/// Periodic state of the unforced-noise dynamics: iterate S(., h) until it stops moving.
inline SpectralVelocity periodic_state(const Lab& lab, int max_iter = 1000, double tol = 1e-13) {
  SpectralVelocity u(lab.grid);
  for (int i = 0; i < max_iter; ++i) {
    auto next = time_one_map(u, lab.h, lab.solver);
    const double change = (next - u).norm();
    u = std::move(next);
    if (change <= tol * std::max(1.0, u.norm())) return u;
  }
  throw NumericalError("periodic_state: no convergence");
}

inline ExperimentRecord check_H2(const Lab& lab, const std::vector<SpectralVelocity>& starts, double eps, int l_max) {
  auto rec = lab.record("check-h2");
  rec.columns = {"start", "initial_distance", "entry_step"};
  const auto uh = periodic_state(lab);
  std::vector<int> entry(starts.size(), -1);
  parallel_for(starts.size(), lab.threads, [&](std::size_t i) {
    SpectralVelocity u = starts[i];
    for (int l = 0; l <= l_max; ++l) {
      if ((u - uh).norm() <= eps) {
        entry[i] = l;
        return;
      }
      if (l < l_max) u = time_one_map(u, lab.h, lab.solver);
    }
  });
  int worst = 0;
  bool all = true;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    rec.rows.push_back({static_cast<double>(i), (starts[i] - uh).norm(), static_cast<double>(entry[i])});
    if (entry[i] < 0) all = false;
    worst = std::max(worst, entry[i]);
  }
  rec.metrics["periodic_state_norm"] = uh.norm();
  rec.metrics["common_l"] = all ? worst : std::numeric_limits<double>::quiet_NaN();
  rec.verdicts["all_entered"] = all;
  return rec;
}

/// Starts spread over the ball of radius R (radius R sqrt(U) along smooth random directions).
inline std::vector<SpectralVelocity> ball_samples(const Lab& lab, int count, double R, Salt salt) {
  std::vector<SpectralVelocity> out;
  for (int i = 0; i < count; ++i) {
    RngStream rng(lab.seed, stream_id(salt, static_cast<std::uint64_t>(i)), 7);
    const double r = R * std::sqrt(rng.uniform());
    out.push_back(r * random_direction(lab.grid, rng));
  }
  return out;
}

}  // namespace nsmix
