#pragma once

// Control, coupling and transport experiments packaged as ExperimentRecords, so
// the command-line tool and the acceptance run share one implementation.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "nsmix/control.hpp"
#include "nsmix/coupling.hpp"
#include "nsmix/io.hpp"
#include "nsmix/mixing.hpp"
#include "nsmix/parallel.hpp"
#include "nsmix/stats.hpp"
#include "nsmix/transport.hpp"

namespace nsmix {

/// Dictionary listing: index triple, polarization, amplitude, Gram diagonal, H1 norm.
inline ExperimentRecord run_basis(const Lab& lab) {
  auto rec = lab.record("basis");
  rec.columns = {"j", "n_t", "n_x", "n_y", "pol", "amplitude", "gram_diagonal", "h1_norm"};
  const auto& b = *lab.basis;
  for (int j = 0; j < b.size(); ++j) {
    const auto& ix = b.index(j);
    rec.rows.push_back({static_cast<double>(j + 1), static_cast<double>(ix.n_t), static_cast<double>(ix.n_x),
                        static_cast<double>(ix.n_y), static_cast<double>(ix.pol), b.amplitude(j), b.gram()(j, j),
                        b.h1_norm(j)});
  }
  rec.metrics["J"] = b.size();
  rec.metrics["gram_condition"] = b.gram_condition();
  rec.metrics["cutoff_radius"] = cutoff_radius(lab.h, b);
  rec.metrics["absorbing_radius"] = absorbing_radius(lab);
  rec.verdicts["gram_well_conditioned"] = b.gram_condition() <= NoiseBasis::kMaxGramCondition;
  return rec;
}

/// Deterministic trajectory u(k) = S(u(k-1), h) from a seeded initial state of norm `scale`.
struct SimulationResult {
  ExperimentRecord record;
  std::vector<SpectralVelocity> states;
};

inline SimulationResult run_simulation(const Lab& lab, int steps, double scale) {
  SimulationResult out{lab.record("simulate"), {}};
  auto& rec = out.record;
  rec.columns = {"step", "t", "energy", "enstrophy"};
  RngStream rng(lab.seed, stream_id(Salt::simulate, 0), 0);
  SpectralVelocity u = scale * random_direction(lab.grid, rng);
  out.states.push_back(u);
  for (int k = 0; k < steps; ++k) {
    u = time_one_map(u, lab.h, lab.solver);
    out.states.push_back(u);
  }
  bool decreasing = true;
  for (std::size_t k = 0; k < out.states.size(); ++k) {
    const double e = energy(out.states[k]);
    rec.rows.push_back({static_cast<double>(k), static_cast<double>(k), e, enstrophy(out.states[k])});
    if (k > 0 && !(e < rec.rows[k - 1][2])) decreasing = false;
  }
  rec.metrics["final_energy"] = rec.rows.back()[2];
  const bool unforced = !lab.h.grid() || lab.h.h1_norm() == 0.0;
  if (unforced && scale > 0.0) rec.verdicts["energy_strictly_decreasing"] = decreasing;
  return out;
}

// ---------------------------------------------------------------------------
// Control synthesis.

/// Sweep over (N, delta, m) for the contraction certificate; lists the observability obstruction on failure.
inline ExperimentRecord run_sweep(const Lab& lab, const SpectralVelocity& uh0, SweepReport* report = nullptr) {
  auto rec = lab.record("control-sweep");
  rec.columns = {"N", "delta", "m", "full_norm", "low_mode_norm", "gain_norm", "certified"};
  Trajectory uh;
  time_one_map(uh0, lab.h, lab.solver, &uh);
  const auto rep = parameter_sweep(uh, lab.basis, lab.control.q, lab.solver);
  for (const auto& e : rep.entries) {
    rec.rows.push_back({static_cast<double>(e.N), e.delta, static_cast<double>(e.m), e.full_norm, e.low_mode_norm,
                        e.gain_norm, e.certified ? 1.0 : 0.0});
  }
  rec.metrics["target"] = lab.control.q / 2.0;
  rec.metrics["best_full_norm"] = rep.best_norm;
  rec.verdicts["certified"] = rep.certified();
  if (rep.certified()) {
    const auto& s = rep.entries[static_cast<std::size_t>(rep.selected)];
    rec.metrics["selected_N"] = s.N;
    rec.metrics["selected_delta"] = s.delta;
    rec.metrics["selected_m"] = s.m;
  } else {
    for (const auto& o : rep.obstruction) {
      rec.notes.push_back("obstruction N=" + std::to_string(o.N) + " m=" + std::to_string(o.m) +
                          " rank=" + std::to_string(o.rank) + "/" + std::to_string(2 * o.N) +
                          " c_obs=" + format_double(o.c_obs) + " smallest_singular_value=" +
                          format_double(o.singular_values.size() ? o.singular_values.minCoeff() : 0.0));
    }
    rec.notes.push_back("no (N, delta, m) reaches ||L + A Phi|| <= q/2; best " + format_double(rep.best_norm));
  }
  if (report) *report = rep;
  return rec;
}

/// Sweep entry with the smallest full closed-loop norm.
inline ControlParams best_sweep_params(const SweepReport& rep, const ControlParams& base) {
  if (rep.entries.empty()) return base;
  const auto& e = rep.certified() ? rep.entries[static_cast<std::size_t>(rep.selected)]
                                  : *std::min_element(rep.entries.begin(), rep.entries.end(),
                                                      [](const auto& a, const auto& b) { return a.full_norm < b.full_norm; });
  ControlParams p = base;
  p.N = e.N;
  p.delta = e.delta;
  p.m = e.m;
  return p;
}

/// Nonlinear contraction over seeded offsets of norm at most d, and the remainder's quadratic scaling.
/// d <= 0 calibrates d for this operator.
inline ExperimentRecord run_contraction(const Lab& lab, const SpectralVelocity& uh0, const ControlParams& cp,
                                        int trials, double d, double success_target = 0.95) {
  auto rec = lab.record("verify-contraction");
  rec.columns = {"trial", "distance", "ratio", "remainder"};
  Trajectory uh;
  auto op = build_phi(lab.h, uh0, lab.basis, cp, lab.solver, &uh);
  certify(op, uh, lab.solver);
  if (!(d > 0.0)) d = calibrate_d(op, lab.h, uh0, cp.q, lab.solver, lab.seed);
  if (!(d > 0.0)) throw NumericalError("verify-contraction: calibration found no admissible radius");
  const auto st = verify_contraction(op, lab.h, uh0, trials, cp.q, d, lab.solver,
                                     lab.seed ^ stream_id(Salt::contraction, 0));
  for (std::size_t i = 0; i < st.samples.size(); ++i) {
    const auto& s = st.samples[i];
    rec.rows.push_back({static_cast<double>(i), s.distance, s.ratio, s.remainder});
  }
  const double r0 = std::min(d, 0.1);
  const auto rs = remainder_scaling(op, lab.h, uh0, r0, 6, 8, lab.solver, lab.seed ^ stream_id(Salt::contraction, 1));
  rec.metrics["N"] = cp.N;
  rec.metrics["delta"] = cp.delta;
  rec.metrics["m"] = cp.m;
  rec.metrics["q"] = cp.q;
  rec.metrics["d"] = d;
  rec.metrics["full_norm"] = op.full_norm;
  rec.metrics["low_mode_norm"] = op.low_mode_norm;
  rec.metrics["success_rate"] = st.success_rate();
  rec.metrics["worst_ratio"] = st.worst_ratio;
  rec.metrics["remainder_slope"] = rs.slope;
  rec.verdicts["success_rate"] = st.success_rate() >= success_target;
  rec.verdicts["remainder_quadratic"] = std::abs(rs.slope - 2.0) <= 0.2;
  return rec;
}

/// Rank and observability constant of the low modes as the number of observed functionals grows.
inline ExperimentRecord run_observability(const Lab& lab, const SpectralVelocity& uh0, int N,
                                          const std::vector<int>& ms) {
  auto rec = lab.record("observability");
  rec.columns = {"N", "m", "rank", "full_rank", "c_obs", "smallest_singular_value"};
  Trajectory uh;
  time_one_map(uh0, lab.h, lab.solver, &uh);
  bool all_full = true, monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (int m : ms) {
    const auto r = observability_check(uh, *lab.basis, N, std::min(m, lab.basis->size()), lab.solver);
    const double smin = r.singular_values.size() ? r.singular_values.minCoeff() : 0.0;
    rec.rows.push_back({static_cast<double>(N), static_cast<double>(r.m), static_cast<double>(r.rank),
                        r.full_rank ? 1.0 : 0.0, r.c_obs, smin});
    all_full = all_full && r.full_rank;
    if (r.c_obs > prev * (1.0 + 1e-9)) monotone = false;
    prev = r.c_obs;
  }
  rec.metrics["real_dimension"] = 2 * N;
  rec.verdicts["full_rank"] = all_full;
  rec.verdicts["c_obs_nonincreasing"] = monotone;
  return rec;
}

// ---------------------------------------------------------------------------
// Coupling.

/// For each magnitude r: u' = u + r v, the shift TV by Monte Carlo and P{||V - V'|| > r/2} over coupled kernels.
inline ExperimentRecord run_coupling_inequality(const Lab& lab, const SpectralVelocity& u,
                                                const std::vector<double>& magnitudes, int samples) {
  auto rec = lab.record("couple");
  rec.columns = {"magnitude", "tv", "tv_stderr", "p_bad", "p_bad_stderr", "p_same", "bound_margin"};
  const auto cs = lab.coupling();
  RngStream dir_rng(lab.seed, stream_id(Salt::coupling, 0), 0);
  const auto dir = random_direction(lab.grid, dir_rng);
  std::vector<double> xs, tvs, pbs;
  bool inequality = true;
  for (std::size_t mi = 0; mi < magnitudes.size(); ++mi) {
    const double r = magnitudes[mi];
    const auto up = u + r * dir;
    const auto map = shift_map_build(u, up, cs);
    RngStream tv_rng(lab.seed, stream_id(Salt::tv, mi), 0);
    const auto tv = shift_tv_estimate(map, *lab.basis, samples, tv_rng);
    std::vector<char> bad(static_cast<std::size_t>(samples)), same(static_cast<std::size_t>(samples));
    parallel_for(bad.size(), lab.threads, [&](std::size_t i) {
      RngStream rng(lab.seed, stream_id(Salt::coupling, 1 + mi * 10000000ULL + i), 0);
      const auto o = coupled_kernel(u, up, cs, map, rng);
      bad[i] = (o.V - o.Vp).norm() > 0.5 * r ? 1 : 0;
      same[i] = o.same_noise ? 1 : 0;
    });
    const auto n = static_cast<std::size_t>(samples);
    const double pb = static_cast<double>(std::count(bad.begin(), bad.end(), 1)) / static_cast<double>(n);
    const double ps = static_cast<double>(std::count(same.begin(), same.end(), 1)) / static_cast<double>(n);
    const double se = std::sqrt(std::pow(proportion_stderr(pb, n), 2) + 4.0 * tv.std_error * tv.std_error);
    const double margin = 2.0 * tv.mean + 3.0 * se - pb;
    inequality = inequality && margin >= 0.0;
    rec.rows.push_back({r, tv.mean, tv.std_error, pb, proportion_stderr(pb, n), ps, margin});
    xs.push_back(r);
    tvs.push_back(tv.mean);
    pbs.push_back(pb);
  }
  rec.metrics["samples_per_magnitude"] = samples;
  rec.verdicts["bad_event_within_twice_tv"] = inequality;
  if (xs.size() >= 2) {
    const auto ft = fit_line(xs, tvs), fp = fit_line(xs, pbs);
    rec.metrics["tv_slope"] = ft.slope;
    rec.metrics["tv_r2"] = ft.r2;
    rec.metrics["p_bad_slope"] = fp.slope;
    rec.metrics["p_bad_r2"] = fp.r2;
    rec.verdicts["tv_linear"] = ft.r2 >= 0.9;
    rec.verdicts["p_bad_linear"] = fp.r2 >= 0.9;
  }
  return rec;
}

/// Event log of one extension chain from (u, u').
inline std::vector<CouplingLogRow> run_coupling_log(const Lab& lab, const SpectralVelocity& u,
                                                    const SpectralVelocity& up, double d, int steps) {
  const auto cs = lab.coupling();
  std::vector<CouplingLogRow> log;
  CoupledState s{u, up};
  for (int k = 0; k < steps; ++k) {
    const double dist = s.distance();
    RngStream rng(lab.seed, stream_id(Salt::coupling, 999999999ULL), static_cast<std::uint64_t>(k));
    s = extension_step(s, cs, d, rng);
    log.push_back({k, dist, s.near, s.same_noise, s.near ? 1.0 - s.accept_probability : 1.0});
  }
  return log;
}

inline void write_coupling_log(std::ostream& os, const std::vector<CouplingLogRow>& log, const std::string& stamp) {
  CsvWriter w(os);
  w.comment(stamp);
  w.row("k", "dist", "branch", "same_noise", "tv_estimate");
  for (const auto& r : log) w.row(r.k, r.dist, r.near ? "near" : "far", r.same_noise ? 1 : 0, r.tv_estimate);
}

/// TV of the shifted coefficient law against the shift size, in one and two dimensions.
inline ExperimentRecord run_tv_check(const Lab& lab, const std::vector<double>& kappas) {
  auto rec = lab.record("tv-check");
  rec.columns = {"dimension", "kappa", "tv_quadrature", "tv_closed_form"};
  for (int dim : {1, 2}) {
    const auto rep = tv_shift_experiment(dim, kappas);
    for (const auto& p : rep.points) rec.rows.push_back({static_cast<double>(dim), p.kappa, p.tv, p.closed_form});
    const std::string tag = dim == 1 ? "1d" : "2d";
    rec.metrics["r2_" + tag] = rep.fit.r2;
    rec.metrics["slope_" + tag] = rep.fit.slope;
    rec.verdicts["linear_" + tag] = rep.fit.r2 >= 0.99;
    if (dim == 1) {
      rec.metrics["max_closed_form_error"] = rep.max_closed_form_error;
      rec.verdicts["quadrature_matches_closed_form"] = rep.max_closed_form_error <= 1e-6;
    }
  }
  return rec;
}

/// Transport LP against enumeration and its dual, for each fixture and threshold.
inline ExperimentRecord run_ot_oracle(const Lab& lab, const std::vector<TransportFixture>& fixtures) {
  auto rec = lab.record("ot-oracle");
  rec.columns = {"fixture", "epsilon", "primal", "dual", "brute_force", "primal_minus_brute", "primal_minus_dual"};
  double worst_brute = 0.0, worst_dual = 0.0;
  for (std::size_t f = 0; f < fixtures.size(); ++f) {
    const auto& fx = fixtures[f];
    for (double eps : fx.epsilon) {
      const auto res = epsilon_optimal_cost(fx.mu1, fx.mu2, eps);
      const double bf = brute_force_transport(fx.mu1.weights, fx.mu2.weights, threshold_cost(fx.mu1, fx.mu2, eps));
      rec.rows.push_back({static_cast<double>(f), eps, res.cost, res.dual, bf, res.cost - bf, res.cost - res.dual});
      worst_brute = std::max(worst_brute, std::abs(res.cost - bf));
      worst_dual = std::max(worst_dual, std::abs(res.cost - res.dual));
    }
    rec.notes.push_back("fixture " + std::to_string(f) + ": " + fx.name);
  }
  rec.metrics["fixtures"] = static_cast<double>(fixtures.size());
  rec.metrics["max_primal_minus_brute"] = worst_brute;
  rec.metrics["max_primal_minus_dual"] = worst_dual;
  rec.verdicts["primal_equals_enumeration"] = !fixtures.empty() && worst_brute <= 1e-9;
  rec.verdicts["primal_equals_dual"] = !fixtures.empty() && worst_dual <= 1e-9;
  return rec;
}

}  // namespace nsmix
