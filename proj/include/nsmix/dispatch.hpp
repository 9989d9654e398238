#pragma once

// Command table of the laboratory: each command resolves the configured lab,
// runs one experiment and writes <out>/<command>.csv plus a JSON summary.

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nsmix/config.hpp"
#include "nsmix/experiments.hpp"
#include "nsmix/io.hpp"
#include "nsmix/mixing.hpp"

namespace nsmix {

inline constexpr std::array<std::string_view, 13> kCommands{
    "basis",  "simulate",    "control-build", "verify-contraction", "observability", "couple",   "tv-check",
    "ot-oracle", "stabilize", "recurrence",   "squeeze",            "mix",           "check-h2"};

inline bool is_command(std::string_view c) {
  return std::find(kCommands.begin(), kCommands.end(), c) != kCommands.end();
}

/// Exit status contract of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitVerdict = 1, kExitConfig = 2, kExitNumerical = 3 };

struct RunContext {
  LabConfig config;
  std::filesystem::path out_dir;
  std::filesystem::path fixtures_dir;
};

namespace detail {

inline std::ofstream open_artifact(const std::filesystem::path& path, bool binary = false) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw ValidationError("cannot open " + path.string() + " for writing");
  return os;
}

inline void write_record(const ExperimentRecord& rec, const std::filesystem::path& dir, const std::string& name) {
  auto csv = open_artifact(dir / (name + ".csv"));
  rec.write_csv(csv);
  auto js = open_artifact(dir / (name + ".json"));
  js << rec.summary().dump(2) << '\n';
}

inline std::vector<TransportFixture> bundled_fixtures(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> paths;
  if (std::filesystem::is_directory(dir)) {
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (name.rfind("ot_", 0) == 0 && e.path().extension() == ".json") paths.push_back(e.path());
    }
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw ValidationError("no ot_*.json fixtures in " + dir.string());
  std::vector<TransportFixture> out;
  for (const auto& p : paths) out.push_back(load_transport_fixture(p));
  return out;
}

inline std::vector<int> observed_counts(int J) {
  std::vector<int> ms;
  for (int m : {16, 32, 64})
    if (m <= J) ms.push_back(m);
  if (ms.empty()) ms.push_back(J);
  return ms;
}

}  // namespace detail

/// Runs one command and writes its artifacts; the returned record carries the verdicts.
inline ExperimentRecord run_command(const std::string& command, const RunContext& ctx) {
  if (!is_command(command)) throw ValidationError("unknown command '" + command + "'");
  const auto& cfg = ctx.config;
  Lab lab = make_lab(cfg);
  const auto& out = ctx.out_dir;
  const std::string stamp = stamp_line(lab.config_digest, lab.seed);

  if (command == "basis") {
    auto rec = run_basis(lab);
    detail::write_record(rec, out, command);
    return rec;
  }
  if (command == "simulate") {
    lab.solver.dt = cfg.dt;
    auto sim = run_simulation(lab, cfg.steps, cfg.initial_scale);
    detail::write_record(sim.record, out, command);
    auto bin = detail::open_artifact(out / "simulate.nsmx", true);
    write_snapshots(bin, sim.states);
    return sim.record;
  }
  if (command == "ot-oracle") {
    auto rec = run_ot_oracle(lab, detail::bundled_fixtures(ctx.fixtures_dir));
    detail::write_record(rec, out, command);
    return rec;
  }
  if (command == "tv-check") {
    std::vector<double> kappas;
    for (int i = 1; i <= 10; ++i) kappas.push_back(0.02 * i);
    auto rec = run_tv_check(lab, kappas);
    detail::write_record(rec, out, command);
    return rec;
  }
  if (command == "check-h2") {
    const auto starts = ball_samples(lab, cfg.h2_samples, absorbing_radius(lab), Salt::h2);
    auto rec = check_H2(lab, starts, cfg.h2_eps, cfg.h2_max_steps);
    detail::write_record(rec, out, command);
    return rec;
  }

  const auto uh0 = reference_state(lab, cfg.burn_in);
  if (command == "control-build") {
    auto rec = run_sweep(lab, uh0);
    detail::write_record(rec, out, command);
    Trajectory uh;
    auto op = build_phi(lab.h, uh0, lab.basis, lab.control, lab.solver, &uh);
    certify(op, uh, lab.solver);
    auto csv = detail::open_artifact(out / "control.csv");
    write_control_csv(csv, op, lab.seed, stamp);
    return rec;
  }
  if (command == "observability") {
    auto rec = run_observability(lab, uh0, lab.control.N, detail::observed_counts(lab.basis->size()));
    detail::write_record(rec, out, command);
    return rec;
  }
  if (command == "verify-contraction") {
    auto rec = run_contraction(lab, uh0, lab.control, cfg.contraction_pairs, cfg.d.value_or(0.0));
    detail::write_record(rec, out, command);
    return rec;
  }

  const double d = resolve_d(cfg, lab);
  if (command == "couple") {
    auto rec = run_coupling_inequality(lab, uh0, cfg.magnitudes, cfg.tv_samples);
    rec.metrics["d"] = d;
    detail::write_record(rec, out, command);
    const auto log = run_coupling_log(lab, uh0, burn_in_state(lab, 1, cfg.burn_in), d, cfg.mix_horizon);
    auto csv = detail::open_artifact(out / "coupling_log.csv");
    write_coupling_log(csv, log, stamp);
    return rec;
  }
  if (command == "stabilize") {
    RngStream rng(lab.seed, stream_id(Salt::stabilization, 0), 0);
    const auto u0 = uh0 + d * random_direction(lab.grid, rng);
    auto rec = run_stabilization(lab, uh0, u0, cfg.stabilize_steps);
    rec.metrics["d"] = d;
    detail::write_record(rec, out, command);
    return rec;
  }
  if (command == "recurrence") {
    auto rec = run_recurrence(lab, absorbing_set_pairs(lab, cfg.recurrence_chains), d, cfg.recurrence_horizon);
    rec.metrics["d"] = d;
    detail::write_record(rec, out, command);
    return rec;
  }
  if (command == "squeeze") {
    const auto pairs = near_pairs(lab, cfg.squeeze_chains, d, {0.125, 0.25, 0.5, 1.0}, cfg.burn_in);
    auto rec = run_squeezing(lab, pairs, d, cfg.squeeze_horizon);
    rec.metrics["d"] = d;
    detail::write_record(rec, out, command);
    return rec;
  }
  // mix: rest plus two far-apart points of the absorbing ball.
  std::vector<SpectralVelocity> starts{SpectralVelocity(lab.grid)};
  const auto far = ball_samples(lab, 2, absorbing_radius(lab), Salt::mixing);
  starts.insert(starts.end(), far.begin(), far.end());
  auto rec = run_mixing(lab, starts, d, cfg.mix_horizon, cfg.mix_chains);
  rec.metrics["d"] = d;
  detail::write_record(rec, out, command);
  return rec;
}

}  // namespace nsmix
