#pragma once

// INI configuration for the laboratory: sections [physics], [forcing], [noise],
// [control], [experiment], [simulate], [output]. Missing keys take defaults,
// unknown keys are rejected, and the resolved values hash to a digest that is
// stamped into every artifact.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nsmix/control.hpp"
#include "nsmix/coupling.hpp"
#include "nsmix/errors.hpp"
#include "nsmix/forcing.hpp"
#include "nsmix/io.hpp"
#include "nsmix/mixing.hpp"
#include "nsmix/noise.hpp"

namespace nsmix {

/// Schema violation: unknown key, unparsable value, out-of-range number.
class ConfigSchemaError : public ConfigError {
 public:
  explicit ConfigSchemaError(const std::string& what) : ConfigError("config schema: " + what) {}
};

/// The configuration file does not exist or cannot be read.
class ConfigFileError : public ConfigError {
 public:
  explicit ConfigFileError(const std::string& what) : ConfigError("config file: " + what) {}
};

/// Amplitudes that leave some low mode without noise.
class NonDegeneracyError : public ConfigError {
 public:
  explicit NonDegeneracyError(const std::string& what) : ConfigError("noise non-degeneracy: " + what) {}
};

struct LabConfig {
  // [physics]
  double nu = 0.5;
  int K = 8;
  double dt = 1e-3;     // deterministic runs
  double mc_dt = 1e-2;  // Monte Carlo and control experiments
  // [forcing]
  double amplitude = 0.5;
  // [noise]
  int J = 64;
  double b0 = 0.3;
  double decay_s = 1.0;
  CylinderSpec cylinder{};
  int n_active = 8;
  // [control]
  int N = 8;
  double delta = 1e-2;
  int m = 32;
  double q = 0.25;
  std::optional<double> d;  // empty: calibrate
  // [experiment]
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string mode = "frozen";
  int burn_in = 30;
  int contraction_pairs = 200;
  int tv_samples = 10000;
  std::vector<double> magnitudes{1e-3, 3e-3, 1e-2, 3e-2};
  int mix_chains = 300;
  int mix_horizon = 30;
  int recurrence_chains = 500;
  int recurrence_horizon = 40;
  int squeeze_chains = 300;
  int squeeze_horizon = 12;
  int stabilize_steps = 10;
  int h2_samples = 50;
  double h2_eps = 1e-3;
  int h2_max_steps = 200;
  // [simulate]
  int steps = 20;
  double initial_scale = 1.0;
  // [output]
  std::string out_dir = "out";

  /// Canonical "section.key=value" listing of every resolved field.
  std::string canonical() const;
  std::uint64_t digest() const { return fnv1a(canonical()); }
  void validate() const;
};

namespace detail {

inline std::string fmt_double(double v) { return format_double(v); }

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_double(v[i]);
  return s;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigSchemaError(key + ": '" + text + "' is not a comma-separated list of numbers");
    }
  }
  if (out.empty()) throw ConfigSchemaError(key + ": empty list");
  return out;
}

/// Reads typed values out of one section and remembers which keys were consumed.
class SectionReader {
 public:
  SectionReader(const boost::property_tree::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  template <class T>
  void get(const std::string& key, T& out) {
    known_.insert(key);
    if (!tree_) return;
    const auto v = tree_->get_optional<std::string>(key);
    if (!v) return;
    const std::string full = name_ + "." + key;
    if constexpr (std::is_same_v<T, std::string>) {
      out = trim(*v);
    } else {
      std::istringstream is(trim(*v));
      T x{};
      if (!(is >> x) || !(is >> std::ws).eof()) throw ConfigSchemaError(full + ": cannot parse '" + *v + "'");
      out = x;
    }
  }

  void get_list(const std::string& key, std::vector<double>& out) {
    known_.insert(key);
    if (!tree_) return;
    if (const auto v = tree_->get_optional<std::string>(key)) out = parse_list(name_ + "." + key, *v);
  }

  std::optional<std::string> raw(const std::string& key) {
    known_.insert(key);
    if (!tree_) return std::nullopt;
    if (const auto v = tree_->get_optional<std::string>(key)) return trim(*v);
    return std::nullopt;
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& kv : *tree_) {
      if (!known_.count(kv.first)) throw ConfigSchemaError("unknown key '" + name_ + "." + kv.first + "'");
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  const boost::property_tree::ptree* tree_;
  std::string name_;
  std::set<std::string> known_;
};

}  // namespace detail

inline std::string LabConfig::canonical() const {
  using detail::fmt_double;
  std::ostringstream os;
  os << "physics.nu=" << fmt_double(nu) << "\nphysics.K=" << K << "\nphysics.dt=" << fmt_double(dt)
     << "\nphysics.mc_dt=" << fmt_double(mc_dt) << "\nforcing.amplitude=" << fmt_double(amplitude)
     << "\nnoise.J=" << J << "\nnoise.b0=" << fmt_double(b0) << "\nnoise.decay_s=" << fmt_double(decay_s)
     << "\nnoise.cylinder="
     << detail::fmt_list({cylinder.t_a, cylinder.t_b, cylinder.x_a, cylinder.x_b, cylinder.y_a, cylinder.y_b})
     << "\nnoise.n_active=" << n_active << "\ncontrol.N=" << N << "\ncontrol.delta=" << fmt_double(delta)
     << "\ncontrol.m=" << m << "\ncontrol.q=" << fmt_double(q) << "\ncontrol.d=" << (d ? fmt_double(*d) : "auto")
     << "\nexperiment.mode=" << mode << "\nexperiment.burn_in=" << burn_in
     << "\nexperiment.contraction_pairs=" << contraction_pairs << "\nexperiment.tv_samples=" << tv_samples
     << "\nexperiment.magnitudes=" << detail::fmt_list(magnitudes) << "\nexperiment.mix_chains=" << mix_chains
     << "\nexperiment.mix_horizon=" << mix_horizon << "\nexperiment.recurrence_chains=" << recurrence_chains
     << "\nexperiment.recurrence_horizon=" << recurrence_horizon << "\nexperiment.squeeze_chains=" << squeeze_chains
     << "\nexperiment.squeeze_horizon=" << squeeze_horizon << "\nexperiment.stabilize_steps=" << stabilize_steps
     << "\nexperiment.h2_samples=" << h2_samples << "\nexperiment.h2_eps=" << fmt_double(h2_eps)
     << "\nexperiment.h2_max_steps=" << h2_max_steps << "\nsimulate.steps=" << steps
     << "\nsimulate.initial_scale=" << fmt_double(initial_scale) << '\n';
  // Seed, thread count and output directory are run parameters, not part of the physical setup.
  return os.str();
}

inline void LabConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigSchemaError(what);
  };
  need(nu > 0.0, "physics.nu must be positive");
  need(K >= 1 && K <= 64, "physics.K must lie in [1, 64]");
  need(dt > 0.0 && dt <= SolverParams::kMaxDt, "physics.dt must lie in (0, 1e-2]");
  need(mc_dt > 0.0 && mc_dt <= SolverParams::kMaxDt, "physics.mc_dt must lie in (0, 1e-2]");
  need(std::isfinite(amplitude), "forcing.amplitude must be finite");
  need(J >= 1 && J <= NoiseBasis::kMaxElements, "noise.J must lie in [1, 256]");
  need(decay_s >= 0.0, "noise.decay_s must be non-negative");
  need(n_active >= 0 && n_active <= J, "noise.n_active must lie in [0, J]");
  need(b0 >= 0.0 && std::isfinite(b0), "noise.b0 must be finite and non-negative");
  cylinder.validate();
  if (n_active > 0 && b0 == 0.0) {
    throw NonDegeneracyError("b_j = b0 j^-s vanishes for j <= n_active = " + std::to_string(n_active) +
                             "; every low mode needs nonzero noise amplitude");
  }
  need(N >= 1, "control.N must be at least 1");
  need(delta > 0.0, "control.delta must be positive");
  need(m >= 0 && m <= J, "control.m must lie in [0, J]");
  need(q > 0.0 && q < 1.0, "control.q must lie in (0, 1)");
  need(!d || *d > 0.0, "control.d must be positive or 'auto'");
  need(mode == "frozen" || mode == "exact", "experiment.mode must be 'frozen' or 'exact'");
  need(burn_in >= 0, "experiment.burn_in must be non-negative");
  need(contraction_pairs >= 1 && tv_samples >= 1, "experiment sample counts must be positive");
  need(magnitudes.size() >= 2, "experiment.magnitudes needs at least two values");
  for (double v : magnitudes) need(v > 0.0, "experiment.magnitudes must be positive");
  need(mix_chains >= 1 && recurrence_chains >= 1 && squeeze_chains >= 1, "experiment chain counts must be positive");
  need(mix_horizon >= 1 && recurrence_horizon >= 1 && squeeze_horizon >= 1, "experiment horizons must be positive");
  need(stabilize_steps >= 1, "experiment.stabilize_steps must be positive");
  need(h2_samples >= 1 && h2_eps > 0.0 && h2_max_steps >= 0, "experiment h2 settings out of range");
  need(steps >= 0, "simulate.steps must be non-negative");
  need(initial_scale >= 0.0, "simulate.initial_scale must be non-negative");
  need(!out_dir.empty(), "output.dir must not be empty");
}

/// Parses INI text; an empty document yields the defaults.
inline LabConfig parse_config_text(const std::string& text) {
  boost::property_tree::ptree pt;
  try {
    std::istringstream is(text);
    boost::property_tree::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigSchemaError(std::string("malformed INI: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  static const std::set<std::string> sections{"physics",    "forcing",  "noise", "control",
                                              "experiment", "simulate", "output"};
  for (const auto& kv : pt) {
    if (!sections.count(kv.first)) {
      throw ConfigSchemaError(kv.second.empty() ? "key '" + kv.first + "' outside any section"
                                                : "unknown section [" + kv.first + "]");
    }
  }
  auto section = [&](const char* name) {
    const auto child = pt.get_child_optional(name);
    return detail::SectionReader(child ? &*child : nullptr, name);
  };
  LabConfig c;

  auto phys = section("physics");
  phys.get("nu", c.nu);
  phys.get("K", c.K);
  phys.get("dt", c.dt);
  phys.get("mc_dt", c.mc_dt);
  phys.reject_unknown();

  auto forcing = section("forcing");
  forcing.get("amplitude", c.amplitude);
  forcing.reject_unknown();

  auto noise = section("noise");
  noise.get("J", c.J);
  noise.get("b0", c.b0);
  noise.get("decay_s", c.decay_s);
  noise.get("n_active", c.n_active);
  std::vector<double> cyl;
  noise.get_list("cylinder", cyl);
  if (!cyl.empty()) {
    if (cyl.size() != 6) throw ConfigSchemaError("noise.cylinder needs six numbers t_a, t_b, x_a, x_b, y_a, y_b");
    c.cylinder = {cyl[0], cyl[1], cyl[2], cyl[3], cyl[4], cyl[5]};
  }
  noise.reject_unknown();

  auto control = section("control");
  control.get("N", c.N);
  control.get("delta", c.delta);
  control.get("m", c.m);
  control.get("q", c.q);
  if (const auto d = control.raw("d"); d && *d != "auto") {
    double v = 0.0;
    std::istringstream is(*d);
    if (!(is >> v) || !(is >> std::ws).eof()) throw ConfigSchemaError("control.d: expected a number or 'auto'");
    c.d = v;
  }
  control.reject_unknown();

  auto exp = section("experiment");
  exp.get("seed", c.seed);
  exp.get("threads", c.threads);
  exp.get("mode", c.mode);
  exp.get("burn_in", c.burn_in);
  exp.get("contraction_pairs", c.contraction_pairs);
  exp.get("tv_samples", c.tv_samples);
  exp.get_list("magnitudes", c.magnitudes);
  exp.get("mix_chains", c.mix_chains);
  exp.get("mix_horizon", c.mix_horizon);
  exp.get("recurrence_chains", c.recurrence_chains);
  exp.get("recurrence_horizon", c.recurrence_horizon);
  exp.get("squeeze_chains", c.squeeze_chains);
  exp.get("squeeze_horizon", c.squeeze_horizon);
  exp.get("stabilize_steps", c.stabilize_steps);
  exp.get("h2_samples", c.h2_samples);
  exp.get("h2_eps", c.h2_eps);
  exp.get("h2_max_steps", c.h2_max_steps);
  exp.reject_unknown();

  auto sim = section("simulate");
  sim.get("steps", c.steps);
  sim.get("initial_scale", c.initial_scale);
  sim.reject_unknown();

  auto out = section("output");
  out.get("dir", c.out_dir);
  out.reject_unknown();

  c.validate();
  return c;
}

inline LabConfig parse_config(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw ConfigFileError("no such file " + path.string());
  std::ifstream is(path);
  if (!is) throw ConfigFileError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

inline BasisPtr make_basis(const LabConfig& c, const GridPtr& g) {
  return build_noise_basis(c.cylinder, c.J, AmplitudeRule{c.b0, c.decay_s, {}}, g, c.n_active);
}

/// Lab for the Monte Carlo and control experiments (time step mc_dt).
inline Lab make_lab(const LabConfig& c) {
  Lab lab;
  lab.grid = build_grid(c.K);
  lab.basis = make_basis(c, lab.grid);
  lab.h = reference_forcing(lab.grid, c.amplitude);
  lab.solver = {c.nu, c.mc_dt};
  lab.control = {c.N, c.delta, c.m, c.q, c.d.value_or(0.0)};
  lab.mode = parse_shift_mode(c.mode);
  lab.threads = resolve_threads(c.threads);
  lab.seed = c.seed;
  lab.config_digest = c.digest();
  return lab;
}

/// Base state of the control experiments: the chain after `burn_in` noisy steps from rest.
inline SpectralVelocity reference_state(const Lab& lab, int burn_in) { return burn_in_state(lab, 0, burn_in); }

/// Fixes lab.control.d: the configured value, or the largest radius whose nonlinear
/// remainder stays below q d / 2 around the reference state (capped at 1).
inline double resolve_d(const LabConfig& c, Lab& lab) {
  if (c.d) return lab.control.d = *c.d;
  const auto uh0 = reference_state(lab, c.burn_in);
  const auto op = build_phi(lab.h, uh0, lab.basis, lab.control, lab.solver);
  const double d = calibrate_d(op, lab.h, uh0, lab.control.q, lab.solver, lab.seed);
  if (!(d > 0.0)) throw NumericalError("calibration of d failed: no radius keeps the remainder below q d / 2");
  return lab.control.d = d;
}

}  // namespace nsmix
