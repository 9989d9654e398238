#pragma once

// Persistence: NSMX binary snapshots, trajectory CSV index, control operator
// dumps and transport fixtures. All CSV numbers are written with 17 digits so
// files round-trip and re-runs compare byte for byte.

#include <array>
#include <bit>
#include <cstdint>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "nsmix/control.hpp"
#include "nsmix/errors.hpp"
#include "nsmix/solver.hpp"
#include "nsmix/spectral.hpp"
#include "nsmix/transport.hpp"

namespace nsmix {

inline constexpr std::array<char, 4> kSnapshotMagic{'N', 'S', 'M', 'X'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

/// FNV-1a over a byte string.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Shortest text that round-trips a double.
inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), 4);
}

inline void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  os.write(b.data(), 8);
}

inline std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw ValidationError("snapshot: truncated header");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

inline double get_f64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw ValidationError("snapshot: truncated coefficients");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return std::bit_cast<double>(v);
}

}  // namespace detail

/// One NSMX record: magic, version, K, mode count, then (re, im) pairs in grid order.
inline void write_snapshot(std::ostream& os, const SpectralVelocity& u) {
  os.write(kSnapshotMagic.data(), 4);
  detail::put_u32(os, kSnapshotVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(u.grid()->max_wavenumber()));
  detail::put_u32(os, static_cast<std::uint32_t>(u.grid()->size()));
  for (Eigen::Index i = 0; i < u.coeffs().size(); ++i) {
    detail::put_f64(os, u.coeffs()[i].real());
    detail::put_f64(os, u.coeffs()[i].imag());
  }
}

/// Reads one record; the grid is built from the stored K and checked against the mode count.
inline SpectralVelocity read_snapshot(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kSnapshotMagic) throw ValidationError("snapshot: bad magic bytes");
  const auto version = detail::get_u32(is);
  if (version != kSnapshotVersion) throw ValidationError("snapshot: unsupported version " + std::to_string(version));
  const auto K = detail::get_u32(is);
  const auto modes = detail::get_u32(is);
  if (K < 1 || K > 64) throw ValidationError("snapshot: K out of range");
  auto g = build_grid(static_cast<int>(K));
  if (modes != g->size()) throw ValidationError("snapshot: mode count does not match K");
  Eigen::VectorXcd c(static_cast<Eigen::Index>(modes));
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double re = detail::get_f64(is);
    const double im = detail::get_f64(is);
    c[i] = cplx(re, im);
  }
  return {g, c};
}

inline void save_snapshot(const std::filesystem::path& path, const SpectralVelocity& u) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open " + path.string() + " for writing");
  write_snapshot(os, u);
}

inline SpectralVelocity load_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path.string());
  return read_snapshot(is);
}

/// Header line stamped at the top of every CSV artifact.
inline std::string stamp_line(std::uint64_t config_digest, std::uint64_t seed) {
  return "# config_digest=" + hex64(config_digest) + " seed=" + std::to_string(seed);
}

/// Fixed-precision CSV writer.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) { os_ << std::setprecision(17); }

  CsvWriter& comment(const std::string& line) {
    os_ << line << '\n';
    return *this;
  }
  template <class... Ts>
  CsvWriter& row(const Ts&... values) {
    bool first = true;
    ((os_ << (first ? "" : ",") << values, first = false), ...);
    os_ << '\n';
    return *this;
  }

 private:
  std::ostream& os_;
};

/// Trajectory CSV index: step, t, energy, enstrophy.
inline void write_trajectory_csv(std::ostream& os, const std::vector<SpectralVelocity>& states, double dt,
                                 const std::string& stamp = {}) {
  CsvWriter w(os);
  if (!stamp.empty()) w.comment(stamp);
  w.row("step", "t", "energy", "enstrophy");
  for (std::size_t i = 0; i < states.size(); ++i) {
    w.row(i, static_cast<double>(i) * dt, energy(states[i]), enstrophy(states[i]));
  }
}

/// Snapshot sequence in one NSMX stream.
inline void write_snapshots(std::ostream& os, const std::vector<SpectralVelocity>& states) {
  for (const auto& s : states) write_snapshot(os, s);
}

inline std::vector<SpectralVelocity> read_snapshots(std::istream& is) {
  std::vector<SpectralVelocity> out;
  while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_snapshot(is));
  return out;
}

/// Control operator CSV: "# {json metadata}" then one row per control coefficient.
inline void write_control_csv(std::ostream& os, const ControlOperator& op, std::uint64_t seed,
                              const std::string& stamp = {}) {
  nlohmann::ordered_json meta;
  meta["N"] = op.params.N;
  meta["delta"] = op.params.delta;
  meta["m"] = op.m();
  meta["q"] = op.params.q;
  meta["d"] = op.params.d;
  meta["seed"] = seed;
  meta["trajectory_digest"] = hex64(op.digest);
  meta["K"] = op.grid->max_wavenumber();
  meta["low_mode_norm"] = std::isfinite(op.low_mode_norm) ? nlohmann::ordered_json(op.low_mode_norm) : nullptr;
  meta["full_norm"] = std::isfinite(op.full_norm) ? nlohmann::ordered_json(op.full_norm) : nullptr;
  CsvWriter w(os);
  if (!stamp.empty()) w.comment(stamp);
  w.comment("# " + meta.dump());
  for (Eigen::Index r = 0; r < op.gain.rows(); ++r) {
    os << std::setprecision(17);
    for (Eigen::Index c = 0; c < op.gain.cols(); ++c) os << (c ? "," : "") << op.gain(r, c);
    os << '\n';
  }
}

/// Gain matrix and metadata read back from write_control_csv output.
struct ControlDump {
  nlohmann::json meta;
  Eigen::MatrixXd gain;
};

inline ControlDump read_control_csv(std::istream& is) {
  ControlDump out;
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.rfind("# {", 0) == 0) {
      out.meta = nlohmann::json::parse(line.substr(2));
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
    if (!rows.empty() && r.size() != rows.front().size()) throw ValidationError("control csv: ragged rows");
    rows.push_back(std::move(r));
  }
  if (out.meta.is_null()) throw ValidationError("control csv: missing metadata header");
  const auto cols = rows.empty() ? 0 : rows.front().size();
  out.gain.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.gain(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return out;
}

/// Pair of discrete measures and thresholds for the transport oracle.
struct TransportFixture {
  std::string name;
  DiscreteMeasure mu1;
  DiscreteMeasure mu2;
  std::vector<double> epsilon;
};

inline DiscreteMeasure measure_from_json(const nlohmann::json& j) {
  DiscreteMeasure m;
  for (const auto& p : j.at("points")) {
    const auto v = p.get<std::vector<double>>();
    m.points.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  m.weights = j.at("weights").get<std::vector<double>>();
  m.validate();
  return m;
}

inline TransportFixture load_transport_fixture(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(is);
    TransportFixture fx;
    fx.name = j.value("name", path.stem().string());
    fx.mu1 = measure_from_json(j.at("mu1"));
    fx.mu2 = measure_from_json(j.at("mu2"));
    fx.epsilon = j.at("epsilon").get<std::vector<double>>();
    return fx;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("transport fixture " + path.string() + ": " + e.what());
  }
}

}  // namespace nsmix
