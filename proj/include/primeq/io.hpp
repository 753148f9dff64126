#ifndef PRIMEQ_IO_HPP
#define PRIMEQ_IO_HPP

#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "primeq/diagnostics.hpp"
#include "primeq/errors.hpp"
#include "primeq/grid.hpp"
#include "primeq/timestepper.hpp"
#include "primeq/viscosity.hpp"

namespace primeq {

enum class RunMode { Imex, Picard, Linearized };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::Imex: return "imex";
    case RunMode::Picard: return "picard";
    case RunMode::Linearized: return "linearized";
  }
  return "unknown";
}

/// Everything a run or study reads from its configuration file.
struct RunConfig {
  DomainSpec domain;
  ViscosityModel model = ViscosityModel::horizontal();
  std::string initial = "random";
  double initial_amplitude = 0.1;
  std::uint64_t initial_seed = 1;
  std::string initial_snapshot;
  TimestepConfig timestep;
  long diagnostics_every = 1;
  long snapshot_every = 0;  ///< 0: initial and final only
  std::string output_dir = "primeq_out";
  RunMode mode = RunMode::Imex;
  std::optional<double> eta;
  bool neumann_test_mode = false;

  // studies
  std::vector<double> eps_ladder{0.25, 0.125, 0.0625, 0.03125};
  std::vector<double> dt_ladder{0.02, 0.01, 0.005};
  std::vector<int> galerkin_sizes{8, 27, 64};
  double coefficient_amplitude = 0.05;
  double linear_dt = 1e-3;

  VerticalClosure closure() const {
    return neumann_test_mode ? VerticalClosure::Neumann : VerticalClosure::OneSided;
  }
};

struct ConfigIssue {
  ErrorKind kind;
  int line;  ///< 0 when the issue is not tied to one line
  std::string field;
  std::string message;
};

/// All problems found in a configuration. kind() is ParseError if any
/// syntax problem was found, ValidationError otherwise.
class ConfigError : public SolverError {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : SolverError(pick_kind(issues), render(issues)), issues_(std::move(issues)) {}
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static ErrorKind pick_kind(const std::vector<ConfigIssue>& is) {
    for (const auto& i : is)
      if (i.kind == ErrorKind::ParseError) return ErrorKind::ParseError;
    return ErrorKind::ValidationError;
  }
  static std::string render(const std::vector<ConfigIssue>& is) {
    std::string s = std::to_string(is.size()) + " configuration problem(s):";
    for (const auto& i : is) {
      s += "\n  ";
      if (i.line > 0) s += "line " + std::to_string(i.line) + ": ";
      s += std::string(to_string(i.kind)) + " [" + i.field + "] " + i.message;
    }
    return s;
  }
  std::vector<ConfigIssue> issues_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<bool> parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  return std::nullopt;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

}  // namespace detail

/// Parse `key = value` lines; `#` starts a comment. Unset keys keep the
/// RunConfig defaults. Throws ConfigError listing every problem.
inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::vector<ConfigIssue> issues;
  std::map<std::string, int> seen;
  std::optional<ViscosityModel::Kind> kind;
  std::optional<double> nu1, nu2, eps;

  auto parse_error = [&](int line, const std::string& field, const std::string& msg) {
    issues.push_back({ErrorKind::ParseError, line, field, msg});
  };

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      parse_error(lineno, "", "expected key = value");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      parse_error(lineno, "", "missing key");
      continue;
    }
    if (seen.count(key)) {
      parse_error(lineno, key, "duplicate key (first set on line " + std::to_string(seen[key]) + ")");
      continue;
    }
    seen[key] = lineno;

    auto real = [&](double& dst) {
      if (auto v = detail::parse_double(val)) dst = *v;
      else parse_error(lineno, key, "not a number: '" + val + "'");
    };
    auto opt_real = [&](std::optional<double>& dst) {
      if (auto v = detail::parse_double(val)) dst = *v;
      else parse_error(lineno, key, "not a number: '" + val + "'");
    };
    auto integer = [&](auto& dst) {
      if (auto v = detail::parse_int(val)) dst = static_cast<std::remove_reference_t<decltype(dst)>>(*v);
      else parse_error(lineno, key, "not an integer: '" + val + "'");
    };
    auto real_list = [&](std::vector<double>& dst) {
      std::vector<double> out;
      for (const auto& item : detail::split_list(val)) {
        auto v = detail::parse_double(item);
        if (!v) {
          parse_error(lineno, key, "not a number: '" + item + "'");
          return;
        }
        out.push_back(*v);
      }
      dst = std::move(out);
    };

    if (key == "half_height") real(cfg.domain.half_height);
    else if (key == "nx") integer(cfg.domain.nx);
    else if (key == "ny") integer(cfg.domain.ny);
    else if (key == "nz") integer(cfg.domain.nz);
    else if (key == "model") {
      kind = ViscosityModel::kind_from_tag(val);
      if (!kind) parse_error(lineno, key, "unknown model '" + val + "'");
    } else if (key == "nu1") opt_real(nu1);
    else if (key == "nu2") opt_real(nu2);
    else if (key == "eps") opt_real(eps);
    else if (key == "initial") cfg.initial = val;
    else if (key == "initial_amplitude") real(cfg.initial_amplitude);
    else if (key == "initial_seed") integer(cfg.initial_seed);
    else if (key == "initial_snapshot") cfg.initial_snapshot = val;
    else if (key == "dt_max") real(cfg.timestep.dt_max);
    else if (key == "cfl") real(cfg.timestep.cfl);
    else if (key == "t_end") real(cfg.timestep.t_end);
    else if (key == "picard_tol") real(cfg.timestep.picard_tol);
    else if (key == "picard_max_iters") integer(cfg.timestep.picard_max_iters);
    else if (key == "blowup_threshold") real(cfg.timestep.blowup_threshold);
    else if (key == "diagnostics_every") integer(cfg.diagnostics_every);
    else if (key == "snapshot_every") integer(cfg.snapshot_every);
    else if (key == "output_dir") cfg.output_dir = val;
    else if (key == "mode") {
      if (val == "imex") cfg.mode = RunMode::Imex;
      else if (val == "picard") cfg.mode = RunMode::Picard;
      else if (val == "linearized") cfg.mode = RunMode::Linearized;
      else parse_error(lineno, key, "unknown mode '" + val + "'");
    } else if (key == "eta") opt_real(cfg.eta);
    else if (key == "neumann_test_mode") {
      if (auto b = detail::parse_bool(val)) cfg.neumann_test_mode = *b;
      else parse_error(lineno, key, "not a boolean: '" + val + "'");
    } else if (key == "eps_ladder") real_list(cfg.eps_ladder);
    else if (key == "dt_ladder") real_list(cfg.dt_ladder);
    else if (key == "galerkin_sizes") {
      std::vector<int> out;
      bool ok = true;
      for (const auto& item : detail::split_list(val)) {
        auto v = detail::parse_int(item);
        if (!v) {
          parse_error(lineno, key, "not an integer: '" + item + "'");
          ok = false;
          break;
        }
        out.push_back(static_cast<int>(*v));
      }
      if (ok) cfg.galerkin_sizes = std::move(out);
    } else if (key == "coefficient_amplitude") real(cfg.coefficient_amplitude);
    else if (key == "linear_dt") real(cfg.linear_dt);
    else parse_error(lineno, key, "unknown key");
  }

  // validation
  auto invalid = [&](const std::string& field, const std::string& msg) {
    issues.push_back({ErrorKind::ValidationError, seen.count(field) ? seen[field] : 0, field, msg});
  };
  const DomainSpec& d = cfg.domain;
  if (!(d.half_height > 0.0)) invalid("half_height", "must be positive");
  if (d.nx <= 0 || d.nx % 2 != 0) invalid("nx", "must be even and positive, got " + std::to_string(d.nx));
  if (d.ny <= 0 || d.ny % 2 != 0) invalid("ny", "must be even and positive, got " + std::to_string(d.ny));
  if (d.nz < 9) invalid("nz", "must be at least 9, got " + std::to_string(d.nz));

  using K = ViscosityModel::Kind;
  const K k = kind.value_or(K::Horizontal);
  switch (k) {
    case K::Full: cfg.model = ViscosityModel::full(nu1.value_or(1.0), nu2.value_or(0.0)); break;
    case K::Horizontal: cfg.model = ViscosityModel::horizontal(); break;
    case K::HalfPerp: cfg.model = ViscosityModel::half_perp(); break;
    case K::HalfPar: cfg.model = ViscosityModel::half_par(); break;
    case K::Eps: cfg.model = ViscosityModel::epsilon(eps.value_or(0.25)); break;
    case K::Inviscid: cfg.model = ViscosityModel::inviscid(); break;
  }
  if ((nu1 || nu2) && k != K::Full) invalid("nu1", "nu1/nu2 only apply to model = full");
  if (eps && k != K::Eps) invalid("eps", "eps only applies to model = eps");
  if (k == K::Full && (cfg.model.nu1 < 0.0 || cfg.model.nu2 < 0.0)) invalid("nu1", "viscosities must be nonnegative");
  if (k == K::Eps && !(cfg.model.eps > 0.0)) invalid("eps", "must be positive");

  const TimestepConfig& ts = cfg.timestep;
  if (!(ts.dt_max > 0.0)) invalid("dt_max", "must be positive");
  if (!(ts.cfl > 0.0 && ts.cfl <= 1.0)) invalid("cfl", "must lie in (0, 1]");
  if (!(ts.t_end > 0.0)) invalid("t_end", "must be positive");
  if (!(ts.picard_tol > 0.0)) invalid("picard_tol", "must be positive");
  if (ts.picard_max_iters <= 0) invalid("picard_max_iters", "must be positive");
  if (!(ts.blowup_threshold > 0.0)) invalid("blowup_threshold", "must be positive");
  if (cfg.diagnostics_every <= 0) invalid("diagnostics_every", "must be positive");
  if (cfg.snapshot_every < 0) invalid("snapshot_every", "must be nonnegative");
  if (cfg.eta && !(*cfg.eta > 1.0)) invalid("eta", "must exceed 1");
  if (cfg.mode == RunMode::Picard && !picard_compatible(cfg.model))
    invalid("mode", "picard needs the full horizontal Laplacian (model horizontal, full or eps), got " +
                        cfg.model.tag());
  static const char* presets[] = {"zero", "shear", "random", "neumann", "rayleigh", "manufactured", "snapshot"};
  if (std::find(std::begin(presets), std::end(presets), cfg.initial) == std::end(presets))
    invalid("initial", "unknown preset '" + cfg.initial + "'");
  if (cfg.initial == "snapshot" && cfg.initial_snapshot.empty())
    invalid("initial_snapshot", "required when initial = snapshot");
  for (double e : cfg.eps_ladder)
    if (!(e > 0.0)) invalid("eps_ladder", "entries must be positive");
  for (double e : cfg.dt_ladder)
    if (!(e > 0.0)) invalid("dt_ladder", "entries must be positive");
  for (int n : cfg.galerkin_sizes) {
    const int m = static_cast<int>(std::lround(std::cbrt(static_cast<double>(n))));
    if (n <= 0 || m * m * m != n) invalid("galerkin_sizes", "entries must be positive cubes");
  }
  if (!(cfg.linear_dt > 0.0)) invalid("linear_dt", "must be positive");

  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw SolverError(ErrorKind::IoError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

namespace detail {

inline std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + hexfloat(v[i]);
  return s;
}

}  // namespace detail

/// Canonical text of a configuration; parse_config(config_echo(c)) == c.
inline std::string config_echo(const RunConfig& c) {
  using detail::hexfloat;
  std::ostringstream o;
  o << "half_height = " << hexfloat(c.domain.half_height) << "\n"
    << "nx = " << c.domain.nx << "\nny = " << c.domain.ny << "\nnz = " << c.domain.nz << "\n"
    << "model = " << c.model.tag() << "\n";
  if (c.model.kind == ViscosityModel::Kind::Full)
    o << "nu1 = " << hexfloat(c.model.nu1) << "\nnu2 = " << hexfloat(c.model.nu2) << "\n";
  if (c.model.kind == ViscosityModel::Kind::Eps) o << "eps = " << hexfloat(c.model.eps) << "\n";
  o << "initial = " << c.initial << "\n"
    << "initial_amplitude = " << hexfloat(c.initial_amplitude) << "\n"
    << "initial_seed = " << c.initial_seed << "\n";
  if (!c.initial_snapshot.empty()) o << "initial_snapshot = " << c.initial_snapshot << "\n";
  o << "dt_max = " << hexfloat(c.timestep.dt_max) << "\n"
    << "cfl = " << hexfloat(c.timestep.cfl) << "\n"
    << "t_end = " << hexfloat(c.timestep.t_end) << "\n"
    << "picard_tol = " << hexfloat(c.timestep.picard_tol) << "\n"
    << "picard_max_iters = " << c.timestep.picard_max_iters << "\n"
    << "blowup_threshold = " << hexfloat(c.timestep.blowup_threshold) << "\n"
    << "diagnostics_every = " << c.diagnostics_every << "\n"
    << "snapshot_every = " << c.snapshot_every << "\n"
    << "output_dir = " << c.output_dir << "\n"
    << "mode = " << to_string(c.mode) << "\n";
  if (c.eta) o << "eta = " << hexfloat(*c.eta) << "\n";
  o << "neumann_test_mode = " << (c.neumann_test_mode ? "true" : "false") << "\n"
    << "eps_ladder = " << detail::join(c.eps_ladder) << "\n"
    << "dt_ladder = " << detail::join(c.dt_ladder) << "\n"
    << "galerkin_sizes = ";
  for (std::size_t i = 0; i < c.galerkin_sizes.size(); ++i) o << (i ? ", " : "") << c.galerkin_sizes[i];
  o << "\ncoefficient_amplitude = " << hexfloat(c.coefficient_amplitude) << "\n"
    << "linear_dt = " << hexfloat(c.linear_dt) << "\n";
  return o.str();
}

// Snapshots

inline constexpr int snapshot_version = 1;

struct Snapshot {
  DomainSpec domain;
  double t = 0.0;
  ViscosityModel model;
  Field3D v;                ///< horizontal velocity, two components
  std::optional<Field3D> w;
  std::optional<Field2D> p;

  bool operator==(const Snapshot&) const = default;
};

inline Snapshot make_snapshot(const SolverState& s, const ViscosityModel& model) {
  return Snapshot{s.domain(), s.t, model, s.velocity(),
                  s.w.values().empty() ? std::nullopt : std::optional<Field3D>(s.w),
                  s.pressure.p.values().empty() ? std::nullopt : std::optional<Field2D>(s.pressure.p)};
}

namespace detail {

inline std::uint64_t to_little(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) return x;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((x >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

inline void write_doubles(std::ostream& o, std::span<const double> v) {
  std::vector<std::uint64_t> buf(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) buf[i] = to_little(std::bit_cast<std::uint64_t>(v[i]));
  o.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
}

inline void read_doubles(const std::string& bytes, std::size_t& pos, std::span<double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t x;
    std::memcpy(&x, bytes.data() + pos, 8);
    pos += 8;
    v[i] = std::bit_cast<double>(to_little(x));
  }
}

[[noreturn]] inline void format_error(const std::string& path, const std::string& msg) {
  throw SolverError(ErrorKind::FormatError, path + ": " + msg);
}

}  // namespace detail

/// Text header, then little-endian doubles, x fastest: v1, v2 (3D), then w
/// (3D) and p (2D) when listed in the header's fields line.
inline void write_snapshot(const Snapshot& s, const std::filesystem::path& path) {
  using detail::hexfloat;
  std::ofstream o(path, std::ios::binary | std::ios::trunc);
  if (!o) throw SolverError(ErrorKind::IoError, "cannot write snapshot " + path.string());
  o << "PESNAP " << snapshot_version << "\n"
    << "domain " << hexfloat(s.domain.half_height) << " " << s.domain.nx << " " << s.domain.ny << " "
    << s.domain.nz << "\n"
    << "time " << hexfloat(s.t) << "\n"
    << "model " << s.model.tag() << " " << hexfloat(s.model.nu1) << " " << hexfloat(s.model.nu2) << " "
    << hexfloat(s.model.eps) << "\n"
    << "fields v1 v2" << (s.w ? " w" : "") << (s.p ? " p" : "") << "\n"
    << "end\n";
  detail::write_doubles(o, s.v.values());
  if (s.w) detail::write_doubles(o, s.w->values());
  if (s.p) detail::write_doubles(o, s.p->values());
  o.flush();
  if (!o) throw SolverError(ErrorKind::IoError, "write failed for snapshot " + path.string());
}

inline Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SolverError(ErrorKind::IoError, "cannot open snapshot " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string p = path.string();

  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos || nl - pos > 4096) detail::format_error(p, "truncated header");
    std::string l = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return l;
  };
  auto num = [&](const std::string& tok) {
    auto v = detail::parse_double(tok);
    if (!v) detail::format_error(p, "bad number '" + tok + "' in header");
    return *v;
  };

  {
    std::istringstream l(next_line());
    std::string magic;
    int version = -1;
    l >> magic >> version;
    if (magic != "PESNAP") detail::format_error(p, "not a snapshot (bad magic)");
    if (version != snapshot_version)
      detail::format_error(p, "snapshot version " + std::to_string(version) + " is not supported (expected " +
                                  std::to_string(snapshot_version) + ")");
  }
  Snapshot s;
  bool have_domain = false, have_time = false, have_model = false, have_fields = false;
  bool want_w = false, want_p = false;
  while (true) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream l(line);
    std::string key;
    l >> key;
    if (key == "domain") {
      std::string h;
      l >> h >> s.domain.nx >> s.domain.ny >> s.domain.nz;
      if (!l) detail::format_error(p, "bad domain line");
      s.domain.half_height = num(h);
      try {
        s.domain.validate();
      } catch (const std::invalid_argument& e) {
        detail::format_error(p, e.what());
      }
      have_domain = true;
    } else if (key == "time") {
      std::string t;
      l >> t;
      s.t = num(t);
      have_time = true;
    } else if (key == "model") {
      std::string tag, a, b, c;
      l >> tag >> a >> b >> c;
      auto k = ViscosityModel::kind_from_tag(tag);
      if (!l || !k) detail::format_error(p, "bad model line");
      s.model = ViscosityModel{*k, num(a), num(b), num(c)};
      have_model = true;
    } else if (key == "fields") {
      std::vector<std::string> names;
      for (std::string n; l >> n;) names.push_back(n);
      if (names.size() < 2 || names[0] != "v1" || names[1] != "v2") detail::format_error(p, "fields must start with v1 v2");
      for (std::size_t i = 2; i < names.size(); ++i) {
        if (names[i] == "w" && !want_w && !want_p) want_w = true;
        else if (names[i] == "p" && !want_p) want_p = true;
        else detail::format_error(p, "unexpected field '" + names[i] + "'");
      }
      have_fields = true;
    } else {
      detail::format_error(p, "unknown header line '" + line + "'");
    }
  }
  if (!(have_domain && have_time && have_model && have_fields)) detail::format_error(p, "incomplete header");

  const DomainSpec& d = s.domain;
  const std::size_t n3 = d.plane_size() * d.nz, n2 = d.plane_size();
  const std::size_t expected = 8 * (2 * n3 + (want_w ? n3 : 0) + (want_p ? n2 : 0));
  if (bytes.size() - pos != expected)
    detail::format_error(p, "payload has " + std::to_string(bytes.size() - pos) + " bytes, header declares " +
                                std::to_string(expected));
  s.v = Field3D(d, 2);
  detail::read_doubles(bytes, pos, s.v.values());
  if (want_w) {
    s.w = Field3D(d, 1);
    detail::read_doubles(bytes, pos, s.w->values());
  }
  if (want_p) {
    s.p = Field2D(d, 1);
    detail::read_doubles(bytes, pos, s.p->values());
  }
  return s;
}

// Time series

inline std::vector<std::string> timeseries_columns() {
  return {"step",
          "t",
          "dt",
          "v_H0",
          "v_H1",
          "v_H2",
          "vt_H1",
          "div_mean_residual",
          "fluct_mean_residual",
          "w_boundary_residual",
          "neumann_residual",
          "rayleigh_pass",
          "rayleigh_min_1",
          "rayleigh_max_1",
          "rayleigh_min_2",
          "rayleigh_max_2",
          "rayleigh_2eta_pass",
          "rayleigh_drift",
          "certificate_margin",
          "certificate_valid",
          "eta_norm",
          "energy",
          "dissipation",
          "transfer"};
}

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// One CSV row; optional fields that are absent are written as empty strings.
inline std::string timeseries_row(const DiagnosticsRecord& r) {
  using detail::fmt;
  std::vector<std::string> f;
  f.push_back(std::to_string(r.step));
  f.push_back(fmt(r.t));
  f.push_back(fmt(r.dt));
  for (const char* key : {"v_H0", "v_H1", "v_H2", "vt_H1"}) {
    auto it = r.sobolev.find(key);
    f.push_back(it == r.sobolev.end() ? "" : fmt(it->second));
  }
  f.push_back(fmt(r.div_mean_residual));
  f.push_back(fmt(r.fluct_mean_residual));
  f.push_back(fmt(r.w_boundary_residual));
  f.push_back(fmt(r.neumann_residual));
  if (r.rayleigh) {
    f.push_back(r.rayleigh->pass ? "true" : "false");
    for (int c = 0; c < 2; ++c) {
      const bool has = c < static_cast<int>(r.rayleigh->components.size());
      f.push_back(has ? fmt(r.rayleigh->components[c].min_inv) : "");
      f.push_back(has ? fmt(r.rayleigh->components[c].max_inv) : "");
    }
  } else {
    for (int i = 0; i < 5; ++i) f.push_back("");
  }
  f.push_back(r.rayleigh_2eta ? (r.rayleigh_2eta->pass ? "true" : "false") : "");
  f.push_back(fmt(r.rayleigh_drift));
  f.push_back(r.certificate_margin ? fmt(*r.certificate_margin) : "");
  f.push_back(r.certificate_margin ? (r.certificate_valid ? "true" : "false") : "");
  f.push_back(r.eta_norm ? fmt(*r.eta_norm) : "");
  f.push_back(fmt(r.energy_budget.energy));
  f.push_back(fmt(r.energy_budget.dissipation));
  f.push_back(fmt(r.energy_budget.transfer));
  std::string s;
  for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "," : "") + f[i];
  return s;
}

/// Append a row, writing the header first when the file is new or empty.
inline void append_timeseries(const DiagnosticsRecord& record, const std::filesystem::path& path) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::ofstream o(path, std::ios::app);
  if (!o) throw SolverError(ErrorKind::IoError, "cannot append to " + path.string());
  if (fresh) {
    const auto cols = timeseries_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) o << (i ? "," : "") << cols[i];
    o << "\n";
  }
  o << timeseries_row(record) << "\n";
  o.flush();
  if (!o) throw SolverError(ErrorKind::IoError, "write failed for " + path.string());
}

/// Simple CSV table writer for study outputs.
inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream o(path, std::ios::trunc);
  if (!o) throw SolverError(ErrorKind::IoError, "cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) o << (i ? "," : "") << header[i];
  o << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) o << (i ? "," : "") << r[i];
    o << "\n";
  }
  if (!o) throw SolverError(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace primeq

#endif  // PRIMEQ_IO_HPP
