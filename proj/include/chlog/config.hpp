#pragma once

// Run configuration: an INI file with sections, read and written through
// boost::property_tree. Lines starting with ';' are comments. Lists are
// whitespace separated. Every key is optional; missing keys keep the
// defaults below. A file produced by dump_config() reloads to an equal
// configuration.
//
//   [model]      scheme dim n length epsilon theta0 delta stabilization_a mobility
//   [time]       dt t_final
//   [multigrid]  lambda tau max_vcycles coarsest_n coarse_sweeps order
//   [init]       type (random | convergence_profile | constant) mean amplitude seed
//   [output]     directory record_every snapshot_every
//   [convergence] resolutions dt_over_h2
//   [mg_bench]   theta0s sizes dt steps
//   [compare]    schemes dts probe_times target_scheme target_dt
//
// mobility is "constant:<m>" or "regularized_degenerate:<m0>", the latter
// being M(phi) = m0 + max(0, 1 - phi^2). Compare schemes are scheme names,
// optionally suffixed ":A=<value>" to override stabilization_a for that row.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "chlog/diagnostics.hpp"
#include "chlog/multigrid.hpp"
#include "chlog/potential.hpp"
#include "chlog/schemes.hpp"

namespace chlog {

/// A configuration problem; field() is the offending "section.key".
class ConfigError : public std::invalid_argument {
public:
  ConfigError(std::string field, const std::string& msg)
      : std::invalid_argument(field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

private:
  std::string field_;
};

struct InitConfig {
  std::string type = "random";
  double mean = 0.0;
  double amplitude = 0.05;
  std::uint64_t seed = 1;
};

struct OutputConfig {
  std::string directory = "out";
  long record_every = 1;
  long snapshot_every = 0;  // 0 writes only the final snapshot
};

struct ConvergenceConfig {
  std::vector<int> resolutions{16, 32, 64, 128, 256};
  double dt_over_h2 = 0.4;
};

struct BenchConfig {
  std::vector<double> theta0s{2.0, 3.0, 3.5};
  std::vector<int> sizes{64, 128, 256};
  double dt = 0.1;
  int steps = 10;
};

struct CompareConfig {
  std::vector<std::string> schemes{"BDF2", "BE", "BDF2_ES:A=0", "BDF2_ES", "CS1"};
  std::vector<double> dts{1.0e-4, 5.0e-5};
  std::vector<double> probe_times{0.1, 0.5, 1.0};
  std::string target_scheme = "BDF2";
  double target_dt = 5.0e-6;
};

struct RunConfig {
  SchemeKind scheme = SchemeKind::CS1;
  int dim = 2;
  int n = 64;
  double length = 1.0;
  double epsilon = 0.2;
  double theta0 = 3.0;
  double delta = 1.0e-5;
  double stabilization_a = 1.0 / 16.0;
  std::string mobility = "constant:1";
  double dt = 1.0e-3;
  double t_final = 0.1;
  MgConfig mg;
  InitConfig init;
  OutputConfig output;
  ConvergenceConfig convergence;
  BenchConfig mg_bench;
  CompareConfig compare;

  GridSpec grid() const { return GridSpec(dim, n, length); }
  ModelParams params() const;
  friend bool operator==(const RunConfig&, const RunConfig&);
};

// ---------------------------------------------------------------------------
// Value parsing and formatting.

namespace detail {

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <class T>
T parse_number(const std::string& field, const std::string& text) {
  T v{};
  const char* b = text.data();
  const char* e = b + text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
  const auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || b == e) throw ConfigError(field, "cannot parse '" + text + "' as a number");
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& field, const std::string& text) {
  std::istringstream is(text);
  std::vector<T> out;
  for (std::string tok; is >> tok;) out.push_back(parse_number<T>(field, tok));
  return out;
}

inline std::vector<std::string> split_words(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    if constexpr (std::is_floating_point_v<T>)
      out += format_double(v[i]);
    else if constexpr (std::is_same_v<T, std::string>)
      out += v[i];
    else
      out += std::to_string(v[i]);
  }
  return out;
}

inline std::string to_string(SweepOrder o) { return o == SweepOrder::red_black ? "red_black" : "lexicographic"; }

}  // namespace detail

/// Builds a Mobility from its config spelling.
inline Mobility parse_mobility(const std::string& spec, const std::string& field = "model.mobility") {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError(field, "expected '<kind>:<value>', got '" + spec + "'");
  const std::string kind = spec.substr(0, colon);
  const double v = detail::parse_number<double>(field, spec.substr(colon + 1));
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(field, "mobility value must be positive and finite");
  if (kind == "constant") return Mobility::constant(v);
  if (kind == "regularized_degenerate") {
    return Mobility::function([v](double phi) { return v + std::max(0.0, 1.0 - phi * phi); }, spec);
  }
  throw ConfigError(field, "unknown mobility kind '" + kind + "' (expected constant or regularized_degenerate)");
}

inline ComparisonEntry parse_comparison_entry(const std::string& spec) {
  const std::string field = "compare.schemes";
  ComparisonEntry e;
  e.label = spec;
  const auto colon = spec.find(':');
  try {
    e.kind = parse_scheme_kind(spec.substr(0, colon));
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(field, ex.what());
  }
  if (colon != std::string::npos) {
    const std::string rest = spec.substr(colon + 1);
    if (rest.rfind("A=", 0) != 0) throw ConfigError(field, "expected '<scheme>:A=<value>', got '" + spec + "'");
    e.stabilization_a = detail::parse_number<double>(field, rest.substr(2));
    if (!(*e.stabilization_a >= 0.0)) throw ConfigError(field, "A must be >= 0");
  }
  if (!is_cahn_hilliard(e.kind)) throw ConfigError(field, "only Cahn-Hilliard schemes can be compared");
  return e;
}

inline ModelParams RunConfig::params() const {
  ModelParams p;
  p.epsilon = epsilon;
  p.theta0 = theta0;
  p.delta = delta;
  p.stabilization_a = stabilization_a;
  p.mobility = parse_mobility(mobility);
  return p;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
  const auto tie_mg = [](const MgConfig& m) {
    return std::tie(m.sweeps, m.tol, m.max_vcycles, m.coarsest_n, m.coarse_sweeps, m.order);
  };
  return a.scheme == b.scheme && a.dim == b.dim && a.n == b.n && a.length == b.length &&
         a.epsilon == b.epsilon && a.theta0 == b.theta0 && a.delta == b.delta &&
         a.stabilization_a == b.stabilization_a && a.mobility == b.mobility && a.dt == b.dt &&
         a.t_final == b.t_final && tie_mg(a.mg) == tie_mg(b.mg) && a.init.type == b.init.type &&
         a.init.mean == b.init.mean && a.init.amplitude == b.init.amplitude && a.init.seed == b.init.seed &&
         a.output.directory == b.output.directory && a.output.record_every == b.output.record_every &&
         a.output.snapshot_every == b.output.snapshot_every &&
         a.convergence.resolutions == b.convergence.resolutions &&
         a.convergence.dt_over_h2 == b.convergence.dt_over_h2 && a.mg_bench.theta0s == b.mg_bench.theta0s &&
         a.mg_bench.sizes == b.mg_bench.sizes && a.mg_bench.dt == b.mg_bench.dt &&
         a.mg_bench.steps == b.mg_bench.steps && a.compare.schemes == b.compare.schemes &&
         a.compare.dts == b.compare.dts && a.compare.probe_times == b.compare.probe_times &&
         a.compare.target_scheme == b.compare.target_scheme && a.compare.target_dt == b.compare.target_dt;
}

// ---------------------------------------------------------------------------
// Validation.

namespace detail {

inline void check(bool ok, const char* field, const std::string& msg) {
  if (!ok) throw ConfigError(field, msg);
}

inline bool positive(double v) { return v > 0.0 && std::isfinite(v); }

}  // namespace detail

/// Checks every field against the model and solver invariants; throws
/// ConfigError naming the first offending field.
inline void validate(const RunConfig& c) {
  using detail::check;
  using detail::positive;
  check(c.dim == 2 || c.dim == 3, "model.dim", "must be 2 or 3");
  check(c.n >= 4 && c.n % 2 == 0, "model.n", "must be even and >= 4");
  check(positive(c.length), "model.length", "must be positive");
  try {
    (void)c.grid();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model.length", e.what());
  }
  check(positive(c.epsilon), "model.epsilon", "must be positive");
  check(positive(c.theta0), "model.theta0", "must be positive");
  check(c.delta > 0.0 && c.delta < 0.25, "model.delta", "must lie in (0, 0.25), got " + detail::format_double(c.delta));
  check(c.stabilization_a >= 0.0 && std::isfinite(c.stabilization_a), "model.stabilization_a", "must be >= 0");
  (void)parse_mobility(c.mobility);
  check(c.scheme != SchemeKind::AC1 || c.mobility.rfind("constant:", 0) == 0, "model.mobility",
        "AC1 supports constant mobility only");
  check(positive(c.dt), "time.dt", "must be positive");
  check(c.t_final >= 0.0 && std::isfinite(c.t_final), "time.t_final", "must be >= 0");
  try {
    (void)steps_to_reach(c.t_final, c.dt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("time.dt", e.what());
  }
  check(c.mg.sweeps >= 1, "multigrid.lambda", "must be >= 1");
  check(positive(c.mg.tol), "multigrid.tau", "must be positive");
  check(c.mg.max_vcycles >= 1, "multigrid.max_vcycles", "must be >= 1");
  check(c.mg.coarsest_n >= 2 && c.mg.coarsest_n % 2 == 0, "multigrid.coarsest_n", "must be even and >= 2");
  check(c.mg.coarse_sweeps >= 1, "multigrid.coarse_sweeps", "must be >= 1");
  check(c.init.type == "random" || c.init.type == "convergence_profile" || c.init.type == "constant", "init.type",
        "must be random, convergence_profile or constant");
  check(c.init.type != "convergence_profile" || (c.dim == 2 && c.length == 3.2), "init.type",
        "convergence_profile needs dim = 2 and length = 3.2");
  check(std::isfinite(c.init.mean) && std::abs(c.init.mean) < 1.0, "init.mean", "must lie in (-1, 1)");
  check(c.init.amplitude >= 0.0 && std::abs(c.init.mean) + c.init.amplitude < 1.0, "init.amplitude",
        "must be >= 0 with |mean| + amplitude < 1");
  check(!c.output.directory.empty(), "output.directory", "must not be empty");
  check(c.output.record_every >= 1, "output.record_every", "must be >= 1");
  check(c.output.snapshot_every >= 0, "output.snapshot_every", "must be >= 0");
  check(c.convergence.resolutions.size() >= 2, "convergence.resolutions", "needs at least two resolutions");
  for (std::size_t i = 1; i < c.convergence.resolutions.size(); ++i)
    check(c.convergence.resolutions[i] == 2 * c.convergence.resolutions[i - 1], "convergence.resolutions",
          "consecutive resolutions must differ by a factor of 2");
  check(c.convergence.resolutions.front() >= 4 && c.convergence.resolutions.front() % 2 == 0,
        "convergence.resolutions", "must start at an even value >= 4");
  check(positive(c.convergence.dt_over_h2), "convergence.dt_over_h2", "must be positive");
  check(!c.mg_bench.theta0s.empty(), "mg_bench.theta0s", "must not be empty");
  for (double t : c.mg_bench.theta0s) check(positive(t), "mg_bench.theta0s", "entries must be positive");
  check(!c.mg_bench.sizes.empty(), "mg_bench.sizes", "must not be empty");
  for (int s : c.mg_bench.sizes) check(s >= 4 && s % 2 == 0, "mg_bench.sizes", "entries must be even and >= 4");
  check(positive(c.mg_bench.dt), "mg_bench.dt", "must be positive");
  check(c.mg_bench.steps >= 1, "mg_bench.steps", "must be >= 1");
  check(!c.compare.schemes.empty(), "compare.schemes", "must not be empty");
  for (const std::string& s : c.compare.schemes) (void)parse_comparison_entry(s);
  check(!c.compare.dts.empty(), "compare.dts", "must not be empty");
  check(!c.compare.probe_times.empty(), "compare.probe_times", "must not be empty");
  try {
    const SchemeKind k = parse_scheme_kind(c.compare.target_scheme);
    check(is_cahn_hilliard(k), "compare.target_scheme", "must be a Cahn-Hilliard scheme");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("compare.target_scheme", e.what());
  }
  check(positive(c.compare.target_dt), "compare.target_dt", "must be positive");
  for (double t : c.compare.probe_times) {
    check(positive(t), "compare.probe_times", "entries must be positive");
    for (double dt : c.compare.dts) {
      check(positive(dt), "compare.dts", "entries must be positive");
      try {
        (void)steps_to_reach(t, dt);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("compare.dts", e.what());
      }
    }
    try {
      (void)steps_to_reach(t, c.compare.target_dt);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("compare.target_dt", e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Reading and writing.

inline RunConfig config_from_ptree(const boost::property_tree::ptree& pt) {
  RunConfig c;
  auto get = [&](const char* key) -> std::optional<std::string> {
    if (auto v = pt.get_optional<std::string>(boost::property_tree::ptree::path_type(key, '.'))) return *v;
    return std::nullopt;
  };
  auto num = [&](const char* key, auto& dst) {
    if (auto v = get(key)) dst = detail::parse_number<std::remove_reference_t<decltype(dst)>>(key, *v);
  };
  auto str = [&](const char* key, std::string& dst) {
    if (auto v = get(key)) dst = *v;
  };
  auto list = [&](const char* key, auto& dst) {
    if (auto v = get(key)) dst = detail::parse_list<typename std::remove_reference_t<decltype(dst)>::value_type>(key, *v);
  };

  static const char* known[] = {
      "model.scheme", "model.dim", "model.n", "model.length", "model.epsilon", "model.theta0", "model.delta",
      "model.stabilization_a", "model.mobility", "time.dt", "time.t_final", "multigrid.lambda", "multigrid.tau",
      "multigrid.max_vcycles", "multigrid.coarsest_n", "multigrid.coarse_sweeps", "multigrid.order", "init.type",
      "init.mean", "init.amplitude", "init.seed", "output.directory", "output.record_every",
      "output.snapshot_every", "convergence.resolutions", "convergence.dt_over_h2", "mg_bench.theta0s",
      "mg_bench.sizes", "mg_bench.dt", "mg_bench.steps", "compare.schemes", "compare.dts", "compare.probe_times",
      "compare.target_scheme", "compare.target_dt"};
  for (const auto& [section, body] : pt) {
    if (body.empty()) throw ConfigError(section, "keys must live inside a [section]");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return full == k; }) ==
          std::end(known))
        throw ConfigError(full, "unknown key");
    }
  }

  if (auto v = get("model.scheme")) {
    try {
      c.scheme = parse_scheme_kind(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("model.scheme", e.what());
    }
  }
  num("model.dim", c.dim);
  num("model.n", c.n);
  num("model.length", c.length);
  num("model.epsilon", c.epsilon);
  num("model.theta0", c.theta0);
  num("model.delta", c.delta);
  num("model.stabilization_a", c.stabilization_a);
  str("model.mobility", c.mobility);
  num("time.dt", c.dt);
  num("time.t_final", c.t_final);
  num("multigrid.lambda", c.mg.sweeps);
  num("multigrid.tau", c.mg.tol);
  num("multigrid.max_vcycles", c.mg.max_vcycles);
  num("multigrid.coarsest_n", c.mg.coarsest_n);
  num("multigrid.coarse_sweeps", c.mg.coarse_sweeps);
  if (auto v = get("multigrid.order")) {
    if (*v == "red_black")
      c.mg.order = SweepOrder::red_black;
    else if (*v == "lexicographic")
      c.mg.order = SweepOrder::lexicographic;
    else
      throw ConfigError("multigrid.order", "must be red_black or lexicographic");
  }
  str("init.type", c.init.type);
  num("init.mean", c.init.mean);
  num("init.amplitude", c.init.amplitude);
  num("init.seed", c.init.seed);
  str("output.directory", c.output.directory);
  num("output.record_every", c.output.record_every);
  num("output.snapshot_every", c.output.snapshot_every);
  list("convergence.resolutions", c.convergence.resolutions);
  num("convergence.dt_over_h2", c.convergence.dt_over_h2);
  list("mg_bench.theta0s", c.mg_bench.theta0s);
  list("mg_bench.sizes", c.mg_bench.sizes);
  num("mg_bench.dt", c.mg_bench.dt);
  num("mg_bench.steps", c.mg_bench.steps);
  if (auto v = get("compare.schemes")) c.compare.schemes = detail::split_words(*v);
  list("compare.dts", c.compare.dts);
  list("compare.probe_times", c.compare.probe_times);
  str("compare.target_scheme", c.compare.target_scheme);
  num("compare.target_dt", c.compare.target_dt);
  return c;
}

/// Parses and validates.
inline RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  RunConfig c = config_from_ptree(pt);
  validate(c);
  return c;
}

inline RunConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline void dump_config(const RunConfig& c, std::ostream& out) {
  using detail::format_double;
  out << "[model]\n"
      << "scheme=" << to_string(c.scheme) << "\n"
      << "dim=" << c.dim << "\n"
      << "n=" << c.n << "\n"
      << "length=" << format_double(c.length) << "\n"
      << "epsilon=" << format_double(c.epsilon) << "\n"
      << "theta0=" << format_double(c.theta0) << "\n"
      << "delta=" << format_double(c.delta) << "\n"
      << "stabilization_a=" << format_double(c.stabilization_a) << "\n"
      << "mobility=" << c.mobility << "\n\n"
      << "[time]\n"
      << "dt=" << format_double(c.dt) << "\n"
      << "t_final=" << format_double(c.t_final) << "\n\n"
      << "[multigrid]\n"
      << "lambda=" << c.mg.sweeps << "\n"
      << "tau=" << format_double(c.mg.tol) << "\n"
      << "max_vcycles=" << c.mg.max_vcycles << "\n"
      << "coarsest_n=" << c.mg.coarsest_n << "\n"
      << "coarse_sweeps=" << c.mg.coarse_sweeps << "\n"
      << "order=" << detail::to_string(c.mg.order) << "\n\n"
      << "[init]\n"
      << "type=" << c.init.type << "\n"
      << "mean=" << format_double(c.init.mean) << "\n"
      << "amplitude=" << format_double(c.init.amplitude) << "\n"
      << "seed=" << c.init.seed << "\n\n"
      << "[output]\n"
      << "directory=" << c.output.directory << "\n"
      << "record_every=" << c.output.record_every << "\n"
      << "snapshot_every=" << c.output.snapshot_every << "\n\n"
      << "[convergence]\n"
      << "resolutions=" << detail::join(c.convergence.resolutions) << "\n"
      << "dt_over_h2=" << format_double(c.convergence.dt_over_h2) << "\n\n"
      << "[mg_bench]\n"
      << "theta0s=" << detail::join(c.mg_bench.theta0s) << "\n"
      << "sizes=" << detail::join(c.mg_bench.sizes) << "\n"
      << "dt=" << format_double(c.mg_bench.dt) << "\n"
      << "steps=" << c.mg_bench.steps << "\n\n"
      << "[compare]\n"
      << "schemes=" << detail::join(c.compare.schemes) << "\n"
      << "dts=" << detail::join(c.compare.dts) << "\n"
      << "probe_times=" << detail::join(c.compare.probe_times) << "\n"
      << "target_scheme=" << c.compare.target_scheme << "\n"
      << "target_dt=" << format_double(c.compare.target_dt) << "\n";
}

/// Initial phi described by the [init] section.
inline CellField initial_field(const RunConfig& c) {
  const GridSpec g = c.grid();
  if (c.init.type == "convergence_profile") return init_convergence_profile(g);
  if (c.init.type == "constant") return CellField(g, c.init.mean);
  return random_field(g, c.init.mean, c.init.amplitude, c.init.seed);
}

}  // namespace chlog
