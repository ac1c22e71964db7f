#pragma once

// File output: CSV tables with 17 significant digits and raw field
// snapshots.
//
// A snapshot is two files. <base>.bin holds the cell values as little-endian
// IEEE-754 binary64 in storage order (x fastest). <base>.meta is a text
// sidecar with one "key = value" line per entry: format, dim, n, length,
// time, step, scheme and every model parameter.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "chlog/config.hpp"
#include "chlog/diagnostics.hpp"
#include "chlog/grid.hpp"

namespace chlog {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

// ---------------------------------------------------------------------------
// CSV.

namespace detail {

inline std::string csv_double(double v) { return format_double(v); }

}  // namespace detail

inline void write_series_csv(std::ostream& out, const std::vector<StepRecord>& records) {
  out << "step,time,energy,modified_energy,mass,phi_min,phi_max,vcycles,final_residual,saturated\n";
  for (const StepRecord& r : records) {
    out << r.step << ',' << detail::csv_double(r.time) << ',' << detail::csv_double(r.energy) << ','
        << (r.modified_energy ? detail::csv_double(*r.modified_energy) : std::string()) << ','
        << detail::csv_double(r.mass) << ',' << detail::csv_double(r.phi_min) << ','
        << detail::csv_double(r.phi_max) << ',' << r.vcycles << ',' << detail::csv_double(r.final_residual) << ','
        << (r.saturation_flag ? 1 : 0) << '\n';
  }
}

inline void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows) {
  out << "h_coarse,h_fine,error_l2,rate\n";
  for (const ConvergenceRow& r : rows) {
    out << detail::csv_double(r.h_coarse) << ',' << detail::csv_double(r.h_fine) << ','
        << detail::csv_double(r.error_l2) << ',' << (r.rate ? detail::csv_double(*r.rate) : std::string()) << '\n';
  }
}

inline void write_mg_residuals_csv(std::ostream& out, const std::vector<ComplexityCurve>& curves) {
  out << "theta0,grid_n,cycle_index,residual\n";
  for (const ComplexityCurve& c : curves)
    for (std::size_t i = 0; i < c.residuals.size(); ++i)
      out << detail::csv_double(c.theta0) << ',' << c.grid_n << ',' << i << ',' << detail::csv_double(c.residuals[i])
          << '\n';
}

/// Error columns are named err_t<probe time>; with the default probe times
/// these are err_t0.1, err_t0.5, err_t1.0.
inline void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows,
                                 const std::vector<double>& probe_times) {
  out << "scheme,dt";
  for (double t : probe_times) {
    std::ostringstream name;
    name << std::fixed << std::setprecision(1) << t;
    std::string s = name.str();
    if (std::stod(s) != t) s = detail::csv_double(t);
    out << ",err_t" << s;
  }
  out << ",avg_vcycles,max_phi\n";
  for (const ComparisonRow& r : rows) {
    out << r.label << ',' << detail::csv_double(r.dt);
    for (double e : r.errors) out << ',' << detail::csv_double(e);
    out << ',' << detail::csv_double(r.avg_vcycles) << ',' << detail::csv_double(r.max_phi) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Snapshots.

struct SnapshotMeta {
  double time = 0.0;
  long step = 0;
  std::string scheme;
  ModelParams params;
  std::string mobility = "constant:1";
};

struct Snapshot {
  CellField phi;
  double time = 0.0;
  long step = 0;
  std::map<std::string, std::string> meta;
};

inline void write_snapshot(const std::filesystem::path& base, const CellField& phi, const SnapshotMeta& m) {
  const std::filesystem::path bin = base.string() + ".bin";
  const std::filesystem::path meta = base.string() + ".meta";
  {
    std::ofstream out = open_output(bin, std::ios::out | std::ios::binary);
    std::vector<char> buf(phi.size() * 8);
    std::size_t o = 0;
    for (double v : phi.values()) {
      const auto u = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) buf[o++] = static_cast<char>((u >> (8 * b)) & 0xffu);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    finish_output(out, bin);
  }
  std::ofstream out = open_output(meta);
  const GridSpec& g = phi.grid();
  using detail::format_double;
  out << "format = chlog-snapshot-1\n"
      << "dtype = float64-le\n"
      << "dim = " << g.dim() << "\n"
      << "n = " << g.n() << "\n"
      << "length = " << format_double(g.length()) << "\n"
      << "time = " << format_double(m.time) << "\n"
      << "step = " << m.step << "\n"
      << "scheme = " << m.scheme << "\n"
      << "epsilon = " << format_double(m.params.epsilon) << "\n"
      << "theta0 = " << format_double(m.params.theta0) << "\n"
      << "delta = " << format_double(m.params.delta) << "\n"
      << "stabilization_a = " << format_double(m.params.stabilization_a) << "\n"
      << "mobility = " << m.mobility << "\n";
  finish_output(out, meta);
}

inline Snapshot read_snapshot(const std::filesystem::path& base) {
  const std::filesystem::path bin = base.string() + ".bin";
  const std::filesystem::path metap = base.string() + ".meta";
  std::ifstream min(metap);
  if (!min) throw IoError("cannot open " + metap.string());
  Snapshot s;
  for (std::string line; std::getline(min, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string t) {
      const auto b = t.find_first_not_of(" \t\r");
      const auto e = t.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : t.substr(b, e - b + 1);
    };
    s.meta[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = s.meta.find(key);
    if (it == s.meta.end()) throw IoError(metap.string() + ": missing key " + key);
    return it->second;
  };
  if (need("format") != "chlog-snapshot-1" || need("dtype") != "float64-le")
    throw IoError(metap.string() + ": unsupported snapshot format");
  GridSpec g;
  try {
    g = GridSpec(std::stoi(need("dim")), std::stoi(need("n")), std::stod(need("length")));
    s.time = std::stod(need("time"));
    s.step = std::stol(need("step"));
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(metap.string() + ": " + e.what());
  }
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw IoError("cannot open " + bin.string());
  std::vector<char> buf(g.cells() * 8);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()) || in.peek() != std::char_traits<char>::eof())
    throw IoError(bin.string() + ": size does not match the sidecar grid");
  std::vector<double> data(g.cells());
  for (std::size_t c = 0; c < data.size(); ++c) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[8 * c + b])) << (8 * b);
    data[c] = std::bit_cast<double>(u);
  }
  s.phi = CellField(g, std::move(data));
  return s;
}

}  // namespace chlog
