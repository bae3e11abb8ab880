#pragma once

// File formats:
//   params JSON        {p1,p2,p4,c1,c2,c4,m1,m2,m4,r,s0}
//   full trajectory    CSV header t,dx,dy,dz   (one row per event)
//   partial trajectory CSV header t,m,y
//   moment curve       CSV header t,mean,variance
// Initial state is not part of the trajectory CSVs; it comes from s0.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "cellbp/error.hpp"
#include "cellbp/estimate.hpp"
#include "cellbp/likelihood.hpp"
#include "cellbp/model.hpp"
#include "cellbp/sim.hpp"

namespace cellbp::io {

using json = nlohmann::ordered_json;

// Shortest representation that round-trips exactly.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temporary file and renames it into place.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot rename into " + path.string() + ": " + ec.message());
}

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, source + ": invalid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Parameters

inline json theta_to_json(const ThetaVector& theta) {
  json j = json::object();
  for (std::size_t i = 0; i < kNumParams; ++i) j[std::string(kParamNames[i])] = theta[i];
  return j;
}

inline json params_to_json(const ModelParams& p) {
  json j = theta_to_json(ThetaVector::from_params(p));
  j["s0"] = p.s0;
  return j;
}

inline ThetaVector theta_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidParams, "parameters must be a JSON object");
  ThetaVector theta;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const std::string key(kParamNames[i]);
    if (!j.contains(key)) throw Error(ErrorKind::InvalidParams, "missing parameter '" + key + "'");
    if (!j[key].is_number()) throw Error(ErrorKind::InvalidParams, "parameter '" + key + "' must be a number");
    theta[i] = j[key].get<double>();
  }
  return theta;
}

inline ModelParams params_from_json(const json& j) {
  const ThetaVector theta = theta_from_json(j);
  if (!j.contains("s0") || !j["s0"].is_number_integer()) {
    throw Error(ErrorKind::InvalidParams, "missing or non-integer 's0'");
  }
  ModelParams p = theta.to_params(j["s0"].get<std::int64_t>());
  p.validate();
  return p;
}

// Accepts either a params object or a fit result carrying an "estimate" block.
inline ModelParams load_params(const std::filesystem::path& path) {
  const json j = parse_json(read_text(path), path.string());
  if (j.contains("estimate")) {
    json flat = j["estimate"];
    if (!flat.contains("s0") && j.contains("s0")) flat["s0"] = j["s0"];
    return params_from_json(flat);
  }
  return params_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV

enum class CsvSchema { Full, Partial };

inline const char* header_for(CsvSchema s) { return s == CsvSchema::Full ? "t,dx,dy,dz" : "t,m,y"; }

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t,dx,dy,dz\n";
  for (const auto& e : traj.events) {
    const auto d = e.change();
    out += fmt(e.t) + "," + std::to_string(d.dx) + "," + std::to_string(d.dy) + "," + std::to_string(d.dz) + "\n";
  }
  return out;
}

inline std::string partial_csv(const PartialTrajectory& pt) {
  std::string out = "t,m,y\n";
  for (const auto& r : pt.records) out += fmt(r.t) + "," + std::to_string(r.m) + "," + std::to_string(r.y) + "\n";
  return out;
}

inline std::string moment_curve_csv(const MomentCurve& c) {
  std::string out = "t,mean,variance\n";
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    out += fmt(c.times[i]) + "," + fmt(c.mean[i]) + "," + fmt(c.variance[i]) + "\n";
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r' && ch != ' ' && ch != '\t') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double to_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::InvalidArgument, where + ": not a number: '" + s + "'");
  }
  return v;
}

inline std::int64_t to_int(const std::string& s, const std::string& where) {
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::InvalidArgument, where + ": not an integer: '" + s + "'");
  }
  return v;
}

struct CsvTable {
  CsvSchema schema;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_table(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidArgument, path.string() + ": empty file");
  const auto header = split(line);
  CsvTable table{};
  if (header == std::vector<std::string>{"t", "dx", "dy", "dz"}) {
    table.schema = CsvSchema::Full;
  } else if (header == std::vector<std::string>{"t", "m", "y"}) {
    table.schema = CsvSchema::Partial;
  } else {
    throw Error(ErrorKind::InvalidArgument, path.string() + ": unrecognized header '" + line + "'");
  }
  const std::size_t width = table.schema == CsvSchema::Full ? 4 : 3;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (cells.size() != width) {
      throw Error(ErrorKind::InvalidArgument, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                                  std::to_string(width) + " columns");
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace detail

inline CsvSchema detect_schema(const std::filesystem::path& path) { return detail::read_table(path).schema; }

inline Trajectory read_trajectory_csv(const std::filesystem::path& path, std::int64_t s0) {
  const auto table = detail::read_table(path);
  if (table.schema != CsvSchema::Full) {
    throw Error(ErrorKind::InvalidArgument, path.string() + ": expected header t,dx,dy,dz (full data)");
  }
  std::vector<std::pair<double, CountChange>> rows;
  rows.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto where = path.string() + " row " + std::to_string(i + 1);
    const auto& c = table.rows[i];
    rows.push_back({detail::to_double(c[0], where),
                    {static_cast<int>(detail::to_int(c[1], where)), static_cast<int>(detail::to_int(c[2], where)),
                     static_cast<int>(detail::to_int(c[3], where))}});
  }
  try {
    return trajectory_from_changes(s0, rows);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

inline PartialTrajectory read_partial_csv(const std::filesystem::path& path, std::int64_t m0) {
  const auto table = detail::read_table(path);
  if (table.schema != CsvSchema::Partial) {
    throw Error(ErrorKind::InvalidArgument, path.string() + ": expected header t,m,y (partial data)");
  }
  PartialTrajectory pt;
  pt.m0 = m0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto where = path.string() + " row " + std::to_string(i + 1);
    const auto& c = table.rows[i];
    pt.records.push_back({detail::to_double(c[0], where), detail::to_int(c[1], where), detail::to_int(c[2], where)});
  }
  return pt;
}

// ---------------------------------------------------------------------------
// Fit configuration and results

inline FitConfig fit_config_from_json(const json& j) {
  FitConfig cfg;
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "fit config must be a JSON object");
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  try {
    get("population", cfg.de.population);
    get("generations", cfg.de.generations);
    get("F", cfg.de.mutation);
    get("CR", cfg.de.crossover);
    get("tolerance", cfg.de.tolerance);
    get("stall_generations", cfg.de.stall_generations);
    get("seed", cfg.de.seed);
    get("polish_full", cfg.polish_full);
    get("polish_starts", cfg.polish_starts);
    if (j.contains("bfgs")) {
      const auto& b = j["bfgs"];
      if (b.contains("max_iterations")) cfg.bfgs.max_iterations = b["max_iterations"].get<std::size_t>();
      if (b.contains("gradient_tolerance")) cfg.bfgs.gradient_tolerance = b["gradient_tolerance"].get<double>();
    }
    if (j.contains("bounds")) {
      for (auto& [key, value] : j["bounds"].items()) {
        auto p = param_from_name(key);
        if (!p || !value.is_array() || value.size() != 2) {
          throw Error(ErrorKind::InvalidArgument, "bounds entry '" + key + "' must be [lo, hi] for a parameter");
        }
        cfg.bounds.lower[*p] = value[0].get<double>();
        cfg.bounds.upper[*p] = value[1].get<double>();
      }
    }
    if (j.contains("pins")) {
      for (auto& [key, value] : j["pins"].items()) {
        auto p = param_from_name(key);
        if (!p) throw Error(ErrorKind::InvalidArgument, "unknown pinned parameter '" + key + "'");
        cfg.pins[*p] = value.get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("fit config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline json fit_config_to_json(const FitConfig& cfg) {
  json j;
  j["population"] = cfg.de.population;
  j["generations"] = cfg.de.generations;
  j["F"] = cfg.de.mutation;
  j["CR"] = cfg.de.crossover;
  j["tolerance"] = cfg.de.tolerance;
  j["stall_generations"] = cfg.de.stall_generations;
  j["seed"] = cfg.de.seed;
  j["polish_full"] = cfg.polish_full;
  j["polish_starts"] = cfg.polish_starts;
  j["bfgs"] = {{"max_iterations", cfg.bfgs.max_iterations}, {"gradient_tolerance", cfg.bfgs.gradient_tolerance}};
  return j;
}

inline json fit_result_to_json(const FitResult& r, const std::string& mode, std::int64_t s0) {
  json j;
  j["mode"] = mode;
  j["estimate"] = theta_to_json(r.theta_hat);
  j["s0"] = s0;
  j["loglik"] = r.loglik;
  j["converged"] = r.converged;
  j["generations_used"] = r.generations_used;
  j["de_loglik"] = r.de_loglik;
  j["bfgs_iterations"] = r.bfgs_iterations;
  j["bfgs_line_search_failed"] = r.bfgs_line_search_failed;
  j["gradient_norm_at_opt"] = std::isfinite(r.gradient_norm_at_opt) ? json(r.gradient_norm_at_opt) : json(nullptr);
  json bounds = json::object();
  json pins = json::object();
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const std::string key(kParamNames[i]);
    if (r.pins[i]) {
      pins[key] = *r.pins[i];
    } else {
      bounds[key] = {r.bounds.lower[i], r.bounds.upper[i]};
    }
  }
  j["bounds"] = bounds;
  j["pins"] = pins;
  j["trace_length"] = r.trace.size();
  return j;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace cellbp::io
