// cellbp: batch front end for simulation, moments, fitting, stopping-time
// analysis and goodness-of-fit ratios.
//
// Exit codes: 0 ok, 1 replay mismatch, 2 input error, 3 I/O error,
// 4 estimation failure, 5 statistical precondition failure.

#include <glob.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cellbp/error.hpp"
#include "cellbp/estimate.hpp"
#include "cellbp/io.hpp"
#include "cellbp/model.hpp"
#include "cellbp/parallel.hpp"
#include "cellbp/sim.hpp"
#include "cellbp/stats.hpp"

namespace fs = std::filesystem;
using namespace cellbp;
using io::fmt;
using io::json;

namespace {

constexpr const char* kVersion = "0.1.0";

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Io: return 3;
    case ErrorKind::NoEvents:
    case ErrorKind::NonFiniteLikelihood: return 4;
    case ErrorKind::DegenerateSample: return 5;
    default: return 2;
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Collects output files so the manifest can record their hashes.
class OutputDir {
 public:
  explicit OutputDir(const fs::path& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw Error(ErrorKind::Io, "cannot create output directory " + dir_.string());
  }

  void write(const std::string& name, const std::string& content) {
    io::write_text_atomic(dir_ / name, content);
    files_[name] = content;
  }

  const fs::path& path() const { return dir_; }

  json outputs() const {
    json arr = json::array();
    for (const auto& [name, content] : files_) {
      arr.push_back({{"file", name}, {"bytes", content.size()}, {"fnv1a", hex(fnv1a(content))}});
    }
    return arr;
  }

 private:
  fs::path dir_;
  std::map<std::string, std::string> files_;
};

std::vector<fs::path> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<fs::path> files;
  for (const auto& pat : patterns) {
    glob_t g{};
    const int rc = ::glob(pat.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) {
        if (fs::is_regular_file(g.gl_pathv[i])) files.emplace_back(g.gl_pathv[i]);
      }
    }
    globfree(&g);
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  if (files.empty()) throw Error(ErrorKind::InvalidArgument, "no input files");
  return files;
}

// Initial count for a data file: --s0 wins, otherwise the params.json written
// by `simulate` beside the data.
std::int64_t initial_count_for(const fs::path& file, std::optional<std::int64_t> s0) {
  if (s0) return *s0;
  const fs::path side = file.parent_path() / "params.json";
  if (!fs::exists(side)) {
    throw Error(ErrorKind::InvalidArgument,
                file.string() + ": initial count unknown; pass --s0 or place params.json beside the data");
  }
  return io::load_params(side).s0;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(io::detail::to_double(item, "list"));
  }
  return out;
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

struct Common {
  unsigned threads = 0;
  std::string out;
};

struct SimulateArgs {
  std::string params;
  std::size_t reps = 1;
  std::uint64_t seed = 1;
  bool partial = false;
  std::optional<double> t_max;
};

struct FitArgs {
  std::string mode = "full";
  std::vector<std::string> data;
  std::string config;
  std::vector<std::string> pins;
  std::optional<std::int64_t> s0;
  std::optional<std::uint64_t> seed;
  std::optional<double> censor;
  bool separate = false;
  bool trace = false;
};

struct MomentsArgs {
  std::string params;
  double t_max = 30.0;
  std::size_t grid = 61;
  std::vector<std::string> data;
  std::string corr_times;
};

struct StoppingArgs {
  std::string params;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  std::string shift = "exact";
};

struct GofArgs {
  std::string params;
  std::vector<std::string> data;
  std::string times;
  double t_max = 30.0;
  std::size_t grid = 31;
};

// --------------------------------------------------------------------------

json cmd_simulate(const SimulateArgs& a, const Common& c, OutputDir& out) {
  const ModelParams p = io::load_params(a.params);
  if (a.reps == 0) throw Error(ErrorKind::InvalidArgument, "--reps must be >= 1");
  SimulateOptions opts;
  if (a.t_max) opts.t_max = *a.t_max;
  std::vector<std::string> csv(a.reps);
  parallel_for(
      a.reps,
      [&](std::size_t i) {
        const Trajectory t = simulate(p, derived_seed(a.seed, i), opts);
        csv[i] = a.partial ? io::partial_csv(project_partial(t)) : io::trajectory_csv(t);
      },
      c.threads);
  const int width = static_cast<int>(std::to_string(a.reps - 1).size());
  for (std::size_t i = 0; i < a.reps; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "rep_%0*zu.csv", width, i);
    out.write(name, csv[i]);
  }
  out.write("params.json", io::dump(io::params_to_json(p)));
  return {{"reps", a.reps}, {"partial", a.partial}};
}

Pins parse_pins(const std::vector<std::string>& items) {
  Pins pins{};
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--pin expects name=value, got '" + item + "'");
    const auto name = item.substr(0, eq);
    const auto p = param_from_name(name);
    if (!p) throw Error(ErrorKind::InvalidArgument, "--pin: unknown parameter '" + name + "'");
    pins[*p] = io::detail::to_double(item.substr(eq + 1), "--pin " + name);
  }
  return pins;
}

json cmd_fit(const FitArgs& a, const Common& c, OutputDir& out) {
  if (a.mode != "full" && a.mode != "forward") throw Error(ErrorKind::InvalidArgument, "--mode must be full or forward");
  FitConfig cfg = a.config.empty() ? FitConfig{} : io::fit_config_from_json(io::parse_json(io::read_text(a.config), a.config));
  const Pins extra = parse_pins(a.pins);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (extra[i]) cfg.pins[i] = extra[i];
  }
  if (a.seed) cfg.de.seed = *a.seed;
  cfg.de.threads = c.threads;
  cfg.validate();

  const auto files = expand_globs(a.data);
  const bool full = a.mode == "full";
  std::vector<Trajectory> trajs;
  std::vector<PartialTrajectory> parts;
  std::int64_t s0 = 0;
  for (const auto& f : files) {
    const auto schema = io::detect_schema(f);
    const std::int64_t n0 = initial_count_for(f, a.s0);
    s0 = n0;
    if (full) {
      if (schema != io::CsvSchema::Full) {
        throw Error(ErrorKind::InvalidArgument, f.string() + ": full mode needs t,dx,dy,dz data");
      }
      trajs.push_back(io::read_trajectory_csv(f, n0));
    } else if (schema == io::CsvSchema::Full) {
      // Full data can always be projected to what partial observation sees.
      parts.push_back(project_partial(io::read_trajectory_csv(f, n0)));
    } else {
      parts.push_back(io::read_partial_csv(f, n0));
    }
  }

  LikelihoodOptions lopts;
  ForwardOptions fopts;
  lopts.censor_time = a.censor;
  fopts.censor_time = a.censor;
  auto run = [&](std::size_t first, std::size_t count) {
    if (full) return fit_full(std::span<const Trajectory>(trajs.data() + first, count), cfg, lopts);
    return fit_forward(std::span<const PartialTrajectory>(parts.data() + first, count), cfg, fopts);
  };

  json summary;
  if (!a.separate) {
    const FitResult fr = run(0, files.size());
    json j = io::fit_result_to_json(fr, a.mode, s0);
    j["files"] = files.size();
    out.write("fit.json", io::dump(j));
    if (a.trace) {
      std::string csv = "generation,best_loglik\n";
      for (std::size_t g = 0; g < fr.trace.size(); ++g) csv += std::to_string(g) + "," + fmt(fr.trace[g]) + "\n";
      out.write("trace.csv", csv);
    }
    summary = {{"loglik", fr.loglik}};
  } else {
    std::string csv = "file";
    for (auto name : kParamNames) csv += "," + std::string(name);
    csv += ",loglik,converged\n";
    std::array<std::vector<double>, kNumParams> est;
    for (std::size_t i = 0; i < files.size(); ++i) {
      const FitResult fr = run(i, 1);
      csv += files[i].filename().string();
      for (std::size_t j = 0; j < kNumParams; ++j) {
        csv += "," + fmt(fr.theta_hat[j]);
        est[j].push_back(fr.theta_hat[j]);
      }
      csv += "," + fmt(fr.loglik) + "," + (fr.converged ? "1" : "0") + "\n";
    }
    out.write("fits.csv", csv);
    std::string sum = "param,mean,median,p5,p95\n";
    for (std::size_t j = 0; j < kNumParams; ++j) {
      double mean = 0.0;
      for (double v : est[j]) mean += v;
      mean /= static_cast<double>(est[j].size());
      sum += std::string(kParamNames[j]) + "," + fmt(mean) + "," + fmt(median(est[j])) + "," +
             fmt(percentile(est[j], 0.05)) + "," + fmt(percentile(est[j], 0.95)) + "\n";
    }
    out.write("fit_summary.csv", sum);
    summary = {{"fits", files.size()}};
  }
  return summary;
}

json cmd_moments(const MomentsArgs& a, const Common&, OutputDir& out) {
  const ModelParams p = io::load_params(a.params);
  if (a.grid < 2) throw Error(ErrorKind::InvalidArgument, "--grid must be >= 2");
  if (!(a.t_max > 0.0)) throw Error(ErrorKind::InvalidArgument, "--tmax must be > 0");
  const auto times = uniform_grid(a.t_max, a.grid);
  const auto curve = moment_curve(p, times);

  std::vector<Trajectory> ens;
  if (!a.data.empty()) {
    for (const auto& f : expand_globs(a.data)) ens.push_back(io::read_trajectory_csv(f, p.s0));
  }
  if (ens.empty()) {
    out.write("moments.csv", io::moment_curve_csv(curve));
  } else {
    const auto emp = empirical_moments(ens, times);
    std::string csv = "t,emp_mean,emp_var,theo_mean,theo_var\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
      csv += fmt(times[i]) + "," + fmt(emp.mean[i]) + "," + fmt(emp.variance[i]) + "," + fmt(curve.mean[i]) + "," +
             fmt(curve.variance[i]) + "\n";
    }
    out.write("moments.csv", csv);
  }

  if (!a.corr_times.empty()) {
    const auto ct = parse_list(a.corr_times);
    std::optional<EmpiricalMoments> emp;
    if (!ens.empty()) emp = empirical_moments(ens, ct);
    std::string csv = "t,u,theo_corr,emp_corr\n";
    for (std::size_t i = 0; i < ct.size(); ++i) {
      for (std::size_t j = 0; j < ct.size(); ++j) {
        std::string e = "NA";
        if (emp && emp->correlation[i][j]) e = fmt(*emp->correlation[i][j]);
        csv += fmt(ct[i]) + "," + fmt(ct[j]) + "," + fmt(autocorrelation(p, ct[i], ct[j])) + "," + e + "\n";
      }
    }
    out.write("correlation.csv", csv);
  }
  return {{"grid", a.grid}, {"trajectories", ens.size()}};
}

json cmd_stopping(const StoppingArgs& a, const Common& c, OutputDir& out) {
  const ModelParams p = io::load_params(a.params);
  if (a.reps < 5) throw Error(ErrorKind::InvalidArgument, "--reps must be >= 5 for the distribution tests");
  const auto bound = min_expected_stopping_time(p);
  double shift = 0.0;
  if (a.shift == "exact") {
    shift = bound.exact;
  } else if (a.shift == "printed") {
    shift = bound.approx_as_printed;
  } else if (a.shift == "harmonic") {
    shift = bound.approx_harmonic;
  } else if (a.shift == "log") {
    shift = bound.log_only;
  } else if (a.shift == "none") {
    shift = 0.0;
  } else {
    shift = io::detail::to_double(a.shift, "--shift (exact, printed, harmonic, log, none or a number)");
  }

  std::vector<double> raw(a.reps);
  parallel_for(
      a.reps, [&](std::size_t i) { raw[i] = *simulate(p, derived_seed(a.seed, i)).extinction_time(); }, c.threads);
  std::string csv = "replicate,stopping_time,shifted\n";
  for (std::size_t i = 0; i < a.reps; ++i) csv += std::to_string(i) + "," + fmt(raw[i]) + "," + fmt(raw[i] - shift) + "\n";
  out.write("stopping_times.csv", csv);
  out.write("tau.json", io::dump({{"exact", bound.exact},
                                  {"approx_as_printed", bound.approx_as_printed},
                                  {"approx_harmonic", bound.approx_harmonic},
                                  {"log_only", bound.log_only},
                                  {"shift", a.shift},
                                  {"shift_value", shift}}));

  const auto sample = make_stopping_sample(raw, shift);
  const auto ig = ig_mle(sample);
  out.write("ig_fit.json", io::dump({{"mu", ig.mu}, {"lambda", ig.lambda}, {"n", ig.n},
                                     {"loglik", ig_loglik(ig, sample.shifted)}}));
  const auto ks = ks_test(sample.shifted, ig);
  const auto ad = ad_test(sample.shifted, ig);
  out.write("gof_tests.json", io::dump({{"alpha", 0.05},
                                        {"ks", {{"statistic", ks.statistic}, {"p_value", ks.p_value}}},
                                        {"ad", {{"statistic", ad.statistic}, {"p_value", ad.p_value}}},
                                        {"ks_reject", ks.p_value < 0.05},
                                        {"ad_reject", ad.p_value < 0.05}}));
  return {{"reps", a.reps}, {"tau_exact", bound.exact}};
}

json cmd_gof(const GofArgs& a, const Common&, OutputDir& out) {
  const ModelParams p = io::load_params(a.params);
  const ThetaVector theta = ThetaVector::from_params(p);
  std::vector<double> times = a.times.empty() ? uniform_grid(a.t_max, a.grid) : parse_list(a.times);
  const auto expected = predict_counts(theta, p.s0, times);

  std::vector<Trajectory> full;
  std::vector<PartialTrajectory> parts;
  for (const auto& f : expand_globs(a.data)) {
    if (io::detect_schema(f) == io::CsvSchema::Full) {
      full.push_back(io::read_trajectory_csv(f, p.s0));
    } else {
      parts.push_back(io::read_partial_csv(f, p.s0));
    }
  }
  if (!full.empty() && !parts.empty()) {
    throw Error(ErrorKind::InvalidArgument, "data mixes full and partial schemas");
  }
  const auto pts = full.empty() ? gof_ratios(parts, expected) : gof_ratios(full, expected);

  std::string csv = "replicate,t,series,ratio\n";
  std::map<std::pair<double, char>, std::vector<double>> groups;
  for (const auto& pt : pts) {
    const char s = static_cast<char>(pt.series);
    csv += std::to_string(pt.replicate) + "," + fmt(pt.t) + "," + s + "," + (pt.ratio ? fmt(*pt.ratio) : "NA") + "\n";
    if (pt.ratio) groups[{pt.t, s}].push_back(*pt.ratio);
  }
  out.write("ratios.csv", csv);
  std::string sum = "t,series,n,median,p5,p95\n";
  for (const auto& [key, v] : groups) {
    sum += fmt(key.first) + "," + key.second + "," + std::to_string(v.size()) + "," + fmt(median(v)) + "," +
           fmt(percentile(v, 0.05)) + "," + fmt(percentile(v, 0.95)) + "\n";
  }
  out.write("ratio_summary.csv", sum);

  std::string pred = "t,x,z,m,y\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    pred += fmt(times[i]) + "," + fmt(expected.x[i]) + "," + fmt(expected.z[i]) + "," + fmt(expected.m[i]) + "," +
            fmt(expected.y[i]) + "\n";
  }
  out.write("expected_counts.csv", pred);
  return {{"replicates", full.empty() ? parts.size() : full.size()}};
}

// --------------------------------------------------------------------------

int run(std::vector<std::string> args);

int cmd_replay(const std::string& manifest_path, const std::string& out_override) {
  const json m = io::parse_json(io::read_text(manifest_path), manifest_path);
  if (!m.contains("argv") || !m["argv"].is_array()) {
    throw Error(ErrorKind::InvalidArgument, manifest_path + ": manifest has no argv");
  }
  std::vector<std::string> argv = m["argv"].get<std::vector<std::string>>();
  std::string out_dir = m.value("out", std::string{});
  if (!out_override.empty()) {
    out_dir = absolute(out_override);
    for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
      if (argv[i] == "--out") argv[i + 1] = out_dir;
    }
  }
  const int rc = run(argv);
  if (rc != 0) return rc;

  int mismatches = 0;
  for (const auto& o : m["outputs"]) {
    const std::string name = o["file"];
    const std::string content = io::read_text(fs::path(out_dir) / name);
    if (hex(fnv1a(content)) != o["fnv1a"].get<std::string>() || content.size() != o["bytes"].get<std::size_t>()) {
      std::cerr << "replay: " << name << " differs from the recorded output\n";
      ++mismatches;
    }
  }
  std::cout << "replay: " << m["outputs"].size() - mismatches << " of " << m["outputs"].size()
            << " outputs identical\n";
  return mismatches == 0 ? 0 : 1;
}

// Rewrites path-valued options to absolute form so the manifest can be
// replayed from any working directory.
std::vector<std::string> normalized_argv(const std::vector<std::string>& args) {
  static const std::vector<std::string> path_opts{"--params", "--data", "--config", "--out", "--manifest"};
  std::vector<std::string> out = args;
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    if (std::find(path_opts.begin(), path_opts.end(), out[i]) != path_opts.end()) out[i + 1] = absolute(out[i + 1]);
  }
  return out;
}

int run(std::vector<std::string> args) {
  CLI::App app{"Stem-cell branching process toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads (default: CELLBP_THREADS or all cores)");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Simulate replicate trajectories");
  sim->add_option("--params", sa.params, "Parameter JSON")->required();
  sim->add_option("--reps", sa.reps, "Number of replicates");
  sim->add_option("--seed", sa.seed, "Master seed");
  sim->add_flag("--partial", sa.partial, "Write the partially observed (t,m,y) view");
  sim->add_option("--tmax", sa.t_max, "Stop each replicate at this time");
  sim->add_option("--out", common.out, "Output directory")->required();

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Maximum-likelihood fit of trajectory data");
  fit->add_option("--mode", fa.mode, "full or forward")->check(CLI::IsMember({"full", "forward"}));
  fit->add_option("--data", fa.data, "Data file glob (repeatable)")->required();
  fit->add_option("--config", fa.config, "Fit configuration JSON");
  fit->add_option("--pin", fa.pins, "Fix a parameter, e.g. p4=0 (repeatable)");
  fit->add_option("--s0", fa.s0, "Initial stem-cell count of every data file");
  fit->add_option("--seed", fa.seed, "Optimizer seed (overrides the config)");
  fit->add_option("--censor", fa.censor, "Observation window end for right-censored data");
  fit->add_flag("--separate", fa.separate, "Fit each file on its own and summarize");
  fit->add_flag("--trace", fa.trace, "Write the DE trace");
  fit->add_option("--out", common.out, "Output directory")->required();

  MomentsArgs ma;
  auto* mom = app.add_subcommand("moments", "Theoretical (and empirical) moment curves");
  mom->add_option("--params", ma.params, "Parameter JSON")->required();
  mom->add_option("--tmax", ma.t_max, "Curve end time");
  mom->add_option("--grid", ma.grid, "Number of grid points");
  mom->add_option("--data", ma.data, "Full trajectory CSV glob for empirical columns");
  mom->add_option("--corr-times", ma.corr_times, "Comma-separated times for the correlation matrix");
  mom->add_option("--out", common.out, "Output directory")->required();

  StoppingArgs sta;
  auto* stop = app.add_subcommand("stopping", "Extinction times, lower bound and inverse Gaussian fit");
  stop->add_option("--params", sta.params, "Parameter JSON")->required();
  stop->add_option("--reps", sta.reps, "Number of replicates");
  stop->add_option("--seed", sta.seed, "Master seed");
  stop->add_option("--shift", sta.shift, "exact, printed, harmonic, log, none or a number");
  stop->add_option("--out", common.out, "Output directory")->required();

  GofArgs ga;
  auto* gof = app.add_subcommand("gof", "Observed-to-expected count ratios");
  gof->add_option("--params", ga.params, "Parameter or fit JSON")->required();
  gof->add_option("--data", ga.data, "Data file glob (repeatable)")->required();
  gof->add_option("--times", ga.times, "Comma-separated evaluation times");
  gof->add_option("--tmax", ga.t_max, "Grid end time when --times is absent");
  gof->add_option("--grid", ga.grid, "Grid points when --times is absent");
  gof->add_option("--out", common.out, "Output directory")->required();

  std::string manifest;
  auto* rep = app.add_subcommand("replay", "Re-run a recorded command and compare its outputs");
  rep->add_option("--manifest", manifest, "manifest.json of an earlier run")->required();
  rep->add_option("--out", common.out, "Write to this directory instead of the recorded one");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (rep->parsed()) return cmd_replay(manifest, common.out);

    const auto start = std::chrono::steady_clock::now();
    OutputDir out(common.out);
    std::string name;
    json details;
    std::string params_path;
    std::optional<std::uint64_t> seed;
    if (sim->parsed()) {
      name = "simulate";
      params_path = sa.params;
      seed = sa.seed;
      details = cmd_simulate(sa, common, out);
    } else if (fit->parsed()) {
      name = "fit";
      details = cmd_fit(fa, common, out);
    } else if (mom->parsed()) {
      name = "moments";
      params_path = ma.params;
      details = cmd_moments(ma, common, out);
    } else if (stop->parsed()) {
      name = "stopping";
      params_path = sta.params;
      seed = sta.seed;
      details = cmd_stopping(sta, common, out);
    } else {
      name = "gof";
      params_path = ga.params;
      details = cmd_gof(ga, common, out);
    }
    if (name == "fit") {
      FitConfig cfg;
      if (!fa.config.empty()) cfg = io::fit_config_from_json(io::parse_json(io::read_text(fa.config), fa.config));
      seed = fa.seed ? *fa.seed : cfg.de.seed;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json m;
    m["command"] = name;
    m["params"] = params_path.empty() ? json(nullptr) : json(absolute(params_path));
    m["seed"] = seed ? json(*seed) : json(nullptr);
    m["out"] = absolute(common.out);
    m["version"] = kVersion;
    m["duration_seconds"] = secs;
    m["argv"] = normalized_argv(args);
    m["details"] = details;
    m["outputs"] = out.outputs();
    io::write_text_atomic(out.path() / "manifest.json", io::dump(m));
    return 0;
  } catch (const Error& e) {
    std::cerr << "cellbp: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "cellbp: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}
