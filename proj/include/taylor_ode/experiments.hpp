/**
 * @file experiments.hpp
 * @brief Experiment runners behind the command-line tool: adaptive Van der Pol
 *        runs, convergence tables, S1 region grids and the self-hosted reference.
 *
 * Output formats (all numbers with 17 significant digits, '.' decimal point,
 * '\n' line endings, header first):
 *   trajectory: t,y,z,dt,accepted,delta_norm,newton_iters
 *   region:     re_z,im_z,inside
 *   reference:  t,y,z
 */
#pragma once

#include "taylor_ode/driver.hpp"
#include "taylor_ode/problems.hpp"
#include "taylor_ode/scheme.hpp"
#include "taylor_ode/stability.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace taylor_ode::experiments {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Experiment { VdpAdaptive, Convergence, StabilityRegion, Reference };
enum class IcChoice { WellPrepared, Unprepared, Both };
enum class OutputFormat { Csv, Json };

struct ExperimentConfig {
  Experiment experiment = Experiment::VdpAdaptive;
  std::vector<std::string> schemes;  ///< empty: the experiment's default list
  IcChoice ic = IcChoice::Both;
  double mu = 1e3;
  double tol = 1e-5;
  double kappa = 0.9;
  int q = 2;
  double dt0 = 1e-2;
  double t_end_mult = 3.0;
  fs::path output_dir = "out";
  OutputFormat format = OutputFormat::Csv;
  RegionGridSpec grid;
  int w_samples = 2001;
  double w_radius = 1e6;
};

// ---------------------------------------------------------------------------
// names

[[nodiscard]] inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::VdpAdaptive: return "vdp-adaptive";
    case Experiment::Convergence: return "convergence";
    case Experiment::StabilityRegion: return "stability-region";
    case Experiment::Reference: return "reference";
  }
  return "?";
}

[[nodiscard]] inline std::optional<Experiment> parse_experiment(const std::string& s) {
  for (Experiment e : {Experiment::VdpAdaptive, Experiment::Convergence,
                       Experiment::StabilityRegion, Experiment::Reference}) {
    if (s == to_string(e)) return e;
  }
  return std::nullopt;
}

[[nodiscard]] inline std::string to_string(IcChoice ic) {
  switch (ic) {
    case IcChoice::WellPrepared: return "well-prepared";
    case IcChoice::Unprepared: return "unprepared";
    case IcChoice::Both: return "both";
  }
  return "?";
}

[[nodiscard]] inline std::optional<IcChoice> parse_ic(const std::string& s) {
  if (s == "well-prepared" || s == "wp" || s == "ic1") return IcChoice::WellPrepared;
  if (s == "unprepared" || s == "nowp" || s == "ic2") return IcChoice::Unprepared;
  if (s == "both") return IcChoice::Both;
  return std::nullopt;
}

[[nodiscard]] inline std::vector<VdpInitialCondition> expand(IcChoice ic) {
  switch (ic) {
    case IcChoice::WellPrepared: return {VdpInitialCondition::WellPrepared};
    case IcChoice::Unprepared: return {VdpInitialCondition::Unprepared};
    case IcChoice::Both: break;
  }
  return {VdpInitialCondition::WellPrepared, VdpInitialCondition::Unprepared};
}

[[nodiscard]] inline std::string file_tag(VdpInitialCondition ic) {
  return ic == VdpInitialCondition::WellPrepared ? "wp" : "nowp";
}

// ---------------------------------------------------------------------------
// config <-> json

[[nodiscard]] inline json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  j["schemes"] = c.schemes;
  j["ic"] = to_string(c.ic);
  j["mu"] = c.mu;
  j["tol"] = c.tol;
  j["kappa"] = c.kappa;
  j["q"] = c.q;
  j["dt0"] = c.dt0;
  j["t_end_mult"] = c.t_end_mult;
  j["out"] = c.output_dir.string();
  j["format"] = c.format == OutputFormat::Csv ? "csv" : "json";
  j["grid"] = {{"re_min", c.grid.re_min}, {"re_max", c.grid.re_max}, {"im_min", c.grid.im_min},
               {"im_max", c.grid.im_max}, {"nx", c.grid.nx},         {"ny", c.grid.ny}};
  j["w_samples"] = c.w_samples;
  j["w_radius"] = c.w_radius;
  return j;
}

/// Overlays keys present in `j` onto `c`. Unknown keys are a config error.
inline void apply_json(ExperimentConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "experiment") {
        auto e = parse_experiment(value.get<std::string>());
        if (!e) throw ConfigError("unknown experiment '" + value.get<std::string>() + "'");
        c.experiment = *e;
      } else if (key == "schemes" || key == "scheme") {
        c.schemes = value.is_array() ? value.get<std::vector<std::string>>()
                                     : std::vector<std::string>{value.get<std::string>()};
      } else if (key == "ic") {
        auto ic = parse_ic(value.get<std::string>());
        if (!ic) throw ConfigError("unknown ic '" + value.get<std::string>() + "'");
        c.ic = *ic;
      } else if (key == "mu") {
        c.mu = value.get<double>();
      } else if (key == "tol") {
        c.tol = value.get<double>();
      } else if (key == "kappa") {
        c.kappa = value.get<double>();
      } else if (key == "q") {
        c.q = value.get<int>();
      } else if (key == "dt0") {
        c.dt0 = value.get<double>();
      } else if (key == "t_end_mult" || key == "t-end-mult") {
        c.t_end_mult = value.get<double>();
      } else if (key == "out") {
        c.output_dir = value.get<std::string>();
      } else if (key == "format") {
        const auto f = value.get<std::string>();
        if (f != "csv" && f != "json") throw ConfigError("format must be csv or json");
        c.format = f == "csv" ? OutputFormat::Csv : OutputFormat::Json;
      } else if (key == "grid") {
        c.grid.re_min = value.value("re_min", c.grid.re_min);
        c.grid.re_max = value.value("re_max", c.grid.re_max);
        c.grid.im_min = value.value("im_min", c.grid.im_min);
        c.grid.im_max = value.value("im_max", c.grid.im_max);
        c.grid.nx = value.value("nx", c.grid.nx);
        c.grid.ny = value.value("ny", c.grid.ny);
      } else if (key == "w_samples") {
        c.w_samples = value.get<int>();
      } else if (key == "w_radius") {
        c.w_radius = value.get<double>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

inline void validate(const ExperimentConfig& c) {
  for (const auto& s : c.schemes) {
    if (c.experiment == Experiment::StabilityRegion) {
      if (!stability_model(s)) throw ConfigError("unknown scheme '" + s + "'");
    } else if (c.experiment == Experiment::Convergence && s == "IMEX_RK21_EMBEDDED") {
      continue;
    } else if (const auto id = parse_scheme(s); !id) {
      throw ConfigError("unknown scheme '" + s + "'");
    } else if (c.experiment == Experiment::VdpAdaptive &&
               (*id == SchemeId::ExplT1 || *id == SchemeId::ExplT2)) {
      throw ConfigError("scheme '" + s + "' has no embedded companion for adaptive runs");
    }
  }
  if (!(c.mu > 0.0)) throw ConfigError("mu must be positive");
  if (!(c.tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(c.kappa > 0.0 && c.kappa < 1.0)) throw ConfigError("kappa must lie in (0, 1)");
  if (c.q < 1) throw ConfigError("q must be at least 1");
  if (!(c.dt0 > 0.0)) throw ConfigError("dt0 must be positive");
  if (!(c.t_end_mult >= 0.0)) throw ConfigError("t-end-mult must be non-negative");
  if (c.grid.nx < 1 || c.grid.ny < 1) throw ConfigError("grid must have at least one point");
  if (c.w_samples < 100) throw ConfigError("w_samples must be at least 100");
}

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
[[nodiscard]] inline std::string config_hash(const ExperimentConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// formatting

/// Shortest round-trip-safe text with 17 significant digits, locale independent.
[[nodiscard]] inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, end);
}

/// Writes rows as they arrive.
class TrajectoryWriter {
 public:
  TrajectoryWriter(const fs::path& path, OutputFormat format) : format_(format) {
    out_.open(path, std::ios::binary);
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    out_.rdbuf()->pubsetbuf(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    if (format_ == OutputFormat::Csv) {
      out_ << "t,y,z,dt,accepted,delta_norm,newton_iters\n";
    } else {
      out_ << "{\"columns\":[\"t\",\"y\",\"z\",\"dt\",\"accepted\",\"delta_norm\",\"newton_iters\"],"
              "\"rows\":[";
    }
  }

  void write(const TrajectoryRow<2>& r) {
    if (format_ == OutputFormat::Csv) {
      out_ << format_number(r.t) << ',' << format_number(r.u[0]) << ',' << format_number(r.u[1])
           << ',' << format_number(r.dt) << ',' << (r.accepted ? 1 : 0) << ','
           << format_number(r.delta_norm) << ',' << r.newton_iters << '\n';
    } else {
      auto num = [](double v) { return std::isnan(v) ? std::string("null") : format_number(v); };
      out_ << (first_ ? "" : ",") << '[' << num(r.t) << ',' << num(r.u[0]) << ',' << num(r.u[1])
           << ',' << num(r.dt) << ',' << (r.accepted ? 1 : 0) << ',' << num(r.delta_norm) << ','
           << r.newton_iters << ']';
      first_ = false;
    }
  }

  void close() {
    if (format_ == OutputFormat::Json) out_ << "]}\n";
    out_.close();
  }

 private:
  OutputFormat format_;
  std::ofstream out_;
  std::vector<char> buffer_ = std::vector<char>(1 << 20);
  bool first_ = true;
};

inline void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

inline void write_region(const fs::path& path, const RegionGrid& grid, OutputFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  if (format == OutputFormat::Csv) {
    out << "re_z,im_z,inside\n";
    for (int i = 0; i < grid.spec.nx; ++i) {
      for (int j = 0; j < grid.spec.ny; ++j) {
        out << format_number(grid.spec.re(i)) << ',' << format_number(grid.spec.im(j)) << ','
            << (grid.inside(i, j) ? 1 : 0) << '\n';
      }
    }
    return;
  }
  out << "{\"columns\":[\"re_z\",\"im_z\",\"inside\"],\"scheme\":\"" << grid.scheme
      << "\",\"rows\":[";
  bool first = true;
  for (int i = 0; i < grid.spec.nx; ++i) {
    for (int j = 0; j < grid.spec.ny; ++j) {
      out << (first ? "" : ",") << '[' << format_number(grid.spec.re(i)) << ','
          << format_number(grid.spec.im(j)) << ',' << (grid.inside(i, j) ? 1 : 0) << ']';
      first = false;
    }
  }
  out << "]}\n";
}

// ---------------------------------------------------------------------------
// checkpoints

/// Layer-free checkpoint test: |t - f mu| > margin for every layer fraction f.
[[nodiscard]] inline bool away_from_layers(double t, double mu, double margin = 1.0) {
  return std::all_of(kVdpLayerFractions.begin(), kVdpLayerFractions.end(),
                     [&](double frac) { return std::abs(t - frac * mu) > margin; });
}

[[nodiscard]] inline std::vector<double> uniform_times(double t0, double t1, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] =
        k + 1 == n ? t1 : t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  return out;
}

/**
 * Observer that linearly interpolates accepted states at fixed checkpoint
 * times. Accepted-step values are exact; between steps the value is the
 * chord, which is what a plot of the trajectory shows too.
 */
class CheckpointSampler {
 public:
  explicit CheckpointSampler(std::vector<double> times)
      : times_(std::move(times)), values_(times_.size(), Vector<2>::Constant(std::nan(""))) {}

  void operator()(const TrajectoryRow<2>& row) {
    if (!row.accepted) return;
    if (!have_prev_) {
      while (next_ < times_.size() && times_[next_] <= row.t) values_[next_++] = row.u;
    } else {
      while (next_ < times_.size() && times_[next_] <= row.t) {
        const double span = row.t - prev_t_;
        const double w = span > 0.0 ? (times_[next_] - prev_t_) / span : 1.0;
        values_[next_++] = (1.0 - w) * prev_u_ + w * row.u;
      }
    }
    prev_t_ = row.t;
    prev_u_ = row.u;
    have_prev_ = true;
  }

  [[nodiscard]] const std::vector<double>& times() const { return times_; }
  [[nodiscard]] const std::vector<Vector<2>>& values() const { return values_; }

 private:
  std::vector<double> times_;
  std::vector<Vector<2>> values_;
  std::size_t next_ = 0;
  bool have_prev_ = false;
  double prev_t_ = 0.0;
  Vector<2> prev_u_ = Vector<2>::Zero();
};

// ---------------------------------------------------------------------------
// reference solution

struct ReferenceSolution {
  std::vector<double> times;
  std::vector<Vector<2>> states;
  double dt = 0.0;             ///< step of the returned (finest) run
  int halvings = 0;            ///< refinements performed after the initial run
  double last_difference = 0;  ///< inf-norm gap between the two finest runs, off-layer
  bool converged = false;
};

/// I_T2 fixed-step states at each checkpoint, integrating checkpoint to checkpoint.
[[nodiscard]] inline std::vector<Vector<2>> fixed_step_checkpoints(const IvpSpec<2>& ivp,
                                                                  const std::vector<double>& times,
                                                                  SchemeId scheme, double dt) {
  std::vector<Vector<2>> out;
  out.reserve(times.size());
  Vector<2> u = ivp.u0;
  double t = ivp.t0;
  RecordOptions<2> quiet;
  quiet.store_rows = false;
  for (double target : times) {
    if (target > t) {
      IvpSpec<2> seg = ivp;
      seg.t0 = t;
      seg.t_end = target;
      seg.u0 = u;
      const auto rec = integrate_fixed(seg, scheme, dt, NewtonConfig{}, quiet);
      if (!rec.ok()) {
        throw std::runtime_error("reference run aborted: " + rec.summary.message);
      }
      u = rec.u_final;
      t = target;
    }
    out.push_back(u);
  }
  return out;
}

/// Midpoints of checkpoint intervals where y changes sign in either run.
[[nodiscard]] inline std::vector<double> detected_jumps(const std::vector<double>& times,
                                                       const std::vector<Vector<2>>& a,
                                                       const std::vector<Vector<2>>& b) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    if ((a[k][0] > 0) != (a[k + 1][0] > 0) || (b[k][0] > 0) != (b[k + 1][0] > 0)) {
      out.push_back(0.5 * (times[k] + times[k + 1]));
    }
  }
  return out;
}

[[nodiscard]] inline bool near_any(double t, const std::vector<double>& marks, double margin) {
  return std::any_of(marks.begin(), marks.end(), [&](double m) { return std::abs(t - m) <= margin; });
}

/**
 * Richardson-verified reference: I_T2 at dt = 1e-4 mu / 1000, halved until two
 * successive runs agree within `agreement` at every off-layer checkpoint.
 * Off-layer means outside the nominal windows and more than 0.01 mu from any
 * sign change of y seen in either run; the jump times drift with dt.
 */
[[nodiscard]] inline ReferenceSolution compute_reference(const VdpConfig& vdp, int n_checkpoints = 3001,
                                                         double agreement = 1e-6,
                                                         int max_halvings = 6,
                                                         std::optional<double> dt_start = {}) {
  const IvpSpec<2> ivp = make_vdp(vdp);
  ReferenceSolution ref;
  ref.times = ivp.t_end > ivp.t0 ? uniform_times(ivp.t0, ivp.t_end, n_checkpoints)
                                 : std::vector<double>{ivp.t0};
  double dt = dt_start.value_or(1e-4 * vdp.mu / 1000.0);
  std::vector<Vector<2>> coarse = fixed_step_checkpoints(ivp, ref.times, SchemeId::IT2, dt);
  if (ref.times.size() == 1) {
    ref.states = coarse;
    ref.dt = dt;
    ref.converged = true;
    return ref;
  }
  for (int h = 1; h <= max_halvings; ++h) {
    dt *= 0.5;
    std::vector<Vector<2>> fine = fixed_step_checkpoints(ivp, ref.times, SchemeId::IT2, dt);
    const std::vector<double> jumps = detected_jumps(ref.times, coarse, fine);
    double gap = 0.0;
    for (std::size_t k = 0; k < ref.times.size(); ++k) {
      if (!away_from_layers(ref.times[k], vdp.mu)) continue;
      if (near_any(ref.times[k], jumps, 0.01 * vdp.mu)) continue;
      gap = std::max(gap, (fine[k] - coarse[k]).cwiseAbs().maxCoeff());
    }
    ref.halvings = h;
    ref.last_difference = gap;
    ref.dt = dt;
    ref.states = std::move(fine);
    if (gap < agreement) {
      ref.converged = true;
      return ref;
    }
    coarse = ref.states;
  }
  return ref;
}

// ---------------------------------------------------------------------------
// convergence

struct ConvergenceRow {
  std::string scheme;
  double dt = 0.0;
  double error = 0.0;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  std::map<std::string, double> slopes;
};

/// Least-squares slope of log(error) against log(dt); NaN when any error is zero.
[[nodiscard]] inline double fitted_slope(const std::vector<double>& dts,
                                         const std::vector<double>& errors) {
  const std::size_t n = dts.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(errors[k] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double x = std::log(dts[k]);
    const double y = std::log(errors[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

/// Final-time state from a fixed-step run.
[[nodiscard]] inline Vector<2> fixed_final(const IvpSpec<2>& ivp, SchemeId scheme, double dt,
                                           FixedTrack track = FixedTrack::Main) {
  RecordOptions<2> quiet;
  quiet.store_rows = false;
  const auto rec = integrate_fixed(ivp, scheme, dt, NewtonConfig{}, quiet, track);
  if (!rec.ok()) throw std::runtime_error("fixed-step run aborted: " + rec.summary.message);
  return rec.u_final;
}

/// Richardson extrapolation of I_T2 at dt and dt/2: (4 u(dt/2) - u(dt)) / 3.
[[nodiscard]] inline Vector<2> richardson_reference(const IvpSpec<2>& ivp, double dt) {
  const Vector<2> coarse = fixed_final(ivp, SchemeId::IT2, dt);
  const Vector<2> fine = fixed_final(ivp, SchemeId::IT2, 0.5 * dt);
  return (4.0 * fine - coarse) / 3.0;
}

/**
 * Error at t_end against `reference` for each scheme and step size. The
 * label "IMEX_RK21_EMBEDDED" runs IMEX_RK21 advancing with its embedded solution.
 */
[[nodiscard]] inline ConvergenceResult convergence_study(const IvpSpec<2>& ivp,
                                                         const std::vector<std::string>& labels,
                                                         const std::vector<double>& dts,
                                                         const Vector<2>& reference) {
  ConvergenceResult res;
  for (const auto& label : labels) {
    const bool embedded = label == "IMEX_RK21_EMBEDDED";
    const auto id = embedded ? std::optional<SchemeId>(SchemeId::ImexRk21) : parse_scheme(label);
    if (!id) throw ConfigError("unknown scheme '" + label + "'");
    std::vector<double> errors;
    for (double dt : dts) {
      const Vector<2> u = fixed_final(ivp, *id, dt, embedded ? FixedTrack::Companion : FixedTrack::Main);
      const double err = (u - reference).cwiseAbs().maxCoeff();
      errors.push_back(err);
      res.rows.push_back({label, dt, err});
    }
    res.slopes[label] = fitted_slope(dts, errors);
  }
  return res;
}

// ---------------------------------------------------------------------------
// adaptive Van der Pol

struct AdaptiveCase {
  SchemeId scheme;
  VdpInitialCondition ic;
  RunSummary summary;
  double t_final = 0.0;
  Vector<2> u_final;
};

[[nodiscard]] inline ControllerConfig controller_from(const ExperimentConfig& c) {
  ControllerConfig cc;
  cc.tol = c.tol;
  cc.kappa = c.kappa;
  cc.q = c.q;
  cc.dt0 = c.dt0;
  return cc;
}

[[nodiscard]] inline json summary_json(const ExperimentConfig& c, const AdaptiveCase& run) {
  json j;
  j["scheme"] = std::string(taylor_ode::to_string(run.scheme));
  j["ic"] = taylor_ode::to_string(run.ic);
  j["mu"] = c.mu;
  j["tol"] = c.tol;
  j["kappa"] = c.kappa;
  j["q"] = c.q;
  j["dt0"] = c.dt0;
  j["accepted_steps"] = run.summary.accepted_steps;
  j["rejected_steps"] = run.summary.rejected_steps;
  j["rhs_evals"] = run.summary.rhs_evaluations;
  j["wall_time_s"] = run.summary.wall_time_s;
  j["status"] = taylor_ode::to_string(run.summary.status);
  return j;
}

// ---------------------------------------------------------------------------
// manifest-level runner

struct ProducedFile {
  std::string path;  ///< relative to output_dir
  std::string kind;
  json meta = json::object();
};

struct ExperimentOutcome {
  std::vector<ProducedFile> files;
  std::vector<std::string> failures;  ///< one line per failed run
  std::vector<AdaptiveCase> adaptive;
  std::optional<ConvergenceResult> convergence;
  std::optional<ReferenceSolution> reference;
  std::vector<RegionGrid> regions;

  [[nodiscard]] bool ok() const { return failures.empty(); }
};

[[nodiscard]] inline std::string ext(const ExperimentConfig& c) {
  return c.format == OutputFormat::Csv ? ".csv" : ".json";
}

inline void run_vdp_adaptive(const ExperimentConfig& c, ExperimentOutcome& outcome,
                             std::ostream& log) {
  std::vector<SchemeId> schemes;
  if (c.schemes.empty()) {
    schemes.assign(kAdaptiveSchemes.begin(), kAdaptiveSchemes.end());
  } else {
    for (const auto& s : c.schemes) schemes.push_back(*parse_scheme(s));
  }
  const ControllerConfig cc = controller_from(c);

  for (VdpInitialCondition ic : expand(c.ic)) {
    for (SchemeId scheme : schemes) {
      VdpConfig vdp;
      vdp.mu = c.mu;
      vdp.ic = ic;
      vdp.t_end_multiplier = c.t_end_mult;
      const IvpSpec<2> ivp = make_vdp(vdp);
      const std::string stem =
          std::string(taylor_ode::to_string(scheme)) + "_" + file_tag(ic);
      const std::string traj_name = "trajectory_" + stem + ext(c);

      TrajectoryWriter writer(c.output_dir / traj_name, c.format);
      RecordOptions<2> opts;
      opts.store_rows = false;
      opts.observer = [&writer](const TrajectoryRow<2>& r) { writer.write(r); };

      AdaptiveCase run{scheme, ic, {}, 0.0, ivp.u0};
      try {
        const auto rec = integrate_adaptive(ivp, scheme, cc, NewtonConfig{}, opts);
        run.summary = rec.summary;
        run.t_final = rec.t_final;
        run.u_final = rec.u_final;
      } catch (const std::exception& e) {
        run.summary.status = RunStatus::NonFinite;
        run.summary.message = e.what();
      }
      writer.close();

      json meta = {{"scheme", std::string(taylor_ode::to_string(scheme))},
                   {"ic", taylor_ode::to_string(ic)},
                   {"mu", c.mu}};
      outcome.files.push_back({traj_name, "trajectory", meta});
      const std::string summary_name = "summary_" + stem + ".json";
      write_json_file(c.output_dir / summary_name, summary_json(c, run));
      outcome.files.push_back({summary_name, "summary", meta});

      if (run.summary.status != RunStatus::Completed) {
        const std::string diag_name = "diagnostic_" + stem + ".json";
        json diag = summary_json(c, run);
        diag["message"] = run.summary.message;
        diag["t_reached"] = run.t_final;
        write_json_file(c.output_dir / diag_name, diag);
        outcome.files.push_back({diag_name, "diagnostic", meta});
        outcome.failures.push_back(stem + ": " + taylor_ode::to_string(run.summary.status) + " (" +
                                   run.summary.message + ")");
      }
      outcome.adaptive.push_back(run);
    }
  }

  char line[160];
  log << "Van der Pol, mu = " << c.mu << ", t_end = " << c.t_end_mult * c.mu
      << ", Tol = " << c.tol << ", kappa = " << c.kappa << ", q = " << c.q
      << ", dt0 = " << c.dt0 << '\n';
  std::snprintf(line, sizeof line, "%-14s %-10s %12s %10s %12s %10s\n", "ic", "scheme",
                "time-steps", "rejected", "rhs-evals", "CPU [s]");
  log << line;
  for (const auto& run : outcome.adaptive) {
    std::snprintf(line, sizeof line, "%-14s %-10s %12lld %10lld %12lld %10.2f\n",
                  taylor_ode::to_string(run.ic),
                  std::string(taylor_ode::to_string(run.scheme)).c_str(),
                  static_cast<long long>(run.summary.accepted_steps),
                  static_cast<long long>(run.summary.rejected_steps),
                  static_cast<long long>(run.summary.rhs_evaluations), run.summary.wall_time_s);
    log << line;
  }
}

inline void run_reference(const ExperimentConfig& c, ExperimentOutcome& outcome, std::ostream& log) {
  for (VdpInitialCondition ic : expand(c.ic)) {
    VdpConfig vdp;
    vdp.mu = c.mu;
    vdp.ic = ic;
    vdp.t_end_multiplier = c.t_end_mult;
    ReferenceSolution ref = compute_reference(vdp);
    const std::string name = "reference_" + file_tag(ic) + ext(c);
    {
      std::ofstream out(c.output_dir / name, std::ios::binary);
      if (c.format == OutputFormat::Csv) {
        out << "t,y,z\n";
        for (std::size_t k = 0; k < ref.times.size(); ++k) {
          out << format_number(ref.times[k]) << ',' << format_number(ref.states[k][0]) << ','
              << format_number(ref.states[k][1]) << '\n';
        }
      } else {
        json j;
        j["columns"] = {"t", "y", "z"};
        j["rows"] = json::array();
        for (std::size_t k = 0; k < ref.times.size(); ++k) {
          j["rows"].push_back({ref.times[k], ref.states[k][0], ref.states[k][1]});
        }
        out << j.dump() << '\n';
      }
    }
    json meta = {{"ic", taylor_ode::to_string(ic)},
                 {"mu", c.mu},
                 {"dt", ref.dt},
                 {"halvings", ref.halvings},
                 {"last_difference", ref.last_difference},
                 {"converged", ref.converged}};
    outcome.files.push_back({name, "reference", meta});
    log << "reference (" << taylor_ode::to_string(ic) << "): dt = " << ref.dt
        << ", halvings = " << ref.halvings << ", off-layer gap = " << ref.last_difference
        << (ref.converged ? "" : "  NOT CONVERGED") << '\n';
    if (!ref.converged) {
      outcome.failures.push_back("reference_" + file_tag(ic) +
                                 ": refinement did not converge after 6 halvings");
    }
    outcome.reference = std::move(ref);
  }
}

inline void run_convergence(const ExperimentConfig& c, ExperimentOutcome& outcome,
                            std::ostream& log) {
  std::vector<std::string> labels = c.schemes;
  if (labels.empty()) {
    for (SchemeId s : kAllSchemes) labels.emplace_back(taylor_ode::to_string(s));
    labels.emplace_back("IMEX_RK21_EMBEDDED");
  }
  VdpConfig vdp;
  vdp.mu = 1.0;
  vdp.t_end_multiplier = 1.0;
  const IvpSpec<2> ivp = make_vdp(vdp);
  std::vector<double> dts;
  for (int k = 6; k <= 12; ++k) dts.push_back(std::ldexp(1.0, -k));
  const Vector<2> reference = richardson_reference(ivp, std::ldexp(1.0, -16));
  ConvergenceResult res = convergence_study(ivp, labels, dts, reference);

  const std::string table = std::string("convergence") + ext(c);
  {
    std::ofstream out(c.output_dir / table, std::ios::binary);
    if (c.format == OutputFormat::Csv) {
      out << "scheme,dt,error\n";
      for (const auto& r : res.rows) {
        out << r.scheme << ',' << format_number(r.dt) << ',' << format_number(r.error) << '\n';
      }
    } else {
      json j = json::array();
      for (const auto& r : res.rows) j.push_back({{"scheme", r.scheme}, {"dt", r.dt}, {"error", r.error}});
      out << j.dump() << '\n';
    }
  }
  json slopes = json::object();
  for (const auto& [k, v] : res.slopes) slopes[k] = v;
  write_json_file(c.output_dir / "convergence_slopes.json", slopes);
  outcome.files.push_back({table, "convergence", json::object()});
  outcome.files.push_back({"convergence_slopes.json", "convergence-slopes", json::object()});
  for (const auto& [k, v] : res.slopes) log << k << ": slope " << v << '\n';
  outcome.convergence = std::move(res);
}

inline void run_stability_region(const ExperimentConfig& c, ExperimentOutcome& outcome,
                                 std::ostream& log) {
  std::vector<std::string> names = c.schemes;
  if (names.empty()) names = {"IMEX_RK21", "I_T2", "SI_T2", "HEUN"};
  for (const auto& n : names) {
    const StabilityModel model = *stability_model(n);
    RegionGrid grid = compute_s1_region(model, c.grid, c.w_samples, c.w_radius);
    const std::string file = "region_" + model.name + ext(c);
    write_region(c.output_dir / file, grid, c.format);
    std::size_t inside = std::count(grid.mask.begin(), grid.mask.end(), std::uint8_t{1});
    outcome.files.push_back({file, "region", {{"scheme", model.name}, {"w_scan", grid.w_scan}}});
    log << "region " << model.name << ": " << inside << " of " << grid.mask.size()
        << " grid points inside S1\n";
    outcome.regions.push_back(std::move(grid));
  }
}

/**
 * Runs the configured experiment, writing outputs and manifest.json under
 * output_dir. Throws ConfigError for invalid configurations.
 */
[[nodiscard]] inline ExperimentOutcome run_experiment(const ExperimentConfig& c,
                                                      std::ostream& log = std::cout) {
  validate(c);
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + c.output_dir.string());

  ExperimentOutcome outcome;
  switch (c.experiment) {
    case Experiment::VdpAdaptive: run_vdp_adaptive(c, outcome, log); break;
    case Experiment::Reference: run_reference(c, outcome, log); break;
    case Experiment::Convergence: run_convergence(c, outcome, log); break;
    case Experiment::StabilityRegion: run_stability_region(c, outcome, log); break;
  }

  json manifest;
  manifest["experiment"] = to_string(c.experiment);
  manifest["config"] = to_json(c);
  manifest["config_hash"] = config_hash(c);
  manifest["files"] = json::array();
  for (const auto& f : outcome.files) {
    json entry = {{"path", f.path}, {"kind", f.kind}};
    for (const auto& [k, v] : f.meta.items()) entry[k] = v;
    manifest["files"].push_back(entry);
  }
  manifest["failures"] = outcome.failures;
  write_json_file(c.output_dir / "manifest.json", manifest);
  return outcome;
}

}  // namespace taylor_ode::experiments
