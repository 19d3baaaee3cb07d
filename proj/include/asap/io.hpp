// Serialization and configuration: trajectory CSV (versioned header,
// shortest round-trip decimals, lossless re-parse), run summaries and
// post-hoc analyze reports as JSON, and the versioned JSON run configuration
// with field-by-field error reporting.
#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "asap/analysis.hpp"
#include "asap/equilibrium.hpp"
#include "asap/experiments.hpp"
#include "asap/graph.hpp"
#include "asap/integrator.hpp"
#include "asap/types.hpp"

namespace asap {

inline constexpr int kTrajectoryFormatVersion = 1;
inline constexpr int kConfigVersion = 1;

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double x = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, x);
  if (res.ec != std::errc{} || res.ptr != end)
    throw IoError(context + ": cannot parse '" + std::string(s) +
                  "' as a number");
  return x;
}

// ---------------------------------------------------------------------------
// Trajectory CSV

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

/// Header comment + column header + one row per sample.  Full runs store the
/// appraisal row-major (a_11..a_nn); reduced runs store the scales (v_i).
/// Diagnostic channels appear as diag:* columns when present.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  detail::require(!traj.times.empty(), "trajectory csv: empty trajectory");
  const int n = traj.team_size();
  const bool reduced = traj.reduced();
  os << "# asap-trajectory v" << kTrajectoryFormatVersion
     << " kind=" << (reduced ? "reduced" : "full") << " n=" << n
     << " flow=" << to_string(traj.flow) << "\n";
  os << "t";
  if (reduced) {
    for (int i = 1; i <= n; ++i) os << ",v_" << i;
  } else {
    for (int i = 1; i <= n; ++i)
      for (int j = 1; j <= n; ++j) os << ",a_" << i << j;
  }
  for (int i = 1; i <= n; ++i) os << ",w_" << i;
  const bool has_deriv = traj.deriv_sup_norm.size() == traj.times.size();
  const bool has_spread = traj.performance_spread.size() == traj.times.size();
  const bool has_lyap = traj.lyapunov.size() == traj.times.size();
  const bool has_rank = traj.rank_one_ratio.size() == traj.times.size();
  const bool has_cycles = traj.cycle_constants.size() == traj.times.size() &&
                          !traj.tracked_cycles.empty();
  if (has_deriv) os << ",diag:deriv_sup";
  if (has_spread) os << ",diag:perf_spread";
  if (has_lyap) os << ",diag:lyapunov";
  if (has_rank) os << ",diag:rank_ratio";
  if (has_cycles)
    for (std::size_t k = 1; k <= traj.tracked_cycles.size(); ++k)
      os << ",diag:cycle_" << k;
  os << "\n";
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    os << format_double(traj.times[s]);
    if (reduced) {
      for (int i = 0; i < n; ++i) os << ',' << format_double(traj.scales[s][i]);
    } else {
      const Matrix& A = traj.appraisals[s];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) os << ',' << format_double(A(i, j));
    }
    for (int i = 0; i < n; ++i) os << ',' << format_double(traj.workloads[s][i]);
    if (has_deriv) os << ',' << format_double(traj.deriv_sup_norm[s]);
    if (has_spread) os << ',' << format_double(traj.performance_spread[s]);
    if (has_lyap) os << ',' << format_double(traj.lyapunov[s]);
    if (has_rank) os << ',' << format_double(traj.rank_one_ratio[s]);
    if (has_cycles)
      for (double c : traj.cycle_constants[s]) os << ',' << format_double(c);
    os << "\n";
  }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw IoError("trajectory csv: cannot open " + path + " for writing");
  write_trajectory_csv(os, traj);
  if (!os) throw IoError("trajectory csv: write to " + path + " failed");
}

inline Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw IoError("trajectory csv: empty input");
  std::istringstream hdr(line);
  std::string hash, name, ver, kind_kv, n_kv, flow_kv;
  hdr >> hash >> name >> ver >> kind_kv >> n_kv >> flow_kv;
  if (hash != "#" || name != "asap-trajectory")
    throw IoError("trajectory csv: missing '# asap-trajectory' header");
  if (ver != "v" + std::to_string(kTrajectoryFormatVersion))
    throw IoError("trajectory csv: unsupported format version '" + ver +
                  "' (expected v" + std::to_string(kTrajectoryFormatVersion) + ")");
  auto kv = [](const std::string& s, const std::string& key) {
    if (s.rfind(key + "=", 0) != 0)
      throw IoError("trajectory csv: malformed header token '" + s + "'");
    return s.substr(key.size() + 1);
  };
  const std::string kind = kv(kind_kv, "kind");
  const int n = static_cast<int>(parse_double(kv(n_kv, "n"), "trajectory csv header"));
  const std::string flow = kv(flow_kv, "flow");
  const bool reduced = kind == "reduced";
  if (!reduced && kind != "full")
    throw IoError("trajectory csv: unknown kind '" + kind + "'");

  Trajectory traj;
  traj.flow = flow == "average" ? WorkFlow::AverageAppraisal
                                : WorkFlow::DonorControlled;

  if (!std::getline(is, line))
    throw IoError("trajectory csv: missing column header");
  const auto cols = detail::split(line, ',');
  const std::size_t state_cols =
      1 + static_cast<std::size_t>(reduced ? n : n * n) + static_cast<std::size_t>(n);
  if (cols.size() < state_cols || cols[0] != "t")
    throw IoError("trajectory csv: column header does not match n=" +
                  std::to_string(n));
  std::vector<std::string> diag_names(cols.begin() + static_cast<long>(state_cols),
                                      cols.end());
  for (const auto& d : diag_names)
    if (d.rfind("diag:", 0) != 0)
      throw IoError("trajectory csv: unexpected column '" + d + "'");
  std::size_t cycle_count = 0;
  for (const auto& d : diag_names)
    if (d.rfind("diag:cycle_", 0) == 0) ++cycle_count;

  long lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != cols.size())
      throw IoError("trajectory csv: line " + std::to_string(lineno) + " has " +
                    std::to_string(f.size()) + " fields, expected " +
                    std::to_string(cols.size()));
    const std::string ctx = "trajectory csv line " + std::to_string(lineno);
    std::size_t c = 0;
    traj.times.push_back(parse_double(f[c++], ctx));
    if (reduced) {
      Vector v(n);
      for (int i = 0; i < n; ++i) v[i] = parse_double(f[c++], ctx);
      traj.scales.push_back(std::move(v));
    } else {
      Matrix A(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = parse_double(f[c++], ctx);
      traj.appraisals.push_back(std::move(A));
    }
    Vector w(n);
    for (int i = 0; i < n; ++i) w[i] = parse_double(f[c++], ctx);
    traj.workloads.push_back(std::move(w));
    std::vector<double> cycles;
    for (const auto& d : diag_names) {
      const double x = parse_double(f[c++], ctx);
      if (d == "diag:deriv_sup") traj.deriv_sup_norm.push_back(x);
      else if (d == "diag:perf_spread") traj.performance_spread.push_back(x);
      else if (d == "diag:lyapunov") traj.lyapunov.push_back(x);
      else if (d == "diag:rank_ratio") traj.rank_one_ratio.push_back(x);
      else cycles.push_back(x);
    }
    if (cycle_count > 0) traj.cycle_constants.push_back(std::move(cycles));
  }
  if (traj.times.empty()) throw IoError("trajectory csv: no samples");
  if (!reduced) traj.initial_appraisal = traj.appraisals.front();
  if (cycle_count > 0) {
    // The writer emits constants for the basis cycles of the initial pattern,
    // in enumeration order.  Recover their identities where the pattern is
    // available; otherwise keep placeholders so the column count survives a
    // round trip.
    if (!reduced) {
      try {
        auto cycles = cycle_basis(pattern_of(traj.appraisals.front(), 1e-12)).cycles;
        if (cycles.size() == cycle_count) traj.tracked_cycles = std::move(cycles);
      } catch (const std::exception&) {
      }
    }
    if (traj.tracked_cycles.size() != cycle_count)
      traj.tracked_cycles.assign(cycle_count, Cycle{});
  }
  if (traj.reduced() && traj.scales.size() != traj.times.size())
    throw IoError("trajectory csv: inconsistent sample rows");
  for (const auto& v : traj.scales)
    traj.max_scale_sup = std::max(traj.max_scale_sup, v.lpNorm<Eigen::Infinity>());
  return traj;
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("trajectory csv: cannot open " + path);
  return read_trajectory_csv(is);
}

// ---------------------------------------------------------------------------
// Config parsing (JSON, versioned)

namespace cfg {

inline const nlohmann::json& field(const nlohmann::json& j,
                                   const std::string& name,
                                   const std::string& path) {
  if (!j.is_object())
    throw IoError("config: '" + path + "' must be an object");
  const auto it = j.find(name);
  if (it == j.end())
    throw IoError("config: missing field '" + path + name + "'");
  return *it;
}

template <typename T>
T get(const nlohmann::json& j, const std::string& name, const std::string& path) {
  try {
    return field(j, name, path).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw IoError("config: field '" + path + name + "' has the wrong type");
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& name,
         const std::string& path, T fallback) {
  if (!j.is_object() || !j.contains(name)) return fallback;
  return get<T>(j, name, path);
}

inline Vector vector_field(const nlohmann::json& j, const std::string& name,
                           const std::string& path) {
  const auto& a = field(j, name, path);
  if (!a.is_array() || a.empty())
    throw IoError("config: field '" + path + name + "' must be a nonempty array");
  Vector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number())
      throw IoError("config: field '" + path + name + "[" + std::to_string(i) +
                    "]' must be a number");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

inline Matrix matrix_field(const nlohmann::json& j, const std::string& name,
                           const std::string& path) {
  const auto& a = field(j, name, path);
  if (!a.is_array() || a.empty())
    throw IoError("config: field '" + path + name + "' must be a nonempty array of rows");
  const std::size_t n = a.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!a[i].is_array() || a[i].size() != n)
      throw IoError("config: field '" + path + name + "' must be square (row " +
                    std::to_string(i) + ")");
    for (std::size_t jx = 0; jx < n; ++jx) {
      if (!a[i][jx].is_number())
        throw IoError("config: field '" + path + name + "[" + std::to_string(i) +
                      "][" + std::to_string(jx) + "]' must be a number");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jx)) =
          a[i][jx].get<double>();
    }
  }
  return m;
}

}  // namespace cfg

inline void check_config_version(const nlohmann::json& j) {
  const int v = cfg::get<int>(j, "version", "");
  if (v != kConfigVersion)
    throw IoError("config: unsupported version " + std::to_string(v) +
                  " (expected " + std::to_string(kConfigVersion) + ")");
}

inline PerformanceProfile parse_profile(const nlohmann::json& j,
                                        const std::string& path) {
  const std::string kind = cfg::get_or<std::string>(j, "kind", path, "power_law");
  if (kind != "power_law")
    throw IoError("config: field '" + path + "kind' must be \"power_law\"");
  const Vector s = cfg::vector_field(j, "skill", path);
  const auto& ex = cfg::field(j, "exponent", path);
  try {
    if (ex.is_number())
      return PerformanceProfile::power_law(s, ex.get<double>());
    return PerformanceProfile::power_law(s, cfg::vector_field(j, "exponent", path));
  } catch (const std::invalid_argument& e) {
    // Domain errors from the profile constructor carry their own context.
    throw IoError("config: " + std::string(e.what()));
  }
}

inline WorkFlow parse_flow(const nlohmann::json& j, const std::string& path) {
  const std::string f = cfg::get<std::string>(j, "flow", path);
  if (f == "donor") return WorkFlow::DonorControlled;
  if (f == "average") return WorkFlow::AverageAppraisal;
  throw IoError("config: field '" + path +
                "flow' must be \"donor\" or \"average\"");
}

inline IntegratorOptions parse_integrator(const nlohmann::json& root,
                                          const std::string& path) {
  IntegratorOptions o;
  if (!root.contains("integrator")) return o;
  const auto& j = root["integrator"];
  const std::string p = path + "integrator.";
  o.rel_tol = cfg::get_or(j, "rel_tol", p, o.rel_tol);
  o.abs_tol = cfg::get_or(j, "abs_tol", p, o.abs_tol);
  o.t_end = cfg::get_or(j, "t_end", p, o.t_end);
  o.sample_interval = cfg::get_or(j, "sample_interval", p, o.sample_interval);
  o.max_step = cfg::get_or(j, "max_step", p, o.max_step);
  o.initial_step = cfg::get_or(j, "initial_step", p, o.initial_step);
  o.invariant_tol = cfg::get_or(j, "invariant_tol", p, o.invariant_tol);
  o.renormalize = cfg::get_or(j, "renormalize", p, o.renormalize);
  return o;
}

struct InitialCondition {
  std::optional<Matrix> appraisal;
  std::optional<Vector> workload;
  std::optional<RandomTeamConfig> generator;
};

inline InitialCondition parse_initial(const nlohmann::json& j,
                                      const std::string& path) {
  InitialCondition ic;
  if (j.contains("generator")) {
    const auto& g = j["generator"];
    const std::string p = path + "generator.";
    RandomTeamConfig rc;
    rc.n = cfg::get<int>(g, "n", p);
    rc.edge_probability = cfg::get<double>(g, "edge_probability", p);
    rc.seed = cfg::get_or<std::uint64_t>(g, "seed", p, 0);
    rc.max_attempts = cfg::get_or(g, "max_attempts", p, rc.max_attempts);
    ic.generator = rc;
    return ic;
  }
  ic.appraisal = cfg::matrix_field(j, "appraisal", path);
  ic.workload = cfg::vector_field(j, "workload", path);
  return ic;
}

struct SimulateConfig {
  PerformanceProfile profile = PerformanceProfile::power_law(
      Vector::Ones(1), 0.5);  // placeholder; parse always overwrites
  WorkFlow flow = WorkFlow::DonorControlled;
  std::vector<InitialCondition> initials;
  IntegratorOptions integrator;
  DiagnosticsRequest diagnostics;
  bool lyapunov = false;  // attach V relative to the constructed equilibrium
};

inline SimulateConfig parse_simulate_config(const nlohmann::json& j) {
  check_config_version(j);
  SimulateConfig c;
  c.profile = parse_profile(cfg::field(j, "profile", ""), "profile.");
  c.flow = parse_flow(j, "");
  if (j.contains("initial")) {
    c.initials.push_back(parse_initial(j["initial"], "initial."));
  } else if (j.contains("initials")) {
    const auto& arr = j["initials"];
    if (!arr.is_array() || arr.empty())
      throw IoError("config: field 'initials' must be a nonempty array");
    for (std::size_t k = 0; k < arr.size(); ++k)
      c.initials.push_back(
          parse_initial(arr[k], "initials[" + std::to_string(k) + "]."));
  } else {
    throw IoError("config: missing field 'initial' (or 'initials')");
  }
  c.integrator = parse_integrator(j, "");
  if (j.contains("diagnostics")) {
    const auto& d = j["diagnostics"];
    if (!d.is_array())
      throw IoError("config: field 'diagnostics' must be an array of names");
    for (const auto& name : d) {
      const std::string s = name.is_string() ? name.get<std::string>() : "";
      if (s == "cycle_constants") c.diagnostics.cycle_constants = true;
      else if (s == "rank_one_ratio") c.diagnostics.rank_one_ratio = true;
      else if (s == "lyapunov") c.lyapunov = true;
      else
        throw IoError("config: unknown diagnostic '" + s + "'");
    }
  }
  return c;
}

struct EquilibriumConfig {
  PerformanceProfile profile = PerformanceProfile::power_law(Vector::Ones(1), 0.5);
  std::optional<Matrix> appraisal;  // enables A* construction
  double eps = 0.5;
};

inline EquilibriumConfig parse_equilibrium_config(const nlohmann::json& j) {
  check_config_version(j);
  EquilibriumConfig c;
  c.profile = parse_profile(cfg::field(j, "profile", ""), "profile.");
  if (j.contains("appraisal")) c.appraisal = cfg::matrix_field(j, "appraisal", "");
  c.eps = cfg::get_or(j, "eps", "", c.eps);
  return c;
}

inline MonteCarloConfig parse_montecarlo_config(const nlohmann::json& j) {
  check_config_version(j);
  MonteCarloConfig c;
  const auto& m = cfg::field(j, "montecarlo", "");
  const std::string p = "montecarlo.";
  c.team.n = cfg::get_or(m, "n", p, c.team.n);
  c.team.edge_probability = cfg::get_or(m, "edge_probability", p, c.team.edge_probability);
  c.team.seed = cfg::get_or<std::uint64_t>(m, "seed", p, 0);
  c.epsilon = cfg::get_or(m, "epsilon", p, c.epsilon);
  c.xi = cfg::get_or(m, "xi", p, c.xi);
  if (m.contains("sample_count"))
    c.sample_count = cfg::get<long>(m, "sample_count", p);
  c.horizon = cfg::get_or(m, "horizon", p, c.horizon);
  c.v_cap = cfg::get_or(m, "v_cap", p, c.v_cap);
  c.workers = cfg::get_or(m, "workers", p, c.workers);
  c.checkpoint_path = cfg::get_or<std::string>(m, "checkpoint", p, "");
  if (j.contains("flow")) c.flow = parse_flow(j, "");
  c.integrator = parse_integrator(j, "");
  return c;
}

struct ScenarioConfig {
  PerformanceProfile profile = PerformanceProfile::power_law(Vector::Ones(1), 0.5);
  WorkFlow flow = WorkFlow::DonorControlled;
  InitialCondition initial;
  IntegratorOptions integrator;
  std::vector<SwitchEvent> events;
};

inline ScenarioConfig parse_scenario_config(const nlohmann::json& j) {
  check_config_version(j);
  ScenarioConfig c;
  c.profile = parse_profile(cfg::field(j, "profile", ""), "profile.");
  c.flow = parse_flow(j, "");
  c.initial = parse_initial(cfg::field(j, "initial", ""), "initial.");
  c.integrator = parse_integrator(j, "");
  const auto& evs = cfg::field(j, "events", "");
  if (!evs.is_array())
    throw IoError("config: field 'events' must be an array");
  for (std::size_t k = 0; k < evs.size(); ++k) {
    const std::string p = "events[" + std::to_string(k) + "].";
    const auto& e = evs[k];
    SwitchEvent ev;
    ev.time = cfg::get<double>(e, "time", p);
    const std::string kind = cfg::get<std::string>(e, "kind", p);
    if (kind == "add") ev.kind = SwitchEvent::Kind::Add;
    else if (kind == "remove") ev.kind = SwitchEvent::Kind::Remove;
    else
      throw IoError("config: field '" + p + "kind' must be \"add\" or \"remove\"");
    ev.subject = cfg::get<int>(e, "subject", p);
    ev.sponsor = cfg::get<int>(e, "sponsor", p);
    ev.transfer_fraction = cfg::get_or(e, "transfer_fraction", p, ev.transfer_fraction);
    ev.sponsor_grant = cfg::get_or(e, "sponsor_grant", p, ev.sponsor_grant);
    if (ev.kind == SwitchEvent::Kind::Add) {
      ev.skill = cfg::get<double>(e, "skill", p);
      ev.exponent = cfg::get<double>(e, "exponent", p);
    }
    c.events.push_back(ev);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Summaries and post-hoc analysis

struct CycleDriftReport {
  double max_relative_drift = 0.0;
  double time = 0.0;          // sample time of the worst drift
  std::size_t cycle_index = 0;  // into the enumerated cycle list
  std::size_t cycle_count = 0;
};

/// Maximum relative drift of every simple-cycle constant recomputed from the
/// stored appraisal samples (full runs only).  Drift is NaN when any constant
/// is non-finite along the way.
inline CycleDriftReport max_cycle_drift(const Trajectory& traj,
                                        const CycleEnumerationOptions& opt = {}) {
  detail::require(!traj.reduced(), "cycle drift: expected a full-model run");
  const auto cycles = enumerate_cycles(
      pattern_of(traj.appraisals.front(), 1e-12), opt);
  CycleDriftReport rep;
  rep.cycle_count = cycles.size();
  for (std::size_t r = 0; r < cycles.size(); ++r) {
    const double c0 = cycle_constant(traj.appraisals.front(), cycles[r]);
    for (std::size_t s = 1; s < traj.appraisals.size(); ++s) {
      double c;
      try {
        c = cycle_constant(traj.appraisals[s], cycles[r]);
      } catch (const std::domain_error&) {
        rep.max_relative_drift = std::numeric_limits<double>::quiet_NaN();
        rep.time = traj.times[s];
        rep.cycle_index = r;
        return rep;
      }
      const double d = std::abs(c - c0) / std::abs(c0);
      if (d > rep.max_relative_drift) {
        rep.max_relative_drift = d;
        rep.time = traj.times[s];
        rep.cycle_index = r;
      }
    }
  }
  return rep;
}

/// Largest increase between consecutive Lyapunov channel samples (0 for a
/// perfectly non-increasing channel).
inline double max_lyapunov_increase(const std::vector<double>& v) {
  double inc = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k)
    inc = std::max(inc, v[k] - v[k - 1]);
  return inc;
}

inline nlohmann::json trajectory_summary(const Trajectory& traj,
                                         const PerformanceProfile* profile) {
  detail::require(!traj.times.empty(), "summary: empty trajectory");
  nlohmann::json s;
  s["version"] = kTrajectoryFormatVersion;
  s["kind"] = traj.reduced() ? "reduced" : "full";
  s["flow"] = to_string(traj.flow);
  s["n"] = traj.team_size();
  s["samples"] = traj.times.size();
  s["t_end"] = traj.times.back();
  s["steps"] = {{"accepted", traj.stats.accepted},
                {"rejected", traj.stats.rejected},
                {"rhs_evaluations", traj.stats.evaluations}};
  switch (traj.termination) {
    case Trajectory::Termination::ReachedEnd: s["termination"] = "end"; break;
    case Trajectory::Termination::ConvergedEarly: s["termination"] = "converged"; break;
    case Trajectory::Termination::ScaleCapReached: s["termination"] = "scale_cap"; break;
  }

  const Vector& wT = traj.workloads.back();
  nlohmann::json terminal;
  terminal["time"] = traj.times.back();
  terminal["workload"] = std::vector<double>(wT.data(), wT.data() + wT.size());
  if (!traj.reduced()) {
    const Matrix& AT = traj.appraisals.back();
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < AT.rows(); ++i)
      rows.emplace_back(AT.row(i).begin(), AT.row(i).end());
    terminal["appraisal"] = rows;
  } else {
    const Vector& vT = traj.scales.back();
    terminal["scales"] = std::vector<double>(vT.data(), vT.data() + vT.size());
  }
  if (profile) {
    terminal["performance"] = {
        {"min", team_performance(*profile, wT, PerformanceMetric::Min)},
        {"average", team_performance(*profile, wT, PerformanceMetric::Average)}};
    if (profile->has_antiderivative())
      terminal["performance"]["total"] =
          team_performance(*profile, wT, PerformanceMetric::Total);
    if (!traj.reduced()) {
      const auto eq = check_equilibrium(traj.appraisals.back(), wT, *profile,
                                        traj.flow);
      terminal["residuals"] = {{"appraisal", eq.appraisal_residual},
                               {"workload", eq.workload_residual}};
    }
  }
  s["terminal"] = terminal;

  if (traj.deriv_sup_norm.size() == traj.times.size()) {
    const auto conv = detect_convergence(traj);
    s["convergence"] = conv ? nlohmann::json{{"detected", true}, {"time", conv->time}}
                            : nlohmann::json{{"detected", false}};
  }

  double max_row_drift = 0.0, max_w_drift = 0.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    if (!traj.reduced()) {
      const Matrix& A = traj.appraisals[k];
      for (Eigen::Index i = 0; i < A.rows(); ++i)
        max_row_drift = std::max(max_row_drift, std::abs(A.row(i).sum() - 1.0));
    }
    max_w_drift = std::max(max_w_drift, std::abs(traj.workloads[k].sum() - 1.0));
  }
  s["invariants"] = {{"max_row_sum_drift", max_row_drift},
                     {"max_workload_sum_drift", max_w_drift}};
  if (!traj.cycle_constants.empty() && !traj.tracked_cycles.empty()) {
    double d = 0.0;
    for (std::size_t k = 0; k < traj.cycle_constants.size(); ++k)
      for (std::size_t c = 0; c < traj.cycle_constants[k].size(); ++c) {
        const double c0 = traj.cycle_constants.front()[c];
        d = std::max(d, std::abs(traj.cycle_constants[k][c] - c0) / std::abs(c0));
      }
    s["diagnostics"]["max_basis_cycle_drift"] = d;
  }
  if (traj.lyapunov.size() == traj.times.size())
    s["diagnostics"]["max_lyapunov_increase"] = max_lyapunov_increase(traj.lyapunov);
  if (traj.rank_one_ratio.size() == traj.times.size()) {
    double r = 0.0;
    for (double x : traj.rank_one_ratio) r = std::max(r, x);
    s["diagnostics"]["max_rank_one_ratio"] = r;
  }
  if (traj.reduced()) s["max_scale_sup"] = traj.max_scale_sup;
  return s;
}

/// Post-hoc checks over a stored trajectory: cycle-constant conservation
/// (always), Lyapunov monotonicity (when the channel is present), and the
/// failure-condition bound (when a profile is supplied).
inline nlohmann::json analyze_trajectory(const Trajectory& traj,
                                         const PerformanceProfile* profile,
                                         double conservation_tol = 1e-6,
                                         double lyapunov_slack = 1e-8,
                                         double bound_slack = 1e-9) {
  nlohmann::json rep;
  bool pass = true;

  if (!traj.reduced()) {
    const auto drift = max_cycle_drift(traj);
    const bool ok = std::isfinite(drift.max_relative_drift) &&
                    drift.max_relative_drift < conservation_tol;
    rep["cycle_conservation"] = {{"max_relative_drift", drift.max_relative_drift},
                                 {"cycles", drift.cycle_count},
                                 {"tolerance", conservation_tol},
                                 {"pass", ok}};
    if (!ok) {
      rep["cycle_conservation"]["offending_time"] = drift.time;
      rep["cycle_conservation"]["offending_cycle"] = drift.cycle_index;
    }
    pass = pass && ok;
  }

  if (traj.lyapunov.size() == traj.times.size() && !traj.lyapunov.empty()) {
    const double inc = max_lyapunov_increase(traj.lyapunov);
    const bool ok = inc <= lyapunov_slack;
    rep["lyapunov_monotone"] = {{"max_increase", inc},
                                {"slack", lyapunov_slack},
                                {"pass", ok}};
    pass = pass && ok;
  } else {
    rep["lyapunov_monotone"] = {{"skipped", "no lyapunov channel"}};
  }

  if (profile && !traj.reduced() &&
      traj.flow == WorkFlow::AverageAppraisal) {
    // The absorption ceiling bounds average-flow workloads only; the donor
    // flow admits no such comparison.
    const auto opt = solve_optimal_workload(*profile);
    const auto cert = failure_condition(traj.appraisals.front(),
                                        traj.workloads.front(), opt.w);
    nlohmann::json f;
    f["flagged_members"] = cert.members;
    if (cert.triggered()) {
      double worst = -std::numeric_limits<double>::infinity();
      for (int i : cert.members)
        for (const auto& wk : traj.workloads)
          worst = std::max(worst, wk[i] - cert.bounds[i]);
      const bool ok = worst <= bound_slack;
      f["max_bound_excess"] = worst;
      f["pass"] = ok;
      pass = pass && ok;
    }
    rep["failure_condition"] = f;
  } else if (profile && !traj.reduced()) {
    rep["failure_condition"] = {{"skipped", "bound applies to average flow"}};
  } else {
    rep["failure_condition"] = {{"skipped", "no profile supplied"}};
  }

  rep["pass"] = pass;
  return rep;
}

}  // namespace asap
