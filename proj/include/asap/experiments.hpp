// Experiment drivers: random team generation, the Chernoff-sized Monte Carlo
// boundedness study over the reduced model (checkpointed, multi-worker,
// deterministic per-sample streams), and membership-switching scenarios.
#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "asap/analysis.hpp"
#include "asap/graph.hpp"
#include "asap/integrator.hpp"
#include "asap/rng.hpp"
#include "asap/types.hpp"

namespace asap {

/// Smallest N with two-sided additive Chernoff guarantee
/// P(|p_hat - p| > eps) <= xi:  N >= ln(2/xi) / (2 eps^2).
inline long chernoff_sample_size(double epsilon, double xi) {
  detail::require(epsilon > 0.0 && epsilon < 1.0,
                  "chernoff_sample_size: epsilon must lie in (0,1)");
  detail::require(xi > 0.0 && xi < 1.0,
                  "chernoff_sample_size: xi must lie in (0,1)");
  return static_cast<long>(std::ceil(std::log(2.0 / xi) /
                                     (2.0 * epsilon * epsilon)));
}

struct RandomTeamConfig {
  int n = 6;
  double edge_probability = 0.3;
  std::uint64_t seed = 0;
  int max_attempts = 1000;
};

struct RandomTeam {
  AppraisalMatrix appraisal;
  WorkloadVector workload;
};

/// Erdos-Renyi appraisal pattern with uniform weights, resampled until
/// strongly connected; the workload is uniform on the simplex interior.
/// Draw order per attempt: row-major over entries (diagonal weight; off-
/// diagonal edge indicator, then weight only when present), then the
/// workload spacings.  Consumes `rng` so callers can continue the stream.
inline RandomTeam generate_random_team(Rng& rng, const RandomTeamConfig& cfg) {
  detail::require(cfg.n > 0, "random team: size must be positive");
  detail::require(cfg.edge_probability >= 0.0 && cfg.edge_probability <= 1.0,
                  "random team: edge probability outside [0,1]");
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    Matrix M = Matrix::Zero(cfg.n, cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
      for (int j = 0; j < cfg.n; ++j) {
        if (i == j)
          M(i, j) = rng.uniform01();
        else if (rng.uniform01() < cfg.edge_probability)
          M(i, j) = rng.uniform01();
      }
      M.row(i) /= M.row(i).sum();
    }
    const Vector w0 = sample_simplex_interior(rng, cfg.n);
    if (cfg.n > 1 && !is_strongly_connected(pattern_of(M))) continue;
    return RandomTeam{AppraisalMatrix(std::move(M)), WorkloadVector(w0)};
  }
  throw GenerationError("random team: no strongly connected draw in " +
                        std::to_string(cfg.max_attempts) + " attempts");
}

inline RandomTeam generate_random_team(const RandomTeamConfig& cfg) {
  Rng rng(cfg.seed);
  return generate_random_team(rng, cfg);
}

/// Random power-law profile: skills uniform on the simplex interior,
/// exponents uniform on (0,1).
inline PerformanceProfile sample_power_law_profile(Rng& rng, int n) {
  Vector s = sample_simplex_interior(rng, n);
  Vector g(n);
  for (int i = 0; i < n; ++i) g[i] = rng.uniform01();
  return PerformanceProfile::power_law(std::move(s), std::move(g));
}

// ---------------------------------------------------------------------------
// Monte Carlo boundedness study

enum class SampleStatus { Bounded, Unbounded, Indeterminate };

inline const char* to_string(SampleStatus s) {
  switch (s) {
    case SampleStatus::Bounded: return "bounded";
    case SampleStatus::Unbounded: return "unbounded";
    case SampleStatus::Indeterminate: return "indeterminate";
  }
  return "?";
}

struct SampleRecord {
  long index = 0;
  std::uint64_t seed = 0;
  int indicator = 0;
  double max_v_norm = 0.0;
  SampleStatus status = SampleStatus::Indeterminate;
};

struct MonteCarloConfig {
  RandomTeamConfig team;          // per-sample seeds derive from team.seed
  WorkFlow flow = WorkFlow::DonorControlled;
  double epsilon = 0.01;
  double xi = 0.01;
  std::optional<long> sample_count;  // overrides the Chernoff size
  double horizon = 1000.0;
  double v_cap = 1e9;
  int workers = 1;
  std::string checkpoint_path;       // empty: no checkpointing
  IntegratorOptions integrator;      // t_end/cap/stop rules are overridden
};

struct MonteCarloResult {
  long total = 0;
  long bounded = 0;
  long unbounded = 0;
  long indeterminate = 0;
  double p_hat = 0.0;
  std::vector<SampleRecord> records;  // ordered by sample index
};

namespace detail {

inline SampleRecord run_monte_carlo_sample(const MonteCarloConfig& cfg,
                                           long index) {
  SampleRecord rec;
  rec.index = index;
  rec.seed = Rng::stream_seed(cfg.team.seed, static_cast<std::uint64_t>(index));
  Rng rng(rec.seed);
  try {
    RandomTeamConfig tc = cfg.team;
    const RandomTeam team = generate_random_team(rng, tc);
    const PerformanceProfile profile = sample_power_law_profile(rng, cfg.team.n);
    IntegratorOptions opt = cfg.integrator;
    opt.t_end = cfg.horizon;
    opt.sample_interval = cfg.horizon;  // endpoints only; sup tracked per step
    opt.stop_scale_cap = cfg.v_cap;
    opt.stop_when_converged = true;
    opt.stop_tol = 1e-12;
    const ReducedState state(team.appraisal, Vector::Ones(cfg.team.n),
                             team.workload);
    const Trajectory traj = integrate_reduced(state, profile, cfg.flow, opt);
    rec.max_v_norm = traj.max_scale_sup;
    rec.indicator = boundedness_indicator(traj, cfg.v_cap);
    rec.status = rec.indicator ? SampleStatus::Bounded : SampleStatus::Unbounded;
  } catch (const IntegrationDivergedError& e) {
    rec.max_v_norm = e.partial.max_scale_sup;
    rec.indicator = 0;
    rec.status = SampleStatus::Indeterminate;
  } catch (const std::exception&) {
    rec.indicator = 0;
    rec.status = SampleStatus::Indeterminate;
  }
  return rec;
}

inline nlohmann::json record_to_json(const SampleRecord& r) {
  return nlohmann::json{{"sample_index", r.index},
                        {"seed", r.seed},
                        {"indicator", r.indicator},
                        {"max_v_norm", r.max_v_norm},
                        {"status", to_string(r.status)}};
}

inline std::optional<SampleRecord> record_from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (!j.contains("sample_index") || !j.contains("seed") ||
      !j.contains("indicator") || !j.contains("max_v_norm") ||
      !j.contains("status"))
    return std::nullopt;
  SampleRecord r;
  r.index = j["sample_index"].get<long>();
  r.seed = j["seed"].get<std::uint64_t>();
  r.indicator = j["indicator"].get<int>();
  r.max_v_norm = j["max_v_norm"].get<double>();
  const std::string s = j["status"].get<std::string>();
  if (s == "bounded") r.status = SampleStatus::Bounded;
  else if (s == "unbounded") r.status = SampleStatus::Unbounded;
  else if (s == "indeterminate") r.status = SampleStatus::Indeterminate;
  else return std::nullopt;
  return r;
}

}  // namespace detail

/// Monte Carlo estimate of the probability that the reduced scales stay
/// bounded.  Sample i draws its team and profile from the derived stream
/// (team.seed, i), so results are independent of worker count and schedule;
/// completed indices found in the checkpoint file are skipped on resume
/// (malformed/truncated trailing lines are ignored).
inline MonteCarloResult run_monte_carlo(const MonteCarloConfig& cfg) {
  const long total =
      cfg.sample_count ? *cfg.sample_count
                       : chernoff_sample_size(cfg.epsilon, cfg.xi);
  detail::require(total > 0, "monte carlo: sample count must be positive");
  detail::require(cfg.workers >= 1, "monte carlo: worker count must be >= 1");
  detail::require(cfg.horizon > 0.0, "monte carlo: horizon must be positive");

  std::map<long, SampleRecord> done;
  if (!cfg.checkpoint_path.empty()) {
    std::ifstream in(cfg.checkpoint_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (auto r = detail::record_from_json_line(line))
        if (r->index >= 0 && r->index < total) done[r->index] = *r;
    }
  }

  std::vector<long> todo;
  todo.reserve(static_cast<std::size_t>(total));
  for (long i = 0; i < total; ++i)
    if (!done.count(i)) todo.push_back(i);

  std::ofstream ck;
  if (!cfg.checkpoint_path.empty()) {
    ck.open(cfg.checkpoint_path, std::ios::app);
    if (!ck) throw IoError("monte carlo: cannot open checkpoint file " +
                           cfg.checkpoint_path);
  }

  std::mutex mu;
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = cursor.fetch_add(1);
      if (k >= todo.size()) return;
      SampleRecord rec = detail::run_monte_carlo_sample(cfg, todo[k]);
      std::lock_guard<std::mutex> lock(mu);
      if (ck.is_open()) {
        ck << detail::record_to_json(rec).dump() << '\n';
        ck.flush();
      }
      done[rec.index] = rec;
    }
  };

  if (cfg.workers == 1 || todo.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int nw = std::min<long>(cfg.workers, static_cast<long>(todo.size()));
    pool.reserve(static_cast<std::size_t>(nw));
    for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  MonteCarloResult res;
  res.total = total;
  res.records.reserve(static_cast<std::size_t>(total));
  for (auto& [idx, rec] : done) {
    res.records.push_back(rec);
    switch (rec.status) {
      case SampleStatus::Bounded: ++res.bounded; break;
      case SampleStatus::Unbounded: ++res.unbounded; break;
      case SampleStatus::Indeterminate: ++res.indeterminate; break;
    }
  }
  const long decided = res.bounded + res.unbounded;
  res.p_hat = decided > 0 ? static_cast<double>(res.bounded) / decided
                          : std::numeric_limits<double>::quiet_NaN();
  return res;
}

// ---------------------------------------------------------------------------
// Membership switching

struct SwitchEvent {
  enum class Kind { Add, Remove };
  double time = 0.0;
  Kind kind = Kind::Add;
  int subject = -1;  // id of the member joining or leaving
  int sponsor = -1;  // sponsor (Add) / workload-absorbing neighbor (Remove)
  double transfer_fraction = 0.5;  // Add: share of sponsor workload moved
  double sponsor_grant = 0.2;      // Add: appraisal weight granted by sponsor
  double skill = 0.0;              // Add: newcomer power-law parameters
  double exponent = 0.0;
};

struct ScenarioInterval {
  std::vector<int> members;   // stable ids, ascending; row/col order
  Vector skills, exponents;   // profile in force during the interval
  Trajectory trajectory;
  std::vector<double> h_total;  // Total performance at each sample
};

struct ScenarioEventLog {
  SwitchEvent event;
  double workload_sum_before = 0.0;
  double workload_sum_after = 0.0;
};

struct ScenarioResult {
  std::vector<ScenarioInterval> intervals;
  std::vector<ScenarioEventLog> events;
};

/// Piecewise integration of the full model with Add/Remove membership events.
/// Add: the newcomer takes transfer_fraction of the sponsor's workload,
/// appraises sponsor and self 1/2 each, and receives sponsor_grant appraisal
/// weight from the sponsor (whose row renormalizes).  Remove: the neighbor
/// absorbs the subject's workload; the subject's row/column is deleted and
/// remaining rows renormalize.  Every event must leave the team strongly
/// connected; total workload is conserved to within one rounding.
inline ScenarioResult run_switching_scenario(const TeamState& initial,
                                             const PerformanceProfile& profile,
                                             WorkFlow flow,
                                             std::vector<SwitchEvent> events,
                                             const IntegratorOptions& options) {
  detail::require(profile.is_power_law(),
                  "scenario: profile must be power-law (newcomers carry "
                  "power-law parameters)");
  detail::require(profile.size() == initial.size(),
                  "scenario: profile size mismatch");
  std::sort(events.begin(), events.end(),
            [](const SwitchEvent& a, const SwitchEvent& b) {
              return a.time < b.time;
            });
  for (std::size_t k = 0; k < events.size(); ++k) {
    detail::require(events[k].time > initial.time &&
                        events[k].time < options.t_end,
                    "scenario: event time outside (t0, t_end)");
    detail::require(k == 0 || events[k].time > events[k - 1].time,
                    "scenario: event times must be strictly increasing");
  }

  std::vector<int> members(static_cast<std::size_t>(initial.size()));
  for (std::size_t i = 0; i < members.size(); ++i) members[i] = static_cast<int>(i);
  std::vector<double> skills(profile.skill().data(),
                             profile.skill().data() + profile.size());
  std::vector<double> exps(profile.exponent().data(),
                           profile.exponent().data() + profile.size());

  Matrix A = initial.appraisal.entries();
  Vector w = initial.workload.entries();
  double t = initial.time;
  int next_member = initial.size();

  ScenarioResult result;
  auto index_of = [&](int id) {
    const auto it = std::find(members.begin(), members.end(), id);
    detail::require(it != members.end(),
                    "scenario: member id " + std::to_string(id) + " not present");
    return static_cast<int>(it - members.begin());
  };

  auto integrate_interval = [&](double until) {
    const int n = static_cast<int>(members.size());
    Vector sv = Eigen::Map<const Vector>(skills.data(), n);
    Vector ev = Eigen::Map<const Vector>(exps.data(), n);
    const PerformanceProfile prof = PerformanceProfile::power_law(sv, ev);
    IntegratorOptions opt = options;
    opt.t_end = until;
    TeamState state(AppraisalMatrix(A, 10.0 * opt.invariant_tol),
                    WorkloadVector(w, 10.0 * opt.invariant_tol), t);
    ScenarioInterval interval;
    interval.members = members;
    interval.skills = sv;
    interval.exponents = ev;
    interval.trajectory = integrate(state, prof, flow, opt);
    interval.h_total.reserve(interval.trajectory.sample_count());
    for (const auto& wk : interval.trajectory.workloads)
      interval.h_total.push_back(
          team_performance(prof, wk, PerformanceMetric::Total));
    A = interval.trajectory.appraisals.back();
    w = interval.trajectory.workloads.back();
    t = until;
    result.intervals.push_back(std::move(interval));
  };

  for (const auto& ev : events) {
    integrate_interval(ev.time);
    ScenarioEventLog log;
    log.event = ev;
    log.workload_sum_before = w.sum();
    const int n = static_cast<int>(members.size());
    if (ev.kind == SwitchEvent::Kind::Add) {
      detail::require(std::find(members.begin(), members.end(), ev.subject) ==
                          members.end(),
                      "scenario: added member id already present");
      detail::require(ev.subject >= next_member,
                      "scenario: added member id must be fresh");
      detail::require(ev.transfer_fraction > 0.0 && ev.transfer_fraction < 1.0,
                      "scenario: transfer fraction outside (0,1)");
      detail::require(ev.sponsor_grant > 0.0 && ev.sponsor_grant < 1.0,
                      "scenario: sponsor grant outside (0,1)");
      detail::require(ev.skill > 0.0, "scenario: newcomer skill must be > 0");
      detail::require(ev.exponent > 0.0 && ev.exponent < 1.0,
                      "scenario: newcomer exponent outside (0,1)");
      const int sp = index_of(ev.sponsor);
      Matrix An = Matrix::Zero(n + 1, n + 1);
      An.topLeftCorner(n, n) = A;
      An.row(sp).head(n) *= 1.0 - ev.sponsor_grant;
      An(sp, n) = ev.sponsor_grant;
      An(n, n) = 0.5;
      An(n, sp) = 0.5;
      Vector wn(n + 1);
      wn.head(n) = w;
      const double moved = ev.transfer_fraction * w[sp];
      wn[sp] = w[sp] - moved;  // exact for fraction 1/2 (Sterbenz)
      wn[n] = moved;
      A = std::move(An);
      w = std::move(wn);
      members.push_back(ev.subject);
      skills.push_back(ev.skill);
      exps.push_back(ev.exponent);
      next_member = std::max(next_member, ev.subject + 1);
    } else {
      const int out = index_of(ev.subject);
      const int ab = index_of(ev.sponsor);
      detail::require(out != ab, "scenario: absorber equals removed member");
      Vector wn(n - 1);
      Matrix An(n - 1, n - 1);
      for (int i = 0, ii = 0; i < n; ++i) {
        if (i == out) continue;
        wn[ii] = (i == ab) ? w[i] + w[out] : w[i];
        for (int j = 0, jj = 0; j < n; ++j) {
          if (j == out) continue;
          An(ii, jj) = A(i, j);
          ++jj;
        }
        ++ii;
      }
      for (int i = 0; i < n - 1; ++i) An.row(i) /= An.row(i).sum();
      A = std::move(An);
      w = std::move(wn);
      members.erase(members.begin() + out);
      skills.erase(skills.begin() + out);
      exps.erase(exps.begin() + out);
    }
    log.workload_sum_after = w.sum();
    if (!is_strongly_connected(pattern_of(A)))
      throw ScenarioError("scenario: event at t = " + std::to_string(ev.time) +
                          " leaves the team not strongly connected");
    result.events.push_back(log);
  }
  integrate_interval(options.t_end);
  return result;
}

}  // namespace asap
