// asap command-line driver.
//
// Subcommands: simulate, equilibrium, montecarlo, scenario, analyze.
// Every command reads a versioned JSON config (--config), writes its
// artifacts under --out, and prints a JSON report to stdout.  Failures
// print {"error": {...}} to stdout and exit nonzero.  Progress logging
// goes to stderr, gated by ASAP_LOG_LEVEL (error|warn|info|debug).

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "asap/asap.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("ASAP_LOG_LEVEL");
    const std::string s = env ? env : "warn";
    if (s == "error") return LogLevel::Error;
    if (s == "info") return LogLevel::Info;
    if (s == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}

void log(LogLevel lvl, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (lvl <= log_level())
    std::cerr << "[asap:" << names[static_cast<int>(lvl)] << "] " << msg << "\n";
}

json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw asap::IoError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw asap::IoError("config: " + path + ": " + e.what());
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw asap::IoError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << "\n";
  if (!os) throw asap::IoError("write to " + path.string() + " failed");
}

std::vector<double> to_vec(const asap::Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

json to_json_matrix(const asap::Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

// Resolve an initial condition to a concrete team state, consuming the
// generator spec when present.  `seed_override` (from --seed) rebases the
// generator stream.
asap::TeamState resolve_initial(const asap::InitialCondition& ic, int n_expected,
                                std::optional<std::uint64_t> seed_override) {
  if (ic.generator) {
    asap::RandomTeamConfig gc = *ic.generator;
    if (seed_override) gc.seed = *seed_override;
    if (gc.n != n_expected)
      throw asap::IoError("config: generator n=" + std::to_string(gc.n) +
                          " does not match profile size " +
                          std::to_string(n_expected));
    const asap::RandomTeam team = asap::generate_random_team(gc);
    return {team.appraisal, team.workload, 0.0};
  }
  return {asap::AppraisalMatrix(*ic.appraisal),
          asap::WorkloadVector(*ic.workload), 0.0};
}

int cmd_simulate(const std::string& config_path, const fs::path& out,
                 std::optional<std::uint64_t> seed,
                 std::optional<double> horizon) {
  auto cfg = asap::parse_simulate_config(load_config(config_path));
  if (horizon) cfg.integrator.t_end = *horizon;
  const int n = cfg.profile.size();

  // The Lyapunov channel needs the constructed equilibrium (A*, w_opt),
  // which exists for the donor-controlled flow only.
  if (cfg.lyapunov && cfg.flow != asap::WorkFlow::DonorControlled)
    throw asap::IoError(
        "config: diagnostic 'lyapunov' requires flow \"donor\" (no A* "
        "construction under average-appraisal flow)");

  json runs = json::array();
  for (std::size_t k = 0; k < cfg.initials.size(); ++k) {
    const asap::TeamState state =
        resolve_initial(cfg.initials[k], n, seed);
    log(LogLevel::Info, "simulate: run " + std::to_string(k + 1) + "/" +
                            std::to_string(cfg.initials.size()));
    asap::Trajectory traj;
    bool diverged = false;
    try {
      traj = asap::integrate(state, cfg.profile, cfg.flow, cfg.integrator,
                             cfg.diagnostics);
    } catch (const asap::IntegrationDivergedError& e) {
      log(LogLevel::Warn, std::string("simulate: ") + e.what());
      traj = e.partial;
      diverged = true;
    }
    if (cfg.lyapunov) {
      const auto opt = asap::solve_optimal_workload(cfg.profile);
      const auto a_star =
          asap::construct_equilibrium_matrix(state.appraisal, opt.w);
      asap::attach_lyapunov(traj, cfg.profile, a_star.entries(), opt.w);
    }
    const fs::path traj_path =
        out / ("trajectory_" + std::to_string(k + 1) + ".csv");
    asap::write_trajectory_csv(traj_path.string(), traj);
    json summary = asap::trajectory_summary(traj, &cfg.profile);
    summary["trajectory"] = traj_path.string();
    if (diverged) summary["diverged"] = true;
    runs.push_back(std::move(summary));
  }
  json report;
  report["command"] = "simulate";
  report["runs"] = runs;
  write_json(out / "summary.json", report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_equilibrium(const std::string& config_path, const fs::path& out) {
  const json j = load_config(config_path);
  const auto cfg = asap::parse_equilibrium_config(j);
  const auto opt = asap::solve_optimal_workload(cfg.profile);
  json report;
  report["command"] = "equilibrium";
  report["p_star"] = opt.p_star;
  report["w_opt"] = to_vec(opt.w);

  if (cfg.appraisal) {
    const asap::WorkFlow flow =
        j.contains("flow") ? asap::parse_flow(j, "") : asap::WorkFlow::DonorControlled;
    const asap::AppraisalMatrix A0(*cfg.appraisal);
    if (flow == asap::WorkFlow::DonorControlled) {
      const auto a_star = asap::construct_equilibrium_matrix(A0, opt.w, cfg.eps);
      const auto chk = asap::check_equilibrium(a_star.entries(), opt.w,
                                               cfg.profile, flow);
      report["a_star"] = to_json_matrix(a_star.entries());
      report["residuals"] = {{"appraisal", chk.appraisal_residual},
                             {"workload", chk.workload_residual}};
      report["certified"] = chk.pass;
    } else {
      // No A* construction under average-appraisal flow; certify only.
      report["a_star"] = nullptr;
      report["construction"] = "unavailable under average-appraisal flow";
      const asap::Vector w_avg =
          (1.0 / A0.size()) * (A0.entries().transpose() * asap::Vector::Ones(A0.size()));
      const auto chk = asap::check_equilibrium(A0.entries(), w_avg, cfg.profile, flow);
      report["residuals"] = {{"appraisal", chk.appraisal_residual},
                             {"workload", chk.workload_residual}};
      report["certified"] = chk.pass;
    }
  }
  write_json(out / "equilibrium.json", report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_montecarlo(const std::string& config_path, const fs::path& out,
                   std::optional<std::uint64_t> seed, std::optional<int> workers,
                   std::optional<double> horizon) {
  auto cfg = asap::parse_montecarlo_config(load_config(config_path));
  if (seed) cfg.team.seed = *seed;
  if (workers) cfg.workers = *workers;
  if (horizon) cfg.horizon = *horizon;
  if (cfg.checkpoint_path.empty())
    cfg.checkpoint_path = (out / "checkpoint.jsonl").string();
  const long planned = cfg.sample_count
                           ? *cfg.sample_count
                           : asap::chernoff_sample_size(cfg.epsilon, cfg.xi);
  log(LogLevel::Info, "montecarlo: " + std::to_string(planned) + " samples on " +
                          std::to_string(cfg.workers) + " workers");
  const auto result = asap::run_monte_carlo(cfg);
  json report;
  report["command"] = "montecarlo";
  report["planned_samples"] = planned;
  report["total"] = result.total;
  report["bounded"] = result.bounded;
  report["unbounded"] = result.unbounded;
  report["indeterminate"] = result.indeterminate;
  report["p_hat"] = result.p_hat;
  report["epsilon"] = cfg.epsilon;
  report["xi"] = cfg.xi;
  report["checkpoint"] = cfg.checkpoint_path;
  write_json(out / "montecarlo.json", report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_scenario(const std::string& config_path, const fs::path& out,
                 std::optional<std::uint64_t> seed,
                 std::optional<double> horizon) {
  auto cfg = asap::parse_scenario_config(load_config(config_path));
  if (horizon) cfg.integrator.t_end = *horizon;
  const asap::TeamState initial =
      resolve_initial(cfg.initial, cfg.profile.size(), seed);
  const auto result = asap::run_switching_scenario(
      initial, cfg.profile, cfg.flow, cfg.events, cfg.integrator);

  json intervals = json::array();
  for (std::size_t k = 0; k < result.intervals.size(); ++k) {
    const auto& iv = result.intervals[k];
    const fs::path path = out / ("interval_" + std::to_string(k + 1) + ".csv");
    asap::write_trajectory_csv(path.string(), iv.trajectory);
    json rec;
    rec["members"] = iv.members;
    rec["skills"] = to_vec(iv.skills);
    rec["exponents"] = to_vec(iv.exponents);
    rec["t_begin"] = iv.trajectory.times.front();
    rec["t_end"] = iv.trajectory.times.back();
    rec["trajectory"] = path.string();
    rec["terminal_spread"] = iv.trajectory.performance_spread.back();
    rec["terminal_h_total"] = iv.h_total.back();
    intervals.push_back(std::move(rec));
  }
  json events = json::array();
  for (const auto& ev : result.events) {
    json rec;
    rec["time"] = ev.event.time;
    rec["kind"] = ev.event.kind == asap::SwitchEvent::Kind::Add ? "add" : "remove";
    rec["subject"] = ev.event.subject;
    rec["sponsor"] = ev.event.sponsor;
    rec["workload_sum_before"] = ev.workload_sum_before;
    rec["workload_sum_after"] = ev.workload_sum_after;
    events.push_back(std::move(rec));
  }
  json report;
  report["command"] = "scenario";
  report["intervals"] = intervals;
  report["events"] = events;
  write_json(out / "scenario.json", report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_analyze(const std::vector<std::string>& files,
                const std::string& config_path, const fs::path& out) {
  std::optional<asap::PerformanceProfile> profile;
  if (!config_path.empty()) {
    const json j = load_config(config_path);
    asap::check_config_version(j);
    profile = asap::parse_profile(asap::cfg::field(j, "profile", ""), "profile.");
  }
  json reports = json::array();
  bool all_pass = true;
  for (const auto& f : files) {
    log(LogLevel::Info, "analyze: " + f);
    const asap::Trajectory traj = asap::read_trajectory_csv(f);
    json rep = asap::analyze_trajectory(traj, profile ? &*profile : nullptr);
    all_pass = all_pass && rep["pass"].get<bool>();
    rep["file"] = f;
    reports.push_back(std::move(rep));
  }
  json report;
  report["command"] = "analyze";
  report["trajectories"] = reports;
  report["pass"] = all_pass;
  write_json(out / "analyze.json", report);
  std::cout << report.dump(2) << "\n";
  return all_pass ? 0 : 1;
}

json error_json(const std::string& kind, const std::string& what) {
  return json{{"error", {{"kind", kind}, {"message", what}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive workload dynamics driver"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<double> horizon;
  std::vector<std::string> analyze_files;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", config_path, "JSON config file");
    if (config_required) c->required();
    sub->add_option("--out", out_dir, "output directory (default: .)");
  };

  auto* sim = app.add_subcommand("simulate", "integrate the full model");
  add_common(sim, true);
  sim->add_option("--seed", seed, "override the generator seed");
  sim->add_option("--horizon", horizon, "override the integration horizon");

  auto* eq = app.add_subcommand("equilibrium",
                                "optimal workload and equilibrium construction");
  add_common(eq, true);

  auto* mc = app.add_subcommand("montecarlo", "boundedness sampling campaign");
  add_common(mc, true);
  mc->add_option("--seed", seed, "override the base seed");
  mc->add_option("--workers", workers, "worker thread count");
  mc->add_option("--horizon", horizon, "per-sample integration horizon");

  auto* sc = app.add_subcommand("scenario", "switching (add/remove) scenario");
  add_common(sc, true);
  sc->add_option("--seed", seed, "override the generator seed");
  sc->add_option("--horizon", horizon, "override the final-interval horizon");

  auto* an = app.add_subcommand("analyze", "re-check stored trajectories");
  add_common(an, false);
  an->add_option("files", analyze_files, "trajectory CSV files")
      ->required()
      ->expected(-1);

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    if (sim->parsed()) return cmd_simulate(config_path, out, seed, horizon);
    if (eq->parsed()) return cmd_equilibrium(config_path, out);
    if (mc->parsed()) return cmd_montecarlo(config_path, out, seed, workers, horizon);
    if (sc->parsed()) return cmd_scenario(config_path, out, seed, horizon);
    if (an->parsed()) return cmd_analyze(analyze_files, config_path, out);
  } catch (const asap::IoError& e) {
    std::cout << error_json("config", e.what()).dump(2) << "\n";
    log(LogLevel::Error, e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cout << error_json("validation", e.what()).dump(2) << "\n";
    log(LogLevel::Error, e.what());
    return 2;
  } catch (const asap::SolverError& e) {
    std::cout << error_json("solver", e.what()).dump(2) << "\n";
    log(LogLevel::Error, e.what());
    return 3;
  } catch (const asap::ScenarioError& e) {
    std::cout << error_json("scenario", e.what()).dump(2) << "\n";
    log(LogLevel::Error, e.what());
    return 3;
  } catch (const std::exception& e) {
    std::cout << error_json("internal", e.what()).dump(2) << "\n";
    log(LogLevel::Error, e.what());
    return 4;
  }
  return 0;
}
