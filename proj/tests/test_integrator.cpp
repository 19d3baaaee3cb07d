#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "asap/dynamics.hpp"
#include "asap/experiments.hpp"
#include "asap/integrator.hpp"

using namespace asap;
using Catch::Matchers::WithinAbs;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

TeamState case_study_state() {
  Matrix A(2, 2);
  A << 0.3, 0.7,
       0.6, 0.4;
  return {AppraisalMatrix(A), WorkloadVector(vec({0.3, 0.7})), 0.0};
}

PerformanceProfile case_study_profile() {
  return PerformanceProfile::power_law(vec({0.45, 0.55}), vec({0.9, 0.8}));
}

// Classic fixed-step RK4 on the stacked (A, w) state; independent of the
// adaptive driver (no shared stepping code beyond the rhs).
void rk4_full(Matrix& A, Vector& w, const PerformanceProfile& prof,
              WorkFlow flow, double t_end, double h) {
  const auto steps = static_cast<long>(std::llround(t_end / h));
  Matrix k1A, k2A, k3A, k4A;
  Vector k1w, k2w, k3w, k4w;
  for (long s = 0; s < steps; ++s) {
    rhs_full(A, w, prof, flow, k1A, k1w);
    rhs_full(A + 0.5 * h * k1A, w + 0.5 * h * k1w, prof, flow, k2A, k2w);
    rhs_full(A + 0.5 * h * k2A, w + 0.5 * h * k2w, prof, flow, k3A, k3w);
    rhs_full(A + h * k3A, w + h * k3w, prof, flow, k4A, k4w);
    A += (h / 6.0) * (k1A + 2.0 * k2A + 2.0 * k3A + k4A);
    w += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
  }
}

}  // namespace

TEST_CASE("adaptive integration matches a fixed-step RK4 oracle",
          "[integrator]") {
  const auto prof = case_study_profile();
  for (WorkFlow flow : {WorkFlow::DonorControlled, WorkFlow::AverageAppraisal}) {
    IntegratorOptions opt;
    opt.t_end = 2.0;
    opt.sample_interval = 2.0;
    opt.rel_tol = 1e-11;
    opt.abs_tol = 1e-13;
    const auto traj = integrate(case_study_state(), prof, flow, opt);

    Matrix A = case_study_state().appraisal.entries();
    Vector w = case_study_state().workload.entries();
    rk4_full(A, w, prof, flow, 2.0, 1e-4);

    REQUIRE((traj.appraisals.back() - A).lpNorm<Eigen::Infinity>() < 1e-9);
    REQUIRE((traj.workloads.back() - w).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("samples fall on the requested grid", "[integrator]") {
  IntegratorOptions opt;
  opt.t_end = 5.0;
  opt.sample_interval = 0.5;
  const auto traj = integrate(case_study_state(), case_study_profile(),
                              WorkFlow::DonorControlled, opt);
  REQUIRE(traj.sample_count() == 11);
  for (std::size_t k = 0; k < traj.sample_count(); ++k)
    REQUIRE(traj.times[k] == 0.5 * static_cast<double>(k));
  REQUIRE(traj.deriv_sup_norm.size() == traj.sample_count());
  REQUIRE(traj.performance_spread.size() == traj.sample_count());
  REQUIRE(traj.stats.accepted > 0);
  REQUIRE(traj.stats.evaluations > 6 * traj.stats.accepted);
}

TEST_CASE("dense output is accurate between steps", "[integrator]") {
  // Compare a coarsely sampled run's interior samples against terminal
  // states of exact-horizon runs.
  const auto prof = case_study_profile();
  IntegratorOptions opt;
  opt.t_end = 4.0;
  opt.sample_interval = 0.7;  // incommensurate with step sizes
  opt.rel_tol = 1e-10;
  opt.abs_tol = 1e-12;
  const auto traj = integrate(case_study_state(), prof,
                              WorkFlow::DonorControlled, opt);
  for (std::size_t k = 1; k + 1 < traj.sample_count(); ++k) {
    IntegratorOptions direct;
    direct.t_end = traj.times[k];
    direct.sample_interval = traj.times[k];
    direct.rel_tol = 1e-12;
    direct.abs_tol = 1e-14;
    const auto ref = integrate(case_study_state(), prof,
                               WorkFlow::DonorControlled, direct);
    REQUIRE((traj.appraisals[k] - ref.appraisals.back())
                .lpNorm<Eigen::Infinity>() < 1e-8);
    REQUIRE((traj.workloads[k] - ref.workloads.back())
                .lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("invariants hold over long horizons", "[integrator]") {
  RandomTeamConfig cfg;
  cfg.n = 4;
  cfg.edge_probability = 0.4;
  cfg.seed = 7;
  const auto team = generate_random_team(cfg);
  Rng rng(3);
  const auto prof = sample_power_law_profile(rng, cfg.n);

  IntegratorOptions opt;
  opt.t_end = 100.0;
  opt.sample_interval = 1.0;
  const auto traj = integrate({team.appraisal, team.workload, 0.0}, prof,
                              WorkFlow::DonorControlled, opt);
  const Matrix& A0 = team.appraisal.entries();
  // The integrator tolerates drift up to 10x invariant_tol before it throws;
  // everything the guard admits must still be close to the simplex.
  for (std::size_t k = 0; k < traj.sample_count(); ++k) {
    const Matrix& A = traj.appraisals[k];
    for (int i = 0; i < cfg.n; ++i) {
      REQUIRE_THAT(A.row(i).sum(), WithinAbs(1.0, 1e-8));
      for (int j = 0; j < cfg.n; ++j) {
        if (A0(i, j) == 0.0)
          REQUIRE(A(i, j) == 0.0);  // zeros are pinned exactly
        else
          REQUIRE(A(i, j) > 0.0);
      }
    }
    REQUIRE_THAT(traj.workloads[k].sum(), WithinAbs(1.0, 1e-8));
    REQUIRE(traj.workloads[k].minCoeff() > 0.0);
  }
}

TEST_CASE("renormalization keeps sums at machine precision", "[integrator]") {
  IntegratorOptions opt;
  opt.t_end = 200.0;
  opt.sample_interval = 10.0;
  opt.renormalize = true;
  const auto traj = integrate(case_study_state(), case_study_profile(),
                              WorkFlow::DonorControlled, opt);
  for (std::size_t k = 0; k < traj.sample_count(); ++k) {
    REQUIRE_THAT(traj.appraisals[k].row(0).sum(), WithinAbs(1.0, 5e-15));
    REQUIRE_THAT(traj.workloads[k].sum(), WithinAbs(1.0, 5e-15));
  }
}

TEST_CASE("convergence detection and early stop", "[integrator]") {
  IntegratorOptions opt;
  opt.t_end = 400.0;
  opt.sample_interval = 1.0;
  // Long horizon: keep accumulated drift well inside the divergence guard.
  opt.rel_tol = 1e-10;
  opt.abs_tol = 1e-12;
  const auto traj = integrate(case_study_state(), case_study_profile(),
                              WorkFlow::DonorControlled, opt);
  const auto conv = detect_convergence(traj);
  REQUIRE(conv.has_value());
  REQUIRE(conv->time > 0.0);
  REQUIRE(conv->time < 400.0);
  // A looser threshold can only fire earlier.
  const auto loose = detect_convergence(traj, 1e-4);
  REQUIRE(loose.has_value());
  REQUIRE(loose->time <= conv->time);

  IntegratorOptions stop = opt;
  stop.stop_when_converged = true;
  stop.stop_tol = 1e-10;
  const auto early = integrate(case_study_state(), case_study_profile(),
                               WorkFlow::DonorControlled, stop);
  REQUIRE(early.termination == Trajectory::Termination::ConvergedEarly);
  REQUIRE(early.times.back() < 400.0);
  REQUIRE(early.deriv_sup_norm.back() < 1e-10);

  IntegratorOptions shortrun = opt;
  shortrun.t_end = 0.5;
  const auto brief = integrate(case_study_state(), case_study_profile(),
                               WorkFlow::DonorControlled, shortrun);
  REQUIRE_FALSE(detect_convergence(brief).has_value());
}

TEST_CASE("reduced integration tracks scales and caps", "[integrator]") {
  RandomTeamConfig cfg;
  cfg.n = 4;
  cfg.edge_probability = 0.5;
  cfg.seed = 21;
  const auto team = generate_random_team(cfg);
  Rng rng(5);
  const auto prof = sample_power_law_profile(rng, cfg.n);

  IntegratorOptions opt;
  opt.t_end = 50.0;
  opt.sample_interval = 1.0;
  const ReducedState init{team.appraisal, Vector::Ones(cfg.n), team.workload, 0.0};
  const auto traj = integrate_reduced(init, prof, WorkFlow::DonorControlled, opt);
  REQUIRE(traj.reduced());
  REQUIRE(traj.scales.size() == traj.sample_count());
  REQUIRE(traj.max_scale_sup >= 1.0);
  for (const auto& v : traj.scales) REQUIRE(v.minCoeff() > 0.0);

  IntegratorOptions capped = opt;
  capped.stop_scale_cap = 1.0 + 1e-9;  // fires almost immediately
  const auto hit = integrate_reduced(init, prof, WorkFlow::DonorControlled, capped);
  REQUIRE(hit.termination == Trajectory::Termination::ScaleCapReached);
  REQUIRE(hit.max_scale_sup >= capped.stop_scale_cap);
  REQUIRE(hit.times.back() < 50.0);
}

TEST_CASE("reduced and full runs agree through reconstruction", "[integrator]") {
  RandomTeamConfig cfg;
  cfg.n = 5;
  cfg.edge_probability = 0.4;
  cfg.seed = 33;
  const auto team = generate_random_team(cfg);
  Rng rng(9);
  const auto prof = sample_power_law_profile(rng, cfg.n);

  IntegratorOptions opt;
  opt.t_end = 20.0;
  opt.sample_interval = 1.0;
  opt.rel_tol = 1e-10;
  opt.abs_tol = 1e-12;
  const auto full = integrate({team.appraisal, team.workload, 0.0}, prof,
                              WorkFlow::DonorControlled, opt);
  const ReducedState init{team.appraisal, Vector::Ones(cfg.n), team.workload, 0.0};
  const auto red = integrate_reduced(init, prof, WorkFlow::DonorControlled, opt);
  REQUIRE(full.sample_count() == red.sample_count());
  for (std::size_t k = 0; k < full.sample_count(); ++k) {
    const Matrix Ak = reconstruct_appraisal(team.appraisal.entries(), red.scales[k]);
    REQUIRE((full.appraisals[k] - Ak).lpNorm<Eigen::Infinity>() < 1e-7);
    REQUIRE((full.workloads[k] - red.workloads[k]).lpNorm<Eigen::Infinity>() < 1e-7);
  }
}

TEST_CASE("step limit raises a solver error", "[integrator]") {
  IntegratorOptions opt;
  opt.t_end = 100.0;
  opt.max_steps = 3;
  REQUIRE_THROWS_AS(integrate(case_study_state(), case_study_profile(),
                              WorkFlow::DonorControlled, opt),
                    SolverError);
}
