// Adaptive Dormand-Prince 5(4) integration of the full and reduced models:
// embedded error control with PI step-size stabilization, 4th-order dense
// output for uniform sampling, invariant monitoring (row sums, simplex,
// positivity) and per-sample diagnostic channels.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "asap/dynamics.hpp"
#include "asap/graph.hpp"
#include "asap/types.hpp"

namespace asap {

struct IntegratorOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double t_end = 1000.0;
  double sample_interval = 1.0;
  double max_step = 0.0;      // 0 = no bound beyond the remaining span
  double initial_step = 0.0;  // 0 = automatic
  double invariant_tol = kInvariantTol;  // drift beyond 10x this diverges
  bool renormalize = false;   // project rows/workload back to sum 1 each step
  // Early termination (used by long Monte Carlo runs): stop once the RHS
  // sup-norm and performance spread fall below stop_tol, or once the reduced
  // scale sup-norm reaches stop_scale_cap (0 disables either rule).
  bool stop_when_converged = false;
  double stop_tol = 1e-12;
  double stop_scale_cap = 0.0;
  std::int64_t max_steps = 10000000;
};

struct StepStats {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t evaluations = 0;
};

/// Sampled solution of a full or reduced run plus per-sample diagnostics.
/// Full runs fill `appraisals`; reduced runs fill `scales` (A(t) is then
/// reconstruct_appraisal(initial_appraisal, scales[k])).
struct Trajectory {
  enum class Termination { ReachedEnd, ConvergedEarly, ScaleCapReached };

  std::vector<double> times;
  std::vector<Matrix> appraisals;
  std::vector<Vector> scales;
  std::vector<Vector> workloads;
  Matrix initial_appraisal;
  WorkFlow flow = WorkFlow::DonorControlled;

  // Diagnostic channels, aligned with `times`.
  std::vector<double> deriv_sup_norm;
  std::vector<double> performance_spread;
  std::vector<double> lyapunov;  // filled post-hoc by analysis helpers
  std::vector<double> rank_one_ratio;
  std::vector<std::vector<double>> cycle_constants;  // [sample][cycle]
  std::vector<Cycle> tracked_cycles;

  double max_scale_sup = 0.0;  // sup over accepted steps of |v|_inf (reduced)
  Termination termination = Termination::ReachedEnd;
  StepStats stats;

  bool reduced() const { return !scales.empty(); }
  std::size_t sample_count() const { return times.size(); }
  int team_size() const { return static_cast<int>(workloads.empty() ? 0 : workloads.front().size()); }
};

class IntegrationDivergedError : public std::runtime_error {
 public:
  IntegrationDivergedError(const std::string& msg, Trajectory partial_)
      : std::runtime_error(msg), partial(std::move(partial_)) {}
  Trajectory partial;
};

/// Which optional channels the drivers should record.
struct DiagnosticsRequest {
  bool cycle_constants = false;  // constants of the basis cycles of A0
  bool rank_one_ratio = false;   // sigma2/sigma1 of A ./ A0 (needs A0 > 0)
};

namespace detail {

// Dormand-Prince 5(4) tableau, error weights and dense-output weights.
namespace dp {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                        c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                        e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0,
                        d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0,
                        d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0,
                        d7 = 69997945.0 / 29380423.0;
}  // namespace dp

enum class StepAction { Continue, StateModified, Stop };

struct OdeHooks {
  // Dense sample (interpolated interior points and the exact endpoints).
  std::function<void(double, const Vector&)> on_sample;
  // After each accepted step: may inspect/modify y (deriv_sup is |f(t,y)|_inf
  // before any modification).  StateModified forces a fresh FSAL stage.
  std::function<StepAction(double, Vector&, double)> post_step;
};

// Integrates y' = f(t, y) from t0 to opt.t_end, sampling every
// opt.sample_interval.  Returns (stats, final time, termination-was-early).
struct OdeOutcome {
  StepStats stats;
  double t_final = 0.0;
  bool stopped_early = false;
};

inline OdeOutcome integrate_ode(
    const std::function<void(double, const Vector&, Vector&)>& f, Vector y,
    double t0, const IntegratorOptions& opt, const OdeHooks& hooks) {
  require(opt.rel_tol > 0 && opt.abs_tol > 0, "integrate: tolerances must be positive");
  require(opt.sample_interval > 0, "integrate: sample interval must be positive");
  require(opt.t_end >= t0, "integrate: t_end before start time");

  const auto n = y.size();
  OdeOutcome out;
  StepStats& st = out.stats;
  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n),
      yerr(n);
  Vector rc1(n), rc2(n), rc3(n), rc4(n), rc5(n), yint(n);

  auto eval = [&](double t, const Vector& yy, Vector& dy) {
    f(t, yy, dy);
    ++st.evaluations;
  };

  double t = t0;
  if (hooks.on_sample) hooks.on_sample(t0, y);
  if (opt.t_end == t0) {
    out.t_final = t0;
    return out;
  }

  eval(t, y, k1);

  const double span = opt.t_end - t0;
  const double hmax = opt.max_step > 0 ? std::min(opt.max_step, span) : span;

  // Initial step: standard two-derivative heuristic.
  double h = opt.initial_step;
  if (h <= 0) {
    double dnf = 0, dny = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opt.abs_tol + opt.rel_tol * std::abs(y[i]);
      dnf += (k1[i] / sc) * (k1[i] / sc);
      dny += (y[i] / sc) * (y[i] / sc);
    }
    h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
    h = std::min(h, hmax);
    ytmp = y + h * k1;
    eval(t + h, ytmp, k2);
    double der2 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opt.abs_tol + opt.rel_tol * std::abs(y[i]);
      der2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc);
    }
    der2 = std::sqrt(der2) / h;
    const double der12 = std::max(der2, std::sqrt(dnf));
    const double h1 =
        der12 <= 1e-15 ? std::max(1e-6, h * 1e-3)
                       : std::pow(0.01 / der12, 0.2);
    h = std::min({100.0 * h, h1, hmax});
  }

  // PI controller constants (Hairer's DOPRI5 defaults).
  const double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
  const double facc1 = 5.0, facc2 = 0.1;  // clamp of h_old/h_new
  double facold = 1e-4;
  bool last = false, rejected = false;
  std::int64_t next_sample = 1;
  const double sample_eps = 1e-9 * opt.sample_interval;

  while (!last) {
    if (st.accepted + st.rejected >= opt.max_steps)
      throw SolverError("integrate: step limit exceeded at t = " +
                        std::to_string(t));
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0))
      throw SolverError("integrate: step size underflow at t = " +
                        std::to_string(t) + " (h = " + std::to_string(h) +
                        "); system too stiff for the tolerance");
    if (t + h >= opt.t_end) {
      h = opt.t_end - t;
      last = true;
    }

    using namespace dp;
    ytmp = y + h * (a21 * k1);
    eval(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    eval(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    eval(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    eval(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    eval(t + h, ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    eval(t + h, ynew, k7);
    yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc =
          opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      err += (yerr[i] / sc) * (yerr[i] / sc);
    }
    err = std::sqrt(err / static_cast<double>(n));
    if (!std::isfinite(err)) err = 2.0;  // force rejection on overflow

    const double fac11 = std::pow(err, expo1);
    if (err <= 1.0) {
      // Accepted.
      facold = std::max(err, 1e-4);
      double fac = fac11 / std::pow(facold, beta);
      fac = std::max(facc2, std::min(facc1, fac / safe));
      double hnew = h / fac;

      const double tnew = t + h;
      // Dense samples strictly inside (t0, t_end).
      if (hooks.on_sample) {
        double ts = t0 + static_cast<double>(next_sample) * opt.sample_interval;
        if (ts <= tnew + sample_eps && ts < opt.t_end - sample_eps) {
          using namespace dp;
          rc1 = y;
          rc2 = ynew - y;
          rc3 = h * k1 - rc2;
          rc4 = rc2 - h * k7 - rc3;
          rc5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
          while (ts <= tnew + sample_eps && ts < opt.t_end - sample_eps) {
            const double th = (ts - t) / h;
            yint = rc1 + th * (rc2 + (1.0 - th) * (rc3 + th * (rc4 + (1.0 - th) * rc5)));
            hooks.on_sample(ts, yint);
            ++next_sample;
            ts = t0 + static_cast<double>(next_sample) * opt.sample_interval;
          }
        }
      }

      t = tnew;
      y.swap(ynew);
      ++st.accepted;

      double deriv_sup = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        deriv_sup = std::max(deriv_sup, std::abs(k7[i]));

      StepAction act = StepAction::Continue;
      if (hooks.post_step) act = hooks.post_step(t, y, deriv_sup);
      if (act == StepAction::StateModified)
        eval(t, y, k1);  // state changed; FSAL stage is stale
      else
        k1.swap(k7);
      if (act == StepAction::Stop) {
        last = true;
        out.stopped_early = true;
        break;
      }

      if (rejected) hnew = std::min(hnew, h);
      rejected = false;
      h = std::min(hnew, hmax);
    } else {
      h /= std::min(facc1, fac11 / safe);
      rejected = true;
      last = false;
      ++st.rejected;
    }
  }

  if (hooks.on_sample) hooks.on_sample(t, y);
  out.t_final = t;
  return out;
}

inline double spread(const Vector& p) {
  return p.maxCoeff() - p.minCoeff();
}

// Quotient-matrix second-to-first singular value ratio; see analysis.hpp for
// the public wrapper with precondition checks.
inline double svd_ratio(const Matrix& Q) {
  Eigen::JacobiSVD<Matrix> svd(Q);
  const auto& s = svd.singularValues();
  if (s.size() < 2 || !(s[0] > 0.0)) return 0.0;
  return s[1] / s[0];
}

}  // namespace detail

/// Earliest sample at which the trajectory is numerically converged: RHS
/// sup-norm and performance spread both below tol.
struct ConvergencePoint {
  double time = 0.0;
  std::size_t sample = 0;
};

inline std::optional<ConvergencePoint> detect_convergence(
    const Trajectory& traj, double tol = kConvergenceTol) {
  detail::require(traj.deriv_sup_norm.size() == traj.times.size() &&
                      traj.performance_spread.size() == traj.times.size(),
                  "detect_convergence: trajectory lacks diagnostic channels");
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    if (traj.deriv_sup_norm[k] < tol && traj.performance_spread[k] < tol)
      return ConvergencePoint{traj.times[k], k};
  return std::nullopt;
}

namespace detail {

inline double invariant_drift_full(const Matrix& A, const Vector& w) {
  double drift = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      const double a = A(i, j);
      if (!std::isfinite(a)) return std::numeric_limits<double>::infinity();
      row += a;
      if (a < 0.0) drift = std::max(drift, -a);
    }
    drift = std::max(drift, std::abs(row - 1.0));
  }
  double ws = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i])) return std::numeric_limits<double>::infinity();
    ws += w[i];
    if (w[i] < 0.0) drift = std::max(drift, -w[i]);
  }
  return std::max(drift, std::abs(ws - 1.0));
}

}  // namespace detail

/// Integrate the full model from `state` to options.t_end.  Snapshots are
/// taken every sample_interval plus at both endpoints.  Throws
/// IntegrationDivergedError (with the partial trajectory) if the state drifts
/// beyond 10x the invariant tolerance, SolverError on step-size underflow.
inline Trajectory integrate(const TeamState& state,
                            const PerformanceProfile& profile, WorkFlow flow,
                            const IntegratorOptions& options = {},
                            const DiagnosticsRequest& diagnostics = {}) {
  const int n = state.size();
  detail::require(profile.size() == n, "integrate: profile size mismatch");
  const Matrix& A0 = state.appraisal.entries();

  Trajectory traj;
  traj.initial_appraisal = A0;
  traj.flow = flow;
  if (diagnostics.cycle_constants)
    traj.tracked_cycles = cycle_basis(pattern_of(A0)).cycles;
  if (diagnostics.rank_one_ratio)
    detail::require(A0.minCoeff() > 0.0,
                    "integrate: rank-one ratio diagnostics need A0 > 0");

  // Pattern mask for pinning exact zeros (multiplicative structure keeps
  // them at zero; the mask guards against any drift regardless).
  std::vector<char> zero(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (A0(i, j) == 0.0) zero[static_cast<std::size_t>(i) * n + j] = 1;

  Vector y(n * n + n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) y[i * n + j] = A0(i, j);
  y.segment(n * n, n) = state.workload.entries();

  Matrix A(n, n), dA(n, n);
  Vector w(n), dw(n);
  auto unpack = [&](const Vector& yy, Matrix& Am, Vector& wm) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Am(i, j) = yy[i * n + j];
    wm = yy.segment(n * n, n);
  };

  auto rhs = [&](double, const Vector& yy, Vector& dy) {
    unpack(yy, A, w);
    rhs_full(A, w, profile, flow, dA, dw);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) dy[i * n + j] = dA(i, j);
    dy.segment(n * n, n) = dw;
  };

  Matrix As(n, n), dAs(n, n);
  Vector ws(n), dws(n), ps(n);
  auto sample = [&](double t, const Vector& yy) {
    unpack(yy, As, ws);
    traj.times.push_back(t);
    traj.appraisals.push_back(As);
    traj.workloads.push_back(ws);
    rhs_full(As, ws, profile, flow, dAs, dws);
    double sup = dws.lpNorm<Eigen::Infinity>();
    sup = std::max(sup, dAs.lpNorm<Eigen::Infinity>());
    traj.deriv_sup_norm.push_back(sup);
    ps = profile.values(ws);
    traj.performance_spread.push_back(detail::spread(ps));
    if (diagnostics.cycle_constants) {
      std::vector<double> cs;
      cs.reserve(traj.tracked_cycles.size());
      for (const auto& r : traj.tracked_cycles) {
        double c;
        try {
          c = cycle_constant(As, r);
        } catch (const std::domain_error&) {
          c = std::numeric_limits<double>::quiet_NaN();
        }
        cs.push_back(c);
      }
      traj.cycle_constants.push_back(std::move(cs));
    }
    if (diagnostics.rank_one_ratio) {
      Matrix Q = As.cwiseQuotient(A0);
      traj.rank_one_ratio.push_back(detail::svd_ratio(Q));
    }
  };

  Matrix Am(n, n);
  Vector wm(n);
  auto post = [&](double t, Vector& yy, double deriv_sup) {
    // Pin pattern zeros.
    bool modified = false;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (zero[static_cast<std::size_t>(i) * n + j] && yy[i * n + j] != 0.0) {
          yy[i * n + j] = 0.0;
          modified = true;
        }
    unpack(yy, Am, wm);
    const double drift = detail::invariant_drift_full(Am, wm);
    if (drift > 10.0 * options.invariant_tol) {
      throw IntegrationDivergedError(
          "integrate: invariant drift " + std::to_string(drift) + " at t = " +
              std::to_string(t) + " exceeds 10 x " +
              std::to_string(options.invariant_tol),
          traj);
    }
    if (options.renormalize) {
      for (int i = 0; i < n; ++i) {
        const double row = Am.row(i).sum();
        for (int j = 0; j < n; ++j) yy[i * n + j] = Am(i, j) / row;
      }
      const double wsum = wm.sum();
      for (int i = 0; i < n; ++i) yy[n * n + i] = wm[i] / wsum;
      modified = true;
    }
    if (options.stop_when_converged && deriv_sup < options.stop_tol) {
      ps = profile.values(wm);
      if (detail::spread(ps) < options.stop_tol)
        return detail::StepAction::Stop;
    }
    return modified ? detail::StepAction::StateModified
                    : detail::StepAction::Continue;
  };

  detail::OdeHooks hooks;
  hooks.on_sample = sample;
  hooks.post_step = post;
  const auto outcome =
      detail::integrate_ode(rhs, std::move(y), state.time, options, hooks);
  traj.stats = outcome.stats;
  traj.termination = outcome.stopped_early
                         ? Trajectory::Termination::ConvergedEarly
                         : Trajectory::Termination::ReachedEnd;
  return traj;
}

/// Integrate the reduced model (v, w).  Tracks the running sup of |v|_inf in
/// max_scale_sup; with stop_scale_cap > 0 the run halts once the cap is hit
/// (termination = ScaleCapReached).
inline Trajectory integrate_reduced(const ReducedState& state,
                                    const PerformanceProfile& profile,
                                    WorkFlow flow,
                                    const IntegratorOptions& options = {},
                                    const DiagnosticsRequest& diagnostics = {}) {
  const int n = state.size();
  detail::require(profile.size() == n, "integrate_reduced: profile size mismatch");
  const Matrix A0 = state.initial.entries();

  Trajectory traj;
  traj.initial_appraisal = A0;
  traj.flow = flow;
  if (diagnostics.cycle_constants)
    traj.tracked_cycles = cycle_basis(pattern_of(A0)).cycles;

  Vector y(2 * n);
  y.segment(0, n) = state.v;
  y.segment(n, n) = state.workload.entries();

  Vector v(n), w(n), dv(n), dw(n), ps(n);
  auto rhs = [&](double, const Vector& yy, Vector& dy) {
    v = yy.segment(0, n);
    w = yy.segment(n, n);
    rhs_reduced(A0, v, w, profile, flow, dv, dw);
    dy.segment(0, n) = dv;
    dy.segment(n, n) = dw;
  };

  Vector vs(n), wss(n), dvs(n), dwss(n);
  auto sample = [&](double t, const Vector& yy) {
    vs = yy.segment(0, n);
    wss = yy.segment(n, n);
    traj.times.push_back(t);
    traj.scales.push_back(vs);
    traj.workloads.push_back(wss);
    traj.max_scale_sup =
        std::max(traj.max_scale_sup, vs.lpNorm<Eigen::Infinity>());
    rhs_reduced(A0, vs, wss, profile, flow, dvs, dwss);
    traj.deriv_sup_norm.push_back(
        std::max(dvs.lpNorm<Eigen::Infinity>(), dwss.lpNorm<Eigen::Infinity>()));
    ps = profile.values(wss);
    traj.performance_spread.push_back(detail::spread(ps));
    if (diagnostics.cycle_constants) {
      const Matrix As = reconstruct_appraisal(A0, vs);
      std::vector<double> cs;
      cs.reserve(traj.tracked_cycles.size());
      for (const auto& r : traj.tracked_cycles) cs.push_back(cycle_constant(As, r));
      traj.cycle_constants.push_back(std::move(cs));
    }
    if (diagnostics.rank_one_ratio) {
      const Matrix As = reconstruct_appraisal(A0, vs);
      traj.rank_one_ratio.push_back(detail::svd_ratio(As.cwiseQuotient(A0)));
    }
  };

  bool cap_hit = false;
  auto post = [&](double t, Vector& yy, double deriv_sup) {
    double vsup = 0.0, wsum = 0.0, drift = 0.0;
    for (int i = 0; i < n; ++i) {
      const double vi = yy[i], wi = yy[n + i];
      if (!std::isfinite(vi) || !std::isfinite(wi))
        drift = std::numeric_limits<double>::infinity();
      if (vi <= 0.0) drift = std::max(drift, -vi + 1e-300);
      if (wi < 0.0) drift = std::max(drift, -wi);
      vsup = std::max(vsup, std::abs(vi));
      wsum += wi;
    }
    drift = std::max(drift, std::abs(wsum - 1.0));
    traj.max_scale_sup = std::max(traj.max_scale_sup, vsup);
    if (drift > 10.0 * options.invariant_tol)
      throw IntegrationDivergedError(
          "integrate_reduced: invariant drift " + std::to_string(drift) +
              " at t = " + std::to_string(t),
          traj);
    if (options.stop_scale_cap > 0.0 && vsup >= options.stop_scale_cap) {
      cap_hit = true;
      return detail::StepAction::Stop;
    }
    if (options.stop_when_converged && deriv_sup < options.stop_tol) {
      w = yy.segment(n, n);
      ps = profile.values(w);
      if (detail::spread(ps) < options.stop_tol)
        return detail::StepAction::Stop;
    }
    return detail::StepAction::Continue;
  };

  detail::OdeHooks hooks;
  hooks.on_sample = sample;
  hooks.post_step = post;
  const auto outcome =
      detail::integrate_ode(rhs, std::move(y), state.time, options, hooks);
  traj.stats = outcome.stats;
  traj.termination = cap_hit ? Trajectory::Termination::ScaleCapReached
                     : outcome.stopped_early
                         ? Trajectory::Termination::ConvergedEarly
                         : Trajectory::Termination::ReachedEnd;
  return traj;
}

}  // namespace asap
