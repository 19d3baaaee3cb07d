// Certificates along trajectories: the performance-entropy Lyapunov function
// and its Lie derivative, the reduced-order variants, the workload
// unreachability certificate, and rank-1 / boundedness checks used by the
// Monte Carlo study.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "asap/graph.hpp"
#include "asap/integrator.hpp"
#include "asap/types.hpp"

namespace asap {

/// Performance entropy
///   V(A, w) = -sum_i [ int_{w*_i}^{w_i} p_i
///                      + w*_i sum_{(i,k) in E(A0)} a*_ik ln(a_ik / a*_ik) ]
/// relative to an equilibrium pair (A*, w*) with pattern(A*) = pattern(A).
/// Nonnegative, zero exactly at (A*, w*).
inline double performance_entropy(const Matrix& A, const Vector& w,
                                  const PerformanceProfile& profile,
                                  const Matrix& A_star, const Vector& w_opt) {
  const int n = static_cast<int>(A.rows());
  detail::require(A.cols() == n && A_star.rows() == n && A_star.cols() == n &&
                      w.size() == n && w_opt.size() == n && profile.size() == n,
                  "performance_entropy: dimension mismatch");
  detail::require(profile.has_antiderivative(),
                  "performance_entropy: profile lacks antiderivatives");
  double v = 0.0;
  for (int i = 0; i < n; ++i) {
    v -= profile.antiderivative(i, w[i]) - profile.antiderivative(i, w_opt[i]);
    double kl = 0.0;
    for (int k = 0; k < n; ++k) {
      const double star = A_star(i, k);
      if (star <= 0.0) continue;
      const double a = A(i, k);
      if (!(a > 0.0))
        throw std::domain_error(
            "performance_entropy: entry (" + std::to_string(i) + "," +
            std::to_string(k) + ") vanished off the equilibrium pattern");
      kl += star * std::log(a / star);
    }
    v -= w_opt[i] * kl;
  }
  return v;
}

/// Lie derivative of V along the donor-controlled flow:
///   dV/dt = p(w)^T (I - A^T) (w - w_opt).
inline double lie_derivative_V(const Matrix& A, const Vector& w,
                               const PerformanceProfile& profile,
                               const Vector& w_opt) {
  const int n = static_cast<int>(A.rows());
  detail::require(A.cols() == n && w.size() == n && w_opt.size() == n &&
                      profile.size() == n,
                  "lie_derivative_V: dimension mismatch");
  const Vector p = profile.values(w);
  const Vector d = w - w_opt;
  return p.dot(d - A.transpose() * d);
}

/// Reduced-coordinate Lyapunov function
///   donor    Vbar(v, w) = -sum_i [ int_{w*_i}^{w_i} p_i + w*_i ln v_i ]
///   average  Vbar(v, w) = donor + (1/n) sum_i ln((A0 v)_i)
/// Along either flow dVbar/dt = p(w)^T (w - w_opt) <= 0.
inline double reduced_lyapunov(const Matrix& A0, const Vector& v,
                               const Vector& w,
                               const PerformanceProfile& profile,
                               const Vector& w_opt, WorkFlow variant) {
  const int n = static_cast<int>(A0.rows());
  detail::require(A0.cols() == n && v.size() == n && w.size() == n &&
                      w_opt.size() == n && profile.size() == n,
                  "reduced_lyapunov: dimension mismatch");
  detail::require(profile.has_antiderivative(),
                  "reduced_lyapunov: profile lacks antiderivatives");
  double val = 0.0;
  for (int i = 0; i < n; ++i) {
    detail::require(v[i] > 0.0, "reduced_lyapunov: scales must be positive");
    val -= profile.antiderivative(i, w[i]) - profile.antiderivative(i, w_opt[i]);
    val -= w_opt[i] * std::log(v[i]);
  }
  if (variant == WorkFlow::AverageAppraisal) {
    const Vector u = A0 * v;
    for (int i = 0; i < n; ++i) {
      detail::require(u[i] > 0.0, "reduced_lyapunov: A0 v must be positive");
      val += std::log(u[i]) / static_cast<double>(n);
    }
  }
  return val;
}

/// Workload unreachability certificate (average-appraisal flow).  Member i is
/// flagged when w_opt_i exceeds both its reachable ceiling indeg_i / n (in-
/// degree counts the self-loop) and its initial workload; flagged members can
/// never reach their optimal share, so w(t) != w_opt for all t.
struct FailureCertificate {
  std::vector<int> members;  // flagged indices
  Vector bounds;             // per-member ceiling max(indeg_i / n, w0_i)
  bool triggered() const { return !members.empty(); }
};

inline FailureCertificate failure_condition(const Matrix& A0, const Vector& w0,
                                            const Vector& w_opt) {
  const int n = static_cast<int>(A0.rows());
  detail::require(A0.cols() == n && w0.size() == n && w_opt.size() == n,
                  "failure_condition: dimension mismatch");
  FailureCertificate cert;
  cert.bounds.resize(n);
  for (int i = 0; i < n; ++i) {
    int indeg = 0;
    for (int k = 0; k < n; ++k)
      if (A0(k, i) > 0.0) ++indeg;
    cert.bounds[i] = std::max(static_cast<double>(indeg) / n, w0[i]);
    if (w_opt[i] > cert.bounds[i]) cert.members.push_back(i);
  }
  return cert;
}

/// sigma_2 / sigma_1 of the elementwise quotient A ./ A0; zero for an exact
/// rank-1 quotient.  Requires A0 strictly positive.
inline double rank_one_ratio_check(const Matrix& A, const Matrix& A0) {
  detail::require(A.rows() == A0.rows() && A.cols() == A0.cols() &&
                      A.rows() == A.cols(),
                  "rank_one_ratio_check: dimension mismatch");
  detail::require(A0.minCoeff() > 0.0,
                  "rank_one_ratio_check: A0 must be entrywise positive");
  return detail::svd_ratio(A.cwiseQuotient(A0));
}

/// 1 iff the reduced scales stayed finite and strictly below v_cap for the
/// whole run.  Integration failures never reach this point; the Monte Carlo
/// driver reports those as indeterminate.
inline int boundedness_indicator(const Trajectory& traj, double v_cap = 1e9) {
  detail::require(traj.reduced(),
                  "boundedness_indicator: trajectory is not a reduced run");
  detail::require(v_cap > 0.0, "boundedness_indicator: cap must be positive");
  if (traj.termination == Trajectory::Termination::ScaleCapReached) return 0;
  if (!std::isfinite(traj.max_scale_sup)) return 0;
  return traj.max_scale_sup < v_cap ? 1 : 0;
}

/// Fill the Lyapunov channel of a full-model trajectory with V relative to
/// (A*, w_opt).
inline void attach_lyapunov(Trajectory& traj, const PerformanceProfile& profile,
                            const Matrix& A_star, const Vector& w_opt) {
  detail::require(!traj.reduced(), "attach_lyapunov: expected a full-model run");
  traj.lyapunov.clear();
  traj.lyapunov.reserve(traj.times.size());
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    traj.lyapunov.push_back(performance_entropy(
        traj.appraisals[k], traj.workloads[k], profile, A_star, w_opt));
}

/// Fill the Lyapunov channel of a reduced-model trajectory with Vbar.
inline void attach_reduced_lyapunov(Trajectory& traj,
                                    const PerformanceProfile& profile,
                                    const Vector& w_opt, WorkFlow variant) {
  detail::require(traj.reduced(),
                  "attach_reduced_lyapunov: expected a reduced run");
  traj.lyapunov.clear();
  traj.lyapunov.reserve(traj.times.size());
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    traj.lyapunov.push_back(reduced_lyapunov(traj.initial_appraisal,
                                             traj.scales[k], traj.workloads[k],
                                             profile, w_opt, variant));
}

}  // namespace asap
