// Optimal workload, dominant left eigenvectors and equilibrium appraisal
// matrices.  The optimal split solves p_i(w_i) = p* on the simplex; the
// matrix construction places any interior target as the dominant left
// eigenvector of a matrix sharing the sparsity pattern of A0.
#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "asap/graph.hpp"
#include "asap/types.hpp"

namespace asap {

struct OptimalWorkload {
  Vector w;
  double p_star = 0.0;
};

/// Unique interior workload equalizing all performance values.  Root of the
/// strictly increasing g(w1) = sum_i p_i^{-1}(p_1(w1)) - 1 by bisection on
/// [delta, 1 - delta]; the i = 1 term is w1 itself.
inline OptimalWorkload solve_optimal_workload(const PerformanceProfile& profile,
                                              double tol = 1e-12,
                                              double delta = 1e-14) {
  const int n = profile.size();
  detail::require(tol > 0 && delta > 0 && delta < 0.5,
                  "solve_optimal_workload: bad tolerance/bracket");
  if (n == 1) {
    OptimalWorkload r;
    r.w = Vector::Ones(1);
    r.p_star = profile.value(0, 1.0);
    return r;
  }
  auto g = [&](double w1) {
    const double p = profile.value(0, w1);
    double s = w1;
    for (int i = 1; i < n; ++i) s += profile.inverse(i, p);
    return s - 1.0;
  };
  double lo = delta, hi = 1.0 - delta;
  double glo = g(lo), ghi = g(hi);
  if (!(glo < 0.0) || !(ghi > 0.0))
    throw SolverError("solve_optimal_workload: no sign change on bracket [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  const double w1 = 0.5 * (lo + hi);
  const double p_star = profile.value(0, w1);
  Vector w(n);
  w[0] = w1;
  for (int i = 1; i < n; ++i) w[i] = profile.inverse(i, p_star);
  w /= w.sum();  // absorb the residual bisection gap

  OptimalWorkload r;
  r.w = std::move(w);
  r.p_star = p_star;
  for (int i = 0; i < n; ++i) {
    const double pi = profile.value(i, r.w[i]);
    if (std::abs(pi - r.p_star) > tol * r.p_star)
      throw SolverError("solve_optimal_workload: equalization residual " +
                        std::to_string(std::abs(pi - r.p_star)) +
                        " exceeds tolerance");
  }
  return r;
}

/// Dominant left eigenvector of a row-stochastic irreducible matrix,
/// normalized to sum 1.  Power iteration from the uniform vector; converges
/// at the subdominant-eigenvalue rate.
inline Vector left_dominant_eigenvector(const Matrix& A, double tol = 1e-13,
                                        long max_iter = 100000) {
  const int n = static_cast<int>(A.rows());
  detail::require(A.cols() == n && n > 0, "eigenvector: matrix must be square");
  for (int i = 0; i < n; ++i)
    detail::require(std::abs(A.row(i).sum() - 1.0) < 1e-6,
                    "eigenvector: matrix must be row-stochastic");
  detail::require(is_strongly_connected(pattern_of(A)),
                  "eigenvector: matrix must be irreducible");
  Vector x = Vector::Constant(n, 1.0 / n), next(n);
  for (long it = 0; it < max_iter; ++it) {
    next = A.transpose() * x;
    next /= next.sum();
    if ((next - x).lpNorm<Eigen::Infinity>() < tol) return next;
    x.swap(next);
  }
  throw SolverError("eigenvector: power iteration did not converge in " +
                    std::to_string(max_iter) + " iterations");
}

/// Equilibrium matrix with prescribed dominant left eigenvector:
///   A* = diag(a_d) + (I - diag(a_d)) A0,
///   a_d[i] = 1 - sigma wbar_i / w_i,  sigma = eps / max_i(wbar_i / w_i),
/// where wbar is the dominant left eigenvector of A0.  A* keeps the pattern
/// of A0; its diagonal lies in [1 - eps, 1).
inline AppraisalMatrix construct_equilibrium_matrix(const AppraisalMatrix& A0,
                                                    const Vector& w_opt,
                                                    double eps = 0.5) {
  const int n = A0.size();
  detail::require(w_opt.size() == n,
                  "construct_equilibrium: eigenvector size mismatch");
  detail::require(eps > 0.0 && eps < 1.0,
                  "construct_equilibrium: eps must lie in (0,1)");
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    detail::require(w_opt[i] > 0.0, "construct_equilibrium: target must be interior");
    sum += w_opt[i];
  }
  detail::require(std::abs(sum - 1.0) <= 1e-6,
                  "construct_equilibrium: target must lie on the simplex");

  const Vector wbar = left_dominant_eigenvector(A0.entries());
  double ratio_max = 0.0;
  for (int i = 0; i < n; ++i) ratio_max = std::max(ratio_max, wbar[i] / w_opt[i]);
  const double sigma = eps / ratio_max;

  const Matrix& M0 = A0.entries();
  Matrix M(n, n);
  for (int i = 0; i < n; ++i) {
    const double ad = 1.0 - sigma * wbar[i] / w_opt[i];
    for (int j = 0; j < n; ++j) M(i, j) = (1.0 - ad) * M0(i, j);
    M(i, i) += ad;
  }
  return AppraisalMatrix(std::move(M));
}

struct EquilibriumReport {
  double appraisal_residual = 0.0;
  double workload_residual = 0.0;
  bool pass = false;
};

/// Residuals of the fixed-point conditions at (A, w):
///   appraisal  max_i |a_ii (p_i - (A p)_i)|
///   workload   |A^T w - w|_inf (donor) or |(1/n) A^T 1 - w|_inf (average).
inline EquilibriumReport check_equilibrium(const Matrix& A, const Vector& w,
                                           const PerformanceProfile& profile,
                                           WorkFlow flow,
                                           double tol = kInvariantTol) {
  const int n = static_cast<int>(A.rows());
  detail::require(A.cols() == n && w.size() == n && profile.size() == n,
                  "check_equilibrium: dimension mismatch");
  const Vector p = profile.values(w);
  const Vector ap = A * p;
  EquilibriumReport r;
  for (int i = 0; i < n; ++i)
    r.appraisal_residual =
        std::max(r.appraisal_residual, std::abs(A(i, i) * (p[i] - ap[i])));
  Vector res;
  if (flow == WorkFlow::DonorControlled)
    res = A.transpose() * w - w;
  else
    res = A.transpose() * Vector::Ones(n) / static_cast<double>(n) - w;
  r.workload_residual = res.lpNorm<Eigen::Infinity>();
  r.pass = r.appraisal_residual < tol && r.workload_residual < tol;
  return r;
}

}  // namespace asap
