// Vector fields of the appraisal/workload model, full and reduced:
//   dA_ij = a_ij (p_j(w_j) - sum_k a_ik p_k(w_k))
//   dw    = -w + A^T w                (donor-controlled)
//   dw    = -w + (1/n) A^T 1          (average-appraisal)
// plus the rank-preserving reduction A(t) = diag(A0 v)^{-1} A0 diag(v).
#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "asap/types.hpp"

namespace asap {

/// dA at (A, w): dA_ij = a_ij (p_j - (A p)_i).  Zero entries have zero
/// derivative, so the sparsity pattern is flow-invariant.
inline Matrix rhs_appraisal(const Matrix& A, const Vector& w,
                            const PerformanceProfile& profile) {
  const int n = static_cast<int>(A.rows());
  detail::require(A.cols() == n && w.size() == n && profile.size() == n,
                  "rhs_appraisal: dimension mismatch");
  const Vector p = profile.values(w);
  const Vector ap = A * p;
  Matrix dA(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) dA(i, j) = A(i, j) * (p[j] - ap[i]);
  return dA;
}

/// dw at (A, w) for the chosen work flow.
inline Vector rhs_workload(const Matrix& A, const Vector& w, WorkFlow flow) {
  const int n = static_cast<int>(A.rows());
  detail::require(A.cols() == n && w.size() == n,
                  "rhs_workload: dimension mismatch");
  if (flow == WorkFlow::DonorControlled) return A.transpose() * w - w;
  return A.transpose() * Vector::Ones(n) / static_cast<double>(n) - w;
}

/// Coupled field; dA and dw are resized as needed.
inline void rhs_full(const Matrix& A, const Vector& w,
                     const PerformanceProfile& profile, WorkFlow flow,
                     Matrix& dA, Vector& dw) {
  const int n = static_cast<int>(A.rows());
  detail::require(A.cols() == n && w.size() == n && profile.size() == n,
                  "rhs_full: dimension mismatch");
  const Vector p = profile.values(w);
  const Vector ap = A * p;
  dA.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) dA(i, j) = A(i, j) * (p[j] - ap[i]);
  if (flow == WorkFlow::DonorControlled)
    dw = A.transpose() * w - w;
  else
    dw = A.transpose() * Vector::Ones(n) / static_cast<double>(n) - w;
}

/// A(v) = diag(A0 v)^{-1} A0 diag(v); row-stochastic with the pattern of A0
/// for any positive scales, and invariant under positive rescaling of v.
inline Matrix reconstruct_appraisal(const Matrix& A0, const Vector& v) {
  const int n = static_cast<int>(A0.rows());
  detail::require(A0.cols() == n && v.size() == n,
                  "reconstruct_appraisal: dimension mismatch");
  for (int i = 0; i < n; ++i)
    detail::require(v[i] > 0.0 && std::isfinite(v[i]),
                    "reconstruct_appraisal: scales must be positive, v[" +
                        std::to_string(i) + "] = " + std::to_string(v[i]));
  const Vector u = A0 * v;  // positive: diagonal of A0 is positive
  Matrix A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = A0(i, j) * v[j] / u[i];
  return A;
}

/// Reduced field on (v, w):
///   dv_i = v_i (p_i(w) - w^T A(v) p(w)),   dw = F(A(v), w).
/// With v(0) = 1 the reconstruction A(v(t)) reproduces the full flow.
inline void rhs_reduced(const Matrix& A0, const Vector& v, const Vector& w,
                        const PerformanceProfile& profile, WorkFlow flow,
                        Vector& dv, Vector& dw) {
  const int n = static_cast<int>(A0.rows());
  detail::require(v.size() == n && w.size() == n && profile.size() == n,
                  "rhs_reduced: dimension mismatch");
  const Matrix A = reconstruct_appraisal(A0, v);
  const Vector p = profile.values(w);
  const double ptilde = w.dot(A * p);
  dv.resize(n);
  for (int i = 0; i < n; ++i) dv[i] = v[i] * (p[i] - ptilde);
  if (flow == WorkFlow::DonorControlled)
    dw = A.transpose() * w - w;
  else
    dw = A.transpose() * Vector::Ones(n) / static_cast<double>(n) - w;
}

inline void rhs_reduced(const ReducedState& s, const PerformanceProfile& profile,
                        WorkFlow flow, Vector& dv, Vector& dw) {
  rhs_reduced(s.initial.entries(), s.v, s.workload.entries(), profile, flow,
              dv, dw);
}

// ---------------------------------------------------------------------------
// Two-node closed form (donor-controlled)

/// Scalar state of the two-node system; a22 is implied by the conserved
/// cycle constant c = a11 a22 / ((1-a11)(1-a22)).
struct TwoNodeState {
  double a11 = 0.0;
  double w1 = 0.0;
};

/// a22 recovered from (a11, c).
inline double two_node_a22(double a11, double c) {
  detail::require(a11 > 0.0 && a11 < 1.0, "two_node: a11 must lie in (0,1)");
  detail::require(c > 0.0, "two_node: cycle constant must be positive");
  return c * (1.0 - a11) / (a11 + c * (1.0 - a11));
}

/// Derivative of the two-node system with conserved constant c:
///   da11 = a11 (1-a11) (p1(w1) - p2(1-w1))
///   dw1  = -w1 + a11 (1 - (1-a11)(1-c) w1) / (c + a11 (1-c))
/// The dw1 numerator follows from substituting a21 = a11/(a11 + c(1-a11))
/// into dw1 = -w1 + a11 w1 + a21 (1-w1); at c = 1 it collapses to
/// dw1 = -w1 + a11.
inline TwoNodeState rhs_two_node(const TwoNodeState& s, double c,
                                 const PerformanceProfile& profile) {
  detail::require(profile.size() == 2, "two_node: profile must have 2 members");
  detail::require(s.a11 > 0.0 && s.a11 < 1.0,
                  "two_node: a11 must lie in (0,1)");
  detail::require(s.w1 > 0.0 && s.w1 < 1.0, "two_node: w1 must lie in (0,1)");
  detail::require(c > 0.0, "two_node: cycle constant must be positive");
  const double p1 = profile.value(0, s.w1);
  const double p2 = profile.value(1, 1.0 - s.w1);
  TwoNodeState d;
  d.a11 = s.a11 * (1.0 - s.a11) * (p1 - p2);
  d.w1 = -s.w1 + s.a11 * (1.0 - (1.0 - s.a11) * (1.0 - c) * s.w1) /
                     (c + s.a11 * (1.0 - c));
  return d;
}

}  // namespace asap
