// Core value types for the coupled appraisal/workload team model:
// performance profiles, appraisal matrices, workload vectors and the
// validation machinery shared by the dynamics and the integrator.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace asap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Default tolerances, overridable at every call site that uses them.
inline constexpr double kInvariantTol = 1e-9;    // row sums, simplex drift
inline constexpr double kConvergenceTol = 1e-8;  // RHS sup-norm / spread

class SolverError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class EnumerationLimitError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class GenerationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class ScenarioError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class WorkFlow { DonorControlled, AverageAppraisal };

inline const char* to_string(WorkFlow f) {
  return f == WorkFlow::DonorControlled ? "donor" : "average";
}

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

/// Per-member performance functions p_i : (0,1] -> R>0, strictly decreasing
/// with p_i(x) -> +inf as x -> 0+.  Two flavors:
///   PowerLaw  p_i(x) = (s_i/x)^{g_i},  s_i > 0, g_i in (0,1),
///   Custom    caller-supplied handles (value required, antiderivative and
///             inverse optional; inverse falls back to bisection).
class PerformanceProfile {
 public:
  struct CustomMember {
    std::function<double(double)> value;           // p_i(x)
    std::function<double(double)> antiderivative;  // x -> int_0^x p_i, optional
    std::function<double(double)> inverse;         // y -> p_i^{-1}(y), optional
  };

  static PerformanceProfile power_law(Vector skill, Vector exponent) {
    detail::require(skill.size() > 0, "profile: empty skill vector");
    detail::require(skill.size() == exponent.size(),
                    "profile: skill/exponent size mismatch");
    for (Eigen::Index i = 0; i < skill.size(); ++i) {
      detail::require(std::isfinite(skill[i]) && skill[i] > 0.0,
                      "profile: skill[" + std::to_string(i) +
                          "] must be finite and > 0");
      detail::require(std::isfinite(exponent[i]) && exponent[i] > 0.0 &&
                          exponent[i] < 1.0,
                      "profile: exponent[" + std::to_string(i) +
                          "] must lie in (0,1)");
    }
    PerformanceProfile p;
    p.skill_ = std::move(skill);
    p.exponent_ = std::move(exponent);
    return p;
  }

  static PerformanceProfile power_law(Vector skill, double exponent) {
    Vector g = Vector::Constant(skill.size(), exponent);
    return power_law(std::move(skill), std::move(g));
  }

  static PerformanceProfile custom(std::vector<CustomMember> members) {
    detail::require(!members.empty(), "profile: empty member list");
    for (std::size_t i = 0; i < members.size(); ++i) {
      detail::require(static_cast<bool>(members[i].value),
                      "profile: member " + std::to_string(i) +
                          " has no value handle");
      validate_custom_member(members[i], static_cast<int>(i));
    }
    PerformanceProfile p;
    p.custom_ = std::move(members);
    return p;
  }

  int size() const {
    return is_power_law() ? static_cast<int>(skill_.size())
                          : static_cast<int>(custom_.size());
  }

  bool is_power_law() const { return custom_.empty(); }

  const Vector& skill() const {
    detail::require(is_power_law(), "profile: skill() on custom profile");
    return skill_;
  }
  const Vector& exponent() const {
    detail::require(is_power_law(), "profile: exponent() on custom profile");
    return exponent_;
  }

  /// p_i(x).  Domain (0,1]; outside it throws std::domain_error.
  double value(int i, double x) const {
    check_member(i);
    if (!(x > 0.0) || x > 1.0)
      throw std::domain_error("performance: workload " + std::to_string(x) +
                              " outside (0,1]");
    if (is_power_law()) return std::pow(skill_[i] / x, exponent_[i]);
    return custom_[static_cast<std::size_t>(i)].value(x);
  }

  /// p evaluated entrywise; w must have matching size.
  Vector values(const Vector& w) const {
    detail::require(w.size() == size(), "performance: workload size mismatch");
    Vector p(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
      p[i] = value(static_cast<int>(i), w[i]);
    return p;
  }

  bool has_antiderivative() const {
    if (is_power_law()) return true;
    for (const auto& m : custom_)
      if (!m.antiderivative) return false;
    return true;
  }

  /// int_0^x p_i.  PowerLaw closed form s^g x^{1-g}/(1-g); Custom requires the
  /// antiderivative handle.
  double antiderivative(int i, double x) const {
    check_member(i);
    if (!(x > 0.0) || x > 1.0)
      throw std::domain_error("performance: workload outside (0,1]");
    if (is_power_law()) {
      const double g = exponent_[i];
      return std::pow(skill_[i], g) * std::pow(x, 1.0 - g) / (1.0 - g);
    }
    const auto& h = custom_[static_cast<std::size_t>(i)].antiderivative;
    if (!h)
      throw std::invalid_argument(
          "performance: member " + std::to_string(i) +
          " has no antiderivative handle");
    return h(x);
  }

  /// p_i^{-1}(y) for y > 0.  PowerLaw closed form s y^{-1/g} (may exceed 1;
  /// the formula extends past the nominal domain).  Custom uses the supplied
  /// handle or falls back to bisection on (0,1], clamping at 1 when
  /// y < p_i(1).
  double inverse(int i, double y) const {
    check_member(i);
    if (!(y > 0.0)) throw std::domain_error("performance: inverse of y <= 0");
    if (is_power_law())
      return skill_[i] * std::pow(y, -1.0 / exponent_[i]);
    const auto& m = custom_[static_cast<std::size_t>(i)];
    if (m.inverse) return m.inverse(y);
    if (m.value(1.0) >= y) return 1.0;  // clamp: root lies at or beyond 1
    double lo = 1e-300, hi = 1.0;
    for (int it = 0; it < 2000 && hi - lo > 1e-16 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (m.value(mid) > y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  static void validate_custom_member(const CustomMember& m, int i) {
    // Sampled strict decrease plus the divergence probe at 1e-12.
    const char* tag = "profile: custom member ";
    double prev = m.value(1e-12);
    detail::require(std::isfinite(prev) && prev > 1e6,
                    std::string(tag) + std::to_string(i) +
                        " must diverge as x -> 0+ (p(1e-12) <= 1e6)");
    for (int k = 1; k <= 32; ++k) {
      const double x = static_cast<double>(k) / 32.0;
      const double px = m.value(x);
      detail::require(std::isfinite(px) && px > 0.0,
                      std::string(tag) + std::to_string(i) +
                          " must be finite and positive on (0,1]");
      detail::require(px < prev, std::string(tag) + std::to_string(i) +
                                     " must be strictly decreasing");
      prev = px;
    }
  }

  void check_member(int i) const {
    detail::require(i >= 0 && i < size(),
                    "performance: member index " + std::to_string(i) +
                        " out of range");
  }

  Vector skill_, exponent_;          // power-law storage
  std::vector<CustomMember> custom_; // custom storage (empty => power-law)
};

/// p_i(x) with domain checking; thin wrapper kept for API symmetry.
inline double eval_performance(const PerformanceProfile& profile, int member,
                               double x) {
  return profile.value(member, x);
}

enum class PerformanceMetric { Total, Min, Average };

/// Collective performance of workload w under the profile.
///   Total    sum_i int_0^{w_i} p_i   (needs antiderivatives)
///   Min      min_i p_i(w_i)
///   Average  sum_i w_i p_i(w_i)
inline double team_performance(const PerformanceProfile& profile,
                               const Vector& w, PerformanceMetric metric) {
  detail::require(w.size() == profile.size(),
                  "team_performance: workload size mismatch");
  switch (metric) {
    case PerformanceMetric::Total: {
      double h = 0.0;
      for (Eigen::Index i = 0; i < w.size(); ++i)
        h += profile.antiderivative(static_cast<int>(i), w[i]);
      return h;
    }
    case PerformanceMetric::Min: {
      double h = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < w.size(); ++i)
        h = std::min(h, profile.value(static_cast<int>(i), w[i]));
      return h;
    }
    case PerformanceMetric::Average: {
      double h = 0.0;
      for (Eigen::Index i = 0; i < w.size(); ++i)
        h += w[i] * profile.value(static_cast<int>(i), w[i]);
      return h;
    }
  }
  throw std::logic_error("team_performance: unknown metric");
}

// ---------------------------------------------------------------------------
// State validation

struct ValidationIssue {
  enum class Kind {
    NonFinite,          // NaN/inf entry
    NegativeEntry,      // a_ij < -tol
    RowSum,             // |sum_j a_ij - 1| > tol
    NonPositiveDiagonal,
    WorkloadSum,        // |sum_i w_i - 1| > tol
    NonPositiveWorkload
  };
  Kind kind;
  int i = -1, j = -1;
  double magnitude = 0.0;
};

inline const char* to_string(ValidationIssue::Kind k) {
  switch (k) {
    case ValidationIssue::Kind::NonFinite: return "non-finite";
    case ValidationIssue::Kind::NegativeEntry: return "negative-entry";
    case ValidationIssue::Kind::RowSum: return "row-sum";
    case ValidationIssue::Kind::NonPositiveDiagonal: return "diagonal";
    case ValidationIssue::Kind::WorkloadSum: return "workload-sum";
    case ValidationIssue::Kind::NonPositiveWorkload: return "workload-sign";
  }
  return "?";
}

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  double max_magnitude() const {
    double m = 0.0;
    for (const auto& v : issues) m = std::max(m, v.magnitude);
    return m;
  }
};

/// Report-only invariant check: row-stochasticity and nonnegativity of A,
/// positive diagonal, simplex membership of w.  Never throws.
inline ValidationReport validate_state(const Matrix& A, const Vector& w,
                                       double tol = kInvariantTol) {
  ValidationReport r;
  const int n = static_cast<int>(A.rows());
  auto push = [&r](ValidationIssue::Kind k, int i, int j, double mag) {
    r.issues.push_back({k, i, j, mag});
  };
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < static_cast<int>(A.cols()); ++j) {
      const double a = A(i, j);
      if (!std::isfinite(a)) {
        push(ValidationIssue::Kind::NonFinite, i, j,
             std::numeric_limits<double>::infinity());
        continue;
      }
      row += a;
      if (a < -tol) push(ValidationIssue::Kind::NegativeEntry, i, j, -a);
    }
    if (std::isfinite(row) && std::abs(row - 1.0) > tol)
      push(ValidationIssue::Kind::RowSum, i, -1, std::abs(row - 1.0));
    if (i < static_cast<int>(A.cols()) &&
        !(A(i, i) > 0.0))
      push(ValidationIssue::Kind::NonPositiveDiagonal, i, i,
           std::abs(A(i, i)));
  }
  double ws = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i])) {
      push(ValidationIssue::Kind::NonFinite, static_cast<int>(i), -1,
           std::numeric_limits<double>::infinity());
      continue;
    }
    ws += w[i];
    if (!(w[i] > 0.0))
      push(ValidationIssue::Kind::NonPositiveWorkload, static_cast<int>(i), -1,
           std::abs(w[i]));
  }
  if (std::isfinite(ws) && std::abs(ws - 1.0) > tol)
    push(ValidationIssue::Kind::WorkloadSum, -1, -1, std::abs(ws - 1.0));
  return r;
}

// ---------------------------------------------------------------------------
// Strong wrappers

/// Row-stochastic appraisal matrix with strictly positive diagonal.
/// Construction validates against `tol`; entries are immutable afterwards.
class AppraisalMatrix {
 public:
  explicit AppraisalMatrix(Matrix entries, double tol = kInvariantTol)
      : m_(std::move(entries)) {
    detail::require(m_.rows() == m_.cols() && m_.rows() > 0,
                    "appraisal: matrix must be square and nonempty");
    for (Eigen::Index i = 0; i < m_.rows(); ++i) {
      double row = 0.0;
      for (Eigen::Index j = 0; j < m_.cols(); ++j) {
        detail::require(std::isfinite(m_(i, j)),
                        "appraisal: non-finite entry");
        detail::require(m_(i, j) >= -tol, "appraisal: negative entry at (" +
                                              std::to_string(i) + "," +
                                              std::to_string(j) + ")");
        row += m_(i, j);
      }
      detail::require(std::abs(row - 1.0) <= tol,
                      "appraisal: row " + std::to_string(i) +
                          " sums to " + std::to_string(row));
      detail::require(m_(i, i) > 0.0, "appraisal: diagonal entry " +
                                          std::to_string(i) +
                                          " must be positive");
    }
  }

  const Matrix& entries() const { return m_; }
  int size() const { return static_cast<int>(m_.rows()); }
  Vector diagonal() const { return m_.diagonal(); }

 private:
  Matrix m_;
};

/// Interior point of the workload simplex: w_i > 0, sum w_i = 1 within tol.
class WorkloadVector {
 public:
  explicit WorkloadVector(Vector w, double tol = kInvariantTol)
      : w_(std::move(w)) {
    detail::require(w_.size() > 0, "workload: empty vector");
    double s = 0.0;
    for (Eigen::Index i = 0; i < w_.size(); ++i) {
      detail::require(std::isfinite(w_[i]) && w_[i] > 0.0,
                      "workload: entry " + std::to_string(i) +
                          " must be finite and > 0");
      s += w_[i];
    }
    detail::require(std::abs(s - 1.0) <= tol,
                    "workload: entries sum to " + std::to_string(s));
  }

  const Vector& entries() const { return w_; }
  int size() const { return static_cast<int>(w_.size()); }

 private:
  Vector w_;
};

/// Full model state (A, w) at a point in time.
struct TeamState {
  TeamState(AppraisalMatrix a, WorkloadVector w, double t = 0.0)
      : appraisal(std::move(a)), workload(std::move(w)), time(t) {
    detail::require(appraisal.size() == workload.size(),
                    "team state: appraisal/workload size mismatch");
  }
  AppraisalMatrix appraisal;
  WorkloadVector workload;
  double time = 0.0;
  int size() const { return appraisal.size(); }
};

/// Reduced model state: positive scale factors v (one per node), workload,
/// and the initial appraisal matrix the scales refer to.
struct ReducedState {
  ReducedState(AppraisalMatrix a0, Vector v_, WorkloadVector w, double t = 0.0)
      : initial(std::move(a0)), v(std::move(v_)), workload(std::move(w)),
        time(t) {
    detail::require(initial.size() == workload.size(),
                    "reduced state: size mismatch");
    detail::require(v.size() == initial.size(),
                    "reduced state: scale vector size mismatch");
    for (Eigen::Index i = 0; i < v.size(); ++i)
      detail::require(std::isfinite(v[i]) && v[i] > 0.0,
                      "reduced state: scales must be positive");
  }
  AppraisalMatrix initial;
  Vector v;
  WorkloadVector workload;
  double time = 0.0;
  int size() const { return initial.size(); }
};

}  // namespace asap
