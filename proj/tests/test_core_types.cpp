#include <catch2/catch_amalgamated.hpp>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "asap/types.hpp"

using namespace asap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using Catch::Matchers::WithinULP;

namespace {

using bf50 = boost::multiprecision::cpp_bin_float_50;

// 50-digit recomputation of (s/x)^g, rounded once to double.
double power_law_ref(double s, double g, double x) {
  const bf50 v = boost::multiprecision::pow(bf50(s) / bf50(x), bf50(g));
  return static_cast<double>(v);
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("power-law values match a high-precision oracle", "[types]") {
  // Frozen spot value: 0.5^0.9 with s = x = 0.5 scaled so s/x = 0.5.
  const auto p = PerformanceProfile::power_law(vec({0.5}), 0.9);
  REQUIRE_THAT(p.value(0, 1.0), WithinULP(0.5358867312681465821065032, 2));

  const double skills[] = {0.05, 0.3, 0.45, 0.9, 1.7};
  const double gammas[] = {0.1, 0.4, 0.5, 0.8, 0.99};
  const double points[] = {0.01, 0.2, 0.45, 0.77, 1.0};
  for (double s : skills)
    for (double g : gammas) {
      const auto prof = PerformanceProfile::power_law(vec({s}), g);
      for (double x : points)
        REQUIRE_THAT(prof.value(0, x), WithinULP(power_law_ref(s, g, x), 4));
    }
}

TEST_CASE("power-law antiderivative has the closed form", "[types]") {
  const auto p = PerformanceProfile::power_law(vec({0.3}), 0.7);
  // Oracle: adaptive quadrature of (0.3/x)^0.7 over [0.2, 0.8] at 40 digits.
  const double integral = p.antiderivative(0, 0.8) - p.antiderivative(0, 0.2);
  REQUIRE_THAT(integral, WithinRel(0.4566502553989531337098859, 1e-15));

  // Identity: int_0^s (s/x)^g dx = s/(1-g), exact up to rounding.
  for (double g : {0.1, 0.5, 0.9}) {
    const auto q = PerformanceProfile::power_law(vec({0.45}), g);
    REQUIRE_THAT(q.antiderivative(0, 0.45), WithinRel(0.45 / (1.0 - g), 1e-14));
  }
}

TEST_CASE("power-law inverse is exact and inverts value", "[types]") {
  const auto p = PerformanceProfile::power_law(vec({0.45}), 0.9);
  REQUIRE_THAT(p.inverse(0, 1.3),
               WithinRel(0.3362085773720834452250842, 1e-15));
  for (double x : {0.05, 0.3, 0.45, 0.99})
    REQUIRE_THAT(p.inverse(0, p.value(0, x)), WithinRel(x, 1e-13));
}

TEST_CASE("custom profiles fall back to bisection for the inverse", "[types]") {
  // Same law as a PowerLaw member, but exposed only through handles.
  auto val = [](double x) { return std::pow(0.45 / x, 0.9); };
  const auto closed = PerformanceProfile::power_law(vec({0.45}), 0.9);
  const auto custom = PerformanceProfile::custom({{val, nullptr, nullptr}});
  REQUIRE_FALSE(custom.has_antiderivative());
  for (double y : {0.7, 1.0, 1.3, 5.0})
    REQUIRE_THAT(custom.inverse(0, y), WithinRel(closed.inverse(0, y), 1e-10));
  // Root at or beyond the domain boundary clamps to 1.
  REQUIRE(custom.inverse(0, 0.3) == 1.0);
}

TEST_CASE("profile validation rejects malformed members", "[types]") {
  REQUIRE_THROWS_AS(PerformanceProfile::power_law(vec({0.5}), 1.2),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(PerformanceProfile::power_law(vec({0.5}), 0.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(PerformanceProfile::power_law(vec({-0.5}), 0.5),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(PerformanceProfile::power_law(vec({0.5, 0.5}), vec({0.5})),
                    std::invalid_argument);

  // Custom members must diverge at 0+ and decrease strictly.
  auto bounded = [](double x) { return 1.0 - 0.5 * x; };
  REQUIRE_THROWS_AS(PerformanceProfile::custom({{bounded, nullptr, nullptr}}),
                    std::invalid_argument);
  auto increasing = [](double x) { return x + 1e7 * (x < 1e-10); };
  REQUIRE_THROWS_AS(PerformanceProfile::custom({{increasing, nullptr, nullptr}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(PerformanceProfile::custom({{nullptr, nullptr, nullptr}}),
                    std::invalid_argument);
}

TEST_CASE("performance domain is (0, 1]", "[types]") {
  const auto p = PerformanceProfile::power_law(vec({0.5}), 0.5);
  REQUIRE_THROWS_AS(p.value(0, 0.0), std::domain_error);
  REQUIRE_THROWS_AS(p.value(0, -0.1), std::domain_error);
  REQUIRE_THROWS_AS(p.value(0, 1.5), std::domain_error);
  REQUIRE_THROWS_AS(p.antiderivative(0, 0.0), std::domain_error);
  REQUIRE_THROWS_AS(p.inverse(0, 0.0), std::domain_error);
  REQUIRE_NOTHROW(p.value(0, 1.0));
}

TEST_CASE("team performance metrics", "[types]") {
  // Case-study profile at its optimum: all members perform at 1 and the
  // Total metric collapses to sum s_i/(1-g_i) = 7.25.
  const auto p = PerformanceProfile::power_law(vec({0.45, 0.55}), vec({0.9, 0.8}));
  const Vector w = vec({0.45, 0.55});
  REQUIRE_THAT(team_performance(p, w, PerformanceMetric::Total),
               WithinRel(7.25, 1e-14));
  REQUIRE_THAT(team_performance(p, w, PerformanceMetric::Min),
               WithinAbs(1.0, 1e-14));
  REQUIRE_THAT(team_performance(p, w, PerformanceMetric::Average),
               WithinAbs(1.0, 1e-14));

  const Vector w2 = vec({0.3, 0.7});
  const double p1 = p.value(0, 0.3), p2 = p.value(1, 0.7);
  REQUIRE_THAT(team_performance(p, w2, PerformanceMetric::Min),
               WithinULP(std::min(p1, p2), 0));
  // Average is workload-weighted: sum_i w_i p_i(w_i).
  REQUIRE_THAT(team_performance(p, w2, PerformanceMetric::Average),
               WithinULP(0.3 * p1 + 0.7 * p2, 1));
  REQUIRE(eval_performance(p, 1, 0.7) == p2);
}

TEST_CASE("validate_state reports issues without throwing", "[types]") {
  Matrix A(2, 2);
  A << 0.6, 0.5,   // row sum 1.1
       0.3, 0.7;
  Vector w = vec({0.5, 0.5});
  auto rep = validate_state(A, w, 1e-9);
  REQUIRE_FALSE(rep.ok());
  REQUIRE(rep.issues.size() == 1);
  REQUIRE(rep.issues[0].kind == ValidationIssue::Kind::RowSum);
  REQUIRE_THAT(rep.issues[0].magnitude, WithinAbs(0.1, 1e-12));

  A << 0.0, 1.0, 0.3, 0.7;  // nonpositive diagonal
  rep = validate_state(A, w, 1e-9);
  REQUIRE_FALSE(rep.ok());
  REQUIRE(rep.issues[0].kind == ValidationIssue::Kind::NonPositiveDiagonal);

  A << 0.5, 0.5, 0.3, 0.7;
  rep = validate_state(A, vec({0.4, 0.7}), 1e-9);
  REQUIRE_FALSE(rep.ok());
  REQUIRE(rep.issues[0].kind == ValidationIssue::Kind::WorkloadSum);

  A(0, 1) = std::numeric_limits<double>::quiet_NaN();
  rep = validate_state(A, w, 1e-9);
  REQUIRE(rep.issues[0].kind == ValidationIssue::Kind::NonFinite);

  A << 0.5, 0.5, 0.3, 0.7;
  REQUIRE(validate_state(A, w, 1e-9).ok());
}

TEST_CASE("strict state wrappers enforce invariants", "[types]") {
  Matrix A(2, 2);
  A << 0.5, 0.5, 0.3, 0.7;
  REQUIRE_NOTHROW(AppraisalMatrix(A));
  A(0, 0) = 0.6;
  REQUIRE_THROWS_AS(AppraisalMatrix(A), std::invalid_argument);
  A << -0.1, 1.1, 0.3, 0.7;
  REQUIRE_THROWS_AS(AppraisalMatrix(A), std::invalid_argument);

  REQUIRE_NOTHROW(WorkloadVector(vec({0.4, 0.6})));
  REQUIRE_THROWS_AS(WorkloadVector(vec({0.4, 0.7})), std::invalid_argument);
  REQUIRE_THROWS_AS(WorkloadVector(vec({1.0, 0.0})), std::invalid_argument);

  Matrix B(2, 2);
  B << 0.5, 0.5, 0.3, 0.7;
  const TeamState st{AppraisalMatrix(B), WorkloadVector(vec({0.4, 0.6})), 0.0};
  REQUIRE(st.size() == 2);
}
