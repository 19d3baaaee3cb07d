#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "asap/dynamics.hpp"
#include "asap/experiments.hpp"

using namespace asap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

PerformanceProfile random_profile(Rng& rng, int n) {
  return sample_power_law_profile(rng, n);
}

}  // namespace

TEST_CASE("appraisal rhs against hand-computed values", "[dynamics]") {
  // s = (0.5, 0.5), g = 1/2, w = (0.25, 0.75): p = (sqrt 2, sqrt(2/3)).
  const auto prof = PerformanceProfile::power_law(vec({0.5, 0.5}), 0.5);
  Matrix A(2, 2);
  A << 0.7, 0.3,
       0.4, 0.6;
  const Vector w = vec({0.25, 0.75});
  const double p1 = std::sqrt(2.0), p2 = std::sqrt(2.0 / 3.0);
  const Matrix dA = rhs_appraisal(A, w, prof);
  REQUIRE_THAT(dA(0, 0), WithinRel(0.7 * (p1 - (0.7 * p1 + 0.3 * p2)), 1e-14));
  REQUIRE_THAT(dA(0, 1), WithinRel(0.3 * (p2 - (0.7 * p1 + 0.3 * p2)), 1e-14));
  REQUIRE_THAT(dA(1, 0), WithinRel(0.4 * (p1 - (0.4 * p1 + 0.6 * p2)), 1e-14));
  REQUIRE_THAT(dA(1, 1), WithinRel(0.6 * (p2 - (0.4 * p1 + 0.6 * p2)), 1e-14));
}

TEST_CASE("workload rhs for both flows", "[dynamics]") {
  Matrix A(2, 2);
  A << 0.7, 0.3,
       0.4, 0.6;
  const Vector w = vec({0.25, 0.75});
  const Vector donor = rhs_workload(A, w, WorkFlow::DonorControlled);
  REQUIRE_THAT(donor[0], WithinAbs(0.225, 1e-15));
  REQUIRE_THAT(donor[1], WithinAbs(-0.225, 1e-15));
  const Vector avg = rhs_workload(A, w, WorkFlow::AverageAppraisal);
  REQUIRE_THAT(avg[0], WithinAbs(0.3, 1e-15));
  REQUIRE_THAT(avg[1], WithinAbs(-0.3, 1e-15));
}

TEST_CASE("rhs conserves row sums, workload sum, and zeros", "[dynamics]") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    RandomTeamConfig cfg;
    cfg.n = 5;
    cfg.edge_probability = 0.4;
    cfg.seed = rng.next_u64();
    const auto team = generate_random_team(cfg);
    const auto prof = random_profile(rng, cfg.n);
    const Matrix& A = team.appraisal.entries();
    const Vector& w = team.workload.entries();

    const Matrix dA = rhs_appraisal(A, w, prof);
    for (int i = 0; i < cfg.n; ++i) {
      REQUIRE_THAT(dA.row(i).sum(), WithinAbs(0.0, 1e-14));
      for (int j = 0; j < cfg.n; ++j)
        if (A(i, j) == 0.0) REQUIRE(dA(i, j) == 0.0);
    }
    for (WorkFlow flow : {WorkFlow::DonorControlled, WorkFlow::AverageAppraisal})
      REQUIRE_THAT(rhs_workload(A, w, flow).sum(), WithinAbs(0.0, 1e-14));

    Matrix dA2;
    Vector dw2;
    rhs_full(A, w, prof, WorkFlow::DonorControlled, dA2, dw2);
    REQUIRE((dA2 - dA).lpNorm<Eigen::Infinity>() == 0.0);
    REQUIRE((dw2 - rhs_workload(A, w, WorkFlow::DonorControlled))
                .lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("reconstruction from scales", "[dynamics]") {
  Rng rng(13);
  RandomTeamConfig cfg;
  cfg.n = 4;
  cfg.edge_probability = 0.5;
  cfg.seed = 99;
  const auto team = generate_random_team(cfg);
  const Matrix& A0 = team.appraisal.entries();

  // v = 1 divides each row by its sum, which is 1 only up to rounding.
  REQUIRE((reconstruct_appraisal(A0, Vector::Ones(4)) - A0)
              .lpNorm<Eigen::Infinity>() < 1e-15);

  Vector v(4);
  for (int i = 0; i < 4; ++i) v[i] = 0.2 + rng.uniform01();
  const Matrix Av = reconstruct_appraisal(A0, v);
  for (int i = 0; i < 4; ++i) {
    REQUIRE_THAT(Av.row(i).sum(), WithinAbs(1.0, 1e-14));
    for (int j = 0; j < 4; ++j) {
      if (A0(i, j) == 0.0) REQUIRE(Av(i, j) == 0.0);
      // Definition check: a_ij v_j / (A0 v)_i.
      else
        REQUIRE_THAT(Av(i, j), WithinRel(A0(i, j) * v[j] / A0.row(i).dot(v), 1e-14));
    }
  }
  // Scale invariance: v and 3v reconstruct the same matrix.
  const Matrix Av3 = reconstruct_appraisal(A0, 3.0 * v);
  REQUIRE((Av - Av3).lpNorm<Eigen::Infinity>() < 1e-15);

  REQUIRE_THROWS_AS(reconstruct_appraisal(A0, vec({1.0, 0.0, 1.0, 1.0})),
                    std::invalid_argument);
}

TEST_CASE("reduced field matches its definition", "[dynamics]") {
  Rng rng(29);
  RandomTeamConfig cfg;
  cfg.n = 4;
  cfg.edge_probability = 0.5;
  cfg.seed = 17;
  const auto team = generate_random_team(cfg);
  const auto prof = random_profile(rng, cfg.n);
  const Matrix& A0 = team.appraisal.entries();
  const Vector& w = team.workload.entries();
  Vector v(4);
  for (int i = 0; i < 4; ++i) v[i] = 0.5 + rng.uniform01();

  Vector dv, dw;
  rhs_reduced(A0, v, w, prof, WorkFlow::DonorControlled, dv, dw);

  const Matrix Av = reconstruct_appraisal(A0, v);
  const Vector p = prof.values(w);
  const double pbar = w.dot(Av * p);
  for (int i = 0; i < 4; ++i)
    REQUIRE_THAT(dv[i], WithinRel(v[i] * (p[i] - pbar), 1e-13));
  REQUIRE((dw - rhs_workload(Av, w, WorkFlow::DonorControlled))
              .lpNorm<Eigen::Infinity>() < 1e-14);

  // At v = 1 the appraisal part of the full field is recovered through the
  // chain rule: dA_ij = d/dt [a_ij v_j / (A0 v)_i] = a_ij (dv_j - (A0 dv)_i).
  rhs_reduced(A0, Vector::Ones(4), w, prof, WorkFlow::DonorControlled, dv, dw);
  const Matrix dA = rhs_appraisal(A0, w, prof);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (A0(i, j) != 0.0)
        REQUIRE_THAT(dA(i, j),
                     WithinAbs(A0(i, j) * (dv[j] - A0.row(i).dot(dv)), 1e-12));
}

TEST_CASE("two-node reduction agrees with the embedded full system",
          "[dynamics]") {
  const auto prof =
      PerformanceProfile::power_law(vec({0.45, 0.55}), vec({0.9, 0.8}));
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const double a11 = 0.05 + 0.9 * rng.uniform01();
    const double w1 = 0.05 + 0.9 * rng.uniform01();
    const double c = std::exp(2.5 * (rng.uniform01() - 0.5));
    const double a22 = two_node_a22(a11, c);
    REQUIRE(a22 > 0.0);
    REQUIRE(a22 < 1.0);
    // The implied pair must reproduce the constant.
    REQUIRE_THAT(a11 * a22 / ((1.0 - a11) * (1.0 - a22)), WithinRel(c, 1e-12));

    Matrix A(2, 2);
    A << a11, 1.0 - a11,
         1.0 - a22, a22;
    const Vector w = vec({w1, 1.0 - w1});
    const Matrix dA = rhs_appraisal(A, w, prof);
    const Vector dw = rhs_workload(A, w, WorkFlow::DonorControlled);

    const TwoNodeState ds = rhs_two_node({a11, w1}, c, prof);
    REQUIRE_THAT(ds.a11, WithinAbs(dA(0, 0), 1e-12));
    REQUIRE_THAT(ds.w1, WithinAbs(dw[0], 1e-12));
  }
}
