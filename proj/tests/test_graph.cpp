#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "asap/experiments.hpp"
#include "asap/graph.hpp"

using namespace asap;
using Catch::Matchers::WithinRel;

namespace {

SparsityPattern complete(int n) {
  SparsityPattern p(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p.set_edge(i, j);
  return p;
}

// Canonical form: rotate so the smallest node comes first.
std::vector<int> canonical(std::vector<int> nodes) {
  const auto it = std::min_element(nodes.begin(), nodes.end());
  std::rotate(nodes.begin(), it, nodes.end());
  return nodes;
}

// Independent oracle: try every (min-first) permutation of every node
// subset and keep those whose edges all exist.  Exponential, n <= 5 only.
std::set<std::vector<int>> brute_force_cycles(const SparsityPattern& p) {
  const int n = p.size();
  std::set<std::vector<int>> found;
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<int> nodes;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) nodes.push_back(i);
    if (nodes.size() < 2) continue;
    std::vector<int> rest(nodes.begin() + 1, nodes.end());
    std::sort(rest.begin(), rest.end());
    do {
      std::vector<int> cyc{nodes[0]};
      cyc.insert(cyc.end(), rest.begin(), rest.end());
      bool ok = true;
      for (std::size_t k = 0; ok && k < cyc.size(); ++k)
        ok = p.edge(cyc[k], cyc[(k + 1) % cyc.size()]);
      if (ok) found.insert(cyc);
    } while (std::next_permutation(rest.begin(), rest.end()));
  }
  return found;
}

SparsityPattern random_pattern(std::uint64_t seed, int n, double prob) {
  RandomTeamConfig cfg;
  cfg.n = n;
  cfg.edge_probability = prob;
  cfg.seed = seed;
  return pattern_of(generate_random_team(cfg).appraisal.entries());
}

}  // namespace

TEST_CASE("pattern extraction and equality", "[graph]") {
  Matrix A(3, 3);
  A << 0.5, 0.5, 0.0,
       0.0, 0.6, 0.4,
       0.3, 0.0, 0.7;
  const auto p = pattern_of(A);
  REQUIRE(p.size() == 3);
  REQUIRE(p.edge(0, 1));
  REQUIRE_FALSE(p.edge(0, 2));
  REQUIRE(p.offdiagonal_edge_count() == 3);
  REQUIRE(p == pattern_of(A, 1e-12));
  A(0, 2) = 1e-13;
  REQUIRE_FALSE(p == pattern_of(A));       // exact-zero threshold
  REQUIRE(p == pattern_of(A, 1e-12));      // thresholded
}

TEST_CASE("strong connectivity", "[graph]") {
  SparsityPattern ring(4);
  for (int i = 0; i < 4; ++i) {
    ring.set_edge(i, i);
    ring.set_edge(i, (i + 1) % 4);
  }
  REQUIRE(is_strongly_connected(ring));

  SparsityPattern chain(3);
  for (int i = 0; i < 3; ++i) chain.set_edge(i, i);
  chain.set_edge(0, 1);
  chain.set_edge(1, 2);
  REQUIRE_FALSE(is_strongly_connected(chain));
}

TEST_CASE("cycle enumeration matches brute force", "[graph]") {
  // Complete graphs have a known count: sum_k C(n,k)(k-1)!.
  REQUIRE(enumerate_cycles(complete(4)).size() == 20);
  REQUIRE(enumerate_cycles(complete(6)).size() == 409);

  for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
    const auto p = random_pattern(seed, 5, 0.45);
    const auto expected = brute_force_cycles(p);
    const auto got = enumerate_cycles(p);
    REQUIRE(got.size() == expected.size());
    std::set<std::vector<int>> seen;
    for (const auto& c : got) {
      REQUIRE(c.length() >= 2);
      seen.insert(canonical(c.nodes));
    }
    REQUIRE(seen == expected);
  }
}

TEST_CASE("cycle enumeration is ordered and capped", "[graph]") {
  const auto cycles = enumerate_cycles(complete(4));
  for (std::size_t k = 1; k < cycles.size(); ++k) {
    REQUIRE(cycles[k - 1].length() <= cycles[k].length());
    if (cycles[k - 1].length() == cycles[k].length())
      REQUIRE(cycles[k - 1].nodes < cycles[k].nodes);
  }

  CycleEnumerationOptions tight;
  tight.max_cycles = 10;
  REQUIRE_THROWS_AS(enumerate_cycles(complete(4), tight),
                    EnumerationLimitError);
  CycleEnumerationOptions small_graphs;
  small_graphs.max_nodes = 5;
  REQUIRE_THROWS_AS(enumerate_cycles(complete(6), small_graphs),
                    EnumerationLimitError);
}

TEST_CASE("cycle constants", "[graph]") {
  Matrix A(2, 2);
  A << 0.3, 0.7,
       0.6, 0.4;
  Cycle two{{0, 1}};
  REQUIRE_THAT(cycle_constant(A, two), WithinRel(0.3 * 0.4 / (0.7 * 0.6), 1e-15));

  Matrix B(3, 3);
  B << 0.5, 0.5, 0.0,
       0.0, 0.6, 0.4,
       0.3, 0.0, 0.7;
  Cycle three{{0, 1, 2}};
  REQUIRE_THAT(cycle_constant(B, three),
               WithinRel(0.5 * 0.6 * 0.7 / (0.5 * 0.4 * 0.3), 1e-15));
  Cycle missing{{0, 2}};
  REQUIRE_THROWS_AS(cycle_constant(B, missing), std::domain_error);
}

TEST_CASE("cycle basis spans all simple cycles", "[graph]") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    for (int n : {4, 5, 6}) {
      const auto p = random_pattern(seed * 100 + static_cast<std::uint64_t>(n),
                                    n, 0.4);
      const auto basis = cycle_basis(p);
      REQUIRE(basis.dimension() == p.offdiagonal_edge_count() - n + 1);
      REQUIRE(static_cast<int>(basis.cycles.size()) == basis.dimension());
      REQUIRE(basis.incidence.rows() ==
              static_cast<Eigen::Index>(basis.edges.size()));
      REQUIRE(basis.incidence.cols() == basis.dimension());

      // Independence and coverage, verified in exact integer arithmetic.
      detail::ExactRowBasis span(basis.edges.size());
      for (const auto& c : basis.cycles)
        REQUIRE(span.add(detail::path_vector(c, basis.edges)));
      for (const auto& c : enumerate_cycles(p))
        REQUIRE(span.in_span(detail::path_vector(c, basis.edges)));

      // Incidence columns are exactly the basis cycles' edge vectors.
      for (int r = 0; r < basis.dimension(); ++r) {
        const auto pv = detail::path_vector(basis.cycles[static_cast<std::size_t>(r)],
                                            basis.edges);
        for (std::size_t e = 0; e < basis.edges.size(); ++e)
          REQUIRE(basis.incidence(static_cast<Eigen::Index>(e), r) ==
                  static_cast<int>(pv[e]));
      }
    }
  }
}

TEST_CASE("cycle basis requires strong connectivity", "[graph]") {
  SparsityPattern chain(3);
  for (int i = 0; i < 3; ++i) chain.set_edge(i, i);
  chain.set_edge(0, 1);
  chain.set_edge(1, 2);
  REQUIRE_THROWS_AS(cycle_basis(chain), std::invalid_argument);
}
