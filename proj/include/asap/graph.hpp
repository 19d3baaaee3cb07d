// Sparsity patterns of appraisal matrices and the cycle structure they
// induce: simple directed cycles (length >= 2), multiplicative cycle
// constants, and a cycle-space basis certified by exact integer elimination.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "asap/types.hpp"

namespace asap {

/// Directed edge pattern of an appraisal matrix, self-loops included.
class SparsityPattern {
 public:
  explicit SparsityPattern(int n) : n_(n), has_(static_cast<std::size_t>(n) * n, 0) {
    detail::require(n > 0, "pattern: size must be positive");
  }

  int size() const { return n_; }
  bool edge(int i, int j) const { return has_[idx(i, j)] != 0; }
  void set_edge(int i, int j) { has_[idx(i, j)] = 1; }

  /// Number of off-diagonal edges (m in the cycle-space dimension m - n + 1).
  int offdiagonal_edge_count() const {
    int m = 0;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (i != j && edge(i, j)) ++m;
    return m;
  }

  /// Off-diagonal edges in row-major order; the canonical edge indexing.
  std::vector<std::pair<int, int>> offdiagonal_edges() const {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (i != j && edge(i, j)) e.emplace_back(i, j);
    return e;
  }

  friend bool operator==(const SparsityPattern& a, const SparsityPattern& b) {
    return a.n_ == b.n_ && a.has_ == b.has_;
  }

 private:
  std::size_t idx(int i, int j) const {
    detail::require(i >= 0 && i < n_ && j >= 0 && j < n_,
                    "pattern: index out of range");
    return static_cast<std::size_t>(i) * n_ + j;
  }
  int n_;
  std::vector<std::uint8_t> has_;
};

/// Pattern of entries with a_ij > zero_threshold.  The default captures exact
/// zeros; use a small positive threshold (e.g. 1e-12) for matrices
/// reconstructed through floating arithmetic.
inline SparsityPattern pattern_of(const Matrix& A, double zero_threshold = 0.0) {
  detail::require(A.rows() == A.cols() && A.rows() > 0,
                  "pattern: matrix must be square and nonempty");
  detail::require(zero_threshold >= 0.0, "pattern: negative threshold");
  SparsityPattern p(static_cast<int>(A.rows()));
  for (int i = 0; i < p.size(); ++i)
    for (int j = 0; j < p.size(); ++j)
      if (A(i, j) > zero_threshold) p.set_edge(i, j);
  return p;
}

/// True iff every node reaches every other along pattern edges.
inline bool is_strongly_connected(const SparsityPattern& p) {
  const int n = p.size();
  auto reaches_all = [&](bool transpose) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        if (v == u || seen[v]) continue;
        if (transpose ? p.edge(v, u) : p.edge(u, v)) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  return reaches_all(false) && reaches_all(true);
}

/// Simple directed cycle (r_1, ..., r_k), k >= 2, closing edge (r_k, r_1)
/// implicit.  Canonical form starts at the smallest node of the cycle.
struct Cycle {
  std::vector<int> nodes;
  int length() const { return static_cast<int>(nodes.size()); }
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> e;
    e.reserve(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k)
      e.emplace_back(nodes[k], nodes[(k + 1) % nodes.size()]);
    return e;
  }
  friend bool operator==(const Cycle& a, const Cycle& b) {
    return a.nodes == b.nodes;
  }
};

struct CycleEnumerationOptions {
  int max_nodes = 12;             // refuse larger graphs outright
  std::size_t max_cycles = 1000000;
};

namespace detail {

// Tarjan SCCs of the subgraph induced by `alive` nodes, iterative.
inline std::vector<std::vector<int>> strong_components(
    const SparsityPattern& p, const std::vector<char>& alive) {
  const int n = p.size();
  std::vector<int> index(static_cast<std::size_t>(n), -1),
      low(static_cast<std::size_t>(n), 0);
  std::vector<char> onstack(static_cast<std::size_t>(n), 0);
  std::vector<int> stack;
  std::vector<std::vector<int>> comps;
  int next_index = 0;

  struct Frame { int v; int j; };
  for (int root = 0; root < n; ++root) {
    if (!alive[root] || index[root] != -1) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    onstack[root] = 1;
    while (!call.empty()) {
      auto& f = call.back();
      bool descended = false;
      for (; f.j < n; ++f.j) {
        const int w = f.j;
        if (w == f.v || !alive[w] || !p.edge(f.v, w)) continue;
        if (index[w] == -1) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          onstack[w] = 1;
          ++f.j;  // resume after w when this frame continues
          call.push_back({w, 0});
          descended = true;
          break;
        }
        if (onstack[w]) low[f.v] = std::min(low[f.v], index[w]);
      }
      if (descended) continue;
      if (low[f.v] == index[f.v]) {
        comps.emplace_back();
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          onstack[w] = 0;
          comps.back().push_back(w);
        } while (w != f.v);
      }
      const int child = f.v;
      call.pop_back();
      if (!call.empty())
        low[call.back().v] = std::min(low[call.back().v], low[child]);
    }
  }
  return comps;
}

}  // namespace detail

/// All simple directed cycles of the pattern (Johnson's algorithm).  Each
/// cycle appears once, rooted at its smallest node; output is sorted by
/// (length, node sequence).  Throws EnumerationLimitError when the graph or
/// the cycle count exceeds the configured caps.
inline std::vector<Cycle> enumerate_cycles(
    const SparsityPattern& p, const CycleEnumerationOptions& opt = {}) {
  const int n = p.size();
  if (n > opt.max_nodes)
    throw EnumerationLimitError(
        "enumerate_cycles: graph has " + std::to_string(n) +
        " nodes, cap is " + std::to_string(opt.max_nodes));
  std::vector<Cycle> out;

  std::vector<char> blocked(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> blist(static_cast<std::size_t>(n));
  std::vector<int> path;

  // Adjacency inside the current strong component.
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));

  std::function<void(int)> unblock = [&](int v) {
    blocked[v] = 0;
    for (int w : blist[v])
      if (blocked[w]) unblock(w);
    blist[v].clear();
  };

  int root = 0;
  std::function<bool(int)> circuit = [&](int v) -> bool {
    bool found = false;
    path.push_back(v);
    blocked[v] = 1;
    for (int w : adj[v]) {
      if (w == root) {
        if (out.size() >= opt.max_cycles)
          throw EnumerationLimitError(
              "enumerate_cycles: more than " +
              std::to_string(opt.max_cycles) + " cycles");
        out.push_back(Cycle{path});
        found = true;
      } else if (!blocked[w]) {
        if (circuit(w)) found = true;
      }
    }
    if (found) {
      unblock(v);
    } else {
      for (int w : adj[v]) {
        auto& b = blist[w];
        if (std::find(b.begin(), b.end(), v) == b.end()) b.push_back(v);
      }
    }
    path.pop_back();
    return found;
  };

  std::vector<char> alive(static_cast<std::size_t>(n), 1);
  for (int s = 0; s < n; ++s) {
    // Strong component of the least remaining vertex among nodes >= s.
    for (int v = 0; v < n; ++v) alive[v] = v >= s;
    auto comps = detail::strong_components(p, alive);
    const std::vector<int>* comp = nullptr;
    int least = n;
    for (const auto& c : comps) {
      if (c.size() < 2) continue;
      const int m = *std::min_element(c.begin(), c.end());
      if (m < least) {
        least = m;
        comp = &c;
      }
    }
    if (!comp) break;
    root = least;
    std::vector<char> in_comp(static_cast<std::size_t>(n), 0);
    for (int v : *comp) in_comp[v] = 1;
    for (int v : *comp) {
      adj[v].clear();
      for (int w = 0; w < n; ++w)
        if (w != v && in_comp[w] && p.edge(v, w)) adj[v].push_back(w);
      blocked[v] = 0;
      blist[v].clear();
    }
    circuit(root);
    s = root;  // next pass drops the processed root
  }

  std::sort(out.begin(), out.end(), [](const Cycle& a, const Cycle& b) {
    if (a.nodes.size() != b.nodes.size())
      return a.nodes.size() < b.nodes.size();
    return a.nodes < b.nodes;
  });
  return out;
}

/// Multiplicative cycle constant c_r = prod_{(i,j) in r} a_ii / a_ij.
/// Every touched entry must be positive.
inline double cycle_constant(const Matrix& A, const Cycle& r) {
  detail::require(r.length() >= 2, "cycle_constant: cycle length < 2");
  double c = 1.0;
  for (const auto& [i, j] : r.edges()) {
    detail::require(i >= 0 && i < A.rows() && j >= 0 && j < A.cols(),
                    "cycle_constant: node out of range");
    const double num = A(i, i), den = A(i, j);
    if (!(num > 0.0) || !(den > 0.0))
      throw std::domain_error("cycle_constant: nonpositive entry on cycle at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
    c *= num / den;
  }
  return c;
}

namespace detail {

using BigInt = boost::multiprecision::cpp_int;

// Incremental exact row reduction over Q (integer rows, gcd-normalized).
// add() returns true when the row enlarges the span.
class ExactRowBasis {
 public:
  explicit ExactRowBasis(std::size_t width) : width_(width) {}

  bool add(std::vector<BigInt> row) {
    reduce(row);
    int pivot = first_nonzero(row);
    if (pivot < 0) return false;
    normalize(row);
    rows_.push_back(std::move(row));
    pivots_.push_back(pivot);
    return true;
  }

  bool in_span(std::vector<BigInt> row) const {
    reduce(row);
    return first_nonzero(row) < 0;
  }

  std::size_t rank() const { return rows_.size(); }
  const std::vector<int>& pivots() const { return pivots_; }

 private:
  void reduce(std::vector<BigInt>& row) const {
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const int c = pivots_[k];
      if (row[c] == 0) continue;
      const BigInt a = rows_[k][c], b = row[c];
      for (std::size_t j = 0; j < width_; ++j)
        row[j] = row[j] * a - rows_[k][j] * b;
    }
  }
  static int first_nonzero(const std::vector<BigInt>& row) {
    for (std::size_t j = 0; j < row.size(); ++j)
      if (row[j] != 0) return static_cast<int>(j);
    return -1;
  }
  static void normalize(std::vector<BigInt>& row) {
    BigInt g = 0;
    for (const auto& x : row) g = boost::multiprecision::gcd(g, x);
    if (g > 1)
      for (auto& x : row) x /= g;
  }

  std::size_t width_;
  std::vector<std::vector<BigInt>> rows_;
  std::vector<int> pivots_;
};

inline std::vector<BigInt> path_vector(
    const Cycle& r, const std::vector<std::pair<int, int>>& edges) {
  std::vector<BigInt> x(edges.size(), 0);
  for (const auto& e : r.edges()) {
    const auto it = std::find(edges.begin(), edges.end(), e);
    detail::require(it != edges.end(), "cycle edge missing from pattern");
    x[static_cast<std::size_t>(it - edges.begin())] = 1;
  }
  return x;
}

}  // namespace detail

/// Cycle-space basis of a strongly connected pattern.  `edges` fixes the
/// edge <-> row indexing of the 0/1 incidence matrix (m x mu); the last mu
/// edges are elimination pivots, so the trailing mu x mu block is
/// invertible.  Basis cycles are chosen greedily from the enumeration
/// ordered by (length, node sequence); independence is certified by exact
/// integer elimination.
struct CycleBasis {
  std::vector<std::pair<int, int>> edges;  // off-diagonal edges, pivots last
  std::vector<Cycle> cycles;               // mu basis cycles
  Eigen::MatrixXi incidence;               // edges.size() x mu, entries 0/1
  int dimension() const { return static_cast<int>(cycles.size()); }
};

inline CycleBasis cycle_basis(const SparsityPattern& p,
                              const CycleEnumerationOptions& opt = {}) {
  detail::require(is_strongly_connected(p),
                  "cycle_basis: pattern must be strongly connected");
  const auto edges = p.offdiagonal_edges();
  const int m = static_cast<int>(edges.size());
  const int mu = m - p.size() + 1;

  auto cycles = enumerate_cycles(p, opt);
  detail::ExactRowBasis basis(edges.size());
  std::vector<Cycle> chosen;
  for (const auto& r : cycles) {
    if (static_cast<int>(chosen.size()) == mu) break;
    if (basis.add(detail::path_vector(r, edges))) chosen.push_back(r);
  }
  if (static_cast<int>(chosen.size()) != mu)
    throw SolverError("cycle_basis: found " + std::to_string(chosen.size()) +
                      " independent cycles, expected " + std::to_string(mu));

  // Pivot edges last, canonical order within each group.
  std::vector<char> is_pivot(edges.size(), 0);
  for (int c : basis.pivots()) is_pivot[static_cast<std::size_t>(c)] = 1;
  CycleBasis out;
  for (int j = 0; j < m; ++j)
    if (!is_pivot[static_cast<std::size_t>(j)]) out.edges.push_back(edges[j]);
  for (int j = 0; j < m; ++j)
    if (is_pivot[static_cast<std::size_t>(j)]) out.edges.push_back(edges[j]);
  out.cycles = std::move(chosen);
  out.incidence = Eigen::MatrixXi::Zero(m, mu);
  for (int k = 0; k < mu; ++k)
    for (const auto& e : out.cycles[static_cast<std::size_t>(k)].edges()) {
      const auto it = std::find(out.edges.begin(), out.edges.end(), e);
      out.incidence(static_cast<int>(it - out.edges.begin()), k) = 1;
    }
  return out;
}

}  // namespace asap
