#pragma once

// Exact ground truth on small instances: a linear solve for the (pos, max)
// chain on a path, exhaustive trajectory enumeration on truncated trees, and
// the expected range before return to r^-1 by absorption analysis.

#include <gmpxx.h>

#include <algorithm>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "madwalk/error.hpp"
#include "madwalk/formulas.hpp"
#include "madwalk/tree.hpp"
#include "madwalk/walk.hpp"

namespace madwalk {

namespace detail {

inline bool isZero(double x) { return x == 0.0; }
inline bool isZero(const mpq_class& x) { return sgn(x) == 0; }
inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const mpq_class& x) { return std::abs(x.get_d()); }

/// Gaussian elimination with partial pivoting; A is row-major n x n.
template <class Field>
std::vector<Field> solveDense(std::vector<Field> A, std::vector<Field> rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < n; ++row) {
      if (magnitude(A[row * n + col]) > magnitude(A[pivot * n + col])) pivot = row;
    }
    ensure(!isZero(A[pivot * n + col]), "singular linear system");
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(A[col * n + j], A[pivot * n + j]);
      std::swap(rhs[col], rhs[pivot]);
    }
    for (std::size_t row = col + 1; row < n; ++row) {
      if (isZero(A[row * n + col])) continue;
      const Field factor = A[row * n + col] / A[col * n + col];
      for (std::size_t j = col; j < n; ++j) A[row * n + j] -= factor * A[col * n + j];
      rhs[row] -= factor * rhs[col];
    }
  }
  std::vector<Field> x(n);
  for (std::size_t i = n; i-- > 0;) {
    Field s = rhs[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= A[i * n + j] * x[j];
    x[i] = s / A[i * n + i];
  }
  return x;
}

inline double residualInf(const std::vector<double>& A, const std::vector<double>& x, const std::vector<double>& rhs) {
  const std::size_t n = rhs.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = -rhs[i];
    for (std::size_t j = 0; j < n; ++j) s += A[i * n + j] * x[j];
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

}  // namespace detail

/// The (pos, max) chain of a MAD walk on {-1, ..., n}: up with probability b
/// at the running maximum, a elsewhere; absorbed at -1 and n.
struct PathChain {
  int n = 1;
  MadPathParams params;
};

inline constexpr int kRationalPathLimit = 12;

namespace detail {

template <class Field>
Field pathHitSolve(int n, const Field& a, const Field& b, int startPos, int startMax) {
  // unknowns h(pos, max) for 0 <= pos <= max <= n-1
  auto index = [](int pos, int mx) { return static_cast<std::size_t>(mx * (mx + 1) / 2 + pos); };
  const std::size_t size = static_cast<std::size_t>(n * (n + 1) / 2);
  std::vector<Field> A(size * size, Field(0));
  std::vector<Field> rhs(size, Field(0));
  for (int mx = 0; mx < n; ++mx) {
    for (int pos = 0; pos <= mx; ++pos) {
      const std::size_t row = index(pos, mx);
      const Field up = pos == mx ? b : a;
      const Field down = Field(1) - up;
      A[row * size + row] += Field(1);
      const int upPos = pos + 1;
      const int upMax = std::max(mx, upPos);
      if (upPos == n) {
        rhs[row] += up;
      } else {
        A[row * size + index(upPos, upMax)] -= up;
      }
      if (pos - 1 >= 0) A[row * size + index(pos - 1, mx)] -= down;
    }
  }
  const auto x = solveDense<Field>(A, rhs);
  if constexpr (std::is_same_v<Field, double>) {
    ensure(residualInf(A, x, rhs) < 1e-12, "path chain residual check failed");
  }
  return x[index(startPos, startMax)];
}

}  // namespace detail

/// Probability of absorbing at n before -1 from (startPos, startMax), exact
/// in rational arithmetic for n <= 12.
inline mpq_class exactPathHitRational(int n, const mpq_class& a, const mpq_class& b, int startPos = 0,
                                      int startMax = 0) {
  detail::require(n >= 1, "path length must be positive");
  detail::require(a > 0 && a < 1 && b > 0 && b < 1, "a and b must lie in (0, 1)");
  detail::require(-1 <= startPos && startPos <= startMax && startMax <= n, "need -1 <= pos <= max <= n");
  if (startPos == -1) return mpq_class(0);
  if (startMax == n) {
    // the maximum already sits at n only if the walk was absorbed there
    detail::require(startPos == n, "a walk with max n has been absorbed at n");
    return mpq_class(1);
  }
  return detail::pathHitSolve<mpq_class>(n, a, b, startPos, startMax);
}

inline double exactPathHit(const PathChain& chain, int startPos = 0, int startMax = 0) {
  const int n = chain.n;
  detail::require(n >= 1, "path length must be positive");
  detail::require(-1 <= startPos && startPos <= startMax && startMax <= n, "need -1 <= pos <= max <= n");
  if (n <= kRationalPathLimit) {
    return exactPathHitRational(n, mpq_class(chain.params.a), mpq_class(chain.params.b), startPos, startMax).get_d();
  }
  if (startPos == -1) return 0.0;
  if (startMax == n) {
    detail::require(startPos == n, "a walk with max n has been absorbed at n");
    return 1.0;
  }
  return detail::pathHitSolve<double>(n, chain.params.a, chain.params.b, startPos, startMax);
}

/// Exact probability that the walk on [r^-1, mu], |mu| = n, whose first m
/// path edges below r are already reinforced, hits mu before returning.
inline double exactPathHitWithPrefix(WalkParams params, int n, int reinforcedDepth) {
  detail::require(reinforcedDepth >= 0 && reinforcedDepth < n, "prefix depth must lie in [0, n)");
  return exactPathHit(PathChain{n, MadPathParams::fromWalk(params)}, 0, reinforcedDepth);
}

/// A finite tree (the law truncated at depth D) with walk parameters.
struct EnumTree {
  OffspringLaw law = OffspringLaw::regular(2);
  std::uint64_t seed = 0;
  int depth = 3;
  WalkParams params;

  LazyTree materialize() const { return LazyTree(law, seed, depth); }
};

using Trajectory = std::vector<VertexId>;

inline std::string trajectoryKey(const Trajectory& t) {
  std::string out;
  for (const auto& v : t) {
    if (!out.empty()) out += ' ';
    out += v.toString();
  }
  return out;
}

inline constexpr std::size_t kEnumerationBudget = 10'000'000;

/// Exact law of the first L steps from r^-1 (trajectories of L+1 vertices).
inline std::map<Trajectory, double> enumerateStepDistribution(const EnumTree& tree, int prefixLength,
                                                              std::size_t budget = kEnumerationBudget) {
  detail::require(prefixLength >= 0 && prefixLength <= 12, "prefix length must lie in [0, 12]");
  LazyTree t = tree.materialize();
  std::map<Trajectory, double> out;
  Trajectory path{VertexId::rootParent()};
  std::function<void(const Configuration&, double)> recurse = [&](const Configuration& visited, double prob) {
    if (static_cast<int>(path.size()) == prefixLength + 1) {
      if (out.size() >= budget) throw BudgetExceeded("trajectory enumeration exceeded its budget");
      out.emplace(path, prob);
      return;
    }
    const VertexId here = path.back();
    if (here.isRootParent()) {
      Configuration next = visited;
      next.insert(VertexId::root());
      path.push_back(VertexId::root());
      recurse(next, prob);
      path.pop_back();
      return;
    }
    const auto weights = stepWeights(here, visited, tree.params, t);
    double total = 0.0;
    for (const auto& w : weights) total += w.weight;
    for (const auto& w : weights) {
      Configuration next = visited;
      if (w.vertex.level() > here.level()) next.insert(w.vertex);
      path.push_back(w.vertex);
      recurse(next, prob * (w.weight / total));
      path.pop_back();
    }
  };
  recurse(Configuration{}, 1.0);
  return out;
}

struct RangeResult {
  double expectedRange = 0.0;  ///< vertices of the tree (r^-1 excluded) visited before return
  int depth = 0;
  std::size_t visitedSets = 0;
};

inline constexpr std::size_t kMaxEnumVertices = 512;

/// Expected number of distinct vertices visited before returning to r^-1,
/// on the tree truncated (reflecting) at depth D.
inline RangeResult exactMeanReturnRange(const EnumTree& tree, std::size_t stateBudget = 2'000'000) {
  detail::require(tree.depth >= 0 && tree.depth <= 8, "depth must lie in [0, 8]");
  LazyTree t = tree.materialize();
  // explicit vertex list; index 0 is r
  std::vector<NodeRef> verts{kRootNode};
  for (std::size_t i = 0; i < verts.size(); ++i) {
    for (std::uint32_t c = 1; c <= t.arity(verts[i]); ++c) {
      verts.push_back(t.child(verts[i], c));
      if (verts.size() > kMaxEnumVertices) throw BudgetExceeded("truncated tree has too many vertices");
    }
  }
  std::unordered_map<NodeRef, std::size_t> slot;
  for (std::size_t i = 0; i < verts.size(); ++i) slot[verts[i]] = i;

  using Set = std::bitset<kMaxEnumVertices>;
  struct SetHash {
    std::size_t operator()(const Set& s) const noexcept { return std::hash<Set>{}(s); }
  };
  // value[S][j]: expected final range from the j-th member of S (in slot order)
  std::unordered_map<Set, std::vector<double>, SetHash> memo;

  std::function<const std::vector<double>&(const Set&)> solve = [&](const Set& S) -> const std::vector<double>& {
    if (auto it = memo.find(S); it != memo.end()) return it->second;
    if (memo.size() >= stateBudget) throw BudgetExceeded("visited-set state space exceeded its budget");
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < verts.size(); ++i) {
      if (S.test(i)) members.push_back(i);
    }
    std::unordered_map<std::size_t, std::size_t> pos;
    for (std::size_t j = 0; j < members.size(); ++j) pos[members[j]] = j;
    const std::size_t m = members.size();
    const double range = static_cast<double>(m);
    std::vector<double> A(m * m, 0.0);
    std::vector<double> rhs(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const NodeRef v = verts[members[j]];
      A[j * m + j] = 1.0;
      const auto a = t.arity(v);
      std::uint32_t k = 0;
      for (std::uint32_t c = 1; c <= a; ++c) k += S.test(slot[t.child(v, c)]) ? 1u : 0u;
      const double total = 1.0 + k * tree.params.u1 + (a - k) * tree.params.u0;
      // parent
      const NodeRef p = t.parent(v);
      if (p == kRootParentNode) {
        rhs[j] += range / total;
      } else {
        A[j * m + pos[slot[p]]] -= 1.0 / total;
      }
      for (std::uint32_t c = 1; c <= a; ++c) {
        const std::size_t ci = slot[t.child(v, c)];
        if (S.test(ci)) {
          A[j * m + pos[ci]] -= tree.params.u1 / total;
        } else {
          Set bigger = S;
          bigger.set(ci);
          const auto& sub = solve(bigger);
          std::size_t rank = 0;
          for (std::size_t i = 0; i < ci; ++i) rank += bigger.test(i) ? 1 : 0;
          rhs[j] += tree.params.u0 / total * sub[rank];
        }
      }
    }
    auto x = detail::solveDense<double>(A, rhs);
    detail::ensure(detail::residualInf(A, x, rhs) < 1e-9 * std::max(1.0, range), "range solve residual too large");
    return memo.emplace(S, std::move(x)).first->second;
  };

  Set start;
  start.set(0);
  RangeResult out;
  out.expectedRange = solve(start)[0];
  out.depth = tree.depth;
  out.visitedSets = memo.size();
  return out;
}

}  // namespace madwalk
