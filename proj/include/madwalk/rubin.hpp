#pragma once

// Rubin's exponential-clock construction. Every directed edge (from, to)
// carries i.i.d. Exp(1) variates Y(from, to, i); i counts earlier departures
// along that directed edge. From a vertex the walk takes the edge whose
// cumulative sum of Y_i / w_i (over i <= departures so far) is smallest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "error.hpp"
#include "formulas.hpp"
#include "rng.hpp"
#include "tree.hpp"
#include "walk.hpp"

namespace madwalk {

/// Clock family. Variates are pure functions of (seed, from, to, index), so
/// there is nothing to memoize and concurrent queries are safe.
class ClockStore {
 public:
  explicit ClockStore(std::uint64_t seed) : seed_(mix64(seed ^ 0x7c1f0d3a9e5b2468ULL)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double operator()(std::uint64_t fromKey, std::uint64_t toKey, std::uint64_t index) const noexcept {
    const std::uint64_t h = hashCombine(hashCombine(hashCombine(seed_, fromKey), toKey), index);
    // midpoint of a 53-bit cell: strictly inside (0, 1)
    const double u = (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
    return -std::log(u);
  }

  double operator()(const VertexId& from, const VertexId& to, std::uint64_t index) const {
    return (*this)(LazyTree::keyOf(from), LazyTree::keyOf(to), index);
  }

 private:
  std::uint64_t seed_;
};

/// Rate of the index-th clock on the directed edge from -> to.
inline double clockWeight(WalkParams params, const Configuration& omega, const VertexId& from, const VertexId& to,
                          std::uint64_t index) {
  if (!from.isRootParent() && to == from.parent()) return 1.0;
  detail::require(!to.isRootParent() && to.parent() == from, "clockWeight: vertices are not adjacent");
  if (index > 0) return params.u1;
  return omega.contains(to) ? params.u1 : params.u0;
}

using DirectedCounts = std::map<std::pair<VertexId, VertexId>, std::uint64_t>;

/// Time at which the directed edge next rings in local time at `from`.
inline double nextRing(const ClockStore& clocks, WalkParams params, const Configuration& omega, const VertexId& from,
                       const VertexId& to, std::uint64_t departures) {
  double s = 0.0;
  for (std::uint64_t i = 0; i <= departures; ++i) s += clocks(from, to, i) / clockWeight(params, omega, from, to, i);
  return s;
}

namespace detail {

inline std::uint64_t countOf(const DirectedCounts& counts, const VertexId& from, const VertexId& to) {
  const auto it = counts.find({from, to});
  return it == counts.end() ? 0 : it->second;
}

/// Argmin of next-ring times over candidates; the parent (listed first) wins ties.
inline VertexId earliest(const std::vector<VertexId>& candidates, const VertexId& from, const DirectedCounts& counts,
                         const ClockStore& clocks, WalkParams params, const Configuration& omega) {
  VertexId best = candidates.front();
  double bestTime = nextRing(clocks, params, omega, from, best, countOf(counts, from, best));
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double t = nextRing(clocks, params, omega, from, candidates[i], countOf(counts, from, candidates[i]));
    if (t < bestTime) {
      bestTime = t;
      best = candidates[i];
    }
  }
  return best;
}

}  // namespace detail

/// Reference Rubin step on addresses; recomputes clock sums from scratch.
/// Increments the departure count of the edge taken.
inline VertexId rubinStep(const VertexId& position, DirectedCounts& counts, const ClockStore& clocks, WalkParams params,
                          const Configuration& omega, LazyTree& tree) {
  detail::require(!position.isRootParent(), "rubinStep: position must not be r^-1");
  std::vector<VertexId> candidates{position.parent()};
  for (const auto& c : tree.children(position)) candidates.push_back(c);
  const VertexId next = detail::earliest(candidates, position, counts, clocks, params, omega);
  ++counts[{position, next}];
  return next;
}

/// Arena-backed Rubin walk with incremental clock sums.
class RubinWalk {
 public:
  RubinWalk(LazyTree& tree, WalkParams params, const ClockStore& clocks,
            const Configuration& omega = Configuration::star())
      : tree_(&tree), params_(params), clocks_(clocks) {
    for (const auto& e : omega.edges()) {
      const NodeRef v = tree_->locate(e);
      grow(v);
      initial_[v] = 1;
    }
  }

  LazyTree& tree() noexcept { return *tree_; }
  NodeRef position() const noexcept { return position_; }
  int level() const noexcept { return tree_->level(position_); }
  std::uint64_t steps() const noexcept { return steps_; }

  /// Departures so far along (v, parent(v)) and (parent(v), v).
  std::uint64_t upDepartures(NodeRef v) const noexcept { return v < up_.size() ? up_[v].count : 0; }
  std::uint64_t downDepartures(NodeRef v) const noexcept { return v < down_.size() ? down_[v].count : 0; }

  NodeRef step() {
    if (position_ == kRootParentNode) {
      position_ = kRootNode;
      ++steps_;
      return position_;
    }
    const NodeRef x = position_;
    const auto a = tree_->arity(x);
    NodeRef best = tree_->parent(x);
    double bestTime = upRing(x);
    bool down = false;
    for (std::uint32_t i = 1; i <= a; ++i) {
      const NodeRef c = tree_->child(x, i);
      const double t = downRing(c);
      if (t < bestTime) {
        bestTime = t;
        best = c;
        down = true;
      }
    }
    Edge& e = down ? down_[best] : up_[x];
    ++e.count;
    const NodeRef from = x;
    const NodeRef to = best;
    e.ring += clocks_(tree_->key(from), tree_->key(to), e.count) / (down ? params_.u1 : 1.0);
    position_ = best;
    ++steps_;
    return position_;
  }

 private:
  struct Edge {
    std::uint64_t count = 0;
    double ring = -1.0;  // negative: not yet drawn
  };

  void grow(NodeRef v) {
    if (v >= up_.size()) {
      const auto n = std::max<std::size_t>(static_cast<std::size_t>(v) + 1, tree_->size());
      up_.resize(n);
      down_.resize(n);
      initial_.resize(n, 0);
    }
  }

  double upRing(NodeRef x) {
    grow(x);
    Edge& e = up_[x];
    if (e.ring < 0) e.ring = clocks_(tree_->key(x), tree_->key(tree_->parent(x)), 0);
    return e.ring;
  }

  double downRing(NodeRef c) {
    grow(c);
    Edge& e = down_[c];
    if (e.ring < 0) {
      const double w = initial_[c] != 0 ? params_.u1 : params_.u0;
      e.ring = clocks_(tree_->key(tree_->parent(c)), tree_->key(c), 0) / w;
    }
    return e.ring;
  }

  LazyTree* tree_;
  WalkParams params_;
  ClockStore clocks_;
  NodeRef position_ = kRootParentNode;
  std::uint64_t steps_ = 0;
  std::vector<Edge> up_;    // indexed by the lower endpoint
  std::vector<Edge> down_;  // indexed by the lower endpoint
  std::vector<std::uint8_t> initial_;
};

/// Finite subtree given by its top vertex and edges (lower endpoints).
class SpecialSubtree {
 public:
  SpecialSubtree(VertexId top, std::vector<VertexId> childEnds) : top_(std::move(top)), edges_(std::move(childEnds)) {
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    detail::require(!edges_.empty(), "special subtree needs at least one edge");
    int topDegree = 0;
    for (const auto& e : edges_) {
      detail::require(!e.isRootParent(), "edge lower endpoint cannot be r^-1");
      const VertexId p = e.parent();
      detail::require(top_.isRootParent() ? true : top_.isAncestorOrSelf(p) || p == top_,
                      "edge lies outside the subtree below its top vertex");
      detail::require(p == top_ || std::binary_search(edges_.begin(), edges_.end(), p),
                      "subtree edges must be connected to the top vertex");
      topDegree += p == top_;
    }
    detail::require(topDegree == 1, "top vertex must have degree one in the subtree");
  }

  /// The path from `top` down to its descendant `bottom`.
  static SpecialSubtree path(const VertexId& top, const VertexId& bottom) {
    detail::require(bottom.level() > top.level(), "path bottom must lie below top");
    std::vector<VertexId> edges;
    for (VertexId v = bottom; v != top; v = v.parent()) {
      detail::require(!v.isRootParent(), "bottom is not a descendant of top");
      edges.push_back(v);
    }
    return SpecialSubtree(top, std::move(edges));
  }

  const VertexId& top() const noexcept { return top_; }
  const std::vector<VertexId>& edges() const noexcept { return edges_; }

  bool containsEdge(const VertexId& a, const VertexId& b) const {
    const VertexId& lower = a.level() > b.level() ? a : b;
    const VertexId& upper = a.level() > b.level() ? b : a;
    return !lower.isRootParent() && lower.parent() == upper && std::binary_search(edges_.begin(), edges_.end(), lower);
  }

  /// Neighbours inside the subtree, parent first then children ascending.
  std::vector<VertexId> neighbours(const VertexId& v) const {
    std::vector<VertexId> out;
    if (v != top_ && std::binary_search(edges_.begin(), edges_.end(), v)) out.push_back(v.parent());
    for (const auto& e : edges_) {
      if (e.parent() == v) out.push_back(e);
    }
    return out;
  }

 private:
  VertexId top_;
  std::vector<VertexId> edges_;
};

/// Extension of the clock-driven walk to a special subtree: starts at the
/// top vertex, uses only clocks on subtree edges, steps from leaves are
/// deterministic. Returns the visited vertices, starting position included.
inline std::vector<VertexId> extensionWalk(const SpecialSubtree& g, const ClockStore& clocks, WalkParams params,
                                           const Configuration& omega, std::size_t steps) {
  std::vector<VertexId> out{g.top()};
  out.reserve(steps + 1);
  DirectedCounts counts;
  VertexId pos = g.top();
  for (std::size_t n = 0; n < steps; ++n) {
    const auto nb = g.neighbours(pos);
    if (nb.size() == 1) {
      pos = nb.front();
    } else {
      const VertexId next = detail::earliest(nb, pos, counts, clocks, params, omega);
      ++counts[{pos, next}];
      pos = next;
    }
    out.push_back(pos);
  }
  return out;
}

/// Path extension on keys p_0..p_m. Returns true if p_m is hit before the
/// walk returns to p_0. edgeReinforced[i] flags the edge (p_{i-1}, p_i) as in
/// the starting configuration; index 0 is unused.
inline bool pathHitsBottom(const ClockStore& clocks, WalkParams params, std::span<const std::uint64_t> keys,
                           std::span<const std::uint8_t> edgeReinforced, std::uint64_t stepCap = 100'000'000) {
  const std::size_t m = keys.size() - 1;
  detail::require(m >= 1 && edgeReinforced.size() == keys.size(), "pathHitsBottom: bad path");
  if (m == 1) return true;
  struct Ring {
    std::uint64_t count = 0;
    double t = 0.0;
  };
  std::vector<Ring> up(m), down(m);
  for (std::size_t i = 1; i < m; ++i) {
    up[i].t = clocks(keys[i], keys[i - 1], 0);
    down[i].t = clocks(keys[i], keys[i + 1], 0) / (edgeReinforced[i + 1] != 0 ? params.u1 : params.u0);
  }
  std::size_t pos = 1;
  for (std::uint64_t n = 0; n < stepCap; ++n) {
    if (up[pos].t <= down[pos].t) {
      auto& r = up[pos];
      r.t += clocks(keys[pos], keys[pos - 1], ++r.count);
      if (--pos == 0) return false;
    } else {
      auto& r = down[pos];
      r.t += clocks(keys[pos], keys[pos + 1], ++r.count) / params.u1;
      if (++pos == m) return true;
    }
  }
  throw BudgetExceeded("pathHitsBottom: step cap reached");
}

/// Shared-clock monotonicity check on the path [r^-1, r.1...1] (n+1 edges). omegaHigh and
/// omegaLow are prefixes of the path, reinforced to depths mHigh and mLow.
/// Counts samples where the lower environment reaches the bottom first and
/// the higher one does not.
inline std::uint64_t pathMonotonicityCheck(WalkParams params, int n, int depthHigh, int depthLow,
                                           std::uint64_t samples, std::uint64_t seed) {
  detail::require(n >= 1 && depthHigh >= 0 && depthLow >= 0 && depthHigh <= n && depthLow <= n,
                  "pathMonotonicityCheck: depths must lie in [0, n]");
  const VertexId bottom = VertexId::fromPath(std::vector<std::uint32_t>(static_cast<std::size_t>(n), 1));
  const auto high = Configuration::pathPrefix(bottom, depthHigh);
  const auto low = Configuration::pathPrefix(bottom, depthLow);
  detail::require(dominates(high, low, params), "pathMonotonicityCheck: omegaHigh must dominate omegaLow");
  std::vector<std::uint64_t> keys;
  std::vector<std::uint8_t> fHigh, fLow;
  keys.push_back(0);
  fHigh.push_back(0);
  fLow.push_back(0);
  VertexId v = VertexId::root();
  for (int i = 0; i <= n; ++i) {
    keys.push_back(LazyTree::keyOf(v));
    fHigh.push_back(high.contains(v));
    fLow.push_back(low.contains(v));
    if (i < n) v = v.child(1);
  }
  std::uint64_t violations = 0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    const ClockStore clocks(deriveSeed(seed, s));
    const bool lo = pathHitsBottom(clocks, params, keys, fLow);
    if (lo && !pathHitsBottom(clocks, params, keys, fHigh)) ++violations;
  }
  return violations;
}

struct GreenProcess {
  int nStar = 0;
  std::vector<std::uint64_t> generations;  // green counts, generation 0 first
  bool survived = false;                   // non-empty at the generation cap
  bool capped = false;                     // some generation was truncated to the population cap
};

/// Smallest n with d^n psi_n > 1, searched up to maxN.
inline std::optional<int> greenNStar(WalkParams params, double d, int maxN = 200) {
  for (int n = 1; n <= maxN; ++n) {
    if (n * std::log(d) + std::log(psi(params, n)) > 0) return n;
  }
  return std::nullopt;
}

/// Green colouring under omega*: a vertex mu n* levels below a green nu is
/// green when the extension on [nu^-1, mu] reaches mu first. All extensions
/// share one clock family.
inline GreenProcess greenProcess(LazyTree& tree, WalkParams params, int nStar, int generationCap,
                                 const ClockStore& clocks, std::size_t populationCap = 4096) {
  detail::require(nStar >= 1, "greenProcess: nStar must be >= 1");
  detail::require(generationCap >= 0, "greenProcess: generationCap must be >= 0");
  GreenProcess g;
  g.nStar = nStar;
  std::vector<NodeRef> current{kRootNode};
  g.generations.push_back(1);
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(nStar) + 2);
  const std::vector<std::uint8_t> flags(keys.size(), 0);
  std::vector<NodeRef> next;
  for (int gen = 1; gen <= generationCap && !current.empty(); ++gen) {
    next.clear();
    for (const NodeRef nu : current) {
      keys[0] = tree.key(tree.parent(nu));
      keys[1] = tree.key(nu);
      // depth-first over descendants n* levels below nu
      std::vector<std::pair<NodeRef, std::uint32_t>> stack{{nu, 0}};
      while (!stack.empty()) {
        auto& [v, i] = stack.back();
        const auto depth = static_cast<std::size_t>(tree.level(v) - tree.level(nu));
        if (depth == static_cast<std::size_t>(nStar)) {
          if (pathHitsBottom(clocks, params, keys, flags)) next.push_back(v);
          stack.pop_back();
          continue;
        }
        if (i == tree.arity(v)) {
          stack.pop_back();
          continue;
        }
        const NodeRef c = tree.child(v, ++i);
        keys[depth + 2] = tree.key(c);
        stack.push_back({c, 0});
      }
    }
    if (next.size() > populationCap) {
      next.resize(populationCap);
      g.capped = true;
    }
    g.generations.push_back(next.size());
    current.swap(next);
  }
  g.survived = static_cast<int>(g.generations.size()) == generationCap + 1 && g.generations.back() > 0;
  return g;
}

}  // namespace madwalk
