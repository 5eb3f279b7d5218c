#pragma once

// MAD-walk transition kernel: from a vertex other than r^-1 the parent edge
// has weight 1, a previously crossed child edge weight u1 and a fresh child
// edge weight u0. From r^-1 the walk always steps to r.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "madwalk/error.hpp"
#include "madwalk/tree.hpp"

namespace madwalk {

struct WalkParams {
  double u0 = 1.0;  ///< weight of an unvisited child edge (parent edge = 1)
  double u1 = 1.0;  ///< weight of a visited child edge

  static WalkParams make(double u0, double u1) {
    detail::require(std::isfinite(u0) && u0 > 0.0, "u0 must be positive");
    detail::require(std::isfinite(u1) && u1 > 0.0, "u1 must be positive");
    return WalkParams{u0, u1};
  }

  friend bool operator==(const WalkParams&, const WalkParams&) = default;
};

/// Multiplicative once-reinforcement: backward weight 1+beta, fresh forward
/// alpha, visited forward alpha(1+beta), rescaled.
inline WalkParams multiplicativeParams(double alpha, double beta) {
  detail::require(alpha > 0.0, "alpha must be positive");
  detail::require(beta > -1.0, "multiplicative reinforcement needs beta > -1");
  return WalkParams::make(alpha / (1.0 + beta), alpha);
}

/// Additive once-reinforcement: visited forward weight alpha+beta, rescaled.
inline WalkParams additiveParams(double alpha, double beta) {
  detail::require(alpha > 0.0, "alpha must be positive");
  detail::require(beta > -std::min(alpha, 1.0), "additive reinforcement needs beta > -min(alpha, 1)");
  return WalkParams::make(alpha / (1.0 + beta), (alpha + beta) / (1.0 + beta));
}

/// Finite set of reinforced edges, each stored as its child endpoint.
class Configuration {
 public:
  Configuration() = default;

  /// omega*: only the edge (r^-1, r).
  static Configuration star() {
    Configuration c;
    c.edges_.insert(VertexId::root());
    return c;
  }

  /// Validated construction; throws unless the edge set is coherent.
  static Configuration fromEdges(const std::vector<VertexId>& childEnds) {
    Configuration c;
    for (const auto& v : childEnds) c.insert(v);
    detail::require(c.isCoherent(), "configuration is not coherent");
    return c;
  }

  /// Reinforced prefix of a path: edges above path[0..depth) plus (r^-1, r).
  static Configuration pathPrefix(const VertexId& target, int depth) {
    detail::require(depth >= 0 && depth <= target.level(), "prefix depth out of range");
    Configuration c = star();
    VertexId v = VertexId::root();
    for (int i = 0; i < depth; ++i) {
      v = v.child(target.path()[static_cast<std::size_t>(i)]);
      c.insert(v);
    }
    return c;
  }

  void insert(const VertexId& childEnd) {
    detail::require(!childEnd.isRootParent(), "r^-1 is not the child end of any edge");
    edges_.insert(childEnd);
  }

  bool contains(const VertexId& childEnd) const { return edges_.count(childEnd) != 0; }
  std::size_t size() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return edges_.empty(); }

  /// Property (i): a reinforced child edge implies the parent edge is reinforced.
  bool isCoherent() const {
    return std::all_of(edges_.begin(), edges_.end(),
                       [&](const VertexId& v) { return v.isRoot() || contains(v.parent()); });
  }

  bool isSubsetOf(const Configuration& other) const {
    return std::all_of(edges_.begin(), edges_.end(), [&](const VertexId& v) { return other.contains(v); });
  }

  std::vector<VertexId> edges() const {
    std::vector<VertexId> out(edges_.begin(), edges_.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.size() == b.size() && a.isSubsetOf(b);
  }

 private:
  std::unordered_set<VertexId> edges_;
};

/// The partial order on configurations: with u1 >= u0 more reinforcement is
/// "higher"; with u1 <= u0 less reinforcement is higher.
inline bool dominates(const Configuration& high, const Configuration& low, WalkParams params) {
  if (params.u1 > params.u0) return low.isSubsetOf(high);
  if (params.u1 < params.u0) return high.isSubsetOf(low);
  return low.isSubsetOf(high) || high.isSubsetOf(low);
}

template <class Vertex>
struct Neighbor {
  Vertex vertex;
  double weight;
};

/// Unnormalized weights out of `position` in the fixed order
/// (parent, children ascending).
inline std::vector<Neighbor<VertexId>> stepWeights(const VertexId& position, const Configuration& visited,
                                                   WalkParams params, LazyTree& tree) {
  detail::require(!position.isRootParent(), "step weights are undefined at r^-1 (forced step)");
  std::vector<Neighbor<VertexId>> out;
  const auto a = tree.arity(position);
  out.reserve(a + 1);
  out.push_back({position.parent(), 1.0});
  for (std::uint32_t i = 1; i <= a; ++i) {
    auto c = position.child(i);
    const double w = visited.contains(c) ? params.u1 : params.u0;
    out.push_back({std::move(c), w});
  }
  return out;
}

/// Inverse-CDF choice among weighted neighbours; u in [0,1), u=1 maps to the last.
template <class Vertex>
std::size_t chooseNeighbor(std::span<const Neighbor<Vertex>> weights, double u) {
  double total = 0.0;
  for (const auto& n : weights) total += n.weight;
  double x = u * total;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    if (x < weights[i].weight) return i;
    x -= weights[i].weight;
  }
  return weights.size() - 1;
}

/// Reference (address-level) step used by the exact oracles. Updates `visited`.
inline VertexId referenceStep(const VertexId& position, Configuration& visited, WalkParams params,
                              LazyTree& tree, double u) {
  if (position.isRootParent()) {
    visited.insert(VertexId::root());
    return VertexId::root();
  }
  const auto weights = stepWeights(position, visited, params, tree);
  const auto pick = chooseNeighbor<VertexId>(weights, u);
  const VertexId& next = weights[pick].vertex;
  visited.insert(next.level() > position.level() ? next : position);
  return next;
}

/// Arena-backed MAD walk. Keeps per-vertex reinforcement flags and visited
/// child counts, so a step costs O(1) unless the current vertex has a mix of
/// visited and unvisited children.
class MadWalk {
 public:
  MadWalk(LazyTree& tree, WalkParams params, const Configuration& omega = Configuration::star())
      : tree_(&tree), params_(params) {
    for (const auto& e : omega.edges()) markReinforced(tree_->locate(e));
  }

  LazyTree& tree() noexcept { return *tree_; }
  const LazyTree& tree() const noexcept { return *tree_; }
  WalkParams params() const noexcept { return params_; }
  NodeRef position() const noexcept { return position_; }
  int level() const noexcept { return tree_->level(position_); }
  std::uint64_t steps() const noexcept { return steps_; }

  /// Whether the edge (parent(v), v) is in the current reinforced set.
  bool reinforced(NodeRef v) const noexcept { return v < reinforced_.size() && reinforced_[v] != 0; }

  /// Number of children of v whose edges are reinforced.
  std::uint32_t visitedChildren(NodeRef v) const noexcept {
    return v < visitedCount_.size() ? visitedCount_[v] : 0u;
  }

  /// Weights in the order (parent, children ascending); empty at r^-1.
  std::vector<Neighbor<NodeRef>> stepWeights() {
    std::vector<Neighbor<NodeRef>> out;
    if (position_ == kRootParentNode) return out;
    const auto a = tree_->arity(position_);
    out.reserve(a + 1);
    out.push_back({tree_->parent(position_), 1.0});
    for (std::uint32_t i = 1; i <= a; ++i) {
      const NodeRef c = tree_->child(position_, i);
      out.push_back({c, reinforced(c) ? params_.u1 : params_.u0});
    }
    return out;
  }

  /// One step driven by u in [0, 1).
  NodeRef step(double u) { return moveTo(choose(u)); }

  /// The neighbour the kernel selects for u, without moving.
  NodeRef choose(double u) {
    if (position_ == kRootParentNode) return kRootNode;
    const auto a = tree_->arity(position_);
    const auto k = visitedChildren(position_);
    const double total = 1.0 + k * params_.u1 + (a - k) * params_.u0;
    double x = u * total;
    if (x < 1.0 || a == 0) return tree_->parent(position_);
    x -= 1.0;
    if (k == 0 || k == a) {
      const double w = k == 0 ? params_.u0 : params_.u1;
      const double slot = std::floor(x / w);
      const auto i = slot >= a - 1 ? a : static_cast<std::uint32_t>(slot) + 1;
      return tree_->child(position_, i);
    }
    NodeRef created = tree_->firstCreatedChild(position_);
    for (std::uint32_t i = 1; i <= a; ++i) {
      while (created != kNoNode && tree_->childIndex(created) < i) created = tree_->nextCreatedSibling(created);
      const bool isVisited = created != kNoNode && tree_->childIndex(created) == i && reinforced(created);
      const double w = isVisited ? params_.u1 : params_.u0;
      if (x < w || i == a) return tree_->child(position_, i);
      x -= w;
    }
    return tree_->child(position_, a);
  }

  /// Move to an adjacent vertex, reinforcing the crossed edge.
  NodeRef moveTo(NodeRef next) {
    const NodeRef lower = tree_->level(next) > tree_->level(position_) ? next : position_;
    detail::ensure(tree_->parent(lower) == (lower == next ? position_ : next), "moveTo target is not adjacent");
    markReinforced(lower);
    position_ = next;
    ++steps_;
    return position_;
  }

  /// Materialize the reinforced edge set (for tests and small cases).
  Configuration visited() const {
    Configuration c;
    for (NodeRef v = 0; v < reinforced_.size(); ++v) {
      if (reinforced_[v] != 0) c.insert(tree_->vertex(v));
    }
    return c;
  }

 private:
  void grow(NodeRef v) {
    if (v >= reinforced_.size()) {
      const auto n = std::max<std::size_t>(static_cast<std::size_t>(v) + 1, tree_->size());
      reinforced_.resize(n, 0);
      visitedCount_.resize(n, 0);
    }
  }

  void markReinforced(NodeRef v) {
    if (v == kRootParentNode) return;
    grow(v);
    if (reinforced_[v] != 0) return;
    reinforced_[v] = 1;
    const NodeRef p = tree_->parent(v);
    grow(p);
    ++visitedCount_[p];
  }

  LazyTree* tree_;
  WalkParams params_;
  NodeRef position_ = kRootParentNode;
  std::uint64_t steps_ = 0;
  std::vector<std::uint8_t> reinforced_;
  std::vector<std::uint32_t> visitedCount_;
};

/// CSV rows `step,level,vertex_path` for a recorded trajectory.
inline void writeTrajectoryCsv(std::ostream& out, const LazyTree& tree, std::span<const NodeRef> trajectory) {
  out << "step,level,vertex_path\n";
  for (std::size_t n = 0; n < trajectory.size(); ++n) {
    out << n << ',' << tree.level(trajectory[n]) << ',' << tree.vertex(trajectory[n]).toString() << '\n';
  }
}

}  // namespace madwalk
