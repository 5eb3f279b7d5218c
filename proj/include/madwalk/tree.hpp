#pragma once

// Lazily generated rooted trees (regular and Galton-Watson) augmented with the
// root's parent. Vertices are addressed by child-index paths from the root.
//
// The arity of a vertex is a pure function of (seed, path): the path is hashed
// incrementally and the hash drives an inverse-CDF draw from the offspring
// law. Lazy exploration order therefore never changes the tree.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "madwalk/error.hpp"
#include "madwalk/rng.hpp"

namespace madwalk {

namespace detail {

inline std::string formatDouble(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

inline double parseDouble(std::string_view text, std::string_view what) {
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw ConfigError("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  }
  return value;
}

template <class Int>
Int parseInteger(std::string_view text, std::string_view what) {
  Int value{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw ConfigError("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  }
  return value;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline constexpr std::uint32_t kMaxArity = std::numeric_limits<std::uint32_t>::max();

/// Offspring distribution for tree generation.
class OffspringLaw {
 public:
  enum class Kind { Regular, Table, GeometricShifted };

  static OffspringLaw regular(std::uint32_t d) {
    detail::require(d >= 1, "regular law needs d >= 1");
    OffspringLaw law;
    law.kind_ = Kind::Regular;
    law.d_ = d;
    law.mean_ = d;
    return law;
  }

  /// probabilities[k] = P(arity = k); finitely supported.
  static OffspringLaw table(std::vector<double> probabilities) {
    detail::require(!probabilities.empty(), "table law needs at least one entry");
    detail::require(probabilities.size() - 1 <= kMaxArity, "table law arity too large");
    double total = 0.0;
    for (double p : probabilities) {
      detail::require(std::isfinite(p) && p >= 0.0, "table law probabilities must be non-negative");
      total += p;
    }
    detail::require(std::abs(total - 1.0) <= 1e-12, "table law probabilities must sum to 1");
    while (probabilities.size() > 1 && probabilities.back() == 0.0) probabilities.pop_back();
    OffspringLaw law;
    law.kind_ = Kind::Table;
    law.probs_ = std::move(probabilities);
    law.cdf_.resize(law.probs_.size());
    std::partial_sum(law.probs_.begin(), law.probs_.end(), law.cdf_.begin());
    law.mean_ = 0.0;
    for (std::size_t k = 0; k < law.probs_.size(); ++k) law.mean_ += static_cast<double>(k) * law.probs_[k];
    return law;
  }

  /// P(arity = k) = p (1-p)^(k-1) for k >= 1.
  static OffspringLaw geometricShifted(double p) {
    detail::require(p > 0.0 && p <= 1.0, "geometric law needs p in (0, 1]");
    OffspringLaw law;
    law.kind_ = Kind::GeometricShifted;
    law.p_ = p;
    law.mean_ = 1.0 / p;
    return law;
  }

  /// Parses `regular:d`, `table:k1=p1,k2=p2,...` or `geom:p`.
  static OffspringLaw parse(std::string_view text) {
    text = detail::trim(text);
    const auto colon = text.find(':');
    detail::require(colon != std::string_view::npos, "offspring law must look like kind:args");
    const auto kind = text.substr(0, colon);
    const auto args = text.substr(colon + 1);
    if (kind == "regular") {
      return regular(detail::parseInteger<std::uint32_t>(args, "regular arity"));
    }
    if (kind == "geom") {
      return geometricShifted(detail::parseDouble(args, "geometric parameter"));
    }
    if (kind == "table") {
      std::vector<double> probs;
      std::string_view rest = args;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = detail::trim(rest.substr(0, comma));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        const auto eq = item.find('=');
        detail::require(eq != std::string_view::npos, "table entry must be k=p");
        const auto k = detail::parseInteger<std::uint32_t>(detail::trim(item.substr(0, eq)), "table arity");
        const double p = detail::parseDouble(detail::trim(item.substr(eq + 1)), "table probability");
        detail::require(k < (1u << 20), "table arity too large");
        if (probs.size() <= k) probs.resize(k + 1, 0.0);
        detail::require(probs[k] == 0.0, "duplicate table arity");
        probs[k] = p;
      }
      return table(std::move(probs));
    }
    throw ConfigError("unknown offspring law kind '" + std::string(kind) + "'");
  }

  Kind kind() const noexcept { return kind_; }
  double mean() const noexcept { return mean_; }

  double probability(std::uint32_t k) const noexcept {
    switch (kind_) {
      case Kind::Regular: return k == d_ ? 1.0 : 0.0;
      case Kind::Table: return k < probs_.size() ? probs_[k] : 0.0;
      case Kind::GeometricShifted: return k == 0 ? 0.0 : p_ * std::pow(1.0 - p_, static_cast<double>(k) - 1.0);
    }
    return 0.0;
  }

  /// True iff P(arity = 0) = 0.
  bool noLeaves() const noexcept { return probability(0) == 0.0; }

  /// Inverse-CDF draw for u in [0, 1).
  std::uint32_t sample(double u) const noexcept {
    switch (kind_) {
      case Kind::Regular: return d_;
      case Kind::Table: {
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.end()) return static_cast<std::uint32_t>(cdf_.size() - 1);
        return static_cast<std::uint32_t>(it - cdf_.begin());
      }
      case Kind::GeometricShifted: {
        if (p_ >= 1.0) return 1;
        const double k = 1.0 + std::floor(std::log1p(-u) / std::log1p(-p_));
        return k >= static_cast<double>(kMaxArity) ? kMaxArity : static_cast<std::uint32_t>(k);
      }
    }
    return 0;
  }

  std::string text() const {
    switch (kind_) {
      case Kind::Regular: return "regular:" + std::to_string(d_);
      case Kind::GeometricShifted: return "geom:" + detail::formatDouble(p_);
      case Kind::Table: {
        std::string out = "table:";
        bool first = true;
        for (std::size_t k = 0; k < probs_.size(); ++k) {
          if (probs_[k] == 0.0) continue;
          if (!first) out += ',';
          first = false;
          out += std::to_string(k) + "=" + detail::formatDouble(probs_[k]);
        }
        return out;
      }
    }
    return {};
  }

  friend bool operator==(const OffspringLaw& a, const OffspringLaw& b) { return a.text() == b.text(); }

 private:
  OffspringLaw() = default;

  Kind kind_ = Kind::Regular;
  std::uint32_t d_ = 1;
  double p_ = 1.0;
  double mean_ = 1.0;
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

/// Vertex address: child indices (1-based) from the root r. RootParent is r^-1
/// at level -1; Root has the empty path.
class VertexId {
 public:
  VertexId() = default;

  static VertexId rootParent() {
    VertexId v;
    v.rootParent_ = true;
    return v;
  }
  static VertexId root() { return VertexId{}; }
  static VertexId fromPath(std::vector<std::uint32_t> path) {
    for (auto i : path) detail::require(i >= 1, "child indices are 1-based");
    VertexId v;
    v.path_ = std::move(path);
    return v;
  }

  bool isRootParent() const noexcept { return rootParent_; }
  bool isRoot() const noexcept { return !rootParent_ && path_.empty(); }
  int level() const noexcept { return rootParent_ ? -1 : static_cast<int>(path_.size()); }
  std::span<const std::uint32_t> path() const noexcept { return path_; }

  /// parent(Root) = RootParent; RootParent has no parent.
  VertexId parent() const {
    detail::require(!rootParent_, "r^-1 has no parent");
    if (path_.empty()) return rootParent();
    VertexId p = *this;
    p.path_.pop_back();
    return p;
  }

  VertexId child(std::uint32_t i) const {
    if (rootParent_) {
      detail::require(i == 1, "r^-1 has exactly one child");
      return root();
    }
    detail::require(i >= 1, "child indices are 1-based");
    VertexId c = *this;
    c.path_.push_back(i);
    return c;
  }

  /// Ancestor-or-self ordering: path(this) is a prefix of path(other).
  bool isAncestorOrSelf(const VertexId& other) const noexcept {
    if (rootParent_) return true;
    if (other.rootParent_) return false;
    if (path_.size() > other.path_.size()) return false;
    return std::equal(path_.begin(), path_.end(), other.path_.begin());
  }

  std::string toString() const {
    if (rootParent_) return "r-1";
    std::string out = "r";
    for (auto i : path_) out += "." + std::to_string(i);
    return out;
  }

  friend bool operator==(const VertexId&, const VertexId&) = default;
  friend auto operator<=>(const VertexId& a, const VertexId& b) {
    if (a.rootParent_ != b.rootParent_) return a.rootParent_ ? std::strong_ordering::less : std::strong_ordering::greater;
    return std::lexicographical_compare_three_way(a.path_.begin(), a.path_.end(), b.path_.begin(), b.path_.end());
  }

 private:
  bool rootParent_ = false;
  std::vector<std::uint32_t> path_;
};

/// Index of a vertex in a LazyTree's arena.
using NodeRef = std::uint32_t;
inline constexpr NodeRef kRootParentNode = 0;
inline constexpr NodeRef kRootNode = 1;
inline constexpr NodeRef kNoNode = std::numeric_limits<NodeRef>::max();

/// Lazily generated tree. Arities are pure functions of (law, seed, path);
/// explored vertices are cached in an arena. Not safe for concurrent
/// mutation: give each thread its own tree (equal seeds give equal trees).
class LazyTree {
 public:
  static constexpr std::uint64_t kRootKey = 0x5bd1e9955bd1e995ULL;

  static constexpr std::uint64_t childKey(std::uint64_t parentKey, std::uint32_t index) noexcept {
    return hashCombine(parentKey, index);
  }

  /// depthLimit >= 0 truncates the tree: vertices at that level are leaves.
  LazyTree(OffspringLaw law, std::uint64_t seed, int depthLimit = -1)
      : law_(std::move(law)), seed_(seed), depthLimit_(depthLimit) {
    nodes_.push_back(Node{kNoNode, 0, -1, 1, 0, kNoNode, kNoNode});
    nodes_.push_back(Node{kRootParentNode, 1, 0, arityAt(kRootKey, 0), kRootKey, kNoNode, kNoNode});
    nodes_[kRootParentNode].firstChild = kRootNode;
  }

  const OffspringLaw& law() const noexcept { return law_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  int depthLimit() const noexcept { return depthLimit_; }

  /// Pure arity draw for the vertex with the given path key.
  std::uint32_t sampleArity(std::uint64_t key) const noexcept {
    return law_.sample(unitInterval(hashCombine(mix64(seed_ ^ 0x2545f4914f6cdd1dULL), key)));
  }

  /// Pure arity of an address, without touching the arena.
  std::uint32_t sampleArity(const VertexId& v) const {
    if (v.isRootParent()) return 1;
    return arityAt(keyOf(v), v.level());
  }

  /// Path key of an address; r^-1 has key 0, matching its arena node.
  static std::uint64_t keyOf(const VertexId& v) noexcept {
    if (v.isRootParent()) return 0;
    std::uint64_t key = kRootKey;
    for (auto i : v.path()) key = childKey(key, i);
    return key;
  }

  std::uint32_t arity(NodeRef v) const noexcept { return nodes_[v].arity; }
  int level(NodeRef v) const noexcept { return nodes_[v].level; }
  NodeRef parent(NodeRef v) const noexcept { return nodes_[v].parent; }
  std::uint32_t childIndex(NodeRef v) const noexcept { return nodes_[v].index; }
  std::uint64_t key(NodeRef v) const noexcept { return nodes_[v].key; }

  /// Child i (1-based) of v; created on first request.
  NodeRef child(NodeRef v, std::uint32_t i) {
    detail::require(i >= 1 && i <= nodes_[v].arity, "child index out of range");
    NodeRef prev = kNoNode;
    NodeRef cur = nodes_[v].firstChild;
    while (cur != kNoNode && nodes_[cur].index < i) {
      prev = cur;
      cur = nodes_[cur].nextSibling;
    }
    if (cur != kNoNode && nodes_[cur].index == i) return cur;
    detail::ensure(nodes_.size() < kNoNode, "tree arena exhausted");
    const auto created = static_cast<NodeRef>(nodes_.size());
    const std::uint64_t k = childKey(nodes_[v].key, i);
    nodes_.push_back(Node{v, i, nodes_[v].level + 1, arityAt(k, nodes_[v].level + 1), k, kNoNode, cur});
    if (prev == kNoNode) {
      nodes_[v].firstChild = created;
    } else {
      nodes_[prev].nextSibling = created;
    }
    return created;
  }

  /// Created children of v in ascending index order.
  NodeRef firstCreatedChild(NodeRef v) const noexcept { return nodes_[v].firstChild; }
  NodeRef nextCreatedSibling(NodeRef v) const noexcept { return nodes_[v].nextSibling; }

  NodeRef locate(const VertexId& v) {
    if (v.isRootParent()) return kRootParentNode;
    NodeRef cur = kRootNode;
    for (auto i : v.path()) cur = child(cur, i);
    return cur;
  }

  VertexId vertex(NodeRef v) const {
    if (v == kRootParentNode) return VertexId::rootParent();
    std::vector<std::uint32_t> path(static_cast<std::size_t>(nodes_[v].level));
    for (NodeRef cur = v; cur != kRootNode; cur = nodes_[cur].parent) {
      path[static_cast<std::size_t>(nodes_[cur].level) - 1] = nodes_[cur].index;
    }
    return VertexId::fromPath(std::move(path));
  }

  /// Memoized arity; arity(RootParent) = 1.
  std::uint32_t arity(const VertexId& v) { return arity(locate(v)); }

  std::vector<VertexId> children(const VertexId& v) {
    const auto a = arity(v);
    std::vector<VertexId> out;
    out.reserve(a);
    for (std::uint32_t i = 1; i <= a; ++i) out.push_back(v.child(i));
    return out;
  }

 private:
  std::uint32_t arityAt(std::uint64_t key, int level) const noexcept {
    return depthLimit_ >= 0 && level >= depthLimit_ ? 0u : sampleArity(key);
  }

  struct Node {
    NodeRef parent;
    std::uint32_t index;
    std::int32_t level;
    std::uint32_t arity;
    std::uint64_t key;
    NodeRef firstChild;
    NodeRef nextSibling;
  };

  OffspringLaw law_;
  std::uint64_t seed_;
  int depthLimit_ = -1;
  std::vector<Node> nodes_;
};

}  // namespace madwalk

template <>
struct std::hash<madwalk::VertexId> {
  std::size_t operator()(const madwalk::VertexId& v) const noexcept {
    if (v.isRootParent()) return 0x1234567ULL;
    std::uint64_t key = madwalk::LazyTree::kRootKey;
    for (auto i : v.path()) key = madwalk::LazyTree::childKey(key, i);
    return static_cast<std::size_t>(key);
  }
};
