#pragma once

// Three-walk coupling on the d-regular tree: X^(beta) and X^(beta+eps) driven
// by one uniform per step, plus the biased walk Y on Z that bounds both from
// below. Blocks between confirmed regenerations of Y carry the statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "madwalk/error.hpp"
#include "madwalk/formulas.hpp"
#include "madwalk/rng.hpp"
#include "madwalk/stats.hpp"
#include "madwalk/tree.hpp"

namespace madwalk {

// Move labels: 0 is the parent, 1..k the visited children in order of first
// visit, k+1..d the unvisited children in ascending child index.

/// A piece (previous hi, hi] of the unit interval and the move it assigns to
/// each walk. Decoupled tables assign the same label to both fields.
struct CouplingSegment {
  double hi = 0.0;
  std::uint8_t beta = 0;
  std::uint8_t eps = 0;
};

using SegmentTable = std::vector<CouplingSegment>;

namespace detail {

inline constexpr double kBookkeepingTol = 1e-12;

class TableBuilder {
 public:
  void add(double hi, std::uint8_t beta, std::uint8_t eps) {
    if (hi <= last_) return;  // empty piece
    table_.push_back({hi, beta, eps});
    last_ = hi;
  }
  void add(double hi, std::uint8_t label) { add(hi, label, label); }

  /// Stretch the final piece to 1 after checking the partition sums to 1.
  SegmentTable finish(const char* what) {
    ensure(!table_.empty() && std::abs(last_ - 1.0) <= kBookkeepingTol,
           std::string("coupling interval bookkeeping failed: ") + what);
    table_.back().hi = 1.0;
    return std::move(table_);
  }

 private:
  SegmentTable table_;
  double last_ = 0.0;
};

/// Cases (c6)/(c7): one walk on its own with k visited children.
inline SegmentTable singleWalkTable(std::uint32_t d, std::uint32_t k, double q, double pbar, double p) {
  TableBuilder b;
  b.add(q, 0);
  for (std::uint32_t i = 1; i <= k; ++i) b.add(q + i * pbar, static_cast<std::uint8_t>(i));
  for (std::uint32_t i = k + 1; i <= d; ++i) b.add(q + k * pbar + (i - k) * p, static_cast<std::uint8_t>(i));
  return b.finish("decoupled table");
}

/// Cases (c1)-(c5): both walks with k visited children.
inline SegmentTable coupledTable(const CouplingProbs& c, std::uint32_t k) {
  const std::uint32_t d = c.d;
  const double qe = c.qEps[k], pbar = c.pbar[k], pe = c.pEps[k];
  const double dq = c.dq[k], dbar = c.dbar[k];
  TableBuilder b;
  for (std::uint32_t i = k + 1; i <= d; ++i) {  // (c1)
    b.add(static_cast<double>(i - k) / (d - k) * dq, static_cast<std::uint8_t>(i), 0);
  }
  b.add(qe, 0, 0);  // (c2)
  for (std::uint32_t i = 1; i <= k; ++i) b.add(qe + i * pbar, static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(i));
  for (std::uint32_t i = k + 1; i <= d; ++i) {  // (c4)
    b.add(qe + k * pbar + (i - k) * pe, static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(i));
  }
  if (k > 0 && k < d && dbar > 0.0) {  // (c5): two partitions of (1 - dbar, 1], merged
    const double start = qe + k * pbar + (d - k) * pe;
    ensure(std::abs(start - (1.0 - dbar)) <= kBookkeepingTol, "coupling interval bookkeeping failed: (c5) start");
    std::uint32_t i = 1, j = k + 1;
    while (i <= k && j <= d) {
      const double a = 1.0 - (1.0 - static_cast<double>(i) / k) * dbar;
      const double bj = 1.0 - (1.0 - static_cast<double>(j - k) / (d - k)) * dbar;
      b.add(std::min(a, bj), static_cast<std::uint8_t>(j), static_cast<std::uint8_t>(i));
      if (a <= bj) ++i;
      if (bj <= a) ++j;
    }
  }
  return b.finish("coupled table");
}

}  // namespace detail

/// All interval partitions needed by the coupling, indexed by k.
class CouplingTables {
 public:
  explicit CouplingTables(const CouplingProbs& c) : probs_(c) {
    detail::require(c.d <= 64, "coupling supports d <= 64");
    for (std::uint32_t k = 0; k <= c.d; ++k) {
      coupled_.push_back(detail::coupledTable(c, k));
      beta_.push_back(detail::singleWalkTable(c.d, k, c.q[k], c.pbar[k], c.p[k]));
      eps_.push_back(detail::singleWalkTable(c.d, k, c.qEps[k], c.pbarEps[k], c.pEps[k]));
    }
  }

  const CouplingProbs& probs() const noexcept { return probs_; }
  std::uint32_t d() const noexcept { return probs_.d; }
  const SegmentTable& coupled(std::uint32_t k) const { return coupled_.at(k); }
  const SegmentTable& decoupledBeta(std::uint32_t k) const { return beta_.at(k); }
  const SegmentTable& decoupledEps(std::uint32_t k) const { return eps_.at(k); }

  static const CouplingSegment& lookup(const SegmentTable& t, double u) {
    auto it = std::lower_bound(t.begin(), t.end(), u, [](const CouplingSegment& s, double x) { return s.hi < x; });
    if (it == t.end()) --it;
    return *it;
  }

 private:
  CouplingProbs probs_;
  std::vector<SegmentTable> coupled_, beta_, eps_;
};

/// Interval lengths per outcome, next to the probabilities they must equal.
/// Index 0 is the parent, i >= 1 the child with label i.
struct MarginalTable {
  std::uint32_t k = 0;
  std::vector<double> coupledBeta, coupledEps, decoupledBeta, decoupledEps;
  std::vector<double> expectedBeta, expectedEps;
  double maxResidual = 0.0;
};

inline MarginalTable marginalCheck(const CouplingProbs& c, std::uint32_t k) {
  detail::require(k <= c.d, "marginalCheck: k must lie in 0..d");
  const CouplingTables tables(c);
  MarginalTable m;
  m.k = k;
  const std::size_t n = c.d + 1;
  auto lengths = [&](const SegmentTable& t, bool betaWalk) {
    std::vector<double> out(n, 0.0);
    double lo = 0.0;
    for (const auto& s : t) {
      out[betaWalk ? s.beta : s.eps] += s.hi - lo;
      lo = s.hi;
    }
    return out;
  };
  m.coupledBeta = lengths(tables.coupled(k), true);
  m.coupledEps = lengths(tables.coupled(k), false);
  m.decoupledBeta = lengths(tables.decoupledBeta(k), true);
  m.decoupledEps = lengths(tables.decoupledEps(k), false);
  m.expectedBeta.assign(n, 0.0);
  m.expectedEps.assign(n, 0.0);
  m.expectedBeta[0] = c.q[k];
  m.expectedEps[0] = c.qEps[k];
  for (std::uint32_t i = 1; i <= c.d; ++i) {
    m.expectedBeta[i] = i <= k ? c.pbar[k] : c.p[k];
    m.expectedEps[i] = i <= k ? c.pbarEps[k] : c.pEps[k];
  }
  for (std::size_t i = 0; i < n; ++i) {
    m.maxResidual = std::max({m.maxResidual, std::abs(m.coupledBeta[i] - m.expectedBeta[i]),
                              std::abs(m.coupledEps[i] - m.expectedEps[i]),
                              std::abs(m.decoupledBeta[i] - m.expectedBeta[i]),
                              std::abs(m.decoupledEps[i] - m.expectedEps[i])});
  }
  return m;
}

/// The regular tree as seen by one walk: only vertices it has visited exist,
/// children are kept in order of first visit.
class WalkArena {
 public:
  static constexpr std::uint32_t kNone = 0xffffffffu;
  static constexpr std::uint32_t kRootParent = 0;
  static constexpr std::uint32_t kRoot = 1;

  explicit WalkArena(std::uint32_t d) : d_(d) {
    detail::require(d >= 1 && d <= 64, "WalkArena: d must lie in 1..64");
    reset();
  }

  void reset() {
    nodes_.clear();
    nodes_.push_back({kNone, -1, kNone, kNone, 0, 1, 0});
    nodes_.push_back({kRootParent, 0, kNone, kNone, 0, 1, 0});
    pos_ = kRootParent;
  }

  std::uint32_t position() const noexcept { return pos_; }
  bool atRootParent() const noexcept { return pos_ == kRootParent; }
  int level() const noexcept { return nodes_[pos_].level; }
  /// Number of visited children of the current vertex.
  std::uint32_t k() const noexcept { return nodes_[pos_].k; }
  std::size_t size() const noexcept { return nodes_.size(); }

  void move(std::uint8_t label) {
    if (pos_ == kRootParent) {
      pos_ = kRoot;
      return;
    }
    Node& here = nodes_[pos_];
    if (label == 0) {
      pos_ = here.parent;
      return;
    }
    detail::ensure(label <= d_, "WalkArena: label out of range");
    if (label <= here.k) {
      std::uint32_t c = here.firstChild;
      for (std::uint32_t i = 1; i < label; ++i) c = nodes_[c].nextSibling;
      pos_ = c;
      return;
    }
    // the (label - k)-th unused child index, ascending
    std::uint32_t rank = label - here.k, index = 0;
    for (std::uint32_t i = 1; i <= d_; ++i) {
      if (!(here.used >> (i - 1) & 1u) && --rank == 0) {
        index = i;
        break;
      }
    }
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    const std::uint32_t parent = pos_;
    nodes_.push_back({parent, nodes_[parent].level + 1, kNone, kNone, 0, static_cast<std::uint8_t>(index), 0});
    Node& p = nodes_[parent];  // push_back may have reallocated
    p.used |= std::uint64_t{1} << (index - 1);
    if (p.firstChild == kNone) {
      p.firstChild = id;
    } else {
      std::uint32_t c = p.firstChild;
      while (nodes_[c].nextSibling != kNone) c = nodes_[c].nextSibling;
      nodes_[c].nextSibling = id;
    }
    ++p.k;
    pos_ = id;
  }

  VertexId vertex(std::uint32_t node) const {
    if (node == kRootParent) return VertexId::rootParent();
    std::vector<std::uint32_t> path;
    for (std::uint32_t v = node; v != kRoot; v = nodes_[v].parent) path.push_back(nodes_[v].childIndex);
    std::reverse(path.begin(), path.end());
    return VertexId::fromPath(std::move(path));
  }
  VertexId vertex() const { return vertex(pos_); }

 private:
  struct Node {
    std::uint32_t parent;
    std::int32_t level;
    std::uint32_t firstChild;
    std::uint32_t nextSibling;
    std::uint64_t used;
    std::uint8_t childIndex;
    std::uint8_t k;
  };

  std::uint32_t d_;
  std::vector<Node> nodes_;
  std::uint32_t pos_ = kRootParent;
};

/// The coupled triple. Both walks start at r^-1 with only (r^-1, r) reinforced.
struct CoupledState {
  explicit CoupledState(std::uint32_t d) : beta(d), eps(d) {}

  WalkArena beta, eps;
  std::int64_t y = 0;
  std::uint64_t steps = 0;
  /// First step after which the two walks sit at different vertices.
  std::optional<std::uint64_t> decoupledAt;

  bool decoupled() const noexcept { return decoupledAt.has_value(); }
  void reset() {
    beta.reset();
    eps.reset();
    y = 0;
    steps = 0;
    decoupledAt.reset();
  }
};

struct StepRecord {
  std::int8_t dy = 0;
  std::int8_t dBeta = 0;
  std::int8_t dEps = 0;
  /// The walks took different moves (relative to their own histories).
  bool movesDiffer = false;
};

/// One step of the coupling with uniform u in [0, 1). Uses (c1)-(c5) when
/// both walks see the same k away from r^-1 and (c6)/(c7) otherwise. Throws
/// InvariantViolation if Y steps forward while either walk does not.
inline StepRecord coupledStep(CoupledState& s, const CouplingTables& t, double u) {
  const int lb = s.beta.level(), le = s.eps.level();
  std::uint8_t mb = 1, me = 1;  // forced r^-1 -> r
  const bool forcedB = s.beta.atRootParent(), forcedE = s.eps.atRootParent();
  if (!forcedB && !forcedE && s.beta.k() == s.eps.k()) {
    const auto& seg = CouplingTables::lookup(t.coupled(s.beta.k()), u);
    mb = seg.beta;
    me = seg.eps;
  } else {
    if (!forcedB) mb = CouplingTables::lookup(t.decoupledBeta(s.beta.k()), u).beta;
    if (!forcedE) me = CouplingTables::lookup(t.decoupledEps(s.eps.k()), u).eps;
  }
  s.beta.move(mb);
  s.eps.move(me);
  StepRecord r;
  r.dy = u <= t.probs().qEps[0] ? -1 : 1;
  r.dBeta = static_cast<std::int8_t>(s.beta.level() - lb);
  r.dEps = static_cast<std::int8_t>(s.eps.level() - le);
  r.movesDiffer = mb != me;
  s.y += r.dy;
  ++s.steps;
  if (r.movesDiffer && !s.decoupledAt) s.decoupledAt = s.steps;
  if (r.dy == 1 && (r.dBeta != 1 || r.dEps != 1)) {
    throw InvariantViolation("lockstep violated: Y stepped forward but a tree walk did not (step " +
                             std::to_string(s.steps) + ")");
  }
  return r;
}

/// One inter-regeneration segment of the coupled run.
struct RegenBlock {
  std::uint32_t run = 0;
  std::uint32_t index = 0;
  std::uint32_t duration = 0;
  std::int32_t dlevelBeta = 0;
  std::int32_t dlevelBetaEps = 0;
  std::uint32_t backsteps = 0;
  /// Offset within the block of the first time the walks differ; 0 if never.
  std::uint32_t decoupledAt = 0;
  /// The first differing move was a backstep of Y.
  bool decoupledAtBackstep = false;

  bool decoupled() const noexcept { return decoupledAt != 0; }
  std::int32_t discrepancy() const noexcept { return dlevelBeta - dlevelBetaEps; }
};

/// Zero-tolerance checks on confirmed blocks. The |B| = 2 counter tracks a
/// claim treated as a hypothesis, not a hard invariant.
struct InvariantCounters {
  std::uint64_t blocks = 0;
  std::uint64_t durationBound = 0;           ///< tau > 3|B| + 1
  std::uint64_t discrepancyBound = 0;        ///< |disc| > 2|B|
  std::uint64_t nonPositiveIncrement = 0;    ///< a level increment < 1
  std::uint64_t singleBackstepNegative = 0;  ///< |B| = 1 and disc < 0
  std::uint64_t backstepDecouplingNotTwo = 0;
  std::uint64_t doubleBackstepNegative = 0;

  std::uint64_t hardViolations() const noexcept {
    return durationBound + discrepancyBound + nonPositiveIncrement + singleBackstepNegative +
           backstepDecouplingNotTwo;
  }

  void record(const RegenBlock& b) {
    ++blocks;
    const auto disc = b.discrepancy();
    durationBound += b.duration > 3 * b.backsteps + 1;
    discrepancyBound += static_cast<std::uint32_t>(std::abs(disc)) > 2 * b.backsteps;
    nonPositiveIncrement += b.dlevelBeta < 1 || b.dlevelBetaEps < 1;
    singleBackstepNegative += b.backsteps == 1 && disc < 0;
    backstepDecouplingNotTwo += b.backsteps == 1 && b.decoupledAtBackstep && disc != 2;
    doubleBackstepNegative += b.backsteps == 2 && disc < 0;
  }

  void merge(const InvariantCounters& o) {
    blocks += o.blocks;
    durationBound += o.durationBound;
    discrepancyBound += o.discrepancyBound;
    nonPositiveIncrement += o.nonPositiveIncrement;
    singleBackstepNegative += o.singleBackstepNegative;
    backstepDecouplingNotTwo += o.backstepDecouplingNotTwo;
    doubleBackstepNegative += o.doubleBackstepNegative;
  }
};

struct HarvestResult {
  std::vector<RegenBlock> blocks;
  InvariantCounters invariants;
  std::uint64_t steps = 0;
  std::uint64_t yForward = 0;
  /// Steps before the first regeneration plus the unconfirmed tail.
  std::uint64_t discardedSteps = 0;
  int margin = 0;

  double discardFraction() const { return steps ? static_cast<double>(discardedSteps) / steps : 0.0; }
};

/// Rejects parameters where the (c1) and (c5) regions could overlap Y's
/// backstep region in the decoupling bound.
inline void checkCouplingSetup(const CouplingProbs& c) {
  detail::require(c.dq[0] + c.dbarBound() < 1.0 - c.qEps[0], "coupling: eps too large for the decoupling bound");
}

/// Default confirmation margin for Y.
inline int couplingMargin(const CouplingProbs& c) { return confirmationMargin(c.yForward()); }

/// Run the coupling for `steps` steps and cut it at confirmed regenerations of
/// Y. The segment before the first positive regeneration is discarded.
inline HarvestResult harvestBlocks(const CouplingProbs& c, std::uint64_t steps, std::uint64_t seed, int margin = 0,
                                   std::uint32_t run = 0) {
  checkCouplingSetup(c);
  const CouplingTables tables(c);
  HarvestResult out;
  out.margin = margin > 0 ? margin : couplingMargin(c);
  RegenerationScanner scanner(out.margin);
  CoupledState s(c.d);
  CounterRng rng(seed);
  std::deque<StepRecord> pending;  // steps since the last confirmed regeneration
  std::optional<std::uint64_t> last;
  std::uint64_t consumed = 0;  // steps already removed from `pending`

  auto close = [&](std::uint64_t time) {
    if (!last) {
      // everything before the first regeneration is a different law
      while (consumed < time) {
        pending.pop_front();
        ++consumed;
      }
      out.discardedSteps += time;
      last = time;
      return;
    }
    RegenBlock b;
    b.run = run;
    b.index = static_cast<std::uint32_t>(out.blocks.size());
    b.duration = static_cast<std::uint32_t>(time - *last);
    for (std::uint32_t i = 0; i < b.duration; ++i) {
      const StepRecord& r = pending.front();
      b.dlevelBeta += r.dBeta;
      b.dlevelBetaEps += r.dEps;
      b.backsteps += r.dy < 0;
      if (r.movesDiffer && !b.decoupledAt) {
        b.decoupledAt = i + 1;
        b.decoupledAtBackstep = r.dy < 0;
      }
      pending.pop_front();
      ++consumed;
    }
    out.invariants.record(b);
    out.blocks.push_back(b);
    last = time;
  };

  scanner.push(0);
  for (std::uint64_t n = 0; n < steps; ++n) {
    const StepRecord r = coupledStep(s, tables, rng.uniform());
    pending.push_back(r);
    out.yForward += r.dy > 0;
    if (auto reg = scanner.push(s.y); reg && reg->time > 0) close(reg->time);
  }
  out.steps = steps;
  out.discardedSteps += steps - consumed;
  return out;
}

/// Independent runs with derived seeds, merged in run order.
inline HarvestResult harvestRuns(const CouplingProbs& c, std::uint64_t stepsPerRun, std::uint32_t runs,
                                 std::uint64_t seed, int margin = 0, unsigned threads = 1) {
  detail::require(runs >= 1, "harvestRuns: need at least one run");
  std::vector<HarvestResult> parts(runs);
  auto work = [&](unsigned worker, unsigned nWorkers) {
    for (std::uint32_t r = worker; r < runs; r += nWorkers) {
      parts[r] = harvestBlocks(c, stepsPerRun, deriveSeed(seed, r), margin, r);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, runs));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
    for (auto& t : pool) t.join();
  }
  HarvestResult all;
  for (auto& p : parts) {
    all.margin = p.margin;
    all.steps += p.steps;
    all.yForward += p.yForward;
    all.discardedSteps += p.discardedSteps;
    all.invariants.merge(p.invariants);
    all.blocks.insert(all.blocks.end(), p.blocks.begin(), p.blocks.end());
    p.blocks = {};
  }
  return all;
}

struct SpeedDiff {
  double vBeta = 0.0, seBeta = 0.0;
  double vBetaEps = 0.0, seBetaEps = 0.0;
  /// Paired estimate of v(beta) - v(beta + eps).
  double diff = 0.0, seDiff = 0.0;
  std::size_t blocks = 0;
};

inline SpeedDiff speedDiffEstimator(std::span<const RegenBlock> blocks) {
  if (blocks.size() < 1000) throw InsufficientData("speedDiffEstimator: fewer than 1000 confirmed blocks");
  std::vector<double> dur, lb, le, disc;
  dur.reserve(blocks.size());
  lb.reserve(blocks.size());
  le.reserve(blocks.size());
  disc.reserve(blocks.size());
  for (const auto& b : blocks) {
    dur.push_back(b.duration);
    lb.push_back(b.dlevelBeta);
    le.push_back(b.dlevelBetaEps);
    disc.push_back(b.discrepancy());
  }
  SpeedDiff s;
  s.blocks = blocks.size();
  const auto a = ratioJackknife(lb, dur), b = ratioJackknife(le, dur), d = ratioJackknife(disc, dur);
  s.vBeta = a.value;
  s.seBeta = a.standardError;
  s.vBetaEps = b.value;
  s.seBetaEps = b.standardError;
  s.diff = d.value;
  s.seDiff = d.standardError;
  return s;
}

struct DecouplingRow {
  std::uint32_t k = 0;
  std::uint64_t count = 0;      ///< blocks with |B| = k
  std::uint64_t decoupled = 0;  ///< blocks with |B| = k and nonzero discrepancy
  double pBackstepsEq = 0.0, pBackstepsSe = 0.0;
  double pD = 0.0, pDSe = 0.0;
  Interval pDCi;
  std::optional<double> upperBound;  ///< bound on P(D_k), k >= 2
};

struct DecouplingStats {
  std::uint64_t blocks = 0;
  std::vector<DecouplingRow> rows;  ///< k = 0 .. largest observed |B|
  std::uint64_t singlePositive = 0;
  double pSinglePositive = 0.0, pSinglePositiveSe = 0.0;
  Interval singlePositiveCi;
  double singleLowerBound = 0.0;
  std::uint64_t singleNegative = 0;
};

inline DecouplingStats decouplingStats(std::span<const RegenBlock> blocks, const CouplingProbs& c) {
  DecouplingStats s;
  s.blocks = blocks.size();
  detail::require(s.blocks > 0, "decouplingStats: no blocks");
  std::uint32_t maxK = 0;
  for (const auto& b : blocks) maxK = std::max(maxK, b.backsteps);
  s.rows.resize(maxK + 1);
  for (const auto& b : blocks) {
    auto& row = s.rows[b.backsteps];
    ++row.count;
    row.decoupled += b.discrepancy() != 0;
    if (b.backsteps == 1) {
      s.singlePositive += b.discrepancy() >= 1;
      s.singleNegative += b.discrepancy() < 0;
    }
  }
  for (std::uint32_t k = 0; k <= maxK; ++k) {
    auto& row = s.rows[k];
    row.k = k;
    row.pBackstepsEq = static_cast<double>(row.count) / s.blocks;
    row.pBackstepsSe = binomialStandardError(row.count, s.blocks);
    row.pD = static_cast<double>(row.decoupled) / s.blocks;
    row.pDSe = binomialStandardError(row.decoupled, s.blocks);
    row.pDCi = wilsonInterval(row.decoupled, s.blocks);
    if (k >= 2) row.upperBound = decouplingUpperBound(c, static_cast<int>(k));
  }
  s.pSinglePositive = static_cast<double>(s.singlePositive) / s.blocks;
  s.pSinglePositiveSe = binomialStandardError(s.singlePositive, s.blocks);
  s.singlePositiveCi = wilsonInterval(s.singlePositive, s.blocks);
  s.singleLowerBound = singleBackstepLowerBound(c);
  return s;
}

}  // namespace madwalk
