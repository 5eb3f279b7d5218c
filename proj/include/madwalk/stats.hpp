#pragma once

// Single-walk estimators: recurrence classification, regeneration-based
// speed, per-level range and visit counts. Also the generic pieces shared
// with the coupling: a streaming regeneration scanner and ratio jackknife.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "formulas.hpp"
#include "rng.hpp"
#include "rubin.hpp"
#include "tree.hpp"
#include "walk.hpp"

namespace madwalk {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for a binomial proportion.
inline Interval wilsonInterval(std::uint64_t successes, std::uint64_t trials, double z = 1.959963984540054) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {successes == 0 ? 0.0 : std::max(0.0, centre - half), successes == trials ? 1.0 : std::min(1.0, centre + half)};
}

inline double binomialStandardError(std::uint64_t successes, std::uint64_t trials) {
  if (trials == 0) return 0.0;
  const double p = static_cast<double>(successes) / static_cast<double>(trials);
  return std::sqrt(p * (1 - p) / static_cast<double>(trials));
}

struct RatioEstimate {
  double value = 0.0;
  double standardError = 0.0;
};

/// sum(num) / sum(den) with a delete-one jackknife standard error.
inline RatioEstimate ratioJackknife(std::span<const double> num, std::span<const double> den) {
  detail::require(num.size() == den.size(), "ratioJackknife: length mismatch");
  const std::size_t n = num.size();
  detail::require(n >= 2, "ratioJackknife: need at least two observations");
  double sn = 0.0, sd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sn += num[i];
    sd += den[i];
  }
  double mean = 0.0;
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) {
    loo[i] = (sn - num[i]) / (sd - den[i]);
    mean += loo[i];
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : loo) ss += (x - mean) * (x - mean);
  return {sn / sd, std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n))};
}

inline double lag1Autocorrelation(std::span<const double> xs) {
  detail::require(xs.size() >= 3, "lag1Autocorrelation: need at least three values");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    den += (xs[i] - mean) * (xs[i] - mean);
    if (i + 1 < xs.size()) num += (xs[i] - mean) * (xs[i + 1] - mean);
  }
  return den > 0 ? num / den : 0.0;
}

/// Smallest M with ((1-p)/p)^M <= tol: a p-biased walk that has climbed M
/// above a level returns to it with probability at most tol.
inline int confirmationMargin(double p, double tol = 1e-12) {
  detail::require(p > 0.5 && p < 1.0, "confirmationMargin: need 1/2 < p < 1");
  return static_cast<int>(std::ceil(std::log(tol) / std::log((1 - p) / p)));
}

struct Regeneration {
  std::uint64_t time = 0;
  std::int64_t level = 0;
};

/// Streaming detection of regeneration times of a nearest-neighbour path:
/// N with Z_N > max_{n<N} Z_n and Z_m >= Z_N for m >= N. A candidate is
/// confirmed once the path reaches Z_N + margin without dropping below Z_N.
class RegenerationScanner {
 public:
  explicit RegenerationScanner(int margin) : margin_(margin) {
    detail::require(margin >= 0, "RegenerationScanner: margin must be >= 0");
  }

  /// Feed Z_t for t = 0, 1, 2, ... Returns the regeneration confirmed by this value, if any.
  std::optional<Regeneration> push(std::int64_t z) {
    const std::uint64_t t = time_++;
    if (t > 0) detail::ensure(std::abs(z - last_) == 1, "RegenerationScanner: path is not nearest-neighbour");
    last_ = z;
    while (!pending_.empty() && pending_.back().level > z) pending_.pop_back();
    if (t == 0 || z > prefixMax_) {
      pending_.push_back({t, z});
      prefixMax_ = z;
    }
    if (!pending_.empty() && z - pending_.front().level >= margin_) {
      const Regeneration r = pending_.front();
      pending_.pop_front();
      return r;
    }
    return std::nullopt;
  }

  std::uint64_t time() const noexcept { return time_; }
  std::size_t pendingCount() const noexcept { return pending_.size(); }

 private:
  int margin_;
  std::uint64_t time_ = 0;
  std::int64_t last_ = 0;
  std::int64_t prefixMax_ = 0;
  std::deque<Regeneration> pending_;
};

/// Confirmed regeneration times of a whole path; the unconfirmed tail is dropped.
inline std::vector<std::uint64_t> scanRegenerations(std::span<const std::int64_t> path, int margin) {
  RegenerationScanner s(margin);
  std::vector<std::uint64_t> out;
  for (auto z : path) {
    if (auto r = s.push(z)) out.push_back(r->time);
  }
  return out;
}

enum class SpeedMethod { YRegeneration, DirectRegeneration };

struct SpeedEstimate {
  double v = 0.0;
  double standardError = 0.0;
  std::uint64_t blockCount = 0;
  SpeedMethod method = SpeedMethod::DirectRegeneration;
  double meanLevelGap = 0.0;  // mean of l_{k+1} - l_k
  double meanLevelGapSe = 0.0;
};

/// Speed from regeneration blocks of |X_n|. Each run discards regenerations
/// at times <= 1 and its first block; blocks from all runs are pooled.
inline SpeedEstimate directSpeed(WalkParams params, const OffspringLaw& law, std::uint64_t stepsPerRun, int runs,
                                 int margin, std::uint64_t seed) {
  detail::require(runs >= 1, "directSpeed: runs must be >= 1");
  std::vector<double> dl, dt;
  for (int r = 0; r < runs; ++r) {
    LazyTree tree(law, deriveSeed(seed, 2 * static_cast<std::uint64_t>(r)));
    MadWalk walk(tree, params);
    CounterRng rng = CounterRng::stream(seed, 2 * static_cast<std::uint64_t>(r) + 1);
    RegenerationScanner scanner(margin);
    std::optional<Regeneration> prev;
    scanner.push(walk.level());
    for (std::uint64_t n = 0; n < stepsPerRun; ++n) {
      walk.step(rng.uniform());
      const auto reg = scanner.push(walk.level());
      if (!reg || reg->time <= 1) continue;
      if (prev) {
        dl.push_back(static_cast<double>(reg->level - prev->level));
        dt.push_back(static_cast<double>(reg->time - prev->time));
      }
      prev = reg;
    }
  }
  if (dl.size() < 100) throw InsufficientData("directSpeed: fewer than 100 confirmed blocks");
  SpeedEstimate e;
  const auto ratio = ratioJackknife(dl, dt);
  e.v = ratio.value;
  e.standardError = ratio.standardError;
  e.blockCount = dl.size();
  e.method = SpeedMethod::DirectRegeneration;
  double s = 0, s2 = 0;
  for (double x : dl) {
    s += x;
    s2 += x * x;
  }
  const double n = static_cast<double>(dl.size());
  e.meanLevelGap = s / n;
  e.meanLevelGapSe = std::sqrt(std::max(0.0, s2 / n - e.meanLevelGap * e.meanLevelGap) / n);
  return e;
}

enum class Backend { Kernel, Rubin };
enum class EmpiricalVerdict { Transient, Recurrent, Inconclusive };

inline const char* toString(EmpiricalVerdict v) {
  switch (v) {
    case EmpiricalVerdict::Transient:
      return "transient";
    case EmpiricalVerdict::Recurrent:
      return "recurrent";
    case EmpiricalVerdict::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

struct RecurrenceReport {
  int targetLevel = 0;
  std::uint64_t horizon = 0;
  std::uint64_t runs = 0;
  std::uint64_t returnsObserved = 0;  // runs that came back to r^-1 within the horizon
  std::uint64_t escapesHalf = 0;      // reached level L/2 before returning
  std::uint64_t escapes = 0;          // reached level L before returning
  double escapeFrequency = 0.0;
  Interval ci;
  EmpiricalVerdict verdict = EmpiricalVerdict::Inconclusive;
  std::optional<PhaseVerdict> theoretical;
};

namespace detail {

/// Runs one walk from r^-1 until it returns there, reaches `stopLevel`, or
/// hits the horizon. Returns the maximal level reached and whether it returned.
template <class Walk, class Step>
std::pair<int, bool> excursion(Walk& w, Step&& step, int stopLevel, std::uint64_t horizon) {
  step(w);
  int maxLevel = w.level();
  for (std::uint64_t n = 1; n < horizon; ++n) {
    step(w);
    if (w.position() == kRootParentNode) return {maxLevel, true};
    maxLevel = std::max(maxLevel, w.level());
    if (maxLevel >= stopLevel) return {maxLevel, false};
  }
  return {maxLevel, false};
}

}  // namespace detail

/// Escape statistics to level L with the verdict rule: transient when the
/// frequency of reaching L is at least `ratioThreshold` times the frequency of
/// reaching L/2 (a positive limit), recurrent otherwise. Runs are extended
/// (up to maxRuns) until `minEscapes` runs reach L/2.
inline RecurrenceReport classifyRecurrence(WalkParams params, const OffspringLaw& law, std::uint64_t horizon,
                                           int targetLevel, std::uint64_t runs, std::uint64_t seed,
                                           Backend backend = Backend::Kernel, double ratioThreshold = 0.7,
                                           std::uint64_t minEscapes = 30, std::uint64_t maxRuns = 0) {
  if (maxRuns < runs) maxRuns = 200 * runs;
  detail::require(targetLevel >= 2, "classifyRecurrence: targetLevel must be >= 2");
  detail::require(horizon >= 10 * static_cast<std::uint64_t>(targetLevel), "classifyRecurrence: need T >= 10 L");
  RecurrenceReport rep;
  rep.targetLevel = targetLevel;
  rep.horizon = horizon;
  const int half = targetLevel / 2;
  std::uint64_t r = 0;
  for (; r < runs || (rep.escapesHalf < minEscapes && r < maxRuns); ++r) {
    LazyTree tree(law, deriveSeed(seed, 2 * r));
    std::pair<int, bool> res;
    if (backend == Backend::Kernel) {
      MadWalk w(tree, params);
      CounterRng rng = CounterRng::stream(seed, 2 * r + 1);
      res = detail::excursion(w, [&](MadWalk& x) { x.step(rng.uniform()); }, targetLevel, horizon);
    } else {
      RubinWalk w(tree, params, ClockStore(deriveSeed(seed, 2 * r + 1)));
      res = detail::excursion(w, [](RubinWalk& x) { x.step(); }, targetLevel, horizon);
    }
    rep.returnsObserved += res.second;
    rep.escapesHalf += res.first >= half;
    rep.escapes += res.first >= targetLevel;
  }
  rep.runs = r;
  rep.escapeFrequency = static_cast<double>(rep.escapes) / static_cast<double>(r);
  rep.ci = wilsonInterval(rep.escapes, r);
  if (rep.escapesHalf < minEscapes) {
    // the walk almost never gets half way: decay is already visible
    rep.verdict = rep.escapes == 0 && r >= 100 ? EmpiricalVerdict::Recurrent : EmpiricalVerdict::Inconclusive;
  } else {
    const double ratio = static_cast<double>(rep.escapes) / static_cast<double>(rep.escapesHalf);
    rep.verdict = ratio >= ratioThreshold ? EmpiricalVerdict::Transient : EmpiricalVerdict::Recurrent;
  }
  if (law.mean() > 0) rep.theoretical = phase(params, law.mean());
  return rep;
}

struct LevelProfile {
  std::vector<double> mean;  // indexed by level 0..maxLevel
  std::vector<double> se;
  std::uint64_t runs = 0;
  double escapeProbability = 0.0;  // beta-hat*: fraction of runs that never returned to r^-1
  double escapeSe = 0.0;
};

/// Distinct visited vertices per level (xi_k) over runs stopped at level
/// maxLevel + margin. Also returns the pooled escape estimate beta-hat*.
inline LevelProfile levelRange(WalkParams params, const OffspringLaw& law, std::uint64_t runs, int maxLevel,
                               int margin, std::uint64_t horizon, std::uint64_t seed) {
  detail::require(maxLevel >= 0 && runs >= 2, "levelRange: bad arguments");
  const auto levels = static_cast<std::size_t>(maxLevel) + 1;
  std::vector<double> s(levels, 0.0), s2(levels, 0.0);
  std::uint64_t escaped = 0;
  for (std::uint64_t r = 0; r < runs; ++r) {
    LazyTree tree(law, deriveSeed(seed, 2 * r));
    MadWalk w(tree, params);
    CounterRng rng = CounterRng::stream(seed, 2 * r + 1);
    std::vector<std::unordered_set<NodeRef>> seen(levels);
    bool returned = false;
    w.step(rng.uniform());
    for (std::uint64_t n = 0; n < horizon; ++n) {
      const int l = w.level();
      if (l >= 0 && l <= maxLevel) seen[static_cast<std::size_t>(l)].insert(w.position());
      if (l >= maxLevel + margin) break;
      w.step(rng.uniform());
      returned |= w.position() == kRootParentNode;
    }
    escaped += !returned;
    for (std::size_t k = 0; k < levels; ++k) {
      const double x = static_cast<double>(seen[k].size());
      s[k] += x;
      s2[k] += x * x;
    }
  }
  LevelProfile p;
  p.runs = runs;
  const double n = static_cast<double>(runs);
  for (std::size_t k = 0; k < levels; ++k) {
    const double m = s[k] / n;
    p.mean.push_back(m);
    p.se.push_back(std::sqrt(std::max(0.0, s2[k] / n - m * m) / n));
  }
  p.escapeProbability = static_cast<double>(escaped) / n;
  p.escapeSe = binomialStandardError(escaped, runs);
  return p;
}

/// Visits to the first vertex hit at each level, over runs that never return
/// to r^-1 before reaching level maxLevel + margin (the escape proxy).
/// Visits are counted until `horizon` steps.
inline LevelProfile visitCounts(WalkParams params, const OffspringLaw& law, std::uint64_t runs, int maxLevel,
                                int margin, std::uint64_t horizon, std::uint64_t seed) {
  detail::require(maxLevel >= 0 && runs >= 2, "visitCounts: bad arguments");
  const auto levels = static_cast<std::size_t>(maxLevel) + 1;
  std::vector<double> s(levels, 0.0), s2(levels, 0.0);
  std::uint64_t used = 0;
  for (std::uint64_t r = 0; r < runs; ++r) {
    LazyTree tree(law, deriveSeed(seed, 2 * r));
    MadWalk w(tree, params);
    CounterRng rng = CounterRng::stream(seed, 2 * r + 1);
    std::vector<NodeRef> first(levels, kNoNode);
    std::unordered_map<NodeRef, std::uint64_t> visits;
    bool returned = false;
    bool escaped = false;
    w.step(rng.uniform());
    for (std::uint64_t n = 0; n < horizon; ++n) {
      const int l = w.level();
      if (l >= 0 && l <= maxLevel) {
        auto& f = first[static_cast<std::size_t>(l)];
        if (f == kNoNode) f = w.position();
        if (f == w.position()) ++visits[f];
      }
      if (l >= maxLevel + margin) escaped = true;
      w.step(rng.uniform());
      if (w.position() == kRootParentNode) {
        returned = true;
        if (!escaped) break;
      }
    }
    if (returned || !escaped) continue;
    ++used;
    for (std::size_t k = 0; k < levels; ++k) {
      const double x = static_cast<double>(visits[first[k]]);
      s[k] += x;
      s2[k] += x * x;
    }
  }
  LevelProfile p;
  p.runs = used;
  if (used < 2) throw InsufficientData("visitCounts: fewer than two escaping runs");
  const double n = static_cast<double>(used);
  for (std::size_t k = 0; k < levels; ++k) {
    const double m = s[k] / n;
    p.mean.push_back(m);
    p.se.push_back(std::sqrt(std::max(0.0, s2[k] / n - m * m) / n));
  }
  p.escapeProbability = static_cast<double>(used) / static_cast<double>(runs);
  p.escapeSe = binomialStandardError(used, runs);
  return p;
}

/// The visit bound (u1 d + 1) / (1 - u1), valid for u1 < 1.
inline double visitBound(WalkParams params, double d) {
  detail::require(params.u1 < 1.0, "visitBound: needs u1 < 1");
  return (params.u1 * d + 1) / (1 - params.u1);
}

}  // namespace madwalk
