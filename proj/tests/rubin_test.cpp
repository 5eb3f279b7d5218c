#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <map>

#include "madwalk/oracle.hpp"
#include "madwalk/rubin.hpp"

using namespace madwalk;

namespace {

double binomialSe(double p, double n) { return std::sqrt(p * (1 - p) / n); }

}  // namespace

TEST(ClockWeight, PaperCases) {
  const WalkParams p{0.4, 2.5};
  const auto v = VertexId::fromPath({1, 2});
  EXPECT_EQ(clockWeight(p, Configuration::star(), v, v.parent(), 0), 1.0);
  EXPECT_EQ(clockWeight(p, Configuration::star(), v, v.parent(), 7), 1.0);
  EXPECT_EQ(clockWeight(p, Configuration::star(), v, v.child(1), 0), 0.4);
  EXPECT_EQ(clockWeight(p, Configuration::star(), v, v.child(1), 3), 2.5);
  const auto omega = Configuration::pathPrefix(v.child(1), 3);
  EXPECT_EQ(clockWeight(p, omega, v, v.child(1), 0), 2.5);
  EXPECT_EQ(clockWeight(p, Configuration::star(), VertexId::rootParent(), VertexId::root(), 0), 2.5);
  EXPECT_THROW(clockWeight(p, Configuration::star(), v, VertexId::root(), 0), ConfigError);
}

TEST(ClockStore, PureAndPositive) {
  const ClockStore a(5), b(5), c(6);
  const auto x = VertexId::fromPath({2}), y = VertexId::fromPath({2, 1});
  for (std::uint64_t i = 0; i < 1000; ++i) {
    EXPECT_GT(a(x, y, i), 0.0);
    EXPECT_EQ(a(x, y, i), b(x, y, i));
    EXPECT_EQ(a(x, y, i), a(x, y, i));
  }
  EXPECT_NE(a(x, y, 0), c(x, y, 0));
  EXPECT_NE(a(x, y, 0), a(y, x, 0));
}

TEST(ClockStore, ExponentialMoments) {
  const ClockStore c(9);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double y = c(std::uint64_t{1}, std::uint64_t{2}, static_cast<std::uint64_t>(i));
    s += y;
    s2 += y * y;
  }
  EXPECT_NEAR(s / n, 1.0, 4 * std::sqrt(1.0 / n));
  EXPECT_NEAR(s2 / n, 2.0, 4 * std::sqrt(20.0 / n));
}

TEST(RubinStep, MinimumOfExponentialsAtFreshVertex) {
  // P(next = child i) = u0 / (1 + 2 u0) at crossing counts 0
  LazyTree t(OffspringLaw::regular(2), 0);
  const WalkParams p{0.7, 3.0};
  std::map<VertexId, int> counts;
  const int n = 200000;
  for (int s = 0; s < n; ++s) {
    DirectedCounts dc;
    counts[rubinStep(VertexId::root(), dc, ClockStore(s), p, Configuration::star(), t)]++;
  }
  const double pc = 0.7 / 2.4;
  EXPECT_NEAR(counts[VertexId::fromPath({1})] / double(n), pc, 4 * binomialSe(pc, n));
  EXPECT_NEAR(counts[VertexId::rootParent()] / double(n), 1 / 2.4, 4 * binomialSe(1 / 2.4, n));
}

TEST(RubinWalk, ForwardFrequencyOnHalfLine) {
  LazyTree t(OffspringLaw::regular(1), 0);
  const WalkParams p{1.6, 1.6};
  int forward = 0;
  const int n = 1000000;
  for (int s = 0; s < n; ++s) {
    RubinWalk w(t, p, ClockStore(s));
    w.step();
    forward += w.step() != kRootParentNode;
  }
  const double expected = 1.6 / 2.6;
  EXPECT_NEAR(forward / double(n), expected, 4 * binomialSe(expected, n));
}

TEST(RubinWalk, MatchesReferenceStep) {
  const auto law = OffspringLaw::parse("table:1=0.3,2=0.4,3=0.3");
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    LazyTree ta(law, seed), tb(law, seed);
    const WalkParams p{0.8, 1.7};
    const auto omega = Configuration::fromEdges({VertexId::root(), VertexId::fromPath({1})});
    const ClockStore clocks(seed * 31 + 1);
    RubinWalk w(ta, p, clocks, omega);
    VertexId pos = VertexId::rootParent();
    DirectedCounts counts;
    for (int n = 0; n < 600; ++n) {
      const NodeRef next = w.step();
      pos = pos.isRootParent() ? VertexId::root() : rubinStep(pos, counts, clocks, p, omega, tb);
      ASSERT_EQ(ta.vertex(next), pos) << seed << ' ' << n;
    }
  }
}

TEST(RubinWalk, TrajectoryLawMatchesEnumeration) {
  const EnumTree et{OffspringLaw::regular(2), 0, 3, WalkParams{0.5, 2.0}};
  const auto exact = enumerateStepDistribution(et, 6);
  LazyTree tree = et.materialize();
  std::map<Trajectory, int> counts;
  const int n = 200000;
  for (int s = 0; s < n; ++s) {
    RubinWalk w(tree, et.params, ClockStore(deriveSeed(17, s)));
    Trajectory traj{VertexId::rootParent()};
    for (int i = 0; i < 6; ++i) traj.push_back(tree.vertex(w.step()));
    counts[traj]++;
  }
  double tv = 0.0;
  for (const auto& [traj, p] : exact) {
    const auto it = counts.find(traj);
    tv += std::abs((it == counts.end() ? 0 : it->second) / double(n) - p);
  }
  for (const auto& [traj, c] : counts) ASSERT_TRUE(exact.count(traj)) << "impossible trajectory sampled";
  EXPECT_LT(tv / 2, 0.015);
}

TEST(SpecialSubtree, Validation) {
  EXPECT_NO_THROW(SpecialSubtree::path(VertexId::rootParent(), VertexId::fromPath({1, 2})));
  // root with two subtree children is not special
  EXPECT_THROW(SpecialSubtree(VertexId::root(), {VertexId::fromPath({1}), VertexId::fromPath({2})}), ConfigError);
  // disconnected
  EXPECT_THROW(SpecialSubtree(VertexId::root(), {VertexId::fromPath({1}), VertexId::fromPath({2, 1})}), ConfigError);
  const auto g = SpecialSubtree(VertexId::root(), {VertexId::fromPath({1}), VertexId::fromPath({1, 1}),
                                                   VertexId::fromPath({1, 2})});
  EXPECT_EQ(g.neighbours(VertexId::fromPath({1})).size(), 3u);
  EXPECT_EQ(g.neighbours(VertexId::root()).size(), 1u);
}

TEST(Extension, PrefixConsistencyOnRandomSubtrees) {
  // every traversal the main walk makes on E' must coincide with the extension's sequence
  const WalkParams p{1.3, 1.9};
  CounterRng pick(44);
  int checked = 0;
  for (std::uint64_t s = 0; s < 150; ++s) {
    LazyTree tree(OffspringLaw::regular(2), 0);
    const ClockStore clocks(deriveSeed(3, s));
    // random special subtree: a path from top to a child, then random growth below it
    VertexId top = VertexId::rootParent();
    const int topLevel = static_cast<int>(pick() % 3) - 1;
    for (int l = -1; l < topLevel; ++l) top = top.isRootParent() ? VertexId::root() : top.child(1 + pick() % 2);
    std::vector<VertexId> edges{top.isRootParent() ? VertexId::root() : top.child(1 + pick() % 2)};
    for (int g = 0; g < 5; ++g) {
      const VertexId base = edges[pick() % edges.size()];
      edges.push_back(base.child(1 + pick() % 2));
    }
    const SpecialSubtree sub(top, edges);

    RubinWalk w(tree, p, clocks);
    std::vector<std::pair<VertexId, VertexId>> onSub;
    VertexId prev = VertexId::rootParent();
    for (int n = 0; n < 1500; ++n) {
      const VertexId cur = tree.vertex(w.step());
      if (sub.containsEdge(prev, cur)) onSub.emplace_back(prev, cur);
      prev = cur;
    }
    if (onSub.empty()) continue;
    ++checked;
    const auto ext = extensionWalk(sub, clocks, p, Configuration::star(), onSub.size());
    for (std::size_t i = 0; i < onSub.size(); ++i) {
      ASSERT_EQ(onSub[i].first, ext[i]) << s << ' ' << i;
      ASSERT_EQ(onSub[i].second, ext[i + 1]) << s << ' ' << i;
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(Extension, LeafOverlapIndependence) {
  // [r^-1, r.1.1] and [r.1.1, r.1.1.1.1] share only the vertex r.1.1
  const WalkParams p{0.9, 1.4};
  const auto a = SpecialSubtree::path(VertexId::rootParent(), VertexId::fromPath({1, 1}));
  const auto b = SpecialSubtree::path(VertexId::fromPath({1, 1}), VertexId::fromPath({1, 1, 1, 1}));
  auto hitsFirst = [&](const SpecialSubtree& g, const VertexId& target, const ClockStore& c) {
    DirectedCounts counts;
    VertexId pos = g.top();
    for (int n = 0; n < 100000; ++n) {
      const auto nb = g.neighbours(pos);
      VertexId next = nb.size() == 1 ? nb.front() : detail::earliest(nb, pos, counts, c, p, Configuration::star());
      if (nb.size() > 1) ++counts[{pos, next}];
      pos = next;
      if (pos == target) return true;
      if (pos == g.top()) return false;
    }
    throw BudgetExceeded("extension did not terminate");
  };
  double table[2][2] = {{0, 0}, {0, 0}};
  const int n = 100000;
  for (int s = 0; s < n; ++s) {
    const ClockStore c(deriveSeed(8, s));
    table[hitsFirst(a, VertexId::fromPath({1, 1}), c)][hitsFirst(b, VertexId::fromPath({1, 1, 1, 1}), c)] += 1;
  }
  double stat = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double e = (table[i][0] + table[i][1]) * (table[0][j] + table[1][j]) / n;
      stat += (table[i][j] - e) * (table[i][j] - e) / e;
    }
  }
  const double pValue = 1 - boost::math::cdf(boost::math::chi_squared(1), stat);
  EXPECT_GT(pValue, 0.01);
}

TEST(Extension, PathHitProbabilityIsPsi) {
  for (WalkParams p : {WalkParams{1, 1}, WalkParams{0.6, 1.8}, WalkParams{2.0, 0.5}}) {
    for (int n : {1, 3, 6}) {
      std::vector<std::uint64_t> keys{0};
      VertexId v = VertexId::root();
      for (int i = 0; i <= n; ++i, v = v.child(1)) keys.push_back(LazyTree::keyOf(v));
      const std::vector<std::uint8_t> flags(keys.size(), 0);
      const int samples = 100000;
      int hits = 0;
      for (int s = 0; s < samples; ++s) hits += pathHitsBottom(ClockStore(deriveSeed(n, s)), p, keys, flags);
      const double expected = psi(p, n);
      EXPECT_NEAR(hits / double(samples), expected, 4 * binomialSe(expected, samples)) << p.u0 << ' ' << n;
    }
  }
}

TEST(Extension, GenericWalkAgreesWithFastPath) {
  const WalkParams p{0.7, 1.5};
  const auto bottom = VertexId::fromPath({2, 1, 2});
  const auto g = SpecialSubtree::path(VertexId::rootParent(), bottom);
  std::vector<std::uint64_t> keys{0};
  for (VertexId v = VertexId::root();; v = v.child(bottom.path()[static_cast<std::size_t>(v.level())])) {
    keys.push_back(LazyTree::keyOf(v));
    if (v == bottom) break;
  }
  const std::vector<std::uint8_t> flags(keys.size(), 0);
  for (int s = 0; s < 500; ++s) {
    const ClockStore c(s);
    const auto traj = extensionWalk(g, c, p, Configuration::star(), 400);
    bool generic = false;
    for (std::size_t i = 1; i < traj.size(); ++i) {
      if (traj[i] == bottom) { generic = true; break; }
      if (traj[i].isRootParent()) break;
    }
    ASSERT_EQ(generic, pathHitsBottom(c, p, keys, flags)) << s;
  }
}

TEST(PathMonotonicity, NoViolations) {
  EXPECT_EQ(pathMonotonicityCheck(WalkParams{0.5, 2.0}, 5, 2, 2, 20000, 1), 0u);
  EXPECT_EQ(pathMonotonicityCheck(WalkParams{0.5, 2.0}, 5, 1, 0, 100000, 2), 0u);
  EXPECT_EQ(pathMonotonicityCheck(WalkParams{0.5, 2.0}, 5, 5, 2, 20000, 3), 0u);
  EXPECT_EQ(pathMonotonicityCheck(WalkParams{2.0, 0.5}, 5, 0, 3, 20000, 4), 0u);
  EXPECT_THROW(pathMonotonicityCheck(WalkParams{0.5, 2.0}, 5, 0, 3, 10, 4), ConfigError);
}

TEST(PathMonotonicity, ViolationsAreDetectedWhenOrderingIsIgnored) {
  // sanity: the same machinery does see disagreements between unequal environments
  const VertexId bottom = VertexId::fromPath({1, 1, 1, 1, 1});
  std::vector<std::uint64_t> keys{0};
  VertexId v = VertexId::root();
  for (int i = 0; i <= 5; ++i, v = v.child(1)) keys.push_back(LazyTree::keyOf(v));
  std::vector<std::uint8_t> none(keys.size(), 0), all(keys.size(), 1);
  int differ = 0;
  for (int s = 0; s < 5000; ++s) {
    const ClockStore c(s);
    differ += pathHitsBottom(c, WalkParams{0.5, 2.0}, keys, none) != pathHitsBottom(c, WalkParams{0.5, 2.0}, keys, all);
  }
  EXPECT_GT(differ, 0);
}

TEST(Green, NStar) {
  EXPECT_EQ(greenNStar(WalkParams{1, 1}, 2), 2);
  EXPECT_FALSE(greenNStar(WalkParams{0.3, 0.6}, 2).has_value());
}

TEST(Green, MeanOffspringMatchesFormula) {
  for (auto [p, nStar] : {std::pair{WalkParams{1, 1}, 2}, std::pair{WalkParams{0.8, 1.5}, 3}}) {
    const int samples = 10000;
    double s = 0, s2 = 0;
    for (int i = 0; i < samples; ++i) {
      LazyTree tree(OffspringLaw::regular(2), static_cast<std::uint64_t>(i));
      const auto g = greenProcess(tree, p, nStar, 1, ClockStore(deriveSeed(77, i)));
      EXPECT_EQ(g.generations[0], 1u);
      s += g.generations[1];
      s2 += double(g.generations[1]) * g.generations[1];
    }
    const double mean = s / samples;
    const double se = std::sqrt((s2 / samples - mean * mean) / samples);
    EXPECT_NEAR(mean, std::pow(2.0, nStar) * psi(p, nStar), 4 * se) << nStar;
  }
}

TEST(Green, SurvivalTransientVersusRecurrent) {
  int survived = 0;
  for (int i = 0; i < 200; ++i) {
    LazyTree tree(OffspringLaw::regular(2), static_cast<std::uint64_t>(i));
    survived += greenProcess(tree, WalkParams{1, 1}, 3, 20, ClockStore(deriveSeed(5, i)), 512).survived;
  }
  EXPECT_GT(survived, 20);
  int recurrentSurvived = 0;
  const auto rec = multiplicativeParams(0.6, 1);
  for (int i = 0; i < 200; ++i) {
    LazyTree tree(OffspringLaw::regular(2), static_cast<std::uint64_t>(i));
    recurrentSurvived += greenProcess(tree, rec, 6, 20, ClockStore(deriveSeed(6, i)), 512).survived;
  }
  EXPECT_LT(recurrentSurvived / 200.0, 0.01);
}
