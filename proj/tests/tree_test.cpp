#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "madwalk/tree.hpp"

using namespace madwalk;

TEST(OffspringLaw, RegularAndParse) {
  const auto law = OffspringLaw::regular(3);
  EXPECT_DOUBLE_EQ(law.mean(), 3.0);
  EXPECT_TRUE(law.noLeaves());
  EXPECT_EQ(OffspringLaw::parse("regular:3"), law);
  EXPECT_EQ(OffspringLaw::parse(law.text()), law);
}

TEST(OffspringLaw, TableInvariants) {
  const auto law = OffspringLaw::parse("table:0=0.0,2=0.5,3=0.5");
  EXPECT_NEAR(law.mean(), 2.5, 1e-12);
  EXPECT_TRUE(law.noLeaves());
  EXPECT_EQ(OffspringLaw::parse(law.text()), law);

  const auto leafy = OffspringLaw::parse("table:0=0.25,2=0.75");
  EXPECT_FALSE(leafy.noLeaves());
  EXPECT_NEAR(leafy.mean(), 1.5, 1e-12);

  EXPECT_THROW(OffspringLaw::parse("table:1=0.5,2=0.4"), ConfigError);
  EXPECT_THROW(OffspringLaw::parse("table:1=-0.5,2=1.5"), ConfigError);
  EXPECT_THROW(OffspringLaw::parse("poisson:2"), ConfigError);
  EXPECT_THROW(OffspringLaw::parse("regular:x"), ConfigError);
}

TEST(OffspringLaw, GeometricMean) {
  const auto law = OffspringLaw::parse("geom:0.25");
  EXPECT_NEAR(law.mean(), 4.0, 1e-12);
  EXPECT_TRUE(law.noLeaves());
  EXPECT_NEAR(law.probability(1), 0.25, 1e-15);
  EXPECT_NEAR(law.probability(3), 0.25 * 0.75 * 0.75, 1e-15);
}

TEST(VertexId, AddressingAndOrder) {
  const auto r = VertexId::root();
  const auto rp = VertexId::rootParent();
  EXPECT_EQ(rp.level(), -1);
  EXPECT_EQ(r.level(), 0);
  EXPECT_EQ(r.parent(), rp);
  const auto v = VertexId::fromPath({1, 2, 3});
  EXPECT_EQ(v.level(), 3);
  EXPECT_EQ(v.parent(), VertexId::fromPath({1, 2}));
  EXPECT_EQ(v.toString(), "r.1.2.3");
  EXPECT_EQ(rp.toString(), "r-1");
  EXPECT_TRUE(r.isAncestorOrSelf(v));
  EXPECT_TRUE(VertexId::fromPath({1}).isAncestorOrSelf(v));
  EXPECT_FALSE(VertexId::fromPath({2}).isAncestorOrSelf(v));
  EXPECT_FALSE(v.isAncestorOrSelf(v.parent()));
  EXPECT_THROW(VertexId::fromPath({0}), ConfigError);
}

TEST(LazyTree, RegularArities) {
  LazyTree t(OffspringLaw::regular(3), 7);
  EXPECT_EQ(t.arity(VertexId::rootParent()), 1u);
  EXPECT_EQ(t.arity(VertexId::root()), 3u);
  EXPECT_EQ(t.arity(VertexId::fromPath({2, 3, 1})), 3u);
  const auto kids = t.children(VertexId::fromPath({1}));
  ASSERT_EQ(kids.size(), 3u);
  EXPECT_EQ(kids[0], VertexId::fromPath({1, 1}));
  EXPECT_EQ(kids[2], VertexId::fromPath({1, 3}));
  EXPECT_EQ(t.children(VertexId::rootParent()), std::vector<VertexId>{VertexId::root()});
}

TEST(LazyTree, LeafHasNoChildren) {
  LazyTree t(OffspringLaw::regular(2), 1, 2);
  const auto leaf = VertexId::fromPath({1, 2});
  EXPECT_EQ(t.arity(leaf), 0u);
  EXPECT_TRUE(t.children(leaf).empty());
}

TEST(LazyTree, MemoizedAndOrderIndependent) {
  const auto law = OffspringLaw::parse("table:0=0.0,2=0.5,3=0.5");
  std::vector<VertexId> probes;
  LazyTree explorer(law, 99);
  std::mt19937_64 gen(3);
  for (int i = 0; i < 200; ++i) {
    VertexId v = VertexId::root();
    for (int depth = 0; depth < 6; ++depth) {
      const auto a = explorer.arity(v);
      v = v.child(1 + static_cast<std::uint32_t>(gen() % a));
    }
    probes.push_back(v);
  }
  LazyTree forward(law, 99);
  LazyTree backward(law, 99);
  std::vector<std::uint32_t> a1, a2;
  for (const auto& v : probes) a1.push_back(forward.arity(v));
  for (auto it = probes.rbegin(); it != probes.rend(); ++it) a2.push_back(backward.arity(*it));
  std::reverse(a2.begin(), a2.end());
  EXPECT_EQ(a1, a2);
  for (const auto& v : probes) {
    EXPECT_EQ(forward.arity(v), forward.arity(v));
    EXPECT_EQ(forward.arity(v), forward.sampleArity(v));
  }
}

TEST(LazyTree, EmpiricalMeanWithinFourSE) {
  const auto law = OffspringLaw::parse("table:1=0.5,3=0.3,6=0.2");
  LazyTree t(law, 2024);
  const int n = 100000;
  double sum = 0.0, sumSq = 0.0;
  // distinct vertices r.i for i = 1..n are independent draws
  for (int i = 1; i <= n; ++i) {
    const double a = t.sampleArity(VertexId::fromPath({static_cast<std::uint32_t>(i)}));
    sum += a;
    sumSq += a * a;
  }
  const double mean = sum / n;
  const double var = sumSq / n - mean * mean;
  EXPECT_NEAR(mean, law.mean(), 4.0 * std::sqrt(var / n));
}

TEST(LazyTree, ArenaMatchesAddresses) {
  LazyTree t(OffspringLaw::geometricShifted(0.4), 5);
  const auto v = VertexId::fromPath({1, 1, 1});
  const NodeRef ref = t.locate(v);
  EXPECT_EQ(t.vertex(ref), v);
  EXPECT_EQ(t.level(ref), 3);
  EXPECT_EQ(t.arity(ref), t.sampleArity(v));
}
