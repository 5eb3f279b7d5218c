// Small tour of the library: phase of a few parameter pairs, a speed estimate
// on the binary tree, and the coupled speed gap at a strong bias.

#include <cstdio>

#include "madwalk/madwalk.hpp"

using namespace madwalk;

int main() {
  const auto binary = OffspringLaw::regular(2);

  std::puts("phase on the binary tree");
  for (WalkParams p : {WalkParams{1, 1}, multiplicativeParams(0.6, 1), additiveParams(0.6, 1)}) {
    const auto ph = phase(p, 2);
    std::printf("  u0=%.3f u1=%.3f  margin %+.3f  %s\n", p.u0, p.u1, ph.margin, std::string(toString(ph.phase)).c_str());
  }

  const auto rep = classifyRecurrence(multiplicativeParams(0.6, 1), binary, 20000, 40, 600, 7);
  std::printf("simulated verdict for multiplicative (0.6, 1): %s after %llu runs\n",
              std::string(toString(rep.verdict)).c_str(), static_cast<unsigned long long>(rep.runs));

  const auto s = directSpeed(WalkParams{1, 1}, binary, 200000, 4, 30, 11);
  std::printf("speed of the simple walk on the binary tree: %.4f +- %.4f (exact 1/3)\n", s.v, s.standardError);

  const auto c = couplingProbs(15, 10, 0.0, 0.05);
  const auto diff = speedDiffEstimator(harvestRuns(c, 1000000, 1, 3).blocks);
  std::printf("alpha=15 d=10: v(0)=%.5f v(0.05)=%.5f, gap %.2e +- %.1e\n", diff.vBeta, diff.vBetaEps, diff.diff,
              diff.seDiff);
}
