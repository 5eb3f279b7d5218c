#pragma once

// Deterministic formula-versus-oracle checks behind the `verify` subcommand.

#include <cmath>
#include <string>
#include <vector>

#include "madwalk/coupling.hpp"
#include "madwalk/formulas.hpp"
#include "madwalk/oracle.hpp"

namespace madwalk {

struct CheckResult {
  std::string name;
  double error = 0.0;  ///< worst absolute deviation (0/1 for boolean checks)
  double tolerance = 0.0;
  bool pass = false;
};

inline std::vector<CheckResult> runVerifySuite() {
  std::vector<CheckResult> out;
  auto add = [&](std::string name, double err, double tol) { out.push_back({std::move(name), err, tol, err <= tol}); };
  auto flag = [&](std::string name, bool ok) { out.push_back({std::move(name), ok ? 0.0 : 1.0, 0.0, ok}); };

  double worst = 0.0;
  for (double a : {0.2, 0.35, 0.5, 0.65, 0.8}) {
    for (double b : {0.15, 0.3, 0.5, 0.7, 0.9}) {
      const auto p = MadPathParams::make(a, b);
      for (int n = 1; n <= 20; ++n) worst = std::max(worst, std::abs(exactPathHit(PathChain{n, p}) - phi(p, 0, n)));
    }
  }
  add("phi vs linear solve, 25 (a,b) pairs, n <= 20", worst, 1e-10);

  worst = 0.0;
  for (WalkParams w : {WalkParams{0.5, 2.0}, WalkParams{1.0, 1.0}, WalkParams{2.0, 0.4}, WalkParams{0.3, 1.7}}) {
    for (int n = 1; n <= 20; ++n) {
      worst = std::max(worst, std::abs(exactPathHit(PathChain{n, MadPathParams::fromWalk(w)}) - psi(w, n)));
    }
  }
  add("psi vs linear solve, n <= 20", worst, 1e-10);
  add("psi(1, 1, 1) = 1/2", std::abs(psi(WalkParams{1, 1}, 1) - 0.5), 1e-15);
  add("phi(1/2, 1/2, 0, 2) = 1/3", std::abs(phi(MadPathParams::make(0.5, 0.5), 0, 2) - 1.0 / 3.0), 1e-15);

  flag("binary tree simple walk is transient", phase(WalkParams{1, 1}, 2).phase == Phase::Transient);
  flag("multiplicative (0.6, 1) on d = 2 is recurrent", phase(multiplicativeParams(0.6, 1), 2).phase == Phase::Recurrent);
  worst = 0.0;
  for (double alpha : {0.3, 0.6, 1.1}) {
    for (double beta : {0.0, 0.5, 3.0}) {
      worst = std::max(worst, std::abs(phaseMargin(additiveParams(alpha, beta), 2) - (2 * alpha - 1) / (1 + beta)));
    }
  }
  add("additive margin = (d alpha - 1)/(1 + beta)", worst, 1e-12);

  add("speedZ multiplicative (3, 0) = 1/2", std::abs(speedZ(Reinforcement::Multiplicative, 3, 0) - 0.5), 1e-15);
  add("speedZ multiplicative (3, 1) = 1/3", std::abs(speedZ(Reinforcement::Multiplicative, 3, 1) - 1.0 / 3.0), 1e-15);
  add("speedZ additive (1, 2) = 0", std::abs(speedZ(Reinforcement::Additive, 1, 2)), 0.0);

  const auto c = couplingProbs(15, 10, 0.05, 0.01);
  double sumResidual = 0.0, deltaResidual = 0.0, marginal = 0.0;
  for (std::uint32_t k = 0; k <= c.d; ++k) {
    sumResidual = std::max({sumResidual, std::abs((c.d - k) * c.p[k] + k * c.pbar[k] + c.q[k] - 1.0),
                            std::abs((c.d - k) * c.pEps[k] + k * c.pbarEps[k] + c.qEps[k] - 1.0)});
    deltaResidual = std::max(deltaResidual, std::abs(-static_cast<double>(c.d - k) * c.dp[k] + c.dbar[k] + c.dq[k]));
    marginal = std::max(marginal, marginalCheck(c, k).maxResidual);
  }
  add("coupling probabilities sum to one", sumResidual, 1e-14);
  add("coupling deltas sum to zero", deltaResidual, 1e-14);
  add("coupling interval lengths equal marginals", marginal, 1e-12);
  add("q_d does not depend on beta", std::abs(c.q[c.d] - c.qEps[c.d]), 1e-15);

  flag("base f(1/150) < 1", fThreshold(1.0 / 150, FVariant::Base) < 1.0);
  flag("improved f(1/22) < 1", fThreshold(1.0 / 22, FVariant::Improved) < 1.0);
  bool increasing = true;
  for (int i = 1; i < 100; ++i) {
    increasing &= fThreshold(i / 10000.0, FVariant::Base) < fThreshold((i + 1) / 10000.0, FVariant::Base);
  }
  flag("base f increasing on (0, 1/100]", increasing);
  return out;
}

}  // namespace madwalk
