#pragma once

// Closed-form quantities: hitting products for MAD walks on paths, the phase
// criterion, d=1 speeds, coupling probabilities and the f(r) threshold.

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "madwalk/error.hpp"
#include "madwalk/walk.hpp"

namespace madwalk {

/// (a, b) for a walk on Z_+ that steps up with probability b at its running
/// maximum and a elsewhere.
struct MadPathParams {
  double a = 0.5;
  double b = 0.5;

  static MadPathParams make(double a, double b) {
    detail::require(a > 0.0 && a < 1.0, "a must lie in (0, 1)");
    detail::require(b > 0.0 && b < 1.0, "b must lie in (0, 1)");
    return MadPathParams{a, b};
  }

  /// The path chain seen by a MAD walk on [r^-1, mu].
  static MadPathParams fromWalk(WalkParams p) {
    return make(p.u1 / (1.0 + p.u1), p.u0 / (1.0 + p.u0));
  }

  double zeta() const noexcept { return (1.0 - a) / a; }
};

namespace detail {

inline constexpr double kUnitBranchTol = 1e-12;
inline constexpr int kLogSpaceAbove = 30;

/// Product of factor(j) over j in [from, to), in log space for long products.
template <class Factor>
double productOver(int from, int to, Factor factor) {
  if (to - from <= kLogSpaceAbove) {
    double prod = 1.0;
    for (int j = from; j < to; ++j) prod *= factor(j);
    return prod;
  }
  double logSum = 0.0;
  for (int j = from; j < to; ++j) logSum += std::log(factor(j));
  return std::exp(logSum);
}

}  // namespace detail

/// Probability that the (a,b,ell)-MAD walk hits n before -1.
inline double phi(MadPathParams params, int ell, int n) {
  detail::require(ell >= 0, "ell must be non-negative");
  detail::require(n > ell, "n must exceed ell");
  const double b = params.b;
  const double zeta = params.zeta();
  if (std::abs(zeta - 1.0) < detail::kUnitBranchTol) {
    return detail::productOver(ell, n, [b](int j) { return b * (j + 1) / (b * j + 1.0); });
  }
  // (b - b z^{j+1}) / (b - z^{j+1} + (1-b) z^j), rewritten in terms of
  // z^m - 1 via expm1 so nothing cancels near z = 1.
  const double logZeta = std::log(zeta);
  return detail::productOver(ell, n, [&](int j) {
    const double e1 = std::expm1((j + 1) * logZeta);
    const double e0 = std::expm1(j * logZeta);
    return -b * e1 / (-e1 + (1.0 - b) * e0);
  });
}

/// Probability that the walk on [r^-1, mu], |mu| = n, started from omega*,
/// hits mu before returning to r^-1.
inline double psi(WalkParams params, int n) {
  detail::require(n >= 1, "psi needs n >= 1");
  const double u0 = params.u0;
  const double u1 = params.u1;
  if (std::abs(u1 - 1.0) < detail::kUnitBranchTol) {
    return detail::productOver(0, n, [u0](int j) { return u0 * (j + 1) / (u0 * (j + 1) + 1.0); });
  }
  const double logU1 = std::log(u1);
  // u0 (u1^{j+1} - 1) / (u0 u1^{j+1} + u1 - u0 - 1) = u0 E / (u0 E + u1 - 1)
  return detail::productOver(0, n, [&](int j) {
    const double e = u0 * std::expm1((j + 1) * logU1);
    return e / (e + (u1 - 1.0));
  });
}

enum class Phase { Transient, Recurrent, Critical };

inline std::string_view toString(Phase p) {
  switch (p) {
    case Phase::Transient: return "transient";
    case Phase::Recurrent: return "recurrent";
    case Phase::Critical: return "critical";
  }
  return "?";
}

struct PhaseVerdict {
  Phase phase;
  double margin;  ///< d*u0 - (1 - u1 + u0)
};

inline constexpr double kCriticalTol = 1e-12;

inline double phaseMargin(WalkParams params, double d) { return d * params.u0 - (1.0 - params.u1 + params.u0); }

inline PhaseVerdict phase(WalkParams params, double d) {
  detail::require(std::isfinite(d) && d > 0.0, "mean offspring d must be positive");
  const double m = phaseMargin(params, d);
  if (std::abs(m) <= kCriticalTol) return {Phase::Critical, m};
  return {m > 0.0 ? Phase::Transient : Phase::Recurrent, m};
}

enum class Reinforcement { Multiplicative, Additive };

inline WalkParams paramsFor(Reinforcement mode, double alpha, double beta) {
  return mode == Reinforcement::Multiplicative ? multiplicativeParams(alpha, beta) : additiveParams(alpha, beta);
}

/// Speed of the MAD walk on the half line, from the renewal at new maxima:
/// E[T] = 1/p0 + (1 - p0)/(p0 (2p - 1)) with p0 = u0/(1+u0), p = u1/(1+u1).
/// Zero when u1 <= 1.
inline double speedHalfLine(WalkParams w) {
  if (w.u1 <= 1.0) return 0.0;
  return w.u0 * (w.u1 - 1.0) / (w.u0 * w.u1 - w.u0 + 2.0 * w.u1);
}

/// Speed of the once-reinforced biased walk on the half line (d = 1).
/// Multiplicative: (a-1)/(a+1+2b). Additive: a(a-1)/(a(a+1+2b)+2b(1+b)); the
/// published additive expression has a b in place of 2 a b, which disagrees
/// with the renewal computation and with simulation.
inline double speedZ(Reinforcement mode, double alpha, double beta) {
  detail::require(alpha >= 1.0, "speedZ needs alpha >= 1");
  detail::require(beta >= 0.0, "speedZ needs beta >= 0");
  if (mode == Reinforcement::Multiplicative) return (alpha - 1.0) / (alpha + 1.0 + 2.0 * beta);
  return alpha * (alpha - 1.0) / (alpha * (alpha + 1.0 + 2.0 * beta) + 2.0 * beta * (1.0 + beta));
}

/// Step probabilities of the multiplicative walk on the d-ary tree at a vertex
/// with k visited children, for the pair (beta, beta + eps), and their gaps.
struct CouplingProbs {
  double alpha = 0.0;
  std::uint32_t d = 0;
  double beta = 0.0;
  double eps = 0.0;

  std::vector<double> p, pbar, q;           ///< at beta
  std::vector<double> pEps, pbarEps, qEps;  ///< at beta + eps
  std::vector<double> dp, dq, dbar;         ///< Delta^(p)_k, Delta^(q)_k, bar Delta_k

  double eta = 0.0;    ///< 1 + beta + alpha d
  double pInf = 0.0;   ///< probability that 0 is a regeneration time of Y
  double r = 0.0;      ///< (1 + beta + eps) / (alpha d)

  /// Upper bound on bar Delta_k over k.
  double dbarBound() const { return eps * alpha * alpha * d * d / (4.0 * (eta + eps) * eta); }
  /// Probability that Y steps forward.
  double yForward() const { return 1.0 - qEps[0]; }
};

namespace detail {

inline double pUnvisited(double alpha, std::uint32_t d, double beta, std::uint32_t k) {
  return k < d ? alpha / (alpha * (d + k * beta) + 1.0 + beta) : 0.0;
}
inline double pVisited(double alpha, std::uint32_t d, double beta, std::uint32_t k) {
  return k > 0 ? alpha * (1.0 + beta) / (alpha * (d + k * beta) + 1.0 + beta) : 0.0;
}
inline double qParent(double alpha, std::uint32_t d, double beta, std::uint32_t k) {
  return (1.0 + beta) / (alpha * (d + k * beta) + 1.0 + beta);
}

}  // namespace detail

/// eps = 0 is accepted and gives the degenerate coupling with all gaps zero.
inline CouplingProbs couplingProbs(double alpha, std::uint32_t d, double beta, double eps) {
  detail::require(alpha > 0.0, "alpha must be positive");
  detail::require(d >= 1, "d must be at least 1");
  detail::require(beta >= 0.0, "beta must be non-negative");
  detail::require(eps >= 0.0, "eps must be non-negative");
  CouplingProbs c;
  c.alpha = alpha;
  c.d = d;
  c.beta = beta;
  c.eps = eps;
  const double b2 = beta + eps;
  for (std::uint32_t k = 0; k <= d; ++k) {
    c.p.push_back(detail::pUnvisited(alpha, d, beta, k));
    c.pbar.push_back(detail::pVisited(alpha, d, beta, k));
    c.q.push_back(detail::qParent(alpha, d, beta, k));
    c.pEps.push_back(detail::pUnvisited(alpha, d, b2, k));
    c.pbarEps.push_back(detail::pVisited(alpha, d, b2, k));
    c.qEps.push_back(detail::qParent(alpha, d, b2, k));
    // Closed forms rather than raw differences, so the gaps are exact zeros
    // at eps = 0 and non-negative without cancellation noise.
    const double den1 = alpha * (d + k * b2) + 1.0 + b2;
    const double den0 = alpha * (d + k * beta) + 1.0 + beta;
    const double dq = eps * alpha * (d - k) / (den1 * den0);
    c.dq.push_back(dq);
    c.dbar.push_back(k * alpha * dq);
    c.dp.push_back(k < d ? (dq + k * alpha * dq) / (d - k) : 0.0);
  }
  c.eta = 1.0 + beta + alpha * d;
  c.r = (1.0 + b2) / (alpha * d);
  c.pInf = (alpha * d - (1.0 + b2)) / (alpha * d);
  detail::require(c.pInf > 0.0, "coupling needs alpha d > 1 + beta + eps");
  return c;
}

enum class FVariant { Base, Improved };

/// The function whose value below 1 certifies monotonicity.
inline double fThreshold(double r, FVariant variant) {
  detail::require(r > 0.0 && r < 4.0 / 23.0, "f(r) is defined on (0, 4/23)");
  const double common = std::pow(1.0 + r, 6) / ((1.0 - r) * std::pow(1.0 - 23.0 * r / 4.0, 3));
  if (variant == FVariant::Base) return r * 243.0 * common / 2.0;
  return r * r * 2187.0 * common / 16.0;
}

/// Lower bound on P(|B| = 1, discrepancy >= 1) under the conditioned law.
inline double singleBackstepLowerBound(const CouplingProbs& c) {
  return c.eps / (c.alpha * c.d * std::pow(c.r + 1.0, 5));
}

/// Upper bound on P(D_k), k >= 2, under the conditioned law.
inline double decouplingUpperBound(const CouplingProbs& c, int k) {
  detail::require(k >= 2, "the decoupling bound is stated for k >= 2");
  return c.eps / (3.0 * (1.0 - c.r)) * k * std::pow(27.0 / 4.0 * c.r / (c.r + 1.0), k);
}

}  // namespace madwalk
