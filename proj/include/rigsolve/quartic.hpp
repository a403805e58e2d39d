#pragma once

#include <vector>

namespace rigsolve {

/// p + q v + r v^2 + s v^4 restricted to lo <= v <= hi, with s >= 0.
struct QuarticProblem {
  double p = 0.0;
  double q = 0.0;
  double r = 0.0;
  double s = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  double value(double v) const {
    const double v2 = v * v;
    return p + q * v + r * v2 + s * v2 * v2;
  }
};

struct QuarticMinimum {
  double v_star = 0.0;
  double value = 0.0;
};

/// Global minimizer over [lo, hi]. Candidates are the interval endpoints and
/// the real stationary points inside it; equal values resolve to the smallest v.
/// Throws kContractViolation on non-finite input, s < 0 or lo > hi.
QuarticMinimum minimize_quartic(const QuarticProblem& prob);

/// Real roots of v^3 + a1 v + a0 = 0, ascending. The triple root at
/// a1 = a0 = 0 is reported once.
std::vector<double> cubic_roots_depressed(double a1, double a0);

}  // namespace rigsolve
