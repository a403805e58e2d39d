#include "rigsolve/quartic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "rigsolve/errors.hpp"

namespace rigsolve {

namespace {

// Newton on f(v) = c3 v^3 + c1 v + c0, accepting a step only when it does not
// increase |f|.
double polish(double v, double c3, double c1, double c0, int steps) {
  for (int it = 0; it < steps; ++it) {
    const double f = (c3 * v * v + c1) * v + c0;
    const double df = 3.0 * c3 * v * v + c1;
    if (f == 0.0 || df == 0.0) break;
    const double next = v - f / df;
    const double f_next = (c3 * next * next + c1) * next + c0;
    if (!std::isfinite(next) || std::abs(f_next) > std::abs(f)) break;
    v = next;
  }
  return v;
}

}  // namespace

std::vector<double> cubic_roots_depressed(double a1, double a0) {
  std::vector<double> roots;
  if (a1 == 0.0 && a0 == 0.0) {
    roots.push_back(0.0);
    return roots;
  }
  if (a1 == 0.0) {
    roots.push_back(std::cbrt(-a0));
  } else {
    const double half = 0.5 * a0;
    const double third = a1 / 3.0;
    const double disc = half * half + third * third * third;
    if (disc < 0.0) {
      // Three distinct real roots (a1 < 0).
      const double amp = 2.0 * std::sqrt(-third);
      const double arg = std::clamp((3.0 * a0 / (2.0 * a1)) * std::sqrt(-3.0 / a1), -1.0, 1.0);
      const double phi = std::acos(arg) / 3.0;
      for (int k = 0; k < 3; ++k) {
        roots.push_back(amp * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0));
      }
    } else if (disc == 0.0) {
      roots.push_back(3.0 * a0 / a1);
      roots.push_back(-1.5 * a0 / a1);
    } else if (a1 > 0.0) {
      const double amp = 2.0 * std::sqrt(third);
      roots.push_back(-amp * std::sinh(std::asinh((3.0 * a0 / (2.0 * a1)) * std::sqrt(3.0 / a1)) / 3.0));
    } else {
      const double amp = 2.0 * std::sqrt(-third);
      const double arg = (-3.0 * std::abs(a0) / (2.0 * a1)) * std::sqrt(-3.0 / a1);
      roots.push_back(-std::copysign(1.0, a0) * amp * std::cosh(std::acosh(std::max(arg, 1.0)) / 3.0));
    }
  }
  for (double& r : roots) r = polish(r, 1.0, a1, a0, 2);
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  return roots;
}

QuarticMinimum minimize_quartic(const QuarticProblem& prob) {
  const std::array<double, 6> all{prob.p, prob.q, prob.r, prob.s, prob.lo, prob.hi};
  for (double c : all) {
    if (!std::isfinite(c)) {
      throw Error(ErrorCode::kContractViolation, "quartic: non-finite coefficient or bound");
    }
  }
  if (prob.s < 0.0) {
    throw Error(ErrorCode::kContractViolation,
                fmt::format("quartic: quartic coefficient s = {} is negative", prob.s));
  }
  if (prob.lo > prob.hi) {
    throw Error(ErrorCode::kContractViolation,
                fmt::format("quartic: empty interval [{}, {}]", prob.lo, prob.hi));
  }

  // Stationary points solve q + 2r v + 4s v^3 = 0.
  std::array<double, 5> candidates{};
  std::size_t count = 0;
  candidates[count++] = prob.lo;
  candidates[count++] = prob.hi;
  if (prob.s > 0.0) {
    for (double root : cubic_roots_depressed(prob.r / (2.0 * prob.s), prob.q / (4.0 * prob.s))) {
      // Polish again against the unscaled derivative; the normalization can
      // cost digits when s is small next to r.
      root = polish(root, 4.0 * prob.s, 2.0 * prob.r, prob.q, 2);
      if (root > prob.lo && root < prob.hi) candidates[count++] = root;
    }
  } else if (prob.r != 0.0) {
    const double root = -prob.q / (2.0 * prob.r);
    if (root > prob.lo && root < prob.hi) candidates[count++] = root;
  }
  std::sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count));

  QuarticMinimum best{candidates[0], prob.value(candidates[0])};
  for (std::size_t c = 1; c < count; ++c) {
    const double value = prob.value(candidates[c]);
    if (value < best.value) best = {candidates[c], value};
  }
  return best;
}

}  // namespace rigsolve
