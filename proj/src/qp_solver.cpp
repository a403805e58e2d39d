#include "rigsolve/qp_solver.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rigsolve/errors.hpp"

namespace rigsolve {

namespace {

Vector clamp01(const Eigen::Ref<const Vector>& v) { return v.cwiseMax(0.0).cwiseMin(1.0); }

}  // namespace

double power_iteration_max(const Matrix& spd, double rel_tol, int max_iters) {
  const Eigen::Index m = spd.rows();
  if (m == 0) return 0.0;
  // Deterministic, non-degenerate start.
  Vector x(m);
  for (Eigen::Index j = 0; j < m; ++j) x[j] = 1.0 + static_cast<double>(j + 1) / static_cast<double>(m);
  x.normalize();
  double estimate = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vector y = spd * x;
    const double next = x.dot(y);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
    if (it > 0 && std::abs(next - estimate) <= rel_tol * std::abs(next)) return next;
    estimate = next;
  }
  return estimate;
}

LinearBaseline::LinearBaseline(const Matrix& B) {
  gram_ = Matrix::Zero(B.cols(), B.cols());
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
  gram_ = gram_.selfadjointView<Eigen::Lower>();
  init_lipschitz();
}

LinearBaseline::LinearBaseline(const Rig& rig) {
  const Eigen::Index m = rig.n_controllers();
  const Matrix& B = rig.blendshapes();
  const auto& support = rig.blendshape_support();
  gram_.resize(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const Support& sa = support[static_cast<std::size_t>(a)];
    for (Eigen::Index b = a; b < m; ++b) {
      const Support& sb = support[static_cast<std::size_t>(b)];
      const Eigen::Index lo = std::max(sa.begin, sb.begin);
      const Eigen::Index hi = std::min(sa.end, sb.end);
      const double value =
          hi > lo ? B.col(a).segment(lo, hi - lo).dot(B.col(b).segment(lo, hi - lo)) : 0.0;
      gram_(a, b) = value;
      gram_(b, a) = value;
    }
  }
  init_lipschitz();
}

void LinearBaseline::init_lipschitz() { lipschitz_ = 2.0 * power_iteration_max(gram_); }

Vector LinearBaseline::gradient(const Eigen::Ref<const Vector>& w,
                                const Eigen::Ref<const Vector>& bt_target, double lambda) const {
  Vector grad = 2.0 * (gram_ * w - bt_target);
  grad.array() += lambda;
  return grad;
}

QpResult LinearBaseline::solve(const Eigen::Ref<const Vector>& bt_target, double lambda,
                               double tol, int max_iters,
                               const IterateObserver& observer) const {
  const Eigen::Index m = gram_.rows();
  if (bt_target.size() != m) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("B^T b_hat: length {}, expected {}", bt_target.size(), m));
  }
  if (!(lambda >= 0.0) || !(tol > 0.0) || max_iters < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("qp: need lambda >= 0, tol > 0, max_iters >= 1 (got {}, {}, {})",
                            lambda, tol, max_iters));
  }

  // F(w) - ||b_hat||^2.
  auto objective = [&](const Vector& w) {
    return w.dot(gram_ * w) - 2.0 * w.dot(bt_target) + lambda * w.sum();
  };
  auto residual = [&](const Vector& w) {
    return (w - clamp01(w - gradient(w, bt_target, lambda))).lpNorm<Eigen::Infinity>();
  };

  QpResult result;
  Vector x = Vector::Zero(m);
  if (observer) observer(x);
  if (lipschitz_ == 0.0) {
    // B = 0: F is linear in w and minimized at the lower bound whenever lambda >= 0.
    result.w = x;
    result.residual = residual(x);
    result.converged = result.residual <= tol;
    result.objective_trace.push_back(0.0);
    return result;
  }

  const double step = 1.0 / lipschitz_;
  Vector y = x;
  double t = 1.0;
  double fx = objective(x);
  result.objective_trace.push_back(fx);
  for (int it = 1; it <= max_iters; ++it) {
    result.residual = residual(x);
    if (result.residual <= tol) {
      result.converged = true;
      break;
    }
    Vector x_next = clamp01(y - step * gradient(y, bt_target, lambda));
    double f_next = objective(x_next);
    if (f_next > fx) {
      t = 1.0;
      x_next = clamp01(x - step * gradient(x, bt_target, lambda));
      f_next = objective(x_next);
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_next + ((t - 1.0) / t_next) * (x_next - x);
    x = std::move(x_next);
    if (observer) observer(x);
    fx = f_next;
    t = t_next;
    result.iterations = it;
    result.objective_trace.push_back(fx);
  }
  if (!result.converged) {
    result.residual = residual(x);
    result.converged = result.residual <= tol;
  }
  result.w = std::move(x);
  return result;
}

QpResult solve_qp(const QpProblem& prob) {
  if (prob.b_hat.size() != prob.B.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("b_hat: length {}, B has {} rows", prob.b_hat.size(), prob.B.rows()));
  }
  const LinearBaseline baseline(prob.B);
  return baseline.solve(prob.B.transpose() * prob.b_hat, prob.lambda, prob.tol, prob.max_iters);
}

}  // namespace rigsolve
