#pragma once

#include <functional>
#include <vector>

#include "rigsolve/rig.hpp"

namespace rigsolve {

/// min ||B w - b_hat||^2 + lambda 1^T w  subject to  0 <= w <= 1.
struct QpProblem {
  Matrix B;
  Vector b_hat;
  double lambda = 0.0;
  double tol = 1e-8;
  int max_iters = 5000;
};

struct QpResult {
  Vector w;
  int iterations = 0;
  bool converged = false;
  /// ||w - clamp(w - grad F(w))||_inf at the returned point.
  double residual = 0.0;
  /// Objective up to the constant ||b_hat||^2, one entry per accepted iterate.
  std::vector<double> objective_trace;
};

/// Box-constrained linear-rig fit. Holds the Gram matrix B^T B and its
/// Lipschitz constant so many targets can be solved against one basis.
///
/// Accelerated projected gradient with step 1/L, L = 2 lambda_max(B^T B),
/// starting from w = 0. Momentum is reset whenever the objective would
/// increase, in which case a plain projected-gradient step is taken, so the
/// accepted iterates are monotone.
class LinearBaseline {
 public:
  explicit LinearBaseline(const Matrix& B);
  explicit LinearBaseline(const Rig& rig);

  using IterateObserver = std::function<void(const Vector& w)>;

  /// `bt_target` is B^T b_hat. `observer`, when set, sees every accepted iterate.
  QpResult solve(const Eigen::Ref<const Vector>& bt_target, double lambda, double tol = 1e-8,
                 int max_iters = 5000, const IterateObserver& observer = {}) const;

  const Matrix& gram() const { return gram_; }
  double lipschitz() const { return lipschitz_; }

  /// grad F(w) = 2 (B^T B w - B^T b_hat) + lambda 1.
  Vector gradient(const Eigen::Ref<const Vector>& w, const Eigen::Ref<const Vector>& bt_target,
                  double lambda) const;

 private:
  void init_lipschitz();

  Matrix gram_;
  double lipschitz_ = 0.0;
};

QpResult solve_qp(const QpProblem& prob);

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, stopped at the given relative change.
double power_iteration_max(const Matrix& spd, double rel_tol = 1e-8, int max_iters = 100000);

}  // namespace rigsolve
