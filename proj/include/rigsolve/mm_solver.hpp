#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string_view>
#include <vector>

#include "rigsolve/qp_solver.hpp"
#include "rigsolve/rig.hpp"
#include "rigsolve/spectral_cache.hpp"

namespace rigsolve {

enum class InitStrategy { kZero, kPseudoinverse, kLinear };

std::string_view to_string(InitStrategy init);
/// Accepts "zero", "pseudoinverse", "linear"; throws kInvalidArgument otherwise.
InitStrategy parse_init(std::string_view name);

struct SolverConfig {
  double lambda = 0.0;
  double epsilon = 1e-6;
  int max_iters = 200;
  InitStrategy init = InitStrategy::kZero;
  // Settings for the linear solve behind InitStrategy::kLinear.
  double qp_tol = 1e-8;
  int qp_max_iters = 5000;

  void validate() const;
};

struct SolveReport {
  Vector weights;
  int iterations = 0;
  /// Objective of the quadratic model at w_0, w_1, ..., w_iterations.
  std::vector<double> objective_trace;
  bool converged = false;
  std::chrono::duration<double> wall_time{0.0};
};

/// Coefficients of the separable majorizer: at displacement v the surrogate
/// (including the lambda term) is p + sum_j (q_j v_j + r v_j^2 + s v_j^4).
struct SurrogateCoefficients {
  double p = 0.0;
  Vector q;
  double r = 0.0;
  double s = 0.0;

  double value(const Eigen::Ref<const Vector>& v) const;
};

/// ||evaluate_quadratic(w) - target||^2 + lambda 1^T w.
double objective_quadratic(const Rig& rig, const QuadraticCache& cache,
                           const Eigen::Ref<const Vector>& w,
                           const Eigen::Ref<const Vector>& target, double lambda);

SurrogateCoefficients surrogate_coefficients(const Rig& rig, const QuadraticCache& cache,
                                             const Eigen::Ref<const Vector>& w,
                                             const Eigen::Ref<const Vector>& target,
                                             double lambda);

/// One MM update: minimizes the surrogate independently per controller over
/// the box and returns the new feasible iterate.
Vector mm_step(const Rig& rig, const QuadraticCache& cache, const Eigen::Ref<const Vector>& w,
               const Eigen::Ref<const Vector>& target, const SolverConfig& config);

/// Full solve of one frame. Builds the per-rig precomputation on every call;
/// use QuadraticSolver directly when fitting many frames.
SolveReport solve(const Rig& rig, const QuadraticCache& cache,
                  const Eigen::Ref<const Vector>& target, const SolverConfig& config);

/// Inverse-rig solver for the quadratic rig approximation.
///
/// Holds per-rig products that make one iteration cost O(support of B and of
/// the pairwise corrections) instead of O(3n * m): B^T delta_p for each
/// pairwise correction, and delta_p . delta_q for correction pairs sharing a
/// controller. The pseudoinverse and the linear baseline are built on first
/// use. Instances are safe to share across threads.
class QuadraticSolver {
 public:
  using IterateObserver = std::function<void(int iteration, const Vector& w)>;

  QuadraticSolver(const Rig& rig, const QuadraticCache& cache);

  const Rig& rig() const { return rig_; }
  const QuadraticCache& cache() const { return cache_; }

  /// Coefficients at w given the residual g = residual_g(w, target).
  SurrogateCoefficients coefficients(const Eigen::Ref<const Vector>& w,
                                     const Eigen::Ref<const Vector>& g, double lambda) const;

  Vector step(const Eigen::Ref<const Vector>& w, const SurrogateCoefficients& coeffs) const;

  Vector initial_point(const Eigen::Ref<const Vector>& target, const SolverConfig& config) const;

  /// `observer`, when set, sees w_0 and every subsequent iterate.
  SolveReport solve(const Eigen::Ref<const Vector>& target, const SolverConfig& config,
                    const IterateObserver& observer = {}) const;

  /// clamp(B^+ target) with singular values below 1e-10 * sigma_max dropped.
  Vector pseudoinverse_init(const Eigen::Ref<const Vector>& target) const;
  const LinearBaseline& linear_baseline() const;

 private:
  struct Incidence {
    std::size_t pair;
    int other;
  };

  const Rig& rig_;
  const QuadraticCache& cache_;

  double blendshape_frobenius_sq_ = 0.0;
  // For pair p = (j, k): B_j . delta_p and B_k . delta_p.
  std::vector<double> pair_dot_first_;
  std::vector<double> pair_dot_second_;
  // Pairs incident to each controller and, per controller, the Gram block of
  // their correction vectors (row-major, incident.size()^2).
  std::vector<std::vector<Incidence>> incident_;
  std::vector<std::vector<double>> incident_gram_;

  mutable std::once_flag pinv_once_;
  mutable Matrix pinv_;
  mutable std::once_flag baseline_once_;
  mutable std::unique_ptr<LinearBaseline> baseline_;
};

}  // namespace rigsolve
