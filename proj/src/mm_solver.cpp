#include "rigsolve/mm_solver.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rigsolve/errors.hpp"
#include "rigsolve/quartic.hpp"

namespace rigsolve {

namespace {

double overlap_dot(const Vector& a, const Support& sa, const Vector& b, const Support& sb) {
  const Eigen::Index lo = std::max(sa.begin, sb.begin);
  const Eigen::Index hi = std::min(sa.end, sb.end);
  if (hi <= lo) return 0.0;
  return a.segment(lo, hi - lo).dot(b.segment(lo, hi - lo));
}

void check_cache(const Rig& rig, const QuadraticCache& cache) {
  if (cache.n_controllers != rig.n_controllers() || cache.n_coords != rig.n_coords()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("cache built for {} coordinates x {} controllers, rig has {} x {}",
                            cache.n_coords, cache.n_controllers, rig.n_coords(),
                            rig.n_controllers()));
  }
}

}  // namespace

std::string_view to_string(InitStrategy init) {
  switch (init) {
    case InitStrategy::kZero: return "zero";
    case InitStrategy::kPseudoinverse: return "pseudoinverse";
    case InitStrategy::kLinear: return "linear";
  }
  return "zero";
}

InitStrategy parse_init(std::string_view name) {
  if (name == "zero") return InitStrategy::kZero;
  if (name == "pseudoinverse") return InitStrategy::kPseudoinverse;
  if (name == "linear") return InitStrategy::kLinear;
  throw Error(ErrorCode::kInvalidArgument,
              fmt::format("unknown initialization '{}' (expected zero|pseudoinverse|linear)", name));
}

void SolverConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("lambda must be >= 0, got {}", lambda));
  }
  if (!(epsilon > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("epsilon must be > 0, got {}", epsilon));
  }
  if (max_iters < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("max_iters must be >= 1, got {}", max_iters));
  }
}

double SurrogateCoefficients::value(const Eigen::Ref<const Vector>& v) const {
  const auto v2 = v.array().square();
  return p + q.dot(v) + r * v2.sum() + s * v2.square().sum();
}

double objective_quadratic(const Rig& rig, const QuadraticCache& cache,
                           const Eigen::Ref<const Vector>& w,
                           const Eigen::Ref<const Vector>& target, double lambda) {
  check_cache(rig, cache);
  return rig.residual_g(w, target).squaredNorm() + lambda * w.sum();
}

SurrogateCoefficients surrogate_coefficients(const Rig& rig, const QuadraticCache& cache,
                                             const Eigen::Ref<const Vector>& w,
                                             const Eigen::Ref<const Vector>& target,
                                             double lambda) {
  check_cache(rig, cache);
  const QuadraticSolver solver(rig, cache);
  return solver.coefficients(w, rig.residual_g(w, target), lambda);
}

Vector mm_step(const Rig& rig, const QuadraticCache& cache, const Eigen::Ref<const Vector>& w,
               const Eigen::Ref<const Vector>& target, const SolverConfig& config) {
  config.validate();
  check_feasible(w);
  check_cache(rig, cache);
  const QuadraticSolver solver(rig, cache);
  return solver.step(w, solver.coefficients(w, rig.residual_g(w, target), config.lambda));
}

SolveReport solve(const Rig& rig, const QuadraticCache& cache,
                  const Eigen::Ref<const Vector>& target, const SolverConfig& config) {
  check_cache(rig, cache);
  const QuadraticSolver solver(rig, cache);
  return solver.solve(target, config);
}

QuadraticSolver::QuadraticSolver(const Rig& rig, const QuadraticCache& cache)
    : rig_(rig), cache_(cache) {
  check_cache(rig, cache);
  const Matrix& B = rig.blendshapes();
  const auto& bs_support = rig.blendshape_support();
  const auto& pairs = rig.corrections2();
  const auto& pair_support = rig.correction2_support();
  const auto m = static_cast<std::size_t>(rig.n_controllers());

  for (std::size_t j = 0; j < m; ++j) {
    const Support& s = bs_support[j];
    blendshape_frobenius_sq_ += B.col(static_cast<Eigen::Index>(j)).segment(s.begin, s.size()).squaredNorm();
  }

  pair_dot_first_.resize(pairs.size());
  pair_dot_second_.resize(pairs.size());
  incident_.resize(m);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const int j = pairs[p].controllers[0];
    const int k = pairs[p].controllers[1];
    const auto sj = static_cast<std::size_t>(j);
    const auto sk = static_cast<std::size_t>(k);
    pair_dot_first_[p] = overlap_dot(B.col(j), bs_support[sj], pairs[p].delta, pair_support[p]);
    pair_dot_second_[p] = overlap_dot(B.col(k), bs_support[sk], pairs[p].delta, pair_support[p]);
    incident_[sj].push_back({p, k});
    incident_[sk].push_back({p, j});
  }

  incident_gram_.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& inc = incident_[j];
    const std::size_t d = inc.size();
    auto& gram = incident_gram_[j];
    gram.assign(d * d, 0.0);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) {
        const double value =
            overlap_dot(pairs[inc[a].pair].delta, pair_support[inc[a].pair],
                        pairs[inc[b].pair].delta, pair_support[inc[b].pair]);
        gram[a * d + b] = value;
        gram[b * d + a] = value;
      }
    }
  }
}

SurrogateCoefficients QuadraticSolver::coefficients(const Eigen::Ref<const Vector>& w,
                                                    const Eigen::Ref<const Vector>& g,
                                                    double lambda) const {
  rig_.check_weights(w);
  rig_.check_target(g);
  const auto& pairs = rig_.corrections2();
  const auto& pair_support = rig_.correction2_support();

  SurrogateCoefficients c;
  c.p = g.squaredNorm() + lambda * w.sum();

  // q_j = 2 sum_i g_i h_ij + lambda, with h_i = B_i + 2 w^T D^(i).
  c.q = 2.0 * rig_.apply_transpose(g);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const Support& s = pair_support[p];
    const double dg = pairs[p].delta.segment(s.begin, s.size()).dot(g.segment(s.begin, s.size()));
    const int j = pairs[p].controllers[0];
    const int k = pairs[p].controllers[1];
    c.q[j] += 2.0 * w[k] * dg;
    c.q[k] += 2.0 * w[j] * dg;
  }
  c.q.array() += lambda;

  // sum_i g_i lambda_M(D^(i), g_i).
  double sign_split = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    sign_split += g[i] * (g[i] < 0.0 ? cache_.lambda_min[i] : cache_.lambda_max[i]);
  }

  // sum_i ||h_i||^2 = ||B||_F^2 + 2 <B, C> + ||C||_F^2 where column j of C is
  // sum over pairs p containing j of w_other(p) delta_p.
  double cross = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    cross += w[pairs[p].controllers[1]] * pair_dot_first_[p] +
             w[pairs[p].controllers[0]] * pair_dot_second_[p];
  }
  double correction_sq = 0.0;
  for (std::size_t j = 0; j < incident_.size(); ++j) {
    const auto& inc = incident_[j];
    const std::size_t d = inc.size();
    const auto& gram = incident_gram_[j];
    for (std::size_t a = 0; a < d; ++a) {
      const double wa = w[inc[a].other];
      if (wa == 0.0) continue;
      double row = 0.0;
      for (std::size_t b = 0; b < d; ++b) row += gram[a * d + b] * w[inc[b].other];
      correction_sq += wa * row;
    }
  }
  const double h_sq = blendshape_frobenius_sq_ + 2.0 * cross + correction_sq;

  c.r = 2.0 * (sign_split + h_sq);
  c.s = cache_.s_coefficient;
  return c;
}

Vector QuadraticSolver::step(const Eigen::Ref<const Vector>& w,
                             const SurrogateCoefficients& coeffs) const {
  Vector next(w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const QuarticProblem prob{coeffs.p, coeffs.q[j], coeffs.r, coeffs.s, -w[j], 1.0 - w[j]};
    const double v = minimize_quartic(prob).v_star;
    next[j] = std::clamp(w[j] + v, 0.0, 1.0);
  }
  return next;
}

Vector QuadraticSolver::pseudoinverse_init(const Eigen::Ref<const Vector>& target) const {
  rig_.check_target(target);
  std::call_once(pinv_once_, [this] {
    Eigen::BDCSVD<Matrix> svd(rig_.blendshapes(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    const double cutoff = sigma.size() > 0 ? 1e-10 * sigma[0] : 0.0;
    Vector inv = Vector::Zero(sigma.size());
    for (Eigen::Index a = 0; a < sigma.size(); ++a) {
      if (sigma[a] > cutoff) inv[a] = 1.0 / sigma[a];
    }
    pinv_ = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  });
  return (pinv_ * target).cwiseMax(0.0).cwiseMin(1.0);
}

const LinearBaseline& QuadraticSolver::linear_baseline() const {
  std::call_once(baseline_once_, [this] { baseline_ = std::make_unique<LinearBaseline>(rig_); });
  return *baseline_;
}

Vector QuadraticSolver::initial_point(const Eigen::Ref<const Vector>& target,
                                      const SolverConfig& config) const {
  switch (config.init) {
    case InitStrategy::kZero:
      return Vector::Zero(rig_.n_controllers());
    case InitStrategy::kPseudoinverse:
      return pseudoinverse_init(target);
    case InitStrategy::kLinear:
      return linear_baseline()
          .solve(rig_.apply_transpose(target), config.lambda, config.qp_tol, config.qp_max_iters)
          .w;
  }
  return Vector::Zero(rig_.n_controllers());
}

SolveReport QuadraticSolver::solve(const Eigen::Ref<const Vector>& target,
                                   const SolverConfig& config,
                                   const IterateObserver& observer) const {
  config.validate();
  rig_.check_target(target);
  const auto start = std::chrono::steady_clock::now();

  SolveReport report;
  Vector w = initial_point(target, config);
  if (observer) observer(0, w);
  Vector g = rig_.residual_g(w, target);
  double objective = g.squaredNorm() + config.lambda * w.sum();
  report.objective_trace.push_back(objective);

  for (int it = 1; it <= config.max_iters; ++it) {
    const SurrogateCoefficients coeffs = coefficients(w, g, config.lambda);
    w = step(w, coeffs);
    if (observer) observer(it, w);
    g = rig_.residual_g(w, target);
    const double next = g.squaredNorm() + config.lambda * w.sum();
    report.objective_trace.push_back(next);
    report.iterations = it;
    const bool settled = std::abs(objective - next) < config.epsilon;
    objective = next;
    if (settled) {
      report.converged = true;
      break;
    }
  }

  report.weights = std::move(w);
  report.wall_time = std::chrono::steady_clock::now() - start;
  return report;
}

}  // namespace rigsolve
