#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rigsolve/mm_solver.hpp"
#include "rigsolve/rig.hpp"

namespace rigsolve {

enum class Model { kLinear, kQuadratic };

std::string_view to_string(Model model);
Model parse_model(std::string_view name);

inline constexpr double kDefaultCardinalityThreshold = 1e-4;

/// ||evaluate_full(w) - target|| / n_vertices. Uses every corrective level
/// regardless of which approximation produced w. The divisor is the vertex
/// count, not sqrt(3n), even though the quantity is usually called RMSE.
double mesh_error(const Rig& rig, const Eigen::Ref<const Vector>& w,
                  const Eigen::Ref<const Vector>& target);

/// Number of weights strictly above `threshold`.
int cardinality(const Eigen::Ref<const Vector>& w,
                double threshold = kDefaultCardinalityThreshold);

struct FrameMetrics {
  std::size_t frame = 0;
  double lambda = 0.0;
  Model model = Model::kLinear;
  /// Empty for the linear model, which has no initialization choice.
  std::optional<InitStrategy> init;
  double mesh_error = 0.0;
  int cardinality = 0;
  int iterations = 0;
  double wall_ms = 0.0;
  /// Final value of the objective the solver minimized.
  double objective = 0.0;

  // In-memory diagnostics; not part of the CSV schema.
  bool converged = false;
  std::string error;
  Vector weights;
  std::vector<double> objective_trace;
  /// Iterates observed outside [0, 1].
  int infeasible_iterates = 0;

  bool operator==(const FrameMetrics& other) const;
};

struct SweepOptions {
  std::vector<double> lambdas{0.0, 2.5, 5.0, 7.5, 10.0, 20.0, 50.0, 100.0, 500.0};
  std::vector<Model> models{Model::kLinear, Model::kQuadratic};
  std::vector<InitStrategy> inits{InitStrategy::kZero, InitStrategy::kPseudoinverse,
                                  InitStrategy::kLinear};
  /// epsilon, max_iters and the qp settings; lambda and init are overridden per cell.
  SolverConfig solver;
  double cardinality_threshold = kDefaultCardinalityThreshold;
  unsigned threads = 1;
  bool keep_traces = false;
};

/// Every (lambda, model, init, frame) cell, ordered by lambda, then model,
/// then init, then frame. The linear model contributes one row per
/// (lambda, frame). Solver failures are recorded in FrameMetrics::error.
std::vector<FrameMetrics> run_sweep(const QuadraticSolver& solver,
                                    const std::vector<Vector>& targets,
                                    const SweepOptions& options);

std::vector<FrameMetrics> run_sweep(const Rig& rig, const QuadraticCache& cache,
                                    const std::vector<Vector>& targets,
                                    const SweepOptions& options);

/// Frame averages for one (lambda, model, init) curve point.
struct TradeoffPoint {
  double lambda = 0.0;
  Model model = Model::kLinear;
  std::optional<InitStrategy> init;
  std::size_t frames = 0;
  double mean_mesh_error = 0.0;
  double mean_cardinality = 0.0;
  double median_iterations = 0.0;
  double mean_wall_ms = 0.0;
};

std::vector<TradeoffPoint> summarize(const std::vector<FrameMetrics>& rows);

inline constexpr std::string_view kCsvHeader =
    "frame,lambda,model,init,mesh_error,cardinality,iterations,wall_ms,objective";

/// UTF-8, LF line endings, reals printed with 17 significant digits.
void write_metrics_csv(std::ostream& out, const std::vector<FrameMetrics>& rows);
void write_metrics_csv(const std::string& path, const std::vector<FrameMetrics>& rows);
std::vector<FrameMetrics> read_metrics_csv(std::istream& in);
std::vector<FrameMetrics> read_metrics_csv(const std::string& path);

}  // namespace rigsolve
