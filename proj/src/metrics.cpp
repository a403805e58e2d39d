#include "rigsolve/metrics.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "rigsolve/errors.hpp"
#include "rigsolve/parallel.hpp"

namespace rigsolve {

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

struct Cell {
  std::size_t lambda_index;
  Model model;
  std::optional<InitStrategy> init;
  std::size_t frame;
};

double parse_double(std::string_view field, std::size_t line) {
  double value = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kSchema,
                fmt::format("metrics csv line {}: '{}' is not a number", line, field));
  }
  return value;
}

template <typename Int>
Int parse_int(std::string_view field, std::size_t line) {
  Int value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kSchema,
                fmt::format("metrics csv line {}: '{}' is not an integer", line, field));
  }
  return value;
}

}  // namespace

std::string_view to_string(Model model) {
  return model == Model::kLinear ? "linear" : "quadratic";
}

Model parse_model(std::string_view name) {
  if (name == "linear") return Model::kLinear;
  if (name == "quadratic") return Model::kQuadratic;
  throw Error(ErrorCode::kInvalidArgument,
              fmt::format("unknown model '{}' (expected linear|quadratic)", name));
}

double mesh_error(const Rig& rig, const Eigen::Ref<const Vector>& w,
                  const Eigen::Ref<const Vector>& target) {
  rig.check_target(target);
  return (rig.evaluate_full(w) - target).norm() / static_cast<double>(rig.n_vertices());
}

int cardinality(const Eigen::Ref<const Vector>& w, double threshold) {
  return static_cast<int>((w.array() > threshold).count());
}

bool FrameMetrics::operator==(const FrameMetrics& other) const {
  return frame == other.frame && same_bits(lambda, other.lambda) && model == other.model &&
         init == other.init && same_bits(mesh_error, other.mesh_error) &&
         cardinality == other.cardinality && iterations == other.iterations &&
         same_bits(wall_ms, other.wall_ms) && same_bits(objective, other.objective);
}

std::vector<FrameMetrics> run_sweep(const QuadraticSolver& solver,
                                    const std::vector<Vector>& targets,
                                    const SweepOptions& options) {
  const Rig& rig = solver.rig();
  options.solver.validate();
  for (double lambda : options.lambdas) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("lambda must be >= 0, got {}", lambda));
    }
  }

  std::vector<Cell> cells;
  for (std::size_t l = 0; l < options.lambdas.size(); ++l) {
    for (Model model : options.models) {
      if (model == Model::kLinear) {
        for (std::size_t f = 0; f < targets.size(); ++f) cells.push_back({l, model, std::nullopt, f});
      } else {
        for (InitStrategy init : options.inits) {
          for (std::size_t f = 0; f < targets.size(); ++f) cells.push_back({l, model, init, f});
        }
      }
    }
  }

  // Shared lazily-built state is forced up front so per-cell timings measure
  // the solve only.
  const bool needs_baseline = std::any_of(cells.begin(), cells.end(), [](const Cell& c) {
    return c.model == Model::kLinear || c.init == InitStrategy::kLinear;
  });
  if (needs_baseline) solver.linear_baseline();
  if (!targets.empty() && std::find(options.inits.begin(), options.inits.end(),
                                    InitStrategy::kPseudoinverse) != options.inits.end()) {
    solver.pseudoinverse_init(targets.front());
  }

  std::vector<FrameMetrics> rows(cells.size());
  parallel_for(cells.size(), options.threads, [&](std::size_t index) {
    const Cell& cell = cells[index];
    FrameMetrics& row = rows[index];
    row.frame = cell.frame;
    row.lambda = options.lambdas[cell.lambda_index];
    row.model = cell.model;
    row.init = cell.init;
    const Vector& target = targets[cell.frame];
    auto watch = [&row](const Vector& w) {
      if (!((w.array() >= 0.0).all() && (w.array() <= 1.0).all())) ++row.infeasible_iterates;
    };
    try {
      Vector w;
      if (cell.model == Model::kLinear) {
        const auto start = std::chrono::steady_clock::now();
        QpResult qp = solver.linear_baseline().solve(
            rig.apply_transpose(target), row.lambda, options.solver.qp_tol,
            options.solver.qp_max_iters, watch);
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        w = std::move(qp.w);
        row.iterations = qp.iterations;
        row.converged = qp.converged;
        row.objective = (rig.evaluate_linear(w) - target).squaredNorm() + row.lambda * w.sum();
        if (options.keep_traces) row.objective_trace = std::move(qp.objective_trace);
      } else {
        SolverConfig config = options.solver;
        config.lambda = row.lambda;
        config.init = *cell.init;
        SolveReport report = solver.solve(target, config, [&](int, const Vector& w) { watch(w); });
        row.wall_ms = std::chrono::duration<double, std::milli>(report.wall_time).count();
        w = std::move(report.weights);
        row.iterations = report.iterations;
        row.converged = report.converged;
        row.objective = report.objective_trace.back();
        if (options.keep_traces) row.objective_trace = std::move(report.objective_trace);
      }
      check_feasible(w);
      row.mesh_error = mesh_error(rig, w, target);
      row.cardinality = cardinality(w, options.cardinality_threshold);
      row.weights = std::move(w);
    } catch (const std::exception& e) {
      row.error = e.what();
      row.mesh_error = std::nan("");
      row.objective = std::nan("");
    }
  });
  return rows;
}

std::vector<FrameMetrics> run_sweep(const Rig& rig, const QuadraticCache& cache,
                                    const std::vector<Vector>& targets,
                                    const SweepOptions& options) {
  const QuadraticSolver solver(rig, cache);
  return run_sweep(solver, targets, options);
}

std::vector<TradeoffPoint> summarize(const std::vector<FrameMetrics>& rows) {
  using Key = std::tuple<double, int, int>;
  std::map<Key, std::vector<const FrameMetrics*>> groups;
  std::vector<Key> order;
  for (const auto& row : rows) {
    const Key key{row.lambda, static_cast<int>(row.model), row.init ? static_cast<int>(*row.init) : -1};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&row);
  }
  std::vector<TradeoffPoint> points;
  for (const Key& key : order) {
    const auto& members = groups[key];
    TradeoffPoint pt;
    pt.lambda = members.front()->lambda;
    pt.model = members.front()->model;
    pt.init = members.front()->init;
    std::vector<double> iters;
    for (const FrameMetrics* row : members) {
      if (!row->error.empty()) continue;
      ++pt.frames;
      pt.mean_mesh_error += row->mesh_error;
      pt.mean_cardinality += row->cardinality;
      pt.mean_wall_ms += row->wall_ms;
      iters.push_back(row->iterations);
    }
    if (pt.frames > 0) {
      const double n = static_cast<double>(pt.frames);
      pt.mean_mesh_error /= n;
      pt.mean_cardinality /= n;
      pt.mean_wall_ms /= n;
      std::sort(iters.begin(), iters.end());
      const std::size_t mid = iters.size() / 2;
      pt.median_iterations = iters.size() % 2 ? iters[mid] : 0.5 * (iters[mid - 1] + iters[mid]);
    }
    points.push_back(pt);
  }
  return points;
}

void write_metrics_csv(std::ostream& out, const std::vector<FrameMetrics>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& row : rows) {
    out << fmt::format("{},{:.17g},{},{},{:.17g},{},{},{:.17g},{:.17g}\n", row.frame, row.lambda,
                       to_string(row.model), row.init ? to_string(*row.init) : "none",
                       row.mesh_error, row.cardinality, row.iterations, row.wall_ms,
                       row.objective);
  }
}

void write_metrics_csv(const std::string& path, const std::vector<FrameMetrics>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot open '{}' for writing", path));
  write_metrics_csv(out, rows);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("failed writing '{}'", path));
}

std::vector<FrameMetrics> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw Error(ErrorCode::kSchema, "metrics csv: missing or unexpected header");
  }
  std::vector<FrameMetrics> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t pos = rest.find(','); pos != std::string_view::npos; pos = rest.find(',')) {
      fields.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 9) {
      throw Error(ErrorCode::kSchema,
                  fmt::format("metrics csv line {}: {} fields, expected 9", line_no, fields.size()));
    }
    FrameMetrics row;
    row.frame = parse_int<std::size_t>(fields[0], line_no);
    row.lambda = parse_double(fields[1], line_no);
    row.model = parse_model(fields[2]);
    if (fields[3] != "none") row.init = parse_init(fields[3]);
    row.mesh_error = parse_double(fields[4], line_no);
    row.cardinality = parse_int<int>(fields[5], line_no);
    row.iterations = parse_int<int>(fields[6], line_no);
    row.wall_ms = parse_double(fields[7], line_no);
    row.objective = parse_double(fields[8], line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<FrameMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileNotFound, fmt::format("metrics csv '{}' not found", path));
  return read_metrics_csv(in);
}

}  // namespace rigsolve
