#include "rigsolve/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "rigsolve/errors.hpp"
#include "rigsolve/io.hpp"
#include "rigsolve/metrics.hpp"
#include "rigsolve/mm_solver.hpp"
#include "rigsolve/spectral_cache.hpp"
#include "rigsolve/synth.hpp"

namespace rigsolve {

namespace {

constexpr const char* kQuadraticSolverName = "mm-lm-quadratic";
constexpr const char* kLinearSolverName = "linear-qp";

unsigned default_threads() {
  if (const char* env = std::getenv("RIGSOLVE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& text, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse(item));
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, fmt::format("empty list '{}'", text));
  return out;
}

double parse_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw Error(ErrorCode::kInvalidArgument, fmt::format("'{}' is not a number", s));
  return v;
}

struct SolveArgs {
  std::string rig;
  std::string targets;
  std::string model = "quadratic";
  std::string init = "zero";
  double lambda = 0.0;
  double eps = 1e-6;
  int max_iters = 200;
  std::string out;
  std::string report;
  unsigned threads = 1;
  bool strict = false;
};

struct SweepArgs {
  std::string rig;
  std::string targets;
  std::string lambdas = "0,2.5,5,7.5,10,20,50,100,500";
  std::string models = "linear,quadratic";
  std::string inits = "zero,pseudoinverse,linear";
  double eps = 1e-6;
  int max_iters = 200;
  std::string out;
  unsigned threads = 1;
  bool strict = false;
};

struct EvalArgs {
  std::string rig;
  std::string weights;
  std::string targets;
  std::string out;
  double threshold = kDefaultCardinalityThreshold;
};

int report_failures(const std::vector<FrameMetrics>& rows, std::ostream& err) {
  for (const auto& row : rows) {
    if (!row.error.empty()) {
      fmt::print(err, "error[E_SOLVER]: frame {} (lambda {}): {}\n", row.frame, row.lambda, row.error);
      return kExitData;
    }
  }
  return kExitOk;
}

int check_strict(const std::vector<FrameMetrics>& rows, bool strict, std::ostream& err) {
  if (!strict) return kExitOk;
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.converged; });
  if (failed == 0) return kExitOk;
  fmt::print(err, "error[E_NOT_CONVERGED]: {} of {} solves did not converge\n", failed, rows.size());
  return kExitNotConverged;
}

int run_gen(const GenSpec& spec, const std::string& out_dir, std::ostream& out) {
  const SynthData data = generate(spec);
  const std::filesystem::path dir(out_dir);
  const auto manifest = save_rig(data.rig, dir, "rig");
  save_targets(dir / "targets.json", data.targets, Coordinates::kRelative);
  save_weights(dir / "ground_truth.json", data.ground_truth,
               {"ground-truth", 0.0, "none", rig_hash(data.rig)});
  fmt::print(out, "wrote {} ({} vertices, {} controllers, {} frames)\n", manifest.string(),
             data.rig.n_vertices(), data.rig.n_controllers(), data.targets.size());
  return kExitOk;
}

int run_solve(const SolveArgs& args, std::ostream& out, std::ostream& err) {
  const Rig rig = load_rig(args.rig);
  const std::vector<Vector> targets = load_targets(args.targets, rig);
  const QuadraticCache cache = build_cache(rig);
  const QuadraticSolver solver(rig, cache);

  SweepOptions options;
  options.lambdas = {args.lambda};
  options.models = {parse_model(args.model)};
  options.inits = {parse_init(args.init)};
  options.solver.epsilon = args.eps;
  options.solver.max_iters = args.max_iters;
  options.threads = args.threads;
  const auto rows = run_sweep(solver, targets, options);
  if (const int code = report_failures(rows, err); code != kExitOk) return code;

  std::vector<Vector> weights;
  weights.reserve(rows.size());
  for (const auto& row : rows) weights.push_back(row.weights);
  const bool linear = options.models.front() == Model::kLinear;
  save_weights(args.out, weights,
               {linear ? kLinearSolverName : kQuadraticSolverName, args.lambda,
                linear ? "none" : args.init, rig_hash(rig)});
  if (!args.report.empty()) write_metrics_csv(args.report, rows);

  const auto summary = summarize(rows);
  fmt::print(out, "solved {} frames: mean mesh error {:.6g}, mean cardinality {:.3g}, median iterations {}\n",
             rows.size(), summary.front().mean_mesh_error, summary.front().mean_cardinality,
             summary.front().median_iterations);
  return check_strict(rows, args.strict, err);
}

int run_sweep_cmd(const SweepArgs& args, std::ostream& out, std::ostream& err) {
  const Rig rig = load_rig(args.rig);
  const std::vector<Vector> targets = load_targets(args.targets, rig);
  const QuadraticCache cache = build_cache(rig);
  const QuadraticSolver solver(rig, cache);

  SweepOptions options;
  options.lambdas = parse_list<double>(args.lambdas, parse_real);
  options.models = parse_list<Model>(args.models, [](const std::string& s) { return parse_model(s); });
  options.inits = parse_list<InitStrategy>(args.inits, [](const std::string& s) { return parse_init(s); });
  options.solver.epsilon = args.eps;
  options.solver.max_iters = args.max_iters;
  options.threads = args.threads;
  const auto rows = run_sweep(solver, targets, options);
  write_metrics_csv(args.out, rows);

  // Mean cardinality at the default threshold and at 1e-8 / 1e-3, so the
  // threshold sensitivity is visible next to the headline numbers.
  auto mean_card = [&](const TradeoffPoint& pt, double threshold) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& row : rows) {
      if (row.lambda != pt.lambda || row.model != pt.model || row.init != pt.init || !row.error.empty()) continue;
      sum += cardinality(row.weights, threshold);
      ++count;
    }
    return count ? sum / static_cast<double>(count) : 0.0;
  };
  fmt::print(out, "{:>8} {:>10} {:>14} {:>14} {:>12} {:>10} {:>10} {:>10}\n", "lambda", "model", "init",
             "mesh_error", "cardinality", "card@1e-8", "card@1e-3", "iters");
  for (const auto& pt : summarize(rows)) {
    fmt::print(out, "{:>8} {:>10} {:>14} {:>14.6g} {:>12.4g} {:>10.4g} {:>10.4g} {:>10}\n", pt.lambda,
               to_string(pt.model), pt.init ? to_string(*pt.init) : "none", pt.mean_mesh_error,
               pt.mean_cardinality, mean_card(pt, 1e-8), mean_card(pt, 1e-3), pt.median_iterations);
  }
  if (const int code = report_failures(rows, err); code != kExitOk) return code;
  return check_strict(rows, args.strict, err);
}

int run_eval(const EvalArgs& args, std::ostream& out) {
  const Rig rig = load_rig(args.rig);
  const std::vector<Vector> targets = load_targets(args.targets, rig);
  const WeightsFile weights = load_weights(args.weights, rig);
  if (weights.frames.size() != targets.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("{} weight frames but {} target frames", weights.frames.size(),
                            targets.size()));
  }
  const auto& prov = weights.provenance;
  std::vector<FrameMetrics> rows;
  for (std::size_t f = 0; f < targets.size(); ++f) {
    const Vector& w = weights.frames[f];
    check_feasible(w);
    FrameMetrics row;
    row.frame = f;
    row.lambda = prov.lambda;
    row.model = prov.solver == kLinearSolverName ? Model::kLinear : Model::kQuadratic;
    if (row.model == Model::kQuadratic && prov.init != "none") {
      row.init = parse_init(prov.init);
    }
    row.mesh_error = mesh_error(rig, w, targets[f]);
    row.cardinality = cardinality(w, args.threshold);
    // Objective under the full rig, so externally produced weights are
    // scored against the same function regardless of their origin.
    row.objective = (rig.evaluate_full(w) - targets[f]).squaredNorm() + prov.lambda * w.sum();
    rows.push_back(std::move(row));
  }
  write_metrics_csv(args.out, rows);
  const auto summary = summarize(rows);
  fmt::print(out, "evaluated {} frames: mean mesh error {:.6g}, mean cardinality {:.3g}\n",
             rows.size(), summary.front().mean_mesh_error, summary.front().mean_cardinality);
  return kExitOk;
}

int run_inspect(const std::string& rig_path, std::ostream& out) {
  const Rig rig = load_rig(rig_path);
  const QuadraticCache cache = build_cache(rig);
  Eigen::Index coupled = 0;
  for (Eigen::Index i = 0; i < cache.n_coords; ++i) coupled += cache.row_size(i) > 0 ? 1 : 0;
  fmt::print(out, "rig: {}\n", rig_path);
  fmt::print(out, "hash: {}\n", rig_hash(rig));
  fmt::print(out, "vertices: {}\ncoordinates: {}\ncontrollers: {}\n", rig.n_vertices(),
             rig.n_coords(), rig.n_controllers());
  fmt::print(out, "corrections: order2={} order3={} order4={}\n", rig.corrections2().size(),
             rig.corrections3().size(), rig.corrections4().size());
  fmt::print(out, "pairwise-coupled controllers: {}\n", cache.involved_controllers.size());
  fmt::print(out, "coordinates with nonzero D: {}\n", coupled);
  if (cache.n_coords > 0) {
    fmt::print(out, "lambda_min: min {:.6g}\nlambda_max: max {:.6g}\n", cache.lambda_min.minCoeff(),
               cache.lambda_max.maxCoeff());
    fmt::print(out, "sigma_max: max {:.6g} mean {:.6g}\n", cache.sigma_max.maxCoeff(),
               cache.sigma_max.mean());
  }
  fmt::print(out, "s_coefficient: {:.17g}\n", cache.s_coefficient);
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inverse rig fitting for blendshape face rigs", "rigsolve"};
  app.require_subcommand(1);

  GenSpec spec = GenSpec::paper_scale();
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic rig, targets and ground-truth weights");
  gen->add_option("--n-vertices", spec.n_vertices, "Vertex count")->capture_default_str();
  gen->add_option("--m", spec.m, "Controller count")->capture_default_str();
  gen->add_option("--pairs", spec.n_pairs, "Pairwise corrections")->capture_default_str();
  gen->add_option("--triples", spec.n_triples, "Order-3 corrections")->capture_default_str();
  gen->add_option("--quads", spec.n_quads, "Order-4 corrections")->capture_default_str();
  gen->add_option("--frames", spec.n_frames, "Animation frames")->capture_default_str();
  gen->add_option("--sparsity", spec.sparsity, "Expected active fraction per frame")->capture_default_str();
  gen->add_option("--correction-scale", spec.correction_scale, "Correction norm / blendshape norm")->capture_default_str();
  gen->add_option("--noise-std", spec.noise_std, "Target noise (mesh units)")->capture_default_str();
  gen->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  gen->add_option("--block-fraction", spec.block_fraction, "Fraction of the mesh each blendshape moves")->capture_default_str();
  gen->add_option("--amplitude", spec.amplitude, "Blendshape displacement scale")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();

  SolveArgs solve_args;
  solve_args.threads = default_threads();
  auto* solve = app.add_subcommand("solve", "Fit weights to every target frame");
  solve->add_option("--rig", solve_args.rig, "Rig manifest")->required();
  solve->add_option("--targets", solve_args.targets, "Targets sidecar")->required();
  solve->add_option("--model", solve_args.model, "linear|quadratic")->capture_default_str();
  solve->add_option("--init", solve_args.init, "zero|pseudoinverse|linear")->capture_default_str();
  solve->add_option("--lambda", solve_args.lambda, "L1 weight")->capture_default_str();
  solve->add_option("--eps", solve_args.eps, "Objective change tolerance")->capture_default_str();
  solve->add_option("--max-iters", solve_args.max_iters, "Iteration cap")->capture_default_str();
  solve->add_option("--out", solve_args.out, "Weights sidecar to write")->required();
  solve->add_option("--report", solve_args.report, "Per-frame metrics CSV");
  solve->add_option("--threads", solve_args.threads, "Worker threads")->capture_default_str();
  solve->add_flag("--strict", solve_args.strict, "Exit 3 if any frame fails to converge");

  SweepArgs sweep_args;
  sweep_args.threads = default_threads();
  auto* sweep = app.add_subcommand("sweep", "Run the lambda/model/init benchmark grid");
  sweep->add_option("--rig", sweep_args.rig, "Rig manifest")->required();
  sweep->add_option("--targets", sweep_args.targets, "Targets sidecar")->required();
  sweep->add_option("--lambdas", sweep_args.lambdas, "Comma-separated lambdas")->capture_default_str();
  sweep->add_option("--models", sweep_args.models, "Comma-separated models")->capture_default_str();
  sweep->add_option("--inits", sweep_args.inits, "Comma-separated initializations")->capture_default_str();
  sweep->add_option("--eps", sweep_args.eps, "Objective change tolerance")->capture_default_str();
  sweep->add_option("--max-iters", sweep_args.max_iters, "Iteration cap")->capture_default_str();
  sweep->add_option("--out", sweep_args.out, "Metrics CSV")->required();
  sweep->add_option("--threads", sweep_args.threads, "Worker threads")->capture_default_str();
  sweep->add_flag("--strict", sweep_args.strict, "Exit 3 if any solve fails to converge");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score externally produced weights");
  eval->add_option("--rig", eval_args.rig, "Rig manifest")->required();
  eval->add_option("--weights", eval_args.weights, "Weights sidecar")->required();
  eval->add_option("--targets", eval_args.targets, "Targets sidecar")->required();
  eval->add_option("--out", eval_args.out, "Metrics CSV")->required();
  eval->add_option("--threshold", eval_args.threshold, "Cardinality threshold")->capture_default_str();

  std::string inspect_rig;
  auto* inspect = app.add_subcommand("inspect", "Print rig dimensions and spectral summary");
  inspect->add_option("--rig", inspect_rig, "Rig manifest")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    fmt::print(err, "error[E_USAGE]: {}\n", e.what());
    return kExitUsage;
  }

  try {
    if (*gen) return run_gen(spec, gen_out, out);
    if (*solve) return run_solve(solve_args, out, err);
    if (*sweep) return run_sweep_cmd(sweep_args, out, err);
    if (*eval) return run_eval(eval_args, out);
    if (*inspect) return run_inspect(inspect_rig, out);
  } catch (const Error& e) {
    const bool usage = e.code() == ErrorCode::kInvalidArgument;
    fmt::print(err, "error[{}]: {}\n", error_code_name(e.code()), e.what());
    return usage ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    fmt::print(err, "error[E_INTERNAL]: {}\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace rigsolve
