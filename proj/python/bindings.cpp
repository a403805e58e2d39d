#include <memory>
#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rigsolve/cli.hpp"
#include "rigsolve/errors.hpp"
#include "rigsolve/io.hpp"
#include "rigsolve/metrics.hpp"
#include "rigsolve/mm_solver.hpp"
#include "rigsolve/qp_solver.hpp"
#include "rigsolve/quartic.hpp"
#include "rigsolve/spectral_cache.hpp"
#include "rigsolve/synth.hpp"

namespace py = pybind11;
using namespace rigsolve;

namespace {

// QuadraticSolver keeps references to its rig and cache, so the Python-side
// solver owns both.
struct OwnedSolver {
  explicit OwnedSolver(Rig r) : rig(std::move(r)), cache(build_cache(rig)), solver(rig, cache) {}

  Rig rig;
  QuadraticCache cache;
  QuadraticSolver solver;
};

template <std::size_t K>
std::vector<Correction<K>> to_corrections(const std::vector<std::pair<std::array<int, K>, Vector>>& in) {
  std::vector<Correction<K>> out;
  out.reserve(in.size());
  for (const auto& [tuple, delta] : in) out.push_back({tuple, delta});
  return out;
}

template <std::size_t K>
std::vector<std::pair<std::array<int, K>, Vector>> from_corrections(const std::vector<Correction<K>>& in) {
  std::vector<std::pair<std::array<int, K>, Vector>> out;
  out.reserve(in.size());
  for (const auto& c : in) out.emplace_back(c.controllers, c.delta);
  return out;
}

SolverConfig make_config(double lambda, const std::string& init, double epsilon, int max_iters) {
  SolverConfig config;
  config.lambda = lambda;
  config.init = parse_init(init);
  config.epsilon = epsilon;
  config.max_iters = max_iters;
  return config;
}

py::dict report_dict(const SolveReport& r) {
  py::dict d;
  d["weights"] = r.weights;
  d["iterations"] = r.iterations;
  d["objective_trace"] = r.objective_trace;
  d["converged"] = r.converged;
  d["wall_time"] = r.wall_time.count();
  return d;
}

}  // namespace

PYBIND11_MODULE(_rigsolve, mod) {
  mod.doc() = "Sparse blendshape-weight fitting for rigs with corrective shapes";

  static py::exception<Error> error(mod, "RigsolveError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.diagnostic().c_str());
    }
  });

  py::class_<Rig>(mod, "Rig")
      .def(py::init([](Vector neutral, Matrix blendshapes,
                       const std::vector<std::pair<std::array<int, 2>, Vector>>& pairs,
                       const std::vector<std::pair<std::array<int, 3>, Vector>>& triples,
                       const std::vector<std::pair<std::array<int, 4>, Vector>>& quads) {
             return Rig(std::move(neutral), std::move(blendshapes), to_corrections(pairs), to_corrections(triples),
                        to_corrections(quads));
           }),
           py::arg("neutral"), py::arg("blendshapes"), py::arg("pairs") = py::list(),
           py::arg("triples") = py::list(), py::arg("quads") = py::list())
      .def_property_readonly("n_vertices", &Rig::n_vertices)
      .def_property_readonly("n_coords", &Rig::n_coords)
      .def_property_readonly("n_controllers", &Rig::n_controllers)
      .def_property_readonly("neutral", &Rig::neutral)
      .def_property_readonly("blendshapes", &Rig::blendshapes)
      .def_property_readonly("pairs", [](const Rig& r) { return from_corrections(r.corrections2()); })
      .def_property_readonly("triples", [](const Rig& r) { return from_corrections(r.corrections3()); })
      .def_property_readonly("quads", [](const Rig& r) { return from_corrections(r.corrections4()); })
      .def("evaluate_full", &Rig::evaluate_full, py::arg("w"))
      .def("evaluate_quadratic", &Rig::evaluate_quadratic, py::arg("w"))
      .def("evaluate_linear", &Rig::evaluate_linear, py::arg("w"))
      .def("hash", [](const Rig& r) { return rig_hash(r); });

  py::class_<QuadraticCache>(mod, "QuadraticCache")
      .def_readonly("lambda_min", &QuadraticCache::lambda_min)
      .def_readonly("lambda_max", &QuadraticCache::lambda_max)
      .def_readonly("sigma_max", &QuadraticCache::sigma_max)
      .def_readonly("s_coefficient", &QuadraticCache::s_coefficient)
      .def_readonly("involved_controllers", &QuadraticCache::involved_controllers);
  mod.def("build_cache", &build_cache, py::arg("rig"));

  py::class_<GenSpec>(mod, "GenSpec")
      .def(py::init<>())
      .def_static("paper_scale", &GenSpec::paper_scale)
      .def_readwrite("n_vertices", &GenSpec::n_vertices)
      .def_readwrite("m", &GenSpec::m)
      .def_readwrite("n_pairs", &GenSpec::n_pairs)
      .def_readwrite("n_triples", &GenSpec::n_triples)
      .def_readwrite("n_quads", &GenSpec::n_quads)
      .def_readwrite("n_frames", &GenSpec::n_frames)
      .def_readwrite("sparsity", &GenSpec::sparsity)
      .def_readwrite("correction_scale", &GenSpec::correction_scale)
      .def_readwrite("noise_std", &GenSpec::noise_std)
      .def_readwrite("seed", &GenSpec::seed)
      .def_readwrite("amplitude", &GenSpec::amplitude);

  py::class_<SynthData>(mod, "SynthData")
      .def_readonly("rig", &SynthData::rig)
      .def_readonly("ground_truth", &SynthData::ground_truth)
      .def_readonly("targets", &SynthData::targets);
  mod.def("generate", &generate, py::arg("spec"));

  py::class_<OwnedSolver>(mod, "Solver")
      .def(py::init<Rig>(), py::arg("rig"))
      .def_readonly("rig", &OwnedSolver::rig)
      .def_readonly("cache", &OwnedSolver::cache)
      .def(
          "solve",
          [](const OwnedSolver& s, const Vector& target, double lambda, const std::string& init, double epsilon,
             int max_iters) {
            SolveReport r;
            {
              py::gil_scoped_release release;
              r = s.solver.solve(target, make_config(lambda, init, epsilon, max_iters));
            }
            return report_dict(r);
          },
          py::arg("target"), py::arg("lam") = 0.0, py::arg("init") = "zero", py::arg("epsilon") = 1e-6,
          py::arg("max_iters") = 200)
      .def(
          "solve_linear",
          [](const OwnedSolver& s, const Vector& target, double lambda) {
            QpResult r;
            {
              py::gil_scoped_release release;
              r = s.solver.linear_baseline().solve(s.rig.apply_transpose(target), lambda);
            }
            py::dict d;
            d["weights"] = r.w;
            d["iterations"] = r.iterations;
            d["converged"] = r.converged;
            return d;
          },
          py::arg("target"), py::arg("lam") = 0.0)
      .def(
          "objective",
          [](const OwnedSolver& s, const Vector& w, const Vector& target, double lambda) {
            return objective_quadratic(s.rig, s.cache, w, target, lambda);
          },
          py::arg("w"), py::arg("target"), py::arg("lam") = 0.0);

  mod.def(
      "solve_qp",
      [](Matrix B, Vector b_hat, double lambda, double tol, int max_iters) {
        QpProblem prob{std::move(B), std::move(b_hat), lambda, tol, max_iters};
        const QpResult r = solve_qp(prob);
        py::dict d;
        d["weights"] = r.w;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("B"), py::arg("b_hat"), py::arg("lam") = 0.0, py::arg("tol") = 1e-8, py::arg("max_iters") = 5000);

  mod.def(
      "minimize_quartic",
      [](double p, double q, double r, double s, double lo, double hi) {
        const QuarticMinimum m = minimize_quartic({p, q, r, s, lo, hi});
        return py::make_tuple(m.v_star, m.value);
      },
      py::arg("p"), py::arg("q"), py::arg("r"), py::arg("s"), py::arg("lo"), py::arg("hi"));

  mod.def("mesh_error", &mesh_error, py::arg("rig"), py::arg("w"), py::arg("target"));
  mod.def("cardinality", &cardinality, py::arg("w"), py::arg("threshold") = 1e-4);

  mod.def(
      "save_rig", [](const Rig& rig, const std::filesystem::path& dir) { return save_rig(rig, dir); },
      py::arg("rig"), py::arg("dir"));
  mod.def("load_rig", &load_rig, py::arg("manifest"));
  mod.def(
      "save_targets",
      [](const std::filesystem::path& p, const std::vector<Vector>& frames) { save_targets(p, frames); },
      py::arg("path"), py::arg("frames"));
  mod.def("load_targets", &load_targets, py::arg("path"), py::arg("rig"));
  mod.def(
      "load_weights",
      [](const std::filesystem::path& p) {
        const WeightsFile w = load_weights(p);
        py::dict prov;
        prov["solver"] = w.provenance.solver;
        prov["lambda"] = w.provenance.lambda;
        prov["init"] = w.provenance.init;
        prov["rig_hash"] = w.provenance.rig_hash;
        return py::make_tuple(w.frames, prov);
      },
      py::arg("path"));

  mod.def(
      "cli_main",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli_main(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
