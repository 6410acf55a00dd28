#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lqtp/cell.hpp"
#include "lqtp/error.hpp"
#include "lqtp/model.hpp"
#include "lqtp/riccati.hpp"
#include "lqtp/sde.hpp"
#include "lqtp/stability.hpp"
#include "lqtp/static_opt.hpp"
#include "lqtp/turnpike.hpp"

namespace py = pybind11;
using namespace lqtp;

namespace {

std::vector<double> means(const std::vector<Estimate>& es) {
  std::vector<double> out;
  for (const auto& e : es) out.push_back(e.mean);
  return out;
}

std::vector<double> errors(const std::vector<Estimate>& es) {
  std::vector<double> out;
  for (const auto& e : es) out.push_back(e.se);
  return out;
}

}  // namespace

PYBIND11_MODULE(_lqtp, m) {
  m.doc() = "Stochastic LQ control: Riccati solvers, cell problem, turnpike certificates";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<FieldError>(m, "FieldError", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());

  py::class_<LQModel>(m, "LQModel")
      .def(py::init<>())
      .def_static("zeros", &LQModel::zeros, py::arg("n"), py::arg("m"))
      .def_readwrite("A", &LQModel::A)
      .def_readwrite("B", &LQModel::B)
      .def_readwrite("C", &LQModel::C)
      .def_readwrite("D", &LQModel::D)
      .def_readwrite("b", &LQModel::b)
      .def_readwrite("sigma", &LQModel::sigma)
      .def_readwrite("Q", &LQModel::Q)
      .def_readwrite("S", &LQModel::S)
      .def_readwrite("R", &LQModel::R)
      .def_readwrite("q", &LQModel::q)
      .def_readwrite("r", &LQModel::r)
      .def_property_readonly("n", &LQModel::n)
      .def_property_readonly("m", &LQModel::m)
      .def("to_json", [](const LQModel& model) { return serialize_model(model); });

  m.def("load_model", &load_model, py::arg("text"));
  m.def("load_model_file", &load_model_file, py::arg("path"));

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("h1_ok", &ValidationReport::h1_ok)
      .def_readonly("dimension_ok", &ValidationReport::dimension_ok)
      .def_readonly("min_eig_Q", &ValidationReport::min_eig_Q)
      .def_readonly("min_eig_R", &ValidationReport::min_eig_R)
      .def_readonly("min_eig_schur", &ValidationReport::min_eig_schur)
      .def_readonly("messages", &ValidationReport::messages);
  m.def("validate_model", &validate_model, py::arg("model"), py::arg("tol") = 1e-12);

  py::class_<StabilityCert>(m, "StabilityCert")
      .def_readonly("stable", &StabilityCert::stable)
      .def_readonly("spectral_abscissa", &StabilityCert::spectral_abscissa)
      .def_readonly("lyapunov_P", &StabilityCert::lyapunov_P)
      .def_readonly("min_eig_P", &StabilityCert::min_eig_P);
  m.def("is_stabilizer", &is_stabilizer, py::arg("model"), py::arg("Theta"));
  m.def(
      "find_stabilizer", [](const LQModel& model) { return find_stabilizer(model); },
      py::arg("model"));

  py::class_<AreSolution>(m, "AreSolution")
      .def_readonly("P", &AreSolution::P)
      .def_readonly("Theta_bar", &AreSolution::Theta_bar)
      .def_readonly("newton_iters", &AreSolution::newton_iters)
      .def_readonly("final_residual", &AreSolution::final_residual)
      .def_readonly("residual_history", &AreSolution::residual_history);
  m.def(
      "solve_are", [](const LQModel& model) { return solve_are(model); }, py::arg("model"));
  m.def(
      "solve_are_stabilizing",
      [](const LQModel& model, const Mat& Theta0) { return solve_are_stabilizing(model, Theta0); },
      py::arg("model"), py::arg("Theta0"));
  m.def("are_residual", &are_residual, py::arg("model"), py::arg("P"));

  py::class_<FiniteHorizonSolution>(m, "FiniteHorizonSolution")
      .def_property_readonly("T", &FiniteHorizonSolution::T)
      .def_property_readonly("nodes", &FiniteHorizonSolution::nodes)
      .def_readonly("P", &FiniteHorizonSolution::P)
      .def_readonly("p", &FiniteHorizonSolution::p)
      .def_readonly("p0", &FiniteHorizonSolution::p0)
      .def_readonly("Theta", &FiniteHorizonSolution::Theta)
      .def_readonly("theta", &FiniteHorizonSolution::theta)
      .def_readonly("halving_error", &FiniteHorizonSolution::halving_error)
      .def("P_at", &FiniteHorizonSolution::P_at)
      .def("p_at", &FiniteHorizonSolution::p_at)
      .def("Theta_at", &FiniteHorizonSolution::Theta_at)
      .def("theta_at", &FiniteHorizonSolution::theta_at)
      .def("to_csv", [](const FiniteHorizonSolution& s) { return finite_horizon_csv(s); });
  m.def(
      "solve_finite_horizon",
      [](const LQModel& model, double T, double h) { return solve_finite_horizon(model, T, h); },
      py::arg("model"), py::arg("T"), py::arg("h"));
  m.def("value_finite", &value_finite, py::arg("solution"), py::arg("t"), py::arg("x"));

  py::class_<CellSolution>(m, "CellSolution")
      .def_readonly("P", &CellSolution::P)
      .def_readonly("p", &CellSolution::p)
      .def_readonly("c0", &CellSolution::c0)
      .def_readonly("Theta_bar", &CellSolution::Theta_bar)
      .def_readonly("theta_bar", &CellSolution::theta_bar)
      .def_readonly("stabilizing", &CellSolution::stabilizing)
      .def("value", &CellSolution::value)
      .def("control", &CellSolution::control);
  m.def("solve_cell", &solve_cell, py::arg("model"), py::arg("are"));
  m.def(
      "cell_residual",
      [](const LQModel& model, const CellSolution& cell, const std::vector<Vec>& xs) {
        return cell_residual(model, cell, xs);
      },
      py::arg("model"), py::arg("cell"), py::arg("xs"));
  m.def("enumerate_cell_solutions_special", &enumerate_cell_solutions_special,
        py::arg("A"), py::arg("Q"), py::arg("b"), py::arg("sigma"), py::arg("q"),
        py::arg("r"));

  py::class_<StaticOptimum>(m, "StaticOptimum")
      .def_readonly("x_star", &StaticOptimum::x_star)
      .def_readonly("u_star", &StaticOptimum::u_star)
      .def_readonly("y_star", &StaticOptimum::y_star)
      .def_readonly("L_value", &StaticOptimum::L_value);
  m.def("solve_static_kkt", &solve_static_kkt, py::arg("model"), py::arg("P"));
  m.def("static_from_cell", &static_from_cell, py::arg("model"), py::arg("cell"));

  py::class_<DecayFit>(m, "DecayFit")
      .def_readonly("K", &DecayFit::K)
      .def_readonly("lam", &DecayFit::lambda)
      .def_readonly("r_squared", &DecayFit::r_squared)
      .def_property_readonly("window",
                             [](const DecayFit& f) { return py::make_tuple(f.window.lo, f.window.hi); });
  m.def(
      "fit_exponential",
      [](const std::vector<double>& ts, const std::vector<double>& values) {
        return fit_exponential(ts, values);
      },
      py::arg("ts"), py::arg("values"));
  m.def(
      "coefficient_certificate",
      [](const FiniteHorizonSolution& fh, const CellSolution& cell) {
        return coefficient_certificate_json(certify_coefficient_convergence(fh, cell));
      },
      py::arg("fh"), py::arg("cell"), "Coefficient turnpike certificate as a JSON document.");

  m.def(
      "simulate",
      [](const LQModel& model, const FiniteHorizonSolution& fh, const CellSolution& cell,
         double dt, std::size_t n_paths, std::uint64_t seed, const Vec& x0, const Vec& xbar0,
         std::size_t stride) {
        SimConfig cfg;
        cfg.T = fh.T();
        cfg.dt = dt;
        cfg.n_paths = n_paths;
        cfg.seed = seed;
        cfg.x0 = x0;
        cfg.xbar0 = xbar0;
        cfg.record_stride = stride;
        TrajectoryBundle bundle;
        {
          py::gil_scoped_release release;
          bundle = simulate_coupled_ensemble(model, fh, cell, cfg);
        }
        const auto dev = deviation_curve(bundle);
        py::dict out;
        out["t"] = bundle.times;
        out["deviation"] = means(dev);
        out["deviation_se"] = errors(dev);
        out["m2_xbar"] = means(moment_curve(bundle, Process::kCell, 2));
        const Estimate J = cost_along(bundle, Branch::kFinite, cfg.T);
        const Estimate Jb = cost_along(bundle, Branch::kCell, cfg.T);
        out["J_T"] = py::make_tuple(J.mean, J.se);
        out["J_bar"] = py::make_tuple(Jb.mean, Jb.se);
        out["csv"] = bundle_csv(bundle);
        return out;
      },
      py::arg("model"), py::arg("fh"), py::arg("cell"), py::arg("dt"), py::arg("n_paths"),
      py::arg("seed"), py::arg("x0"), py::arg("xbar0"), py::arg("stride") = 1,
      "Coupled Monte Carlo summary: deviation curve, moments, costs and bundle CSV.");

  m.def(
      "wasserstein2",
      [](const Mat& a, const Mat& b, int n_slices, std::uint64_t seed) {
        return wasserstein2_estimate({a}, {b}, n_slices, seed);
      },
      py::arg("a"), py::arg("b"), py::arg("n_slices") = 64, py::arg("seed") = 0,
      "Sliced W2 between samples stored one per column.");
}
