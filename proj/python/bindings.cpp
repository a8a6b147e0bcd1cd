#include <optional>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mvdelay/assignment.hpp"
#include "mvdelay/experiments.hpp"
#include "mvdelay/metrics.hpp"
#include "mvdelay/model.hpp"
#include "mvdelay/rates.hpp"
#include "mvdelay/version.hpp"

namespace py = pybind11;
using namespace mvdelay;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

PathNorm norm_from(const std::string& name) {
  if (name == "sup") return PathNorm::sup;
  if (name == "gamma") return PathNorm::gamma_r0;
  throw Error("unknown norm '" + name + "' (expected 'sup' or 'gamma')");
}

// Rows are the m+1 grid points, columns the coordinates; 1-D input is d = 1.
Segment segment_from(const Array& a) {
  if (a.ndim() != 1 && a.ndim() != 2) throw Error("segment must be a 1-D or 2-D array");
  const std::size_t dim = a.ndim() == 2 ? static_cast<std::size_t>(a.shape(1)) : 1;
  return Segment(std::vector<double>(a.data(), a.data() + a.size()), dim);
}

std::vector<double> flat(const Array& a) { return {a.data(), a.data() + a.size()}; }

}  // namespace

PYBIND11_MODULE(_mvdelay, m) {
  m.attr("__version__") = kVersion;
  py::register_exception<Error>(m, "MvdelayError", PyExc_RuntimeError);

  m.def(
      "run_command",
      [](const std::string& name, const std::string& config, const std::string& out_dir,
         std::optional<std::uint64_t> seed, std::size_t threads, bool verbose) {
        RunContext ctx{out_dir, seed, threads, verbose};
        const auto cfg = nlohmann::json::parse(config);
        CommandResult result;
        {
          py::gil_scoped_release release;
          result = run_command(name, cfg, ctx);
        }
        return py::make_tuple(result.exit_code, result.summary.dump());
      },
      py::arg("name"), py::arg("config"), py::arg("out_dir"), py::arg("seed") = py::none(), py::arg("threads") = 1,
      py::arg("verbose") = false);

  py::class_<RateFunction>(m, "RateFunction")
      .def(py::init(&RateFunction::piecewise), py::arg("K1"), py::arg("K2"), py::arg("R"), py::arg("Ksigma"),
           py::arg("beta"))
      .def_readonly("K1", &RateFunction::K1)
      .def_readonly("K2", &RateFunction::K2)
      .def_readonly("R", &RateFunction::R)
      .def_readonly("Ksigma", &RateFunction::Ksigma)
      .def_readonly("beta", &RateFunction::beta)
      .def("gamma", [](const RateFunction& rf, double r) { return eval_gamma(rf, r); })
      .def("Psi", [](const RateFunction& rf, double s) { return eval_Psi(rf, s); })
      .def("f", [](const RateFunction& rf, double r) { return eval_f(rf, r); })
      .def("f_prime", [](const RateFunction& rf, double u) { return eval_f_prime(rf, u); })
      .def("delta", [](const RateFunction& rf) { return compute_delta(rf).delta; })
      .def("ell_epsilon", [](const RateFunction& rf, double eps) { return ell_epsilon(rf, eps); })
      .def("rates", [](const RateFunction& rf, double Kb, double r0) { return theorem33_rates(rf, Kb, r0).to_json().dump(); },
           py::arg("Kb"), py::arg("r0"));

  m.def(
      "path_norm", [](const Array& seg, const std::string& norm) { return path_norm(segment_from(seg), norm_from(norm)); },
      py::arg("segment"), py::arg("norm") = "gamma");
  m.def(
      "path_distance",
      [](const Array& a, const Array& b, const std::string& norm) {
        const auto sa = segment_from(a), sb = segment_from(b);
        return path_distance(sa.view(), sb.view(), norm_from(norm));
      },
      py::arg("a"), py::arg("b"), py::arg("norm") = "gamma");
  m.def(
      "wasserstein_1d",
      [](const Array& xs, const Array& ys, int order) { return sorted_1d_wasserstein(flat(xs), flat(ys), order); },
      py::arg("xs"), py::arg("ys"), py::arg("order") = 1);
  m.def("solve_assignment", [](const Array& cost) {
    if (cost.ndim() != 2 || cost.shape(0) != cost.shape(1)) throw Error("cost must be a square matrix");
    const auto r = solve_assignment(flat(cost), static_cast<std::size_t>(cost.shape(0)));
    return py::make_tuple(r.row_to_col, r.total_cost);
  });
}
