#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mra/driver.hpp"
#include "mra/executor.hpp"
#include "mra/partition.hpp"

namespace py = pybind11;
using namespace mra;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointList to_points(const Array& a, const char* name) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw py::value_error(std::string(name) + " must have shape (n, 2)");
  PointList out(static_cast<std::size_t>(a.shape(0)));
  const auto v = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[static_cast<std::size_t>(i)] = {v(i, 0), v(i, 1)};
  return out;
}

std::vector<double> to_values(const Array& a, std::size_t n) {
  if (a.ndim() != 1 || static_cast<std::size_t>(a.shape(0)) != n)
    throw py::value_error("values must be a vector with one entry per point");
  return {a.data(), a.data() + n};
}

struct Setup {
  PointList points;
  std::vector<double> y;
  PartitionTree tree;
  ExecutorOptions options;
};

Setup prepare(const Array& points, const Array& values, int partitions, int knots, std::optional<int> levels,
              int workers, int lanes, bool dynamic) {
  PointList pts = to_points(points, "points");
  std::vector<double> y = to_values(values, pts.size());
  TreeOptions opt;
  opt.partitions = partitions;
  opt.knots = knots;
  opt.levels = levels;
  PartitionTree tree = PartitionTree::build(pts, opt);
  ExecutorOptions eo;
  eo.workers = workers;
  eo.lanes = lanes;
  eo.dynamic = dynamic;
  return {std::move(pts), std::move(y), std::move(tree), eo};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<StructuralError>(m, "StructuralError", base.ptr());
  py::register_exception<TransportError>(m, "TransportError", base.ptr());

  m.def(
      "loglik",
      [](const Array& points, const Array& values, double alpha, double beta, double tau, int partitions,
         int knots, std::optional<int> levels, int workers, int lanes, bool dynamic) {
        Setup s = prepare(points, values, partitions, knots, levels, workers, lanes, dynamic);
        py::gil_scoped_release release;
        return run_parallel(s.tree, {alpha, beta, tau}, s.y, nullptr, s.options).loglik;
      },
      py::arg("points"), py::arg("values"), py::arg("alpha"), py::arg("beta"), py::arg("tau"),
      py::arg("partitions") = 2, py::arg("knots") = 16, py::arg("levels") = py::none(), py::arg("workers") = 1,
      py::arg("lanes") = 1, py::arg("dynamic") = false,
      "Log-likelihood of `values` observed at `points` (shape (n, 2)).");

  m.def(
      "predict",
      [](const Array& points, const Array& values, const Array& queries, double alpha, double beta, double tau,
         int partitions, int knots, std::optional<int> levels, int workers, int lanes, bool dynamic) {
        Setup s = prepare(points, values, partitions, knots, levels, workers, lanes, dynamic);
        const PointList q = to_points(queries, "queries");
        ExecutionResult r;
        {
          py::gil_scoped_release release;
          r = run_parallel(s.tree, {alpha, beta, tau}, s.y, &q, s.options);
        }
        const auto n = static_cast<py::ssize_t>(q.size());
        return py::make_tuple(py::array_t<double>(n, r.combined.mean.data()),
                              py::array_t<double>(n, r.combined.variance.data()));
      },
      py::arg("points"), py::arg("values"), py::arg("queries"), py::arg("alpha"), py::arg("beta"),
      py::arg("tau"), py::arg("partitions") = 2, py::arg("knots") = 16, py::arg("levels") = py::none(),
      py::arg("workers") = 1, py::arg("lanes") = 1, py::arg("dynamic") = false,
      "Posterior means and variances at `queries`; NaN outside the domain.");

  m.def("estimate_memory_gib", &estimate_memory_gib, py::arg("partitions"), py::arg("levels"),
        py::arg("knots"), "Upper bound on resident ATilde memory in GiB.");
  m.def("default_levels", &default_levels, py::arg("n"), py::arg("partitions"), py::arg("knots"));
  m.def(
      "knot_count", [](int r) { return knot_grid(r).count(); }, py::arg("r"),
      "Knots actually placed for a budget of r.");

  m.def(
      "run_config",
      [](const std::string& path, int workers, int lanes, const std::string& transport,
         const std::string& output_dir) {
        RunOptions o;
        o.workers = workers;
        o.lanes = lanes;
        o.transport = parse_transport_kind(transport);
        o.output_dir = output_dir;
        std::ostringstream out, err;
        RunReport report;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run(path, o, out, err, &report);
        }
        py::dict d;
        d["exit_code"] = code;
        d["stdout"] = out.str();
        d["stderr"] = err.str();
        d["loglik"] = report.loglik;
        d["predictions"] = report.predictions;
        return d;
      },
      py::arg("path"), py::arg("workers") = 1, py::arg("lanes") = 1, py::arg("transport") = "thread",
      py::arg("output_dir") = ".", "Runs a configuration file as the command-line tool does.");
}
