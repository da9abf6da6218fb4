#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "n2sid/pipeline.hpp"

namespace py = pybind11;
using namespace n2sid;

namespace {

StateSpaceModel model_from_dict(const py::dict& d) {
    const Matrix A = d["A"].cast<Matrix>();
    const Matrix C = d["C"].cast<Matrix>();
    const Index n = A.rows(), p = C.rows();
    StateSpaceModel m{A, d.contains("B") ? d["B"].cast<Matrix>() : Matrix::Zero(n, 0), C,
                      d.contains("D") ? d["D"].cast<Matrix>() : Matrix::Zero(p, 0),
                      d.contains("K") ? d["K"].cast<Matrix>() : Matrix::Zero(n, p)};
    m.validate();
    return m;
}

py::dict model_to_dict(const StateSpaceModel& m) {
    py::dict d;
    d["A"] = m.A;
    d["B"] = m.B;
    d["C"] = m.C;
    d["D"] = m.D;
    d["K"] = m.K;
    return d;
}

PipelineConfig make_config(Index s, double lambda_min, double lambda_max, int grid, const std::string& variant,
                           int order, int max_order, const std::string& split, const std::string& x0,
                           bool warm_start) {
    PipelineConfig cfg;
    cfg.s = s;
    cfg.lambda_min = lambda_min;
    cfg.lambda_max = lambda_max;
    cfg.grid = grid;
    cfg.variant = parse_variant(variant);
    cfg.order = order;
    cfg.max_order = max_order;
    cfg.split = parse_split(split);
    cfg.x0_policy = parse_x0_policy(x0);
    cfg.warm_start = warm_start;
    cfg.validate();
    return cfg;
}

py::dict report_to_dict(const PipelineReport& rep) {
    py::dict d;
    d["model"] = model_to_dict(rep.best.model);
    d["order"] = rep.best.order;
    d["variant"] = to_string(rep.best.variant);
    d["x0"] = rep.best.x0;
    d["rank_deficient"] = rep.best.rank_deficient;
    d["lambda_opt"] = rep.lambda_opt;
    d["lambda_opt_normalized"] = rep.lambda_opt_normalized;
    py::list points;
    for (const auto& pt : rep.points) {
        py::dict p;
        p["lambda"] = pt.lambda;
        p["lambda_normalized"] = pt.lambda_normalized;
        p["failed"] = pt.failed;
        p["error"] = pt.error;
        p["J"] = pt.failed ? py::object(py::none()) : py::object(py::float_(pt.J));
        p["order"] = pt.order;
        p["sigma"] = pt.sigma;
        p["iterations"] = pt.iterations;
        p["converged"] = pt.converged;
        points.append(p);
    }
    d["points"] = points;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Nuclear norm subspace identification";
    m.attr("__version__") = N2SID_VERSION;

    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def(
        "identify",
        [](const Matrix& u, const Matrix& y, Index s, double lambda_min, double lambda_max, int grid,
           const std::string& variant, int order, int max_order, const std::string& split, const std::string& x0,
           bool warm_start) {
            const auto cfg =
                make_config(s, lambda_min, lambda_max, grid, variant, order, max_order, split, x0, warm_start);
            PipelineReport rep;
            {
                py::gil_scoped_release release;
                rep = identify(IoRecord{u, y}, cfg);
            }
            return report_to_dict(rep);
        },
        py::arg("u"), py::arg("y"), py::kw_only(), py::arg("s") = 15, py::arg("lambda_min") = 0.031622776601683794,
        py::arg("lambda_max") = 1000.0, py::arg("grid") = 20, py::arg("variant") = "m1", py::arg("order") = 0,
        py::arg("max_order") = 10, py::arg("split") = "none", py::arg("x0") = "ls", py::arg("warm_start") = true,
        "Lambda search on preprocessed data (u: N x m, y: N x p). Grid bounds are lambda / N.");

    m.def(
        "identify_output_only",
        [](const Matrix& y, Index s, double lambda_min, double lambda_max, int grid, int order, int max_order) {
            const auto cfg = make_config(s, lambda_min, lambda_max, grid, "m1", order, max_order, "none", "ls", true);
            PipelineReport rep;
            {
                py::gil_scoped_release release;
                rep = identify_output_only(y, cfg);
            }
            return report_to_dict(rep);
        },
        py::arg("y"), py::kw_only(), py::arg("s") = 15, py::arg("lambda_min") = 0.031622776601683794,
        py::arg("lambda_max") = 1000.0, py::arg("grid") = 20, py::arg("order") = 0, py::arg("max_order") = 10);

    m.def(
        "simulate",
        [](const py::dict& model, const Matrix& u, std::optional<Vector> x0) {
            const auto sm = model_from_dict(model);
            return simulate(sm, u, x0.value_or(Vector::Zero(sm.n())));
        },
        py::arg("model"), py::arg("u"), py::arg("x0") = py::none());

    m.def(
        "generate_data",
        [](const py::dict& model, const Matrix& u, double noise_std, std::uint64_t seed) {
            const auto sm = model_from_dict(model);
            const auto rec = generate_data(sm, u, Vector::Zero(sm.n()), noise_std, seed);
            return py::make_tuple(rec.u, rec.y);
        },
        py::arg("model"), py::arg("u"), py::arg("noise_std") = 0.0, py::arg("seed") = 0);

    m.def("prbs_input", &prbs_input, py::arg("samples"), py::arg("inputs"), py::arg("seed"), py::arg("hold") = 1);
    m.def("vaf", &vaf, py::arg("y"), py::arg("yhat"));
    m.def("select_order", &select_order, py::arg("sigma"), py::arg("max_order"));
}
