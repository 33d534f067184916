#include <optional>
#include <string>
#include <utility>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nxocp/errors.hpp"
#include "nxocp/study.hpp"

namespace py = pybind11;
using namespace nxocp;

namespace {

Eigen::MatrixXd vertex_array(const Mesh& mesh) {
    Eigen::MatrixXd out(mesh.num_vertices(), 2);
    for (int v = 0; v < mesh.num_vertices(); ++v) out.row(v) = mesh.vertex(v).transpose();
    return out;
}

Eigen::MatrixXi triangle_array(const Mesh& mesh) {
    Eigen::MatrixXi out(mesh.num_triangles(), 3);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        for (int i = 0; i < 3; ++i) out(t, i) = mesh.triangle(t)[static_cast<std::size_t>(i)];
    }
    return out;
}

OcpMethod parse_method(const std::string& name) {
    if (name == "auto") return OcpMethod::Auto;
    if (name == "block") return OcpMethod::Unconstrained;
    if (name == "fixed-point") return OcpMethod::FixedPoint;
    if (name == "ssn") return OcpMethod::SemiSmoothNewton;
    throw ConfigurationError("unknown method '" + name + "' (auto, block, fixed-point, ssn)");
}

LinearMethod parse_solver(const std::string& name) {
    if (name == "direct") return LinearMethod::Direct;
    if (name == "cg") return LinearMethod::ConjugateGradient;
    throw ConfigurationError("unknown solver '" + name + "' (direct, cg)");
}

StudyConfig make_config(int example, std::vector<int> ns, std::optional<double> a, std::optional<double> lambda_coef,
                        std::optional<std::pair<double, double>> bounds, const std::string& method,
                        const std::string& solver, double tol, int max_iter) {
    StudyConfig cfg;
    cfg.example = example;
    cfg.ns = std::move(ns);
    cfg.a = a;
    cfg.lambda_coef = lambda_coef;
    cfg.bounds = bounds;
    cfg.method = parse_method(method);
    cfg.iteration.linear.method = parse_solver(solver);
    cfg.iteration.tol = tol;
    cfg.iteration.max_iter = max_iter;
    return cfg;
}

py::dict field_dict(const FieldErrors& e) {
    py::dict d;
    d["L2"] = e.l2;
    d["H1"] = e.h1;
    d["triple"] = e.triple;
    return d;
}

py::dict report_dict(const ErrorReport& r) {
    py::dict d;
    d["N"] = r.n;
    d["h"] = r.h;
    d["relative"] = r.relative;
    d["u"] = field_dict(r.u);
    d["y"] = field_dict(r.y);
    d["p"] = field_dict(r.p);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Nitsche-XFEM discretization of elliptic interface optimal control problems";

    py::register_exception<ConfigurationError>(m, "ConfigurationError", PyExc_ValueError);
    py::register_exception<GeometryError>(m, "GeometryError", PyExc_RuntimeError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

    py::class_<LevelSet>(m, "LevelSet")
        .def_static("line", &LevelSet::line, py::arg("slope"), py::arg("intercept"),
                    "phi = y - (slope*x + intercept); Omega_1 lies below the line.")
        .def_static(
            "circle", [](double cx, double cy, double r) { return LevelSet::circle(Point2(cx, cy), r); },
            py::arg("cx"), py::arg("cy"), py::arg("radius"), "phi = |x - c|^2 - r^2; Omega_1 is the disc.")
        .def("__call__", [](const LevelSet& phi, double x, double y) { return phi(Point2(x, y)); });

    py::class_<Discretization>(m, "Discretization")
        .def(py::init([](std::tuple<double, double, double, double> box, int n, const LevelSet& phi) {
                 const auto [x0, x1, y0, y1] = box;
                 return Discretization(Mesh(Rectangle{x0, x1, y0, y1}, n), phi);
             }),
             py::arg("domain"), py::arg("n"), py::arg("levelset"))
        .def_property_readonly("n", [](const Discretization& d) { return d.mesh.n(); })
        .def_property_readonly("h", [](const Discretization& d) { return d.mesh.h(); })
        .def_property_readonly("num_dofs", &Discretization::num_dofs)
        .def_property_readonly("num_cut", [](const Discretization& d) { return d.cuts.num_cut(); })
        .def_property_readonly("num_enriched_vertices",
                               [](const Discretization& d) { return d.space.num_enriched_vertices(); })
        .def_property_readonly("interface_length", [](const Discretization& d) { return d.cuts.interface_length(); })
        .def("vertices", [](const Discretization& d) { return vertex_array(d.mesh); })
        .def("triangles", [](const Discretization& d) { return triangle_array(d.mesh); })
        .def("area_fractions",
             [](const Discretization& d) {
                 Eigen::MatrixXd out(d.cuts.num_cut(), 2);
                 for (int i = 0; i < d.cuts.num_cut(); ++i) {
                     out(i, 0) = d.cuts.cuts()[static_cast<std::size_t>(i)].k1;
                     out(i, 1) = d.cuts.cuts()[static_cast<std::size_t>(i)].k2;
                 }
                 return out;
             },
             "k1, k2 of every cut element")
        .def(
            "stiffness",
            [](const Discretization& d, double alpha1, double alpha2, double lambda_coef) {
                const Coefficients alpha{alpha1, alpha2};
                return assemble_stiffness(d, alpha, NitscheParams{lambda_coef / alpha.max()});
            },
            py::arg("alpha1"), py::arg("alpha2"), py::arg("lambda_coef"),
            "Nitsche stiffness matrix with lambda = lambda_coef / h")
        .def("mass", [](const Discretization& d) { return assemble_mass(d); })
        .def("dirichlet_dofs", [](const Discretization& d) { return d.space.dirichlet_dofs(); });

    m.def(
        "project_control",
        [](const Eigen::VectorXd& p, double a, double lower, double upper) {
            return project_control(p, a, lower, upper);
        },
        py::arg("p"), py::arg("a"), py::arg("lower") = -kUnbounded, py::arg("upper") = kUnbounded,
        "Pointwise clamp of -p/a to [lower, upper]");

    m.def(
        "example_info",
        [](int id) {
            const ManufacturedProblem pr = build_example(id);
            py::dict d;
            d["id"] = pr.id;
            d["name"] = pr.name;
            d["domain"] = py::make_tuple(pr.domain.x0, pr.domain.x1, pr.domain.y0, pr.domain.y1);
            d["alpha"] = py::make_tuple(pr.alpha.alpha1, pr.alpha.alpha2);
            d["a"] = pr.a;
            d["bounds"] = py::make_tuple(pr.lower, pr.upper);
            d["lambda_coef"] = pr.lambda_coef;
            d["relative_errors"] = pr.relative_errors;
            return d;
        },
        py::arg("example"));

    m.def(
        "solve_example",
        [](int example, int n, std::optional<double> a, std::optional<double> lambda_coef,
           std::optional<std::pair<double, double>> bounds, const std::string& method, const std::string& solver,
           double tol, int max_iter) {
            const StudyConfig cfg = make_config(example, {n}, a, lambda_coef, bounds, method, solver, tol, max_iter);
            const ManufacturedProblem problem = configured_problem(cfg);
            const Discretization disc = problem.discretize(n);
            OcpSolution sol;
            {
                py::gil_scoped_release release;
                sol = solve_problem(problem, disc, cfg);
            }
            const OcpSystem system(disc, problem.ocp());
            const KktResiduals kkt = kkt_residuals(system, sol);
            py::dict d;
            d["errors"] = report_dict(compute_errors(problem, disc, sol));
            d["Y"] = sol.Y;
            d["P"] = sol.P;
            d["U"] = sol.U ? py::cast(*sol.U) : py::none();
            d["iterations"] = sol.iterations;
            d["converged"] = sol.converged;
            d["num_dofs"] = disc.num_dofs();
            d["state_residual"] = kkt.state;
            d["adjoint_residual"] = kkt.adjoint;
            d["active_set_boundary"] = [&] {
                py::list curves;
                for (const Polyline& line : extract_active_set_boundary(disc, sol.control())) {
                    Eigen::MatrixXd pts(static_cast<Eigen::Index>(line.points.size()), 2);
                    for (std::size_t i = 0; i < line.points.size(); ++i) {
                        pts.row(static_cast<Eigen::Index>(i)) = line.points[i].transpose();
                    }
                    curves.append(pts);
                }
                return curves;
            }();
            return d;
        },
        py::arg("example"), py::arg("n"), py::arg("a") = py::none(), py::arg("lambda_coef") = py::none(),
        py::arg("bounds") = py::none(), py::arg("method") = "auto", py::arg("solver") = "direct",
        py::arg("tol") = 1e-10, py::arg("max_iter") = 200,
        "Solve one manufactured example and report errors, DOF vectors and KKT residuals");

    m.def(
        "convergence_study",
        [](int example, std::vector<int> ns, std::optional<double> a, std::optional<double> lambda_coef,
           std::optional<std::pair<double, double>> bounds, const std::string& method, const std::string& solver,
           double tol, int max_iter) {
            const StudyConfig cfg =
                make_config(example, std::move(ns), a, lambda_coef, bounds, method, solver, tol, max_iter);
            std::vector<StudyRow> rows;
            {
                py::gil_scoped_release release;
                rows = run_convergence_study(cfg);
            }
            py::list out;
            for (const StudyRow& row : rows) {
                py::dict d = report_dict(row.errors);
                d["iterations"] = row.iterations;
                d["converged"] = row.converged;
                d["num_dofs"] = row.num_dofs;
                out.append(d);
            }
            return out;
        },
        py::arg("example"), py::arg("ns"), py::arg("a") = py::none(), py::arg("lambda_coef") = py::none(),
        py::arg("bounds") = py::none(), py::arg("method") = "auto", py::arg("solver") = "direct",
        py::arg("tol") = 1e-10, py::arg("max_iter") = 200);

    m.def("eoc", &eoc, py::arg("coarse"), py::arg("fine"), "log2(coarse / fine)");
}
