// Command-line driver: convergence studies of the manufactured examples.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nxocp/errors.hpp"
#include "nxocp/study.hpp"

namespace fs = std::filesystem;

namespace {

std::optional<std::pair<double, double>> parse_bounds(const std::string& text) {
    if (text.empty()) return std::nullopt;
    if (text == "none") return std::make_pair(-nxocp::kUnbounded, nxocp::kUnbounded);
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw nxocp::ConfigurationError("--bounds expects lo,hi or none");
    auto parse = [](const std::string& s) {
        if (s == "-inf") return -nxocp::kUnbounded;
        if (s == "inf") return nxocp::kUnbounded;
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw nxocp::ConfigurationError("invalid bound '" + s + "'");
        return v;
    };
    return std::make_pair(parse(text.substr(0, comma)), parse(text.substr(comma + 1)));
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw nxocp::ConfigurationError("cannot write " + path.string());
    return out;
}

struct SolveOptions {
    int example = 1;
    int n = 0;
    std::vector<int> n_list;
    double lambda_coef = std::numeric_limits<double>::quiet_NaN();
    double a = std::numeric_limits<double>::quiet_NaN();
    std::string bounds;
    std::string solver = "direct";
    std::string method = "auto";
    double tol = 1e-10;
    int max_iter = 200;
    std::string out_dir = ".";
    bool dump_geometry = false;
    bool verbose = false;
};

int run_solve(const SolveOptions& opt) {
    nxocp::StudyConfig config;
    config.example = opt.example;
    if (!opt.n_list.empty()) {
        config.ns = opt.n_list;
    } else if (opt.n > 0) {
        config.ns = {opt.n};
    }
    if (!std::isnan(opt.lambda_coef)) config.lambda_coef = opt.lambda_coef;
    if (!std::isnan(opt.a)) config.a = opt.a;
    config.bounds = parse_bounds(opt.bounds);
    config.iteration.tol = opt.tol;
    config.iteration.max_iter = opt.max_iter;
    config.iteration.linear.method =
        opt.solver == "cg" ? nxocp::LinearMethod::ConjugateGradient : nxocp::LinearMethod::Direct;
    if (opt.method == "fixed-point") config.method = nxocp::OcpMethod::FixedPoint;
    if (opt.method == "ssn") config.method = nxocp::OcpMethod::SemiSmoothNewton;
    if (opt.method == "block") config.method = nxocp::OcpMethod::Unconstrained;
    config.validate();

    const fs::path out_dir(opt.out_dir);
    fs::create_directories(out_dir);
    const nxocp::ManufacturedProblem problem = nxocp::configured_problem(config);

    std::vector<nxocp::StudyRow> rows;
    auto flush_tables = [&] {
        auto csv = open_output(out_dir / "errors.csv");
        nxocp::write_errors_csv(rows, csv);
        auto table = open_output(out_dir / "table.txt");
        nxocp::write_table(rows, problem.relative_errors, table);
    };

    int status = 0;
    for (int n : config.ns) {
        const nxocp::Discretization disc = problem.discretize(n);
        const auto start = std::chrono::steady_clock::now();
        nxocp::OcpSolution sol;
        try {
            sol = nxocp::solve_problem(problem, disc, config);
        } catch (...) {
            flush_tables();
            throw;
        }
        nxocp::StudyRow row;
        row.errors = nxocp::compute_errors(problem, disc, sol);
        row.iterations = sol.iterations;
        row.converged = sol.converged;
        row.num_dofs = disc.num_dofs();
        row.num_cut = disc.cuts.num_cut();
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rows.push_back(row);
        flush_tables();

        const std::string tag = "_N" + std::to_string(n);
        if (!sol.log.empty()) {
            auto log = open_output(out_dir / ("iterations" + tag + ".csv"));
            nxocp::write_iteration_log(sol.log, log);
        }
        if (problem.bounded()) {
            const nxocp::ProjectedControl control = sol.control();
            const auto active = nxocp::extract_active_set_boundary(disc, control);
            auto as = open_output(out_dir / ("activeset" + tag + ".csv"));
            nxocp::write_polylines_csv(active, as);
            auto gamma = open_output(out_dir / ("interface" + tag + ".csv"));
            nxocp::write_polylines_csv(nxocp::interface_polylines(disc), gamma);
            if (n == config.ns.back()) fs::copy_file(out_dir / ("activeset" + tag + ".csv"), out_dir / "activeset.csv",
                                                     fs::copy_options::overwrite_existing);
        }
        if (opt.dump_geometry) {
            auto im = open_output(out_dir / ("integration_mesh" + tag + ".csv"));
            nxocp::write_integration_mesh_csv(disc.mesh, disc.cuts, im);
            auto mv = open_output(out_dir / ("mesh_vertices" + tag + ".csv"));
            auto mt = open_output(out_dir / ("mesh_triangles" + tag + ".csv"));
            nxocp::write_mesh_csv(disc.mesh, mv, mt);
            const nxocp::OcpSystem system(disc, problem.ocp());
            auto sm = open_output(out_dir / ("stiffness" + tag + ".csv"));
            nxocp::write_matrix_coo(system.stiffness(), sm);
            auto mm = open_output(out_dir / ("mass" + tag + ".csv"));
            nxocp::write_matrix_coo(system.mass(), mm);
        }

        if (opt.verbose) {
            std::cerr << "N=" << n << " dofs=" << row.num_dofs << " cut=" << row.num_cut
                      << " iterations=" << row.iterations << (row.converged ? "" : " (not converged)")
                      << " time=" << row.seconds << "s\n";
        }
        if (!sol.converged) {
            std::cerr << "warning: N=" << n << " stopped after " << sol.iterations
                      << " iterations without reaching the tolerance\n";
            status = 2;
        }
    }
    nxocp::write_table(rows, problem.relative_errors, std::cout);
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nitsche-XFEM optimal control of elliptic interface problems"};
    app.require_subcommand(1);

    SolveOptions opt;
    CLI::App* solve = app.add_subcommand("solve", "Solve a manufactured example on one or more meshes");
    solve->add_option("--example", opt.example, "Example id (1, 2, 3; 0 is the smooth reference)")
        ->check(CLI::Range(0, 3))
        ->required();
    auto* n_opt = solve->add_option("--n", opt.n, "Cells per side")->check(CLI::PositiveNumber);
    solve->add_option("--n-list", opt.n_list, "Comma-separated cells per side")->delimiter(',')->excludes(n_opt);
    solve->add_option("--lambda-coef", opt.lambda_coef, "Penalty lambda*h");
    solve->add_option("--a", opt.a, "Regularization parameter");
    solve->add_option("--bounds", opt.bounds, "Control bounds lo,hi or none");
    solve->add_option("--solver", opt.solver, "Linear solver")->check(CLI::IsMember({"direct", "cg"}));
    solve->add_option("--method", opt.method, "Optimization method")
        ->check(CLI::IsMember({"auto", "block", "fixed-point", "ssn"}));
    solve->add_option("--tol", opt.tol, "Control difference tolerance");
    solve->add_option("--max-iter", opt.max_iter, "Iteration limit");
    solve->add_option("--out", opt.out_dir, "Output directory");
    solve->add_flag("--dump-geometry", opt.dump_geometry, "Write mesh, integration mesh and matrices");
    solve->add_flag("--verbose", opt.verbose, "Report progress on stderr");

    CLI11_PARSE(app, argc, argv);

    try {
        return run_solve(opt);
    } catch (const nxocp::ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
