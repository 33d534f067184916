#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "nxocp/assembly.hpp"
#include "nxocp/errors.hpp"
#include "nxocp/examples.hpp"
#include "nxocp/projection.hpp"
#include "nxocp/solver.hpp"

using namespace nxocp;

namespace {

double max_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Element of the uniform mesh containing an interior point.
int locate(const Mesh& mesh, const Point2& x) {
    const Rectangle& d = mesh.domain();
    const int n = mesh.n();
    const double dx = (d.x1 - d.x0) / n;
    const double dy = (d.y1 - d.y0) / n;
    const int i = std::clamp(static_cast<int>((x.x() - d.x0) / dx), 0, n - 1);
    const int j = std::clamp(static_cast<int>((x.y() - d.y0) / dy), 0, n - 1);
    const double sx = (x.x() - d.x0) / dx - i;
    const double sy = (x.y() - d.y0) / dy - j;
    return 2 * (j * n + i) + (sy <= sx ? 0 : 1);
}

OcpProblem with_bounds(const ManufacturedProblem& p, double lower, double upper) {
    OcpProblem o = p.ocp();
    o.lower = lower;
    o.upper = upper;
    return o;
}

// Checks (p + a u)(v - u) >= -tol for random admissible v at random
// quadrature points of the integration mesh.
double sampled_variational_inequality(const Discretization& disc, const OcpSolution& sol, int samples,
                                      unsigned seed) {
    std::vector<IntegrationCell> cells;
    visit_integration_cells(disc, nullptr, [&](const IntegrationCell& c) { cells.push_back(c); });
    std::mt19937 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const ProjectedControl u = sol.control();
    const double lo = std::isfinite(sol.lower) ? sol.lower : -10.0;
    const double hi = std::isfinite(sol.upper) ? sol.upper : 10.0;
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const IntegrationCell& c = cells[pick(rng)];
        const QuadRule rule = triangle_rule(c.tri, kVolumeDegree);
        const Point2& x = rule.points[pick(rng) % rule.size()];
        const double uh = u.value(disc, c.element, c.side, x);
        const double p = field_value(disc, sol.P, c.element, c.side, x);
        const double v = lo + (hi - lo) * unit(rng);
        worst = std::min(worst, (p + sol.a * uh) * (v - uh));
    }
    return worst;
}

}  // namespace

TEST(SolveState, ZeroRightHandSideGivesZero) {
    const ManufacturedProblem p = build_example(1);
    const Discretization disc = p.discretize(16);
    const DirichletReduction red(disc.space);
    const SparseMatrix a = red.restrict_matrix(assemble_stiffness(disc, p.alpha, p.nitsche()));
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(a.rows());
    for (LinearMethod m : {LinearMethod::Direct, LinearMethod::ConjugateGradient}) {
        const Eigen::VectorXd x = solve_state(a, zero, LinearSolverConfig{m});
        EXPECT_EQ(x.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(SolveState, ResidualContracts) {
    const ManufacturedProblem p = build_example(3);
    const Discretization disc = p.discretize(32);
    const DirichletReduction red(disc.space);
    const SparseMatrix a = red.restrict_matrix(assemble_stiffness(disc, p.alpha, p.nitsche()));
    std::mt19937 rng(3);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd b(a.rows());
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = nd(rng);
    const Eigen::VectorXd xd = solve_state(a, b);
    EXPECT_LE((a * xd - b).norm(), std::max(1e-10 * b.norm(), 1e-14));
    LinearSolverConfig cg{LinearMethod::ConjugateGradient, 1e-9};
    const Eigen::VectorXd xc = solve_state(a, b, cg);
    EXPECT_LE((a * xc - b).norm(), 1e-9 * b.norm());
}

TEST(SolveState, FailuresReportResidual) {
    SparseMatrix neg(3, 3);
    neg.insert(0, 0) = -1.0;
    neg.insert(1, 1) = -1.0;
    neg.insert(2, 2) = -1.0;
    EXPECT_THROW(SpdSolver(neg, LinearSolverConfig{}), SolverError);

    const ManufacturedProblem p = build_example(1);
    const Discretization disc = p.discretize(32);
    const DirichletReduction red(disc.space);
    const SparseMatrix a = red.restrict_matrix(assemble_stiffness(disc, p.alpha, p.nitsche()));
    const Eigen::VectorXd b = Eigen::VectorXd::Ones(a.rows());
    const LinearSolverConfig starved{LinearMethod::ConjugateGradient, 1e-12, 2};
    try {
        (void)solve_state(a, b, starved);
        FAIL() << "expected SolverError";
    } catch (const SolverError& e) {
        EXPECT_GT(e.residual(), 1e-12);
        EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
    }
}

TEST(SolveState, ConfigValidation) {
    EXPECT_THROW((LinearSolverConfig{LinearMethod::ConjugateGradient, 0.0}.validate()), ConfigurationError);
    EXPECT_THROW((LinearSolverConfig{LinearMethod::ConjugateGradient, 1e-8, 0}.validate()), ConfigurationError);
    EXPECT_NO_THROW(LinearSolverConfig{}.validate());
}

TEST(Projection, PointwiseCases) {
    EXPECT_DOUBLE_EQ(project_control(0.3, 1.0, -0.5, 0.5), -0.3);
    EXPECT_DOUBLE_EQ(project_control(-2.0, 1.0, -0.5, 0.5), 0.5);
    EXPECT_DOUBLE_EQ(project_control(2.0, 1.0, -0.5, 0.5), -0.5);
    EXPECT_EQ(project_control(0.37, 0.01, -kUnbounded, kUnbounded), -0.37 / 0.01);
    EXPECT_THROW(project_control(0.0, 1.0, 1.0, -1.0), ConfigurationError);
    EXPECT_THROW(project_control(0.0, 0.0, -1.0, 1.0), ConfigurationError);
    EXPECT_THROW(project_control(0.0, -1.0, -1.0, 1.0), ConfigurationError);
}

TEST(Projection, IdempotentAndVectorized) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> ud(-3.0, 3.0);
    Eigen::VectorXd p(500);
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = ud(rng);
    const Eigen::VectorXd u = project_control(p, 1.0, -0.5, 0.5);
    // Re-projecting the control (as the co-state -a u) changes nothing.
    const Eigen::VectorXd again = project_control(Eigen::VectorXd(-u), 1.0, -0.5, 0.5);
    EXPECT_EQ(max_diff(u, again), 0.0);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        EXPECT_EQ(u[i], project_control(p[i], 1.0, -0.5, 0.5));
        EXPECT_GE(u[i], -0.5);
        EXPECT_LE(u[i], 0.5);
    }
}

TEST(OcpProblem, Validation) {
    OcpProblem o = build_example(1).ocp();
    EXPECT_NO_THROW(o.validate());
    o.a = 0.0;
    EXPECT_THROW(o.validate(), ConfigurationError);
    o = build_example(1).ocp();
    o.lower = 1.0;
    o.upper = 0.0;
    EXPECT_THROW(o.validate(), ConfigurationError);
    o = build_example(1).ocp();
    o.alpha.alpha2 = -1.0;
    EXPECT_THROW(o.validate(), ConfigurationError);
}

TEST(Forward, VectorAndFunctionControlsAgree) {
    const ManufacturedProblem p = build_example(1);
    const Discretization disc = p.discretize(16);
    const OcpSystem system(disc, p.ocp());
    auto affine = [](Side, const Point2& x) { return 1.0 + x.x() - 2.0 * x.y(); };
    const Eigen::VectorXd by_function = solve_forward(system, SideFunction(affine));
    const Eigen::VectorXd by_vector = solve_forward(system, interpolate(disc, affine));
    EXPECT_LE(max_diff(by_function, by_vector), 1e-12);
}

TEST(Unconstrained, DecoupledLimitReturnsZeroCostate) {
    const ManufacturedProblem p = build_example(1);
    const Discretization disc = p.discretize(16);
    OcpProblem o = p.ocp();
    o.g_adjoint = nullptr;
    const OcpSystem plain(disc, o);
    const Eigen::VectorXd y_h = solve_forward(plain, std::monostate{});
    // Target equal to the uncontrolled discrete state: p = 0 and u = 0.
    o.y_d = [&disc, &y_h](Side s, const Point2& x) { return field_value(disc, y_h, locate(disc.mesh, x), s, x); };
    const OcpSystem system(disc, o);
    const OcpSolution sol = solve_unconstrained_ocp(system);
    const double scale = y_h.cwiseAbs().maxCoeff();
    EXPECT_LE(sol.P.cwiseAbs().maxCoeff(), 1e-10 * scale);
    ASSERT_TRUE(sol.U.has_value());
    EXPECT_LE(sol.U->cwiseAbs().maxCoeff(), 1e-10 * scale / o.a);
    EXPECT_LE(max_diff(sol.Y, y_h), 1e-10 * scale);
}

TEST(Unconstrained, OptimalityResidualsAndIdentity) {
    const ManufacturedProblem p = build_example(1);
    const Discretization disc = p.discretize(32);
    const OcpSystem system(disc, p.ocp());
    const OcpSolution sol = solve_unconstrained_ocp(system);
    ASSERT_TRUE(sol.U.has_value());
    EXPECT_TRUE(sol.converged);
    EXPECT_EQ(max_diff(*sol.U, -sol.P / p.a), 0.0);
    EXPECT_LE((p.a * *sol.U + sol.P).cwiseAbs().maxCoeff(), 1e-15 * sol.P.cwiseAbs().maxCoeff());

    // Residual oracle from the assembled pieces.
    const DirichletReduction& red = system.reduction();
    const Eigen::VectorXd f1 = red.restrict_vector(system.state_load() + system.mass() * *sol.U);
    const Eigen::VectorXd r1 = red.restrict_vector(system.stiffness() * sol.Y) - f1;
    const Eigen::VectorXd f2 = red.restrict_vector(system.mass() * sol.Y + system.adjoint_load());
    const Eigen::VectorXd r2 = red.restrict_vector(system.stiffness() * sol.P) - f2;
    EXPECT_LE(r1.norm(), 1e-9 * f1.norm());
    EXPECT_LE(r2.norm(), 1e-9 * f2.norm());

    const KktResiduals kkt = kkt_residuals(system, sol);
    EXPECT_LE(kkt.state, 1e-8);
    EXPECT_LE(kkt.adjoint, 1e-8);
    EXPECT_GE(kkt.variational_inequality, -1e-8);
    EXPECT_GE(sampled_variational_inequality(disc, sol, 1000, 17), -1e-8);
    for (int d : disc.space.dirichlet_dofs()) EXPECT_EQ(sol.P[d], 0.0);
}

TEST(Unconstrained, DirectAndCgAgree) {
    for (int id : {1, 3}) {
        const ManufacturedProblem p = build_example(id);
        const Discretization disc = p.discretize(32);
        const OcpSystem system(disc, p.ocp());
        const OcpSolution direct = solve_unconstrained_ocp(system);
        const OcpSolution cg = solve_unconstrained_ocp(system, LinearSolverConfig{LinearMethod::ConjugateGradient});
        EXPECT_LE(max_diff(direct.Y, cg.Y), 1e-7) << "example " << id;
        EXPECT_LE(max_diff(direct.P, cg.P), 1e-7) << "example " << id;
        EXPECT_LE(max_diff(*direct.U, *cg.U), 1e-7) << "example " << id;
    }
}

TEST(Constrained, InactiveBoundsReproduceUnconstrained) {
    const ManufacturedProblem p = build_example(1);
    const Discretization disc = p.discretize(16);
    const OcpSystem free_system(disc, p.ocp());
    const OcpSolution reference = solve_unconstrained_ocp(free_system);
    const double bound = 10.0 * reference.U->cwiseAbs().maxCoeff();
    const OcpSystem system(disc, with_bounds(p, -bound, bound));

    const OcpSolution fp = solve_constrained_fixed_point(system);
    EXPECT_TRUE(fp.converged);
    EXPECT_LE(max_diff(fp.P, reference.P), 1e-9);
    EXPECT_LE(max_diff(fp.Y, reference.Y), 1e-9);

    // The first Newton step sees an all-inactive linearization.
    const OcpSolution ssn = solve_constrained_ssn(system);
    EXPECT_TRUE(ssn.converged);
    EXPECT_EQ(ssn.iterations, 2);
    EXPECT_LE(max_diff(ssn.P, reference.P), 1e-10);
    EXPECT_LE(max_diff(ssn.Y, reference.Y), 1e-10);
}

TEST(Constrained, IterationLimitIsReportedNotThrown) {
    const ManufacturedProblem p = build_example(2);
    const Discretization disc = p.discretize(16);
    const OcpSystem system(disc, p.ocp());
    IterationConfig config;
    config.max_iter = 2;
    config.tol = 1e-30;
    const OcpSolution sol = solve_constrained_fixed_point(system, config);
    EXPECT_FALSE(sol.converged);
    EXPECT_EQ(sol.iterations, 2);
    EXPECT_EQ(sol.log.size(), 2u);
    config.max_iter = 0;
    EXPECT_THROW(solve_constrained_fixed_point(system, config), ConfigurationError);
}

TEST(Constrained, FixedPointDifferencesContract) {
    const ManufacturedProblem p = build_example(2);
    const Discretization disc = p.discretize(32);
    const OcpSystem system(disc, p.ocp());
    const OcpSolution sol = solve_constrained_fixed_point(system);
    ASSERT_TRUE(sol.converged);
    ASSERT_GE(sol.log.size(), 3u);
    for (std::size_t i = 2; i < sol.log.size(); ++i) {
        EXPECT_LT(sol.log[i].control_difference, sol.log[i - 1].control_difference) << "iteration " << i + 1;
    }
    EXPECT_LT(sol.log.back().control_difference, 1e-10);
}

TEST(Constrained, NewtonAndFixedPointAgree) {
    const ManufacturedProblem p = build_example(2);
    for (int n : {16, 32}) {
        const Discretization disc = p.discretize(n);
        const OcpSystem system(disc, p.ocp());
        const OcpSolution fp = solve_constrained_fixed_point(system);
        const OcpSolution ssn = solve_constrained_ssn(system);
        ASSERT_TRUE(fp.converged);
        ASSERT_TRUE(ssn.converged);
        EXPECT_LE(max_diff(fp.Y, ssn.Y), 1e-8) << "N=" << n;
        EXPECT_LE(max_diff(fp.P, ssn.P), 1e-8) << "N=" << n;
    }
}

TEST(Constrained, KktResidualsAndBounds) {
    const ManufacturedProblem p = build_example(2);
    const Discretization disc = p.discretize(32);
    const OcpSystem system(disc, p.ocp());
    for (const OcpSolution& sol : {solve_constrained_fixed_point(system), solve_constrained_ssn(system)}) {
        EXPECT_FALSE(sol.U.has_value());
        const KktResiduals kkt = kkt_residuals(system, sol);
        EXPECT_LE(kkt.state, 1e-8);
        EXPECT_LE(kkt.adjoint, 1e-8);
        EXPECT_GE(kkt.variational_inequality, -1e-8);
        EXPECT_GE(sampled_variational_inequality(disc, sol, 1000, 23), -1e-8);
        const ProjectedControl u = sol.control();
        bool active = false;
        visit_integration_cells(disc, nullptr, [&](const IntegrationCell& c) {
            for (const Point2& x : triangle_rule(c.tri, kVolumeDegree).points) {
                const double v = u.value(disc, c.element, c.side, x);
                EXPECT_GE(v, p.lower);
                EXPECT_LE(v, p.upper);
                active = active || v == p.lower || v == p.upper;
            }
        });
        EXPECT_TRUE(active);
    }
}

TEST(IterationLog, CsvLayout) {
    std::ostringstream out;
    write_iteration_log({{1, 0.5, 1e-12, 2e-12}, {2, 1e-3, 0.0, 0.0}}, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "iteration,control_difference,state_residual,adjoint_residual");
    std::getline(in, line);
    EXPECT_EQ(line.substr(0, 2), "1,");
    EXPECT_NE(line.find("e-01"), std::string::npos);
    std::getline(in, line);
    EXPECT_EQ(line.substr(0, 2), "2,");
    EXPECT_FALSE(std::getline(in, line));
}
