#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <gtest/gtest.h>

#include "nxocp/assembly.hpp"
#include "nxocp/errors.hpp"
#include "nxocp/examples.hpp"
#include "nxocp/solver.hpp"
#include "support/p1_oracle.hpp"

using namespace nxocp;

namespace {

const Rectangle kUnit{0.0, 1.0, 0.0, 1.0};

double max_abs(const SparseMatrix& m) {
    double out = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
    return out;
}

double asymmetry(const SparseMatrix& m) {
    const SparseMatrix t = m.transpose();
    return max_abs(SparseMatrix(m - t));
}

bool cholesky_succeeds(const SparseMatrix& m) {
    Eigen::SimplicialLLT<SparseMatrix> llt(m);
    return llt.info() == Eigen::Success;
}

Eigen::VectorXd random_free_vector(const ExtendedSpace& space, std::mt19937& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::VectorXd v(space.num_dofs());
    for (int d = 0; d < space.num_dofs(); ++d) v[d] = space.is_dirichlet(d) ? 0.0 : n(rng);
    return v;
}

// Example 1 line with its coefficients and penalty.
struct LineSetup {
    ManufacturedProblem problem = build_example(1);
    Discretization disc;
    explicit LineSetup(int n) : disc(problem.discretize(n)) {}
};

}  // namespace

TEST(Stiffness, MatchesPlainP1WithoutInterface) {
    const Discretization disc(build_uniform_mesh({-1.0, 2.0, 0.0, 1.5}, 12), LevelSet::line(0.0, 10.0));
    ASSERT_EQ(disc.cuts.num_cut(), 0);
    const SparseMatrix a = assemble_stiffness(disc, {3.0, 3.0}, NitscheParams{1000.0});
    const SparseMatrix m = assemble_mass(disc);
    Eigen::MatrixXd a_ref;
    Eigen::MatrixXd m_ref;
    oracle::p1_matrices(disc.mesh, 3.0, a_ref, m_ref);
    EXPECT_LE((Eigen::MatrixXd(a) - a_ref).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((Eigen::MatrixXd(m) - m_ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Stiffness, SymmetricForAllExamples) {
    for (int id : {1, 2, 3}) {
        const ManufacturedProblem p = build_example(id);
        const Discretization disc = p.discretize(16);
        const SparseMatrix a = assemble_stiffness(disc, p.alpha, p.nitsche());
        const SparseMatrix m = assemble_mass(disc);
        EXPECT_LE(asymmetry(a), 1e-12 * max_abs(a)) << "example " << id;
        EXPECT_LE(asymmetry(m), 1e-12 * max_abs(m)) << "example " << id;
    }
}

TEST(Stiffness, ReducedSystemsAdmitCholesky) {
    for (int id : {0, 1, 2, 3}) {
        const ManufacturedProblem p = build_example(id);
        for (int n : {16, 32}) {
            const Discretization disc = p.discretize(n);
            const DirichletReduction red(disc.space);
            const SparseMatrix a = red.restrict_matrix(assemble_stiffness(disc, p.alpha, p.nitsche()));
            EXPECT_TRUE(cholesky_succeeds(a)) << "example " << id << " N=" << n;
        }
    }
}

TEST(Mass, PositiveDefiniteAndIntegratesOne) {
    const ManufacturedProblem p = build_example(2);
    const Discretization disc = p.discretize(16);
    const SparseMatrix m = assemble_mass(disc);
    EXPECT_TRUE(cholesky_succeeds(m));
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(disc.num_dofs());
    EXPECT_NEAR(ones.dot(m * ones), p.domain.area(), 1e-10);
}

TEST(Stiffness, SingleCutElementMatchesHandAssembledForm) {
    // Line y = x - 0.95 cuts only the corner triangle (0.875,0),(1,0),(1,0.125).
    const double c = 0.95;
    const Discretization disc(build_uniform_mesh(kUnit, 8), LevelSet::line(1.0, -c));
    ASSERT_EQ(disc.cuts.num_cut(), 1);
    const Coefficients alpha{2.0, 5.0};
    const NitscheParams params{40.0};
    const double lambda = params.lambda(disc.mesh.h(), alpha);

    const Vec2 g1(1.0, -2.0);
    const Vec2 g2(3.0, 1.0);
    auto w = [&](Side s, const Point2& x) {
        return s == Side::One ? 1.0 + g1.dot(x) : -0.5 + g2.dot(x);
    };
    const Eigen::VectorXd v = interpolate(disc, w);
    const SparseMatrix a = assemble_stiffness(disc, alpha, params);

    // Omega_1 is the corner triangle (0.95,0),(1,0),(1,0.05).
    const Point2 qa(c, 0.0);
    const Point2 qb(1.0, 1.0 - c);
    const double area1 = 0.5 * (1.0 - c) * (1.0 - c);
    const double k1 = area1 / (0.5 * 0.125 * 0.125);
    const double k2 = 1.0 - k1;
    const Vec2 nu = Vec2(-1.0, 1.0) / std::sqrt(2.0);
    const double volume = alpha.alpha1 * area1 * g1.squaredNorm() + alpha.alpha2 * (1.0 - area1) * g2.squaredNorm();
    const double flux = k1 * alpha.alpha1 * g1.dot(nu) + k2 * alpha.alpha2 * g2.dot(nu);
    auto jump = [&](const Point2& x) { return w(Side::One, x) - w(Side::Two, x); };
    const double len = (qb - qa).norm();
    const Point2 mid = 0.5 * (qa + qb);
    // Simpson's rule is exact for the linear and quadratic chord integrands.
    const double int_jump = len / 6.0 * (jump(qa) + 4.0 * jump(mid) + jump(qb));
    const double int_jump2 = len / 6.0 * (jump(qa) * jump(qa) + 4.0 * jump(mid) * jump(mid) + jump(qb) * jump(qb));
    const double expected = volume - 2.0 * flux * int_jump + lambda * int_jump2;
    EXPECT_NEAR(v.dot(a * v), expected, 1e-12 * std::abs(expected));
}

TEST(Load, InterfaceFluxUsesCrossWeights) {
    const Discretization disc(build_uniform_mesh(kUnit, 8), LevelSet::line(1.0, -0.95));
    const CutGeometry& cut = disc.cuts.cuts().front();
    const Eigen::VectorXd load = assemble_interface_flux(disc, [](const Point2&) { return 1.0; });
    double side1 = 0.0;
    double side2 = 0.0;
    for (int d : disc.space.element_dofs(cut.element, Side::One)) side1 += load[d];
    for (int d : disc.space.element_dofs(cut.element, Side::Two)) side2 += load[d];
    EXPECT_NEAR(side1, cut.k2 * cut.segment_length(), 1e-15);
    EXPECT_NEAR(side2, cut.k1 * cut.segment_length(), 1e-15);
    EXPECT_NEAR(load.sum(), cut.segment_length(), 1e-15);
}

TEST(Load, ZeroDataGivesZeroVector) {
    const LineSetup s(16);
    const Eigen::VectorXd l = assemble_load(s.disc, nullptr, nullptr, std::monostate{});
    EXPECT_EQ(l.size(), s.disc.num_dofs());
    EXPECT_EQ(l.cwiseAbs().maxCoeff(), 0.0);
    const auto zero = [](Side, const Point2&) { return 0.0; };
    const Eigen::VectorXd l2 = assemble_load(s.disc, zero, [](const Point2&) { return 0.0; }, SideFunction(zero));
    EXPECT_EQ(l2.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Load, ControlRepresentationsAgree) {
    const ManufacturedProblem p = build_example(2);
    const Discretization disc = p.discretize(16);
    const SparseMatrix m = assemble_mass(disc);
    auto affine = [](Side s, const Point2& x) { return s == Side::One ? 0.3 + x.x() : -1.0 + 2.0 * x.y(); };
    const Eigen::VectorXd coeffs = interpolate(disc, affine);
    const Eigen::VectorXd by_vector = assemble_control(disc, coeffs, &m);
    const Eigen::VectorXd by_function = assemble_control(disc, SideFunction(affine));
    EXPECT_LE((by_vector - by_function).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((assemble_control(disc, coeffs) - by_vector).cwiseAbs().maxCoeff(), 1e-15);

    const ProjectedControl unbounded{-0.7 * coeffs, 0.7};
    EXPECT_LE((assemble_control(disc, unbounded) - by_vector).cwiseAbs().maxCoeff(), 1e-14);

    EXPECT_THROW(assemble_control(disc, Eigen::VectorXd(Eigen::VectorXd::Zero(3))), ConfigurationError);
}

TEST(Load, ProjectedControlMatchesFineSubdivision) {
    const ManufacturedProblem p = build_example(2);
    const Discretization disc = p.discretize(8);
    auto affine = [](Side s, const Point2& x) { return s == Side::One ? 0.9 * x.x() - 0.2 : 0.4 - 1.1 * x.y(); };
    const ProjectedControl control{-interpolate(disc, affine), 1.0, -0.3, 0.25};
    const Eigen::VectorXd exact_split = assemble_control(disc, control);

    // Oracle: degree-2 rule on 4^depth congruent pieces of every integration
    // cell, ignoring the kinks. Its error shrinks with depth.
    auto oracle_at = [&](int depth) {
        Eigen::VectorXd oracle = Eigen::VectorXd::Zero(disc.num_dofs());
        visit_integration_cells(disc, nullptr, [&](const IntegrationCell& c) {
            const Triangle2 parent = disc.mesh.triangle_points(c.element);
            const auto dofs = disc.space.element_dofs(c.element, c.side);
            std::vector<Triangle2> pieces{c.tri};
            for (int level = 0; level < depth; ++level) {
                std::vector<Triangle2> next;
                for (const auto& t : pieces) {
                    const Point2 m01 = 0.5 * (t.p[0] + t.p[1]);
                    const Point2 m12 = 0.5 * (t.p[1] + t.p[2]);
                    const Point2 m20 = 0.5 * (t.p[2] + t.p[0]);
                    next.push_back({{t.p[0], m01, m20}});
                    next.push_back({{m01, t.p[1], m12}});
                    next.push_back({{m20, m12, t.p[2]}});
                    next.push_back({{m01, m12, m20}});
                }
                pieces.swap(next);
            }
            for (const auto& t : pieces) {
                const QuadRule rule = triangle_rule(t, 2);
                for (std::size_t q = 0; q < rule.size(); ++q) {
                    const auto lam = barycentric(parent, rule.points[q]);
                    const double u = control.value(disc, c.element, c.side, rule.points[q]);
                    for (std::size_t i = 0; i < 3; ++i) oracle[dofs[i]] += rule.weights[q] * u * lam[i];
                }
            }
        });
        return oracle;
    };
    const Eigen::VectorXd coarse = oracle_at(4);
    const Eigen::VectorXd fine = oracle_at(6);
    const double err_coarse = (exact_split - coarse).cwiseAbs().maxCoeff();
    const double err_fine = (exact_split - fine).cwiseAbs().maxCoeff();
    EXPECT_LT(err_fine, 0.25 * err_coarse);
    EXPECT_LE(err_fine, 1e-5 * fine.cwiseAbs().maxCoeff());
}

TEST(Load, ActiveSetLinearizationReproducesProjectedLoad) {
    const ManufacturedProblem p = build_example(2);
    const Discretization disc = p.discretize(16);
    auto affine = [](Side s, const Point2& x) { return s == Side::One ? 0.9 * x.x() - 0.2 : 0.4 - 1.1 * x.y(); };
    const ProjectedControl control{-interpolate(disc, affine), 1.0, -0.3, 0.25};
    const ActiveSetLinearization lin = linearize_projection(disc, control);
    const Eigen::VectorXd linearized = lin.inactive_mass * (-control.costate / control.a) + lin.active_load;
    EXPECT_LE((linearized - assemble_control(disc, control)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LE(asymmetry(lin.inactive_mass), 1e-15);
}

TEST(Stiffness, ConstantsSpanTheKernel) {
    const ManufacturedProblem p = build_example(2);
    const Discretization disc = p.discretize(16);
    const SparseMatrix a = assemble_stiffness(disc, p.alpha, p.nitsche());
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(disc.num_dofs());
    EXPECT_LE((a * ones).cwiseAbs().maxCoeff(), 1e-9 * max_abs(a));
}

TEST(Dirichlet, ConstantBoundaryDataGivesConstantSolution) {
    const ManufacturedProblem p = build_example(2);
    const Discretization disc = p.discretize(16);
    SparseMatrix a = assemble_stiffness(disc, p.alpha, p.nitsche());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(disc.num_dofs());
    const Eigen::VectorXd b = interpolate_boundary(disc, [](Side, const Point2&) { return 2.5; });
    apply_dirichlet(a, rhs, disc.space, b);
    EXPECT_LE(asymmetry(a), 1e-12 * max_abs(a));
    Eigen::SimplicialLLT<SparseMatrix> llt(a);
    ASSERT_EQ(llt.info(), Eigen::Success);
    const Eigen::VectorXd y = llt.solve(rhs);
    EXPECT_LE((y.array() - 2.5).abs().maxCoeff(), 1e-9);
}

TEST(Dirichlet, ZeroBoundaryDataIsExact) {
    const LineSetup s(16);
    SparseMatrix a = assemble_stiffness(s.disc, s.problem.alpha, s.problem.nitsche());
    Eigen::VectorXd rhs = assemble_source(s.disc, s.problem.f);
    apply_dirichlet(a, rhs, s.disc.space, Eigen::VectorXd::Zero(s.disc.num_dofs()));
    Eigen::SimplicialLLT<SparseMatrix> llt(a);
    const Eigen::VectorXd y = llt.solve(rhs);
    for (int d : s.disc.space.dirichlet_dofs()) EXPECT_EQ(y[d], 0.0);
}

TEST(Dirichlet, BoundaryValuesMatchExactStateOfExampleThree) {
    const ManufacturedProblem p = build_example(3);
    const Discretization disc = p.discretize(16);
    const Eigen::VectorXd b = interpolate_boundary(disc, p.y_b);
    for (int d = 0; d < disc.num_dofs(); ++d) {
        const Point2& x = disc.mesh.vertex(disc.space.dof_vertex(d));
        if (disc.space.is_dirichlet(d)) {
            // The circle stays inside, so the boundary lies in Omega_2.
            EXPECT_NEAR(b[d], p.y.value(Side::Two, x), 1e-15);
        } else {
            EXPECT_EQ(b[d], 0.0);
        }
    }
}

TEST(Dirichlet, ReductionRoundTrip) {
    const LineSetup s(8);
    const DirichletReduction red(s.disc.space);
    EXPECT_EQ(red.num_free() + static_cast<int>(s.disc.space.dirichlet_dofs().size()), s.disc.num_dofs());
    Eigen::VectorXd full = Eigen::VectorXd::LinSpaced(s.disc.num_dofs(), 1.0, 2.0);
    const Eigen::VectorXd back = red.expand(red.restrict_vector(full), full);
    EXPECT_EQ((back - full).cwiseAbs().maxCoeff(), 0.0);
    const Eigen::VectorXd zeroed = red.expand(red.restrict_vector(full));
    for (int d : s.disc.space.dirichlet_dofs()) EXPECT_EQ(zeroed[d], 0.0);
}

TEST(Nitsche, PenaltyScalesInverselyWithH) {
    const NitscheParams params{10.0};
    const Coefficients alpha{1.0, 100.0};
    for (double h : {0.1, 0.0884, 1.0 / 3.0}) {
        EXPECT_EQ(params.lambda(h / 2.0, alpha), 2.0 * params.lambda(h, alpha));
        EXPECT_DOUBLE_EQ(params.lambda(h, alpha) * h, 1000.0);
    }
    const LineSetup s(8);
    EXPECT_THROW(assemble_stiffness(s.disc, s.problem.alpha, NitscheParams{0.0}), ConfigurationError);
}

TEST(Stiffness, PenaltyEntersLinearly) {
    // A(c) = A_0 + c J, so A(2c) - A(c) = A(3c) - A(2c).
    const LineSetup s(16);
    const SparseMatrix a1 = assemble_stiffness(s.disc, s.problem.alpha, NitscheParams{1.0});
    const SparseMatrix a2 = assemble_stiffness(s.disc, s.problem.alpha, NitscheParams{2.0});
    const SparseMatrix a3 = assemble_stiffness(s.disc, s.problem.alpha, NitscheParams{3.0});
    const SparseMatrix d = (a3 - a2) - (a2 - a1);
    EXPECT_LE(max_abs(d), 1e-12 * max_abs(a3));
}

TEST(Stiffness, CoercivityOnRandomVectors) {
    for (int id : {1, 2, 3}) {
        const ManufacturedProblem p = build_example(id);
        const Discretization disc = p.discretize(16);
        const SparseMatrix a = assemble_stiffness(disc, p.alpha, p.nitsche());
        std::mt19937 rng(static_cast<unsigned>(100 + id));
        for (int i = 0; i < 100; ++i) {
            const Eigen::VectorXd v = random_free_vector(disc.space, rng);
            EXPECT_GT(v.dot(a * v), 0.0) << "example " << id;
        }
    }
}

TEST(Stiffness, DiscretePoincareConstantStaysBounded) {
    // Smallest generalized eigenvalue of (A_ff, M_ff) by inverse iteration.
    const ManufacturedProblem p = build_example(1);
    std::vector<double> cmin;
    for (int n : {16, 32, 64}) {
        const Discretization disc = p.discretize(n);
        const DirichletReduction red(disc.space);
        const SparseMatrix a = red.restrict_matrix(assemble_stiffness(disc, p.alpha, p.nitsche()));
        const SparseMatrix m = red.restrict_matrix(assemble_mass(disc));
        Eigen::SimplicialLLT<SparseMatrix> llt(a);
        ASSERT_EQ(llt.info(), Eigen::Success);
        Eigen::VectorXd v = Eigen::VectorXd::Ones(red.num_free());
        double rayleigh = 0.0;
        for (int it = 0; it < 200; ++it) {
            v = llt.solve(m * v);
            v /= std::sqrt(v.dot(m * v));
            const double next = v.dot(a * v);
            if (it > 0 && std::abs(next - rayleigh) <= 1e-12 * next) break;
            rayleigh = next;
        }
        cmin.push_back(rayleigh);
    }
    for (double c : cmin) EXPECT_GT(c, 1.0);
    EXPECT_GT(*std::min_element(cmin.begin(), cmin.end()), 0.5 * cmin.front());
}

TEST(Stiffness, ReproducesPiecewiseLinearSolutionExactly) {
    // y_m = L + beta_m phi with phi the line's level set: continuous across
    // the line, harmonic on each side, constant flux jump.
    const ManufacturedProblem p = build_example(1);
    const Discretization disc = p.discretize(16);
    const double slope = -std::sqrt(3.0) / 3.0;
    auto phi = [&](const Point2& x) { return disc.levelset(x); };
    const Vec2 grad_phi(-slope, 1.0);
    const Vec2 grad_l(0.7, -0.4);
    const double beta1 = 2.0;
    const double beta2 = -0.5;
    auto exact = [&](Side s, const Point2& x) {
        return 0.2 + grad_l.dot(x) + (s == Side::One ? beta1 : beta2) * phi(x);
    };
    const Vec2 nu = grad_phi.normalized();
    const double g = p.alpha.alpha1 * (grad_l + beta1 * grad_phi).dot(nu) -
                     p.alpha.alpha2 * (grad_l + beta2 * grad_phi).dot(nu);

    const SparseMatrix a = assemble_stiffness(disc, p.alpha, p.nitsche());
    const Eigen::VectorXd load = assemble_interface_flux(disc, [g](const Point2&) { return g; });
    const Eigen::VectorXd b = interpolate_boundary(disc, exact);
    const DirichletReduction red(disc.space);
    const Eigen::VectorXd rhs = red.restrict_vector(load - a * b);
    const Eigen::VectorXd y = red.expand(solve_state(red.restrict_matrix(a), rhs), b);
    const Eigen::VectorXd y_ref = interpolate(disc, exact);
    EXPECT_LE((y - y_ref).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Stiffness, GalerkinResidualOfExampleOneState) {
    const ManufacturedProblem p = build_example(1);
    const Discretization disc = p.discretize(32);
    const OcpSystem system(disc, p.ocp());
    const Eigen::VectorXd y = solve_forward(system, p.u.value);
    const Eigen::VectorXd load = system.state_load() + assemble_control(disc, p.u.value);
    const Eigen::VectorXd residual = system.reduction().restrict_vector(load - system.stiffness() * y);
    EXPECT_LE(residual.norm(), 1e-9 * system.reduction().restrict_vector(load).norm());
}

TEST(DataSide, VertexOnTheInterfaceUsesOmegaTwo) {
    // The grid line y = 1/2 is the interface: no element is cut and its
    // vertices carry single DOFs.
    const Discretization disc(build_uniform_mesh(kUnit, 4), LevelSet::line(0.0, 0.5));
    ASSERT_EQ(disc.cuts.num_cut(), 0);
    for (int d = 0; d < disc.num_dofs(); ++d) {
        const double y = disc.mesh.vertex(disc.space.dof_vertex(d)).y();
        EXPECT_EQ(dof_data_side(disc, d), y < 0.5 ? Side::One : Side::Two) << "dof " << d;
    }
}

TEST(DataSide, EnrichedCopiesUseTheirOwnSide) {
    const ManufacturedProblem p = build_example(3);
    const Discretization disc = p.discretize(16);
    for (int d = 0; d < disc.num_dofs(); ++d) {
        if (disc.space.dof_side(d) == DofSide::Both) continue;
        EXPECT_EQ(dof_data_side(disc, d), disc.space.dof_side(d) == DofSide::One ? Side::One : Side::Two);
    }
}

TEST(Export, CooListsEveryStoredEntry) {
    const LineSetup s(4);
    const SparseMatrix m = assemble_mass(s.disc);
    std::ostringstream out;
    write_matrix_coo(m, out);
    const std::string text = out.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "row,col,value");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), m.nonZeros() + 1);
}
