#include "nxocp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "nxocp/errors.hpp"
#include "nxocp/quadrature.hpp"

namespace nxocp {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
using SaddleLU = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;

double direct_tolerance(double rhs_norm) { return std::max(1e-10 * rhs_norm, 1e-14); }

void append_block(Triplets& out, const SparseMatrix& m, int row_offset, int col_offset, double scale) {
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
            out.emplace_back(static_cast<int>(it.row()) + row_offset, col + col_offset, scale * it.value());
        }
    }
}

// [[top_left, A], [A, -M]] on the free DOFs.
SparseMatrix saddle_matrix(const SparseMatrix& top_left, const SparseMatrix& a, const SparseMatrix& m) {
    const auto n = static_cast<int>(a.rows());
    Triplets t;
    t.reserve(static_cast<std::size_t>(top_left.nonZeros() + 2 * a.nonZeros() + m.nonZeros()));
    append_block(t, top_left, 0, 0, 1.0);
    append_block(t, a, 0, n, 1.0);
    append_block(t, a, n, 0, 1.0);
    append_block(t, m, n, n, -1.0);
    SparseMatrix k(2 * n, 2 * n);
    k.setFromTriplets(t.begin(), t.end());
    k.makeCompressed();
    return k;
}

// rhs - k x accumulated in extended precision. Refining against this
// residual drives the forward error below cond(k) * eps, which matters for
// DOFs of sliver cut fragments whose values are otherwise set by rounding.
Eigen::VectorXd extended_residual(const SparseMatrix& k, const Eigen::VectorXd& x, const Eigen::VectorXd& rhs) {
    std::vector<long double> acc(static_cast<std::size_t>(rhs.size()));
    for (Eigen::Index i = 0; i < rhs.size(); ++i) acc[static_cast<std::size_t>(i)] = rhs[i];
    for (int col = 0; col < k.outerSize(); ++col) {
        const long double xc = x[col];
        for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
            acc[static_cast<std::size_t>(it.row())] -= static_cast<long double>(it.value()) * xc;
        }
    }
    Eigen::VectorXd r(rhs.size());
    for (Eigen::Index i = 0; i < rhs.size(); ++i) r[i] = static_cast<double>(acc[static_cast<std::size_t>(i)]);
    return r;
}

// Refines x against the extended residual until the correction stalls.
// `correct` returns an approximate solution of k d = r.
template <typename Correction>
void refine(const SparseMatrix& k, const Eigen::VectorXd& rhs, Eigen::VectorXd& x, const Correction& correct) {
    constexpr int kMaxSteps = 5;
    for (int step = 0; step < kMaxSteps; ++step) {
        const Eigen::VectorXd r = extended_residual(k, x, rhs);
        if (r.norm() == 0.0) return;
        const Eigen::VectorXd d = correct(r);
        x += d;
        if (d.lpNorm<Eigen::Infinity>() <= 4.0 * std::numeric_limits<double>::epsilon() * x.lpNorm<Eigen::Infinity>()) {
            return;
        }
    }
}

// Solves with a factorization plus iterative refinement, then checks the residual.
template <typename Factorization>
Eigen::VectorXd refined_solve(const Factorization& factor, const SparseMatrix& k, const Eigen::VectorXd& rhs,
                              const char* what) {
    Eigen::VectorXd x = factor.solve(rhs);
    refine(k, rhs, x, [&](const Eigen::VectorXd& r) -> Eigen::VectorXd { return factor.solve(r); });
    const double res = (rhs - k * x).norm();
    if (!std::isfinite(res) || res > direct_tolerance(rhs.norm())) {
        throw SolverError(std::string(what) + ": residual too large", res);
    }
    return x;
}

ProjectedControl zero_control(const OcpSystem& system) {
    const OcpProblem& pr = system.problem();
    return ProjectedControl{Eigen::VectorXd::Zero(system.disc().num_dofs()), pr.a, pr.lower, pr.upper};
}

double relative(double num, double den) { return den > 0.0 ? num / den : num; }

}  // namespace

void LinearSolverConfig::validate() const {
    if (!(cg_tol > 0.0)) throw ConfigurationError("cg_tol must be positive");
    if (cg_max_iter < 1) throw ConfigurationError("cg_max_iter must be at least 1");
}

struct SpdSolver::Impl {
    SparseMatrix matrix;
    double matrix_norm = 0.0;  // max absolute row sum
    LinearSolverConfig config;
    Eigen::SimplicialLLT<SparseMatrix> llt;
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    mutable int iterations = 0;
};

SpdSolver::SpdSolver(const SparseMatrix& matrix, const LinearSolverConfig& config)
    : impl_(std::make_unique<Impl>()) {
    config.validate();
    impl_->matrix = matrix;
    impl_->config = config;
    if (config.method == LinearMethod::Direct) {
        impl_->llt.compute(impl_->matrix);
        if (impl_->llt.info() != Eigen::Success) {
            throw SolverError("Cholesky factorization failed: matrix not positive definite", 0.0);
        }
    } else {
        Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(matrix.rows());
        for (int col = 0; col < matrix.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(matrix, col); it; ++it) row_sums[it.row()] += std::abs(it.value());
        }
        impl_->matrix_norm = row_sums.size() > 0 ? row_sums.maxCoeff() : 0.0;
        impl_->cg.setTolerance(config.cg_tol);
        impl_->cg.setMaxIterations(config.cg_max_iter);
        impl_->cg.compute(impl_->matrix);
    }
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& rhs) const {
    const Impl& s = *impl_;
    const double bnorm = rhs.norm();
    if (s.config.method == LinearMethod::Direct) {
        s.iterations = 1;
        return refined_solve(s.llt, s.matrix, rhs, "state solve");
    }
    if (bnorm == 0.0) {
        s.iterations = 0;
        return Eigen::VectorXd::Zero(rhs.size());
    }
    // The recursive CG residual drifts from the true one; restart from the
    // current iterate until the true residual meets the tolerance. A
    // residual at the rounding level of A x (backward stable) is accepted
    // too: for large penalties it can exceed cg_tol ||b|| for tiny cg_tol.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
    double res = bnorm;
    auto target = [&] {
        constexpr double kRounding = 16.0 * std::numeric_limits<double>::epsilon();
        return std::max(s.config.cg_tol * bnorm, kRounding * s.matrix_norm * x.norm());
    };
    s.iterations = 0;
    for (int attempt = 0; attempt < 4 && res > target(); ++attempt) {
        x = s.cg.solveWithGuess(rhs, x);
        s.iterations += static_cast<int>(s.cg.iterations());
        res = (rhs - s.matrix * x).norm();
    }
    if (!std::isfinite(res) || res > target()) {
        throw SolverError("conjugate gradient did not converge in " + std::to_string(s.iterations) + " iterations",
                          res);
    }
    return x;
}

int SpdSolver::last_iterations() const { return impl_->iterations; }

Eigen::VectorXd solve_state(const SparseMatrix& reduced, const Eigen::VectorXd& rhs, const LinearSolverConfig& config) {
    return SpdSolver(reduced, config).solve(rhs);
}

void OcpProblem::validate() const {
    if (!(a > 0.0)) throw ConfigurationError("regularization parameter a must be positive");
    if (lower > upper) throw ConfigurationError("control lower bound exceeds upper bound");
    if (!(alpha.alpha1 > 0.0) || !(alpha.alpha2 > 0.0)) {
        throw ConfigurationError("diffusion coefficients must be positive");
    }
    if (!(nitsche.c_tilde > 0.0)) throw ConfigurationError("Nitsche penalty coefficient must be positive");
}

OcpSystem::OcpSystem(const Discretization& disc, const OcpProblem& problem)
    : disc_(&disc), problem_(problem), reduction_(disc.space) {
    problem_.validate();
    stiffness_ = assemble_stiffness(disc, problem_.alpha, problem_.nitsche);
    mass_ = assemble_mass(disc);
    state_load_ = assemble_source(disc, problem_.f) + assemble_interface_flux(disc, problem_.g);
    adjoint_load_ = assemble_interface_flux(disc, problem_.g_adjoint);
    if (problem_.y_d) adjoint_load_ -= assemble_source(disc, problem_.y_d);
    boundary_ = interpolate_boundary(disc, problem_.y_b);
    stiffness_ff_ = reduction_.restrict_matrix(stiffness_);
    mass_ff_ = reduction_.restrict_matrix(mass_);
}

Eigen::VectorXd OcpSystem::state_rhs(const Eigen::VectorXd& control_load) const {
    return reduction_.restrict_vector(state_load_ + control_load - stiffness_ * boundary_);
}

Eigen::VectorXd OcpSystem::adjoint_rhs(const Eigen::VectorXd& state) const {
    return reduction_.restrict_vector(mass_ * state + adjoint_load_);
}

Eigen::VectorXd OcpSystem::expand_state(const Eigen::VectorXd& free) const { return reduction_.expand(free, boundary_); }

Eigen::VectorXd OcpSystem::expand_costate(const Eigen::VectorXd& free) const { return reduction_.expand(free); }

Eigen::VectorXd solve_forward(const OcpSystem& system, const ControlField& control, const LinearSolverConfig& config) {
    const Eigen::VectorXd load = assemble_control(system.disc(), control, &system.mass());
    return system.expand_state(solve_state(system.stiffness_free(), system.state_rhs(load), config));
}

OcpSolution solve_unconstrained_ocp(const OcpSystem& system, const LinearSolverConfig& config) {
    config.validate();
    const OcpProblem& pr = system.problem();
    const int n = system.reduction().num_free();
    const SparseMatrix& a_ff = system.stiffness_free();
    const SparseMatrix& m_ff = system.mass_free();
    const Eigen::VectorXd r1 = system.state_rhs(Eigen::VectorXd::Zero(system.disc().num_dofs()));
    const Eigen::VectorXd r2 = system.adjoint_rhs(system.boundary_values());

    Eigen::VectorXd p_free;
    Eigen::VectorXd y_free;
    int iterations = 1;
    if (config.method == LinearMethod::Direct) {
        const SparseMatrix k = saddle_matrix((1.0 / pr.a) * m_ff, a_ff, m_ff);
        Eigen::VectorXd rhs(2 * n);
        rhs << r1, r2;
        // Unpivoted LDL^T of this quasi-definite matrix shows large pivot
        // growth once tiny cut fractions appear; partial pivoting is stable.
        SaddleLU lu;
        lu.compute(k);
        if (lu.info() != Eigen::Success) throw SolverError("block system factorization failed", 0.0);
        const Eigen::VectorXd x = refined_solve(lu, k, rhs, "optimality system");
        p_free = x.head(n);
        y_free = x.tail(n);
    } else {
        LinearSolverConfig inner = config;
        inner.cg_tol = config.cg_tol * 1e-3;
        const SpdSolver a_inv(a_ff, inner);
        auto hessian = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
            const Eigen::VectorXd mu = m_ff * u;
            return pr.a * mu + m_ff * a_inv.solve(m_ff * a_inv.solve(mu));
        };
        const Eigen::VectorXd diag = pr.a * m_ff.diagonal();

        // Solves the block system [[M/a, A], [A, -M]] (p, y) = (s1, s2) by CG
        // on the reduced Hessian a M + M A^-1 M A^-1 M in the control u = -p/a.
        auto block_solve = [&](const Eigen::VectorXd& s1, const Eigen::VectorXd& s2) -> Eigen::VectorXd {
            const Eigen::VectorXd b = -(m_ff * a_inv.solve(m_ff * a_inv.solve(s1) + s2));
            Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
            Eigen::VectorXd r = b;
            Eigen::VectorXd z = r.cwiseQuotient(diag);
            Eigen::VectorXd d = z;
            double rz = r.dot(z);
            // Stop on the Jacobi-weighted residual sqrt(r' D^-1 r): the plain
            // residual ignores DOFs of sliver cut fragments, whose mass is tiny.
            const double bnorm = std::sqrt(rz);
            int it = 0;
            while (std::sqrt(rz) > config.cg_tol * bnorm) {
                if (it >= config.cg_max_iter) {
                    throw SolverError("reduced Hessian CG did not converge", std::sqrt(rz) / bnorm);
                }
                const Eigen::VectorXd hd = hessian(d);
                const double step = rz / d.dot(hd);
                u += step * d;
                r -= step * hd;
                z = r.cwiseQuotient(diag);
                const double rz_next = r.dot(z);
                d = z + (rz_next / rz) * d;
                rz = rz_next;
                ++it;
            }
            iterations += it;
            Eigen::VectorXd x(2 * n);
            x.tail(n) = a_inv.solve(m_ff * u + s1);
            x.head(n) = a_inv.solve(m_ff * x.tail(n) + s2);
            return x;
        };

        iterations = 0;
        const SparseMatrix k = saddle_matrix((1.0 / pr.a) * m_ff, a_ff, m_ff);
        Eigen::VectorXd x = block_solve(r1, r2);
        Eigen::VectorXd rhs(2 * n);
        rhs << r1, r2;
        refine(k, rhs, x, [&](const Eigen::VectorXd& r) { return block_solve(r.head(n), r.tail(n)); });
        p_free = x.head(n);
        y_free = x.tail(n);
    }

    OcpSolution sol;
    sol.a = pr.a;
    sol.Y = system.expand_state(y_free);
    sol.P = system.expand_costate(p_free);
    sol.U = Eigen::VectorXd(-sol.P / pr.a);
    sol.iterations = iterations;
    sol.converged = true;
    return sol;
}

double control_difference(const Discretization& disc, const ProjectedControl& u1, const ProjectedControl& u2) {
    double sum = 0.0;
    visit_integration_cells(disc, nullptr, [&](const IntegrationCell& c) {
        const QuadRule rule = triangle_rule(c.tri, kVolumeDegree);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double d = u1.value(disc, c.element, c.side, rule.points[q]) -
                             u2.value(disc, c.element, c.side, rule.points[q]);
            sum += rule.weights[q] * d * d;
        }
    });
    return std::sqrt(sum / disc.mesh.domain().area());
}

OcpSolution solve_constrained_fixed_point(const OcpSystem& system, const IterationConfig& config) {
    if (!(config.tol > 0.0) || config.max_iter < 1) {
        throw ConfigurationError("fixed point: tol must be positive and max_iter at least 1");
    }
    const Discretization& disc = system.disc();
    const OcpProblem& pr = system.problem();
    const SpdSolver solver(system.stiffness_free(), config.linear);

    OcpSolution sol;
    sol.a = pr.a;
    sol.lower = pr.lower;
    sol.upper = pr.upper;
    sol.Y = system.boundary_values();
    sol.P = Eigen::VectorXd::Zero(disc.num_dofs());

    ProjectedControl current = zero_control(system);
    Eigen::VectorXd load = assemble_control(disc, current, &system.mass());
    for (int it = 1; it <= config.max_iter; ++it) {
        const Eigen::VectorXd y_free = solver.solve(system.state_rhs(load));
        sol.Y = system.expand_state(y_free);
        const Eigen::VectorXd adj_rhs = system.adjoint_rhs(sol.Y);
        const Eigen::VectorXd p_free = solver.solve(adj_rhs);
        sol.P = system.expand_costate(p_free);

        ProjectedControl next{sol.P, pr.a, pr.lower, pr.upper};
        load = assemble_control(disc, next, &system.mass());

        IterationRecord rec;
        rec.iteration = it;
        rec.control_difference = control_difference(disc, next, current);
        const Eigen::VectorXd state_rhs = system.state_rhs(load);
        rec.state_residual = relative((system.stiffness_free() * y_free - state_rhs).norm(), state_rhs.norm());
        rec.adjoint_residual = relative((system.stiffness_free() * p_free - adj_rhs).norm(), adj_rhs.norm());
        sol.log.push_back(rec);
        sol.iterations = it;
        current = std::move(next);
        if (rec.control_difference < config.tol) {
            sol.converged = true;
            break;
        }
    }
    if (!pr.bounded()) sol.U = Eigen::VectorXd(-sol.P / pr.a);
    return sol;
}

OcpSolution solve_constrained_ssn(const OcpSystem& system, const IterationConfig& config) {
    if (!(config.tol > 0.0) || config.max_iter < 1) {
        throw ConfigurationError("semi-smooth Newton: tol must be positive and max_iter at least 1");
    }
    const Discretization& disc = system.disc();
    const OcpProblem& pr = system.problem();
    const int n = system.reduction().num_free();
    const SparseMatrix& a_ff = system.stiffness_free();
    const SparseMatrix& m_ff = system.mass_free();
    const Eigen::VectorXd r2 = system.adjoint_rhs(system.boundary_values());

    OcpSolution sol;
    sol.a = pr.a;
    sol.lower = pr.lower;
    sol.upper = pr.upper;
    sol.Y = system.boundary_values();
    sol.P = Eigen::VectorXd::Zero(disc.num_dofs());

    ProjectedControl current = zero_control(system);
    for (int it = 1; it <= config.max_iter; ++it) {
        const ActiveSetLinearization lin = linearize_projection(disc, current);
        const SparseMatrix mi_ff = system.reduction().restrict_matrix(lin.inactive_mass);
        const SparseMatrix k = saddle_matrix((1.0 / pr.a) * mi_ff, a_ff, m_ff);
        Eigen::VectorXd rhs(2 * n);
        rhs << system.state_rhs(lin.active_load), r2;
        SaddleLU lu;
        lu.compute(k);
        if (lu.info() != Eigen::Success) throw SolverError("Newton system factorization failed", 0.0);
        const Eigen::VectorXd x = refined_solve(lu, k, rhs, "Newton step");
        sol.P = system.expand_costate(x.head(n));
        sol.Y = system.expand_state(x.tail(n));

        ProjectedControl next{sol.P, pr.a, pr.lower, pr.upper};
        IterationRecord rec;
        rec.iteration = it;
        rec.control_difference = control_difference(disc, next, current);
        const Eigen::VectorXd state_rhs = system.state_rhs(assemble_control(disc, next, &system.mass()));
        rec.state_residual = relative((a_ff * x.tail(n) - state_rhs).norm(), state_rhs.norm());
        const Eigen::VectorXd adj_rhs = system.adjoint_rhs(sol.Y);
        rec.adjoint_residual = relative((a_ff * x.head(n) - adj_rhs).norm(), adj_rhs.norm());
        sol.log.push_back(rec);
        sol.iterations = it;
        current = std::move(next);
        if (rec.control_difference < config.tol) {
            sol.converged = true;
            break;
        }
    }
    if (!pr.bounded()) sol.U = Eigen::VectorXd(-sol.P / pr.a);
    return sol;
}

KktResiduals kkt_residuals(const OcpSystem& system, const OcpSolution& solution) {
    const Discretization& disc = system.disc();
    const DirichletReduction& red = system.reduction();
    const ProjectedControl u = solution.control();

    const Eigen::VectorXd control_load =
        solution.U ? Eigen::VectorXd(system.mass() * *solution.U) : assemble_control(disc, u, &system.mass());
    const Eigen::VectorXd srhs = system.state_rhs(control_load);
    const Eigen::VectorXd arhs = system.adjoint_rhs(solution.Y);

    KktResiduals out;
    out.state = relative((system.stiffness_free() * red.restrict_vector(solution.Y) - srhs).norm(), srhs.norm());
    out.adjoint = relative((system.stiffness_free() * red.restrict_vector(solution.P) - arhs).norm(), arhs.norm());

    double worst = 0.0;
    visit_integration_cells(disc, nullptr, [&](const IntegrationCell& c) {
        const QuadRule rule = triangle_rule(c.tri, kVolumeDegree);
        for (const Point2& x : rule.points) {
            const double p = field_value(disc, solution.P, c.element, c.side, x);
            const double uh = u.value(disc, c.element, c.side, x);
            const double lo = std::isfinite(u.lower) ? u.lower : uh - 1.0;
            const double hi = std::isfinite(u.upper) ? u.upper : uh + 1.0;
            const double g = p + solution.a * uh;
            worst = std::min({worst, g * (lo - uh), g * (hi - uh)});
        }
    });
    out.variational_inequality = worst;
    return out;
}

void write_iteration_log(const std::vector<IterationRecord>& log, std::ostream& out) {
    const auto old_flags = out.flags();
    const auto old_precision = out.precision();
    out << "iteration,control_difference,state_residual,adjoint_residual\n";
    out << std::scientific;
    out.precision(17);
    for (const IterationRecord& r : log) {
        out << r.iteration << ',' << r.control_difference << ',' << r.state_residual << ',' << r.adjoint_residual
            << '\n';
    }
    out.flags(old_flags);
    out.precision(old_precision);
}

}  // namespace nxocp
