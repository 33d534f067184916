#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "nxocp/assembly.hpp"
#include "nxocp/projection.hpp"
#include "nxocp/xfem_space.hpp"

namespace nxocp {

enum class LinearMethod { Direct, ConjugateGradient };

struct LinearSolverConfig {
    LinearMethod method = LinearMethod::Direct;
    double cg_tol = 1e-10;
    int cg_max_iter = 20000;

    void validate() const;
};

/// Solver for a fixed symmetric positive definite matrix (a reduced
/// stiffness matrix). Factorizes or sets up CG once; every solve checks
/// its residual and throws SolverError when it is not met.
class SpdSolver {
public:
    SpdSolver(const SparseMatrix& matrix, const LinearSolverConfig& config);
    ~SpdSolver();
    SpdSolver(SpdSolver&&) noexcept;
    SpdSolver& operator=(SpdSolver&&) noexcept;

    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    [[nodiscard]] int last_iterations() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// x with A x = b for a reduced SPD system.
/// Direct: ||Ax - b|| <= max(1e-10 ||b||, 1e-14); CG: ||Ax - b|| <= cg_tol ||b||,
/// or below 16 eps ||A||_inf ||x|| when cg_tol is under the rounding level.
Eigen::VectorXd solve_state(const SparseMatrix& reduced, const Eigen::VectorXd& rhs,
                            const LinearSolverConfig& config = {});

/// Data of the interface control problem
///   min 1/2 ||y - y_d||^2 + a/2 ||u||^2
///   -div(alpha grad y) = f + u,  [y] = 0,  [alpha d_nu y] = g,  y = y_b on the boundary,
/// with the adjoint
///   -div(alpha grad p) = y - y_d,  [p] = 0,  [alpha d_nu p] = g_adjoint,  p = 0 on the boundary,
/// and u = clamp(-p/a, lower, upper). The jump normal nu points into Omega_2.
struct OcpProblem {
    Coefficients alpha{1.0, 1.0};
    double a = 1.0;
    double lower = -kUnbounded;
    double upper = kUnbounded;
    NitscheParams nitsche;
    SideFunction f;
    SideFunction y_d;
    SideFunction y_b;
    PointFunction g;
    PointFunction g_adjoint;

    [[nodiscard]] bool bounded() const { return lower > -kUnbounded || upper < kUnbounded; }
    /// Throws ConfigurationError on a <= 0, lower > upper or non-positive alpha.
    void validate() const;
};

/// Assembled matrices and loads of an OcpProblem on a discretization.
/// Keeps a reference to `disc`, which must outlive it.
class OcpSystem {
public:
    OcpSystem(const Discretization& disc, const OcpProblem& problem);

    [[nodiscard]] const Discretization& disc() const { return *disc_; }
    [[nodiscard]] const OcpProblem& problem() const { return problem_; }
    [[nodiscard]] const SparseMatrix& stiffness() const { return stiffness_; }
    [[nodiscard]] const SparseMatrix& mass() const { return mass_; }
    /// (f, v) + interface terms of g.
    [[nodiscard]] const Eigen::VectorXd& state_load() const { return state_load_; }
    /// -(y_d, v) + interface terms of g_adjoint.
    [[nodiscard]] const Eigen::VectorXd& adjoint_load() const { return adjoint_load_; }
    /// y_b at Dirichlet DOFs, zero elsewhere.
    [[nodiscard]] const Eigen::VectorXd& boundary_values() const { return boundary_; }
    [[nodiscard]] const DirichletReduction& reduction() const { return reduction_; }
    [[nodiscard]] const SparseMatrix& stiffness_free() const { return stiffness_ff_; }
    [[nodiscard]] const SparseMatrix& mass_free() const { return mass_ff_; }

    /// Free part of (f + u, v) + g terms - a(b, v) for a control load vector.
    [[nodiscard]] Eigen::VectorXd state_rhs(const Eigen::VectorXd& control_load) const;
    /// Free part of (y - y_d, v) + g_adjoint terms for a full state vector.
    [[nodiscard]] Eigen::VectorXd adjoint_rhs(const Eigen::VectorXd& state) const;
    /// Full state vector from free values (boundary values filled in).
    [[nodiscard]] Eigen::VectorXd expand_state(const Eigen::VectorXd& free) const;
    /// Full co-state vector from free values (zero on the boundary).
    [[nodiscard]] Eigen::VectorXd expand_costate(const Eigen::VectorXd& free) const;

private:
    const Discretization* disc_;
    OcpProblem problem_;
    SparseMatrix stiffness_;
    SparseMatrix mass_;
    Eigen::VectorXd state_load_;
    Eigen::VectorXd adjoint_load_;
    Eigen::VectorXd boundary_;
    DirichletReduction reduction_;
    SparseMatrix stiffness_ff_;
    SparseMatrix mass_ff_;
};

struct IterationRecord {
    int iteration = 0;
    double control_difference = 0.0;
    double state_residual = 0.0;
    double adjoint_residual = 0.0;
};

struct OcpSolution {
    Eigen::VectorXd Y;
    Eigen::VectorXd P;
    /// Control coefficients -P/a, present only without bounds.
    std::optional<Eigen::VectorXd> U;
    double a = 1.0;
    double lower = -kUnbounded;
    double upper = kUnbounded;
    int iterations = 0;
    bool converged = false;
    std::vector<IterationRecord> log;

    /// u_h = clamp(-p_h/a, lower, upper).
    [[nodiscard]] ProjectedControl control() const { return ProjectedControl{P, a, lower, upper}; }
};

/// Solution of the forward problem with a given control.
Eigen::VectorXd solve_forward(const OcpSystem& system, const ControlField& control,
                              const LinearSolverConfig& config = {});

/// Unconstrained problem through the symmetric block system
///   [ (1/a) M_ff   A_ff ] [P_f]   [ F1_f - A_fd b ]
///   [   A_ff    -M_ff   ] [Y_f] = [ F2_f + M_fd b ]
/// (direct), or the reduced Hessian (aM + M A^-1 M A^-1 M) U = rhs (CG).
OcpSolution solve_unconstrained_ocp(const OcpSystem& system, const LinearSolverConfig& config = {});

struct IterationConfig {
    double tol = 1e-10;
    int max_iter = 200;
    LinearSolverConfig linear;
};

/// Projected fixed-point iteration from u = 0: state solve, co-state solve,
/// projection, until the control difference measure drops below tol.
/// Returns converged = false after max_iter iterations.
OcpSolution solve_constrained_fixed_point(const OcpSystem& system, const IterationConfig& config = {});

/// Semi-smooth Newton on the co-state, starting from P = 0. Each step solves
/// the system linearized on the current active set.
OcpSolution solve_constrained_ssn(const OcpSystem& system, const IterationConfig& config = {});

/// sqrt(sum w (u1 - u2)^2 / |Omega|) over the volume quadrature points.
double control_difference(const Discretization& disc, const ProjectedControl& u1, const ProjectedControl& u2);

struct KktResiduals {
    double state = 0.0;
    double adjoint = 0.0;
    /// min over sampled points of (p + a u)(v - u) for admissible v.
    double variational_inequality = 0.0;
};

/// Relative residuals of both discrete equations on the free DOFs and the
/// pointwise variational inequality sampled at the volume quadrature points.
KktResiduals kkt_residuals(const OcpSystem& system, const OcpSolution& solution);

/// CSV with columns iteration,control_difference,state_residual,adjoint_residual.
void write_iteration_log(const std::vector<IterationRecord>& log, std::ostream& out);

}  // namespace nxocp
