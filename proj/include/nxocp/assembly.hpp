#pragma once

#include <functional>
#include <iosfwd>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "nxocp/projection.hpp"
#include "nxocp/xfem_space.hpp"

namespace nxocp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using SideFunction = std::function<double(Side, const Point2&)>;
using PointFunction = std::function<double(const Point2&)>;

/// Triangle rule degree used for every volume integral.
inline constexpr int kVolumeDegree = 4;
/// Gauss points per interface chord.
inline constexpr int kInterfacePoints = 3;

/// Nitsche penalty lambda = c_tilde * max(alpha_1, alpha_2) / h.
struct NitscheParams {
    double c_tilde = 10.0;

    [[nodiscard]] double lambda(double h, const Coefficients& alpha) const { return c_tilde * alpha.max() / h; }
};

/// A control entering the right-hand side as (u, v_h).
/// Either absent, a coefficient vector in the extended space, a point
/// function, or the projection of a discrete co-state.
using ControlField = std::variant<std::monostate, Eigen::VectorXd, SideFunction, ProjectedControl>;

/// Symmetric Nitsche bilinear form:
///   (alpha grad u, grad v)_{Omega_1 u Omega_2} - ({alpha d_nu u}, [v]) - ({alpha d_nu v}, [u])
///   + lambda ([u], [v])
/// with nu the chord normal pointing into Omega_2 and {w} = k1 w1 + k2 w2.
SparseMatrix assemble_stiffness(const Discretization& disc, const Coefficients& alpha, const NitscheParams& params);

/// L2 inner products of the basis functions.
SparseMatrix assemble_mass(const Discretization& disc);

/// (f, v_h) by side-wise volume quadrature.
Eigen::VectorXd assemble_source(const Discretization& disc, const SideFunction& f);

/// (k2 g, v_{1,h})_Gamma_h + (k1 g, v_{2,h})_Gamma_h.
Eigen::VectorXd assemble_interface_flux(const Discretization& disc, const PointFunction& g);

/// (u, v_h). A coefficient vector is applied through the mass matrix, which
/// is assembled unless supplied. A projected control is integrated on the
/// integration mesh refined along its kinks.
Eigen::VectorXd assemble_control(const Discretization& disc, const ControlField& u, const SparseMatrix* mass = nullptr);

/// (f + u, v_h) + (k2 g, v_{1,h})_Gamma_h + (k1 g, v_{2,h})_Gamma_h. Null
/// functions contribute nothing.
Eigen::VectorXd assemble_load(const Discretization& disc, const SideFunction& f, const PointFunction& g,
                              const ControlField& u, const SparseMatrix* mass = nullptr);

/// Mass matrix restricted to the region where the projected control is
/// inactive, and the load of the active bounds (bound, v_h)_active.
struct ActiveSetLinearization {
    SparseMatrix inactive_mass;
    Eigen::VectorXd active_load;
};
ActiveSetLinearization linearize_projection(const Discretization& disc, const ProjectedControl& control);

/// Side used for boundary data of a DOF (the vertex side for single DOFs).
Side dof_data_side(const Discretization& disc, int dof);

/// Vector holding y_b at every Dirichlet DOF and zero elsewhere.
Eigen::VectorXd interpolate_boundary(const Discretization& disc, const SideFunction& boundary);

/// Nodal interpolant in the extended space: each DOF takes the value of
/// its side's function at its vertex.
Eigen::VectorXd interpolate(const Discretization& disc, const SideFunction& f);

/// Symmetric elimination of Dirichlet DOFs in place: the coupling to the
/// prescribed values moves to the right-hand side and constrained rows and
/// columns become identity rows and columns.
void apply_dirichlet(SparseMatrix& matrix, Eigen::VectorXd& rhs, const ExtendedSpace& space,
                     const Eigen::VectorXd& values);

/// Index bookkeeping for restricting systems to the free DOFs.
class DirichletReduction {
public:
    explicit DirichletReduction(const ExtendedSpace& space);

    [[nodiscard]] int num_free() const { return static_cast<int>(free_.size()); }
    [[nodiscard]] int num_total() const { return static_cast<int>(to_free_.size()); }
    [[nodiscard]] const std::vector<int>& free_dofs() const { return free_; }

    /// Free-by-free block.
    [[nodiscard]] SparseMatrix restrict_matrix(const SparseMatrix& m) const;
    [[nodiscard]] Eigen::VectorXd restrict_vector(const Eigen::VectorXd& v) const;
    /// Full vector with free entries from `free_values` and constrained
    /// entries from `constrained_values` (full length).
    [[nodiscard]] Eigen::VectorXd expand(const Eigen::VectorXd& free_values,
                                         const Eigen::VectorXd& constrained_values) const;
    [[nodiscard]] Eigen::VectorXd expand(const Eigen::VectorXd& free_values) const;

private:
    std::vector<int> free_;
    std::vector<int> to_free_;
};

/// Coordinate text export: one `row,col,value` line per stored entry.
void write_matrix_coo(const SparseMatrix& m, std::ostream& out);

}  // namespace nxocp
