#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "nxocp/interface_geometry.hpp"
#include "nxocp/mesh.hpp"

namespace nxocp {

/// Which subdomain a degree of freedom lives on.
enum class DofSide { One, Two, Both };

/// Degrees of freedom of the extended P1 space.
///
/// A vertex incident to a cut element carries two side-restricted copies of
/// its hat function (phi_i restricted to Omega_1 and to Omega_2); every other
/// vertex carries the plain hat function. Numbering is vertex-major with the
/// Omega_1 copy first.
class ExtendedSpace {
public:
    ExtendedSpace(const Mesh& mesh, const CutInfo& cuts);

    [[nodiscard]] int num_dofs() const { return num_dofs_; }
    [[nodiscard]] int num_vertices() const { return static_cast<int>(first_dof_.size()); }
    [[nodiscard]] int num_enriched_vertices() const { return num_enriched_; }
    [[nodiscard]] bool is_enriched(int vertex) const { return enriched_[static_cast<std::size_t>(vertex)] != 0; }

    /// DOF of `vertex` active on `side` (the single DOF if not enriched).
    [[nodiscard]] int dof(int vertex, Side side) const {
        const auto v = static_cast<std::size_t>(vertex);
        return first_dof_[v] + ((enriched_[v] != 0 && side == Side::Two) ? 1 : 0);
    }
    [[nodiscard]] DofSide dof_side(int dof) const { return dof_side_[static_cast<std::size_t>(dof)]; }
    [[nodiscard]] int dof_vertex(int dof) const { return dof_vertex_[static_cast<std::size_t>(dof)]; }

    /// Local DOFs of element `e` on `side`. For uncut elements the side
    /// argument is ignored and the element's own side is used.
    [[nodiscard]] std::array<int, 3> element_dofs(int e, Side side) const;

    [[nodiscard]] const std::vector<int>& dirichlet_dofs() const { return dirichlet_dofs_; }
    [[nodiscard]] bool is_dirichlet(int dof) const { return dirichlet_mask_[static_cast<std::size_t>(dof)] != 0; }

private:
    std::vector<std::array<int, 3>> triangles_;
    std::vector<int> element_side_;  // 1, 2, or 0 for cut elements
    std::vector<int> first_dof_;
    std::vector<char> enriched_;
    std::vector<DofSide> dof_side_;
    std::vector<int> dof_vertex_;
    std::vector<int> dirichlet_dofs_;
    std::vector<char> dirichlet_mask_;
    int num_dofs_ = 0;
    int num_enriched_ = 0;
};

ExtendedSpace build_extended_space(const Mesh& mesh, const CutInfo& cuts);

/// Mesh, interface description, cut geometry and DOF map of one discretization.
class Discretization {
public:
    Discretization(Mesh mesh, LevelSet levelset);

    Mesh mesh;
    LevelSet levelset;
    CutInfo cuts;
    ExtendedSpace space;

    [[nodiscard]] int num_dofs() const { return space.num_dofs(); }
};

/// Basis functions of one element evaluated at a point on one side.
/// Cut elements report all six local DOFs; those of the other side are zero.
struct BasisEval {
    int count = 0;
    std::array<int, 6> dofs{};
    std::array<double, 6> values{};
    std::array<Vec2, 6> gradients{};
};

BasisEval eval_basis(const Discretization& disc, int element, Side side, const Point2& x);

/// Traces of a discrete function on the chord of a cut element.
struct InterfaceTrace {
    double value1 = 0.0;
    double value2 = 0.0;
    Vec2 grad1 = Vec2::Zero();
    Vec2 grad2 = Vec2::Zero();
    /// value1 - value2
    double jump = 0.0;
    /// k1*value1 + k2*value2
    double average = 0.0;
    /// k1*w1*grad1.n + k2*w2*grad2.n with n the chord normal into Omega_1 and
    /// (w1, w2) the optional coefficient weights (1 when not supplied).
    double average_flux = 0.0;
};

/// Coefficient pair (alpha_1, alpha_2).
struct Coefficients {
    double alpha1 = 1.0;
    double alpha2 = 1.0;

    [[nodiscard]] double operator()(Side s) const { return s == Side::One ? alpha1 : alpha2; }
    [[nodiscard]] double max() const { return alpha1 > alpha2 ? alpha1 : alpha2; }
};

/// Throws UsageError when `element` is not cut.
InterfaceTrace eval_interface_traces(const Discretization& disc, int element, const Point2& x,
                                     const Eigen::VectorXd& coeffs,
                                     std::optional<Coefficients> alpha = std::nullopt);

/// Value and gradient of a discrete function restricted to one side of an element.
double field_value(const Discretization& disc, const Eigen::VectorXd& coeffs, int element, Side side,
                   const Point2& x);
Vec2 field_gradient(const Discretization& disc, const Eigen::VectorXd& coeffs, int element, Side side,
                    const Point2& x);

}  // namespace nxocp
