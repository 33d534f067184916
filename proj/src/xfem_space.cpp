#include "nxocp/xfem_space.hpp"

#include <string>

#include "nxocp/errors.hpp"

namespace nxocp {

ExtendedSpace::ExtendedSpace(const Mesh& mesh, const CutInfo& cuts) : triangles_(mesh.triangles()) {
    const int nv = mesh.num_vertices();
    const int nt = mesh.num_triangles();
    element_side_.resize(static_cast<std::size_t>(nt));
    enriched_.assign(static_cast<std::size_t>(nv), 0);
    for (int e = 0; e < nt; ++e) {
        if (cuts.is_cut(e)) {
            element_side_[static_cast<std::size_t>(e)] = 0;
            for (int v : mesh.triangle(e)) enriched_[static_cast<std::size_t>(v)] = 1;
        } else {
            element_side_[static_cast<std::size_t>(e)] = static_cast<int>(cuts.element_side(e));
        }
    }

    first_dof_.resize(static_cast<std::size_t>(nv));
    dof_side_.reserve(static_cast<std::size_t>(nv));
    dof_vertex_.reserve(static_cast<std::size_t>(nv));
    int next = 0;
    for (int v = 0; v < nv; ++v) {
        first_dof_[static_cast<std::size_t>(v)] = next;
        if (enriched_[static_cast<std::size_t>(v)] != 0) {
            dof_side_.push_back(DofSide::One);
            dof_side_.push_back(DofSide::Two);
            dof_vertex_.push_back(v);
            dof_vertex_.push_back(v);
            next += 2;
            ++num_enriched_;
        } else {
            dof_side_.push_back(DofSide::Both);
            dof_vertex_.push_back(v);
            next += 1;
        }
    }
    num_dofs_ = next;

    dirichlet_mask_.assign(static_cast<std::size_t>(num_dofs_), 0);
    for (int d = 0; d < num_dofs_; ++d) {
        if (mesh.is_boundary_vertex(dof_vertex_[static_cast<std::size_t>(d)])) {
            dirichlet_dofs_.push_back(d);
            dirichlet_mask_[static_cast<std::size_t>(d)] = 1;
        }
    }
}

std::array<int, 3> ExtendedSpace::element_dofs(int e, Side side) const {
    const int own = element_side_[static_cast<std::size_t>(e)];
    const Side s = own == 0 ? side : static_cast<Side>(own);
    const auto& tri = triangles_[static_cast<std::size_t>(e)];
    return {dof(tri[0], s), dof(tri[1], s), dof(tri[2], s)};
}

ExtendedSpace build_extended_space(const Mesh& mesh, const CutInfo& cuts) { return ExtendedSpace(mesh, cuts); }

Discretization::Discretization(Mesh mesh_in, LevelSet levelset_in)
    : mesh(std::move(mesh_in)),
      levelset(std::move(levelset_in)),
      cuts(mesh, levelset),
      space(mesh, cuts) {}

BasisEval eval_basis(const Discretization& disc, int element, Side side, const Point2& x) {
    const Triangle2 tri = disc.mesh.triangle_points(element);
    const auto lambda = barycentric(tri, x);
    constexpr double kInsideTolerance = 1e-10;
    for (double l : lambda) {
        if (l < -kInsideTolerance) {
            throw GeometryError("point (" + std::to_string(x.x()) + ", " + std::to_string(x.y()) +
                                ") lies outside element " + std::to_string(element));
        }
    }
    const auto grads = barycentric_gradients(tri);

    BasisEval out;
    if (!disc.cuts.is_cut(element)) {
        out.count = 3;
        const auto dofs = disc.space.element_dofs(element, side);
        for (std::size_t i = 0; i < 3; ++i) {
            out.dofs[i] = dofs[i];
            out.values[i] = lambda[i];
            out.gradients[i] = grads[i];
        }
        return out;
    }
    out.count = 6;
    for (Side s : {Side::One, Side::Two}) {
        const auto dofs = disc.space.element_dofs(element, s);
        const bool active = (s == side);
        for (std::size_t i = 0; i < 3; ++i) {
            const std::size_t k = 3 * static_cast<std::size_t>(index(s)) + i;
            out.dofs[k] = dofs[i];
            out.values[k] = active ? lambda[i] : 0.0;
            out.gradients[k] = active ? grads[i] : Vec2::Zero();
        }
    }
    return out;
}

double field_value(const Discretization& disc, const Eigen::VectorXd& coeffs, int element, Side side,
                   const Point2& x) {
    const auto lambda = barycentric(disc.mesh.triangle_points(element), x);
    const auto dofs = disc.space.element_dofs(element, side);
    return coeffs[dofs[0]] * lambda[0] + coeffs[dofs[1]] * lambda[1] + coeffs[dofs[2]] * lambda[2];
}

Vec2 field_gradient(const Discretization& disc, const Eigen::VectorXd& coeffs, int element, Side side,
                    const Point2& /*x*/) {
    const auto grads = barycentric_gradients(disc.mesh.triangle_points(element));
    const auto dofs = disc.space.element_dofs(element, side);
    return coeffs[dofs[0]] * grads[0] + coeffs[dofs[1]] * grads[1] + coeffs[dofs[2]] * grads[2];
}

InterfaceTrace eval_interface_traces(const Discretization& disc, int element, const Point2& x,
                                     const Eigen::VectorXd& coeffs, std::optional<Coefficients> alpha) {
    if (!disc.cuts.is_cut(element)) {
        throw UsageError("interface traces requested on uncut element " + std::to_string(element));
    }
    const CutGeometry& cut = disc.cuts.cut(element);
    const Coefficients w = alpha.value_or(Coefficients{1.0, 1.0});

    InterfaceTrace t;
    t.value1 = field_value(disc, coeffs, element, Side::One, x);
    t.value2 = field_value(disc, coeffs, element, Side::Two, x);
    t.grad1 = field_gradient(disc, coeffs, element, Side::One, x);
    t.grad2 = field_gradient(disc, coeffs, element, Side::Two, x);
    t.jump = t.value1 - t.value2;
    t.average = cut.k1 * t.value1 + cut.k2 * t.value2;
    t.average_flux = cut.k1 * w.alpha1 * t.grad1.dot(cut.normal) + cut.k2 * w.alpha2 * t.grad2.dot(cut.normal);
    return t;
}

}  // namespace nxocp
