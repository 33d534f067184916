#include "nxocp/assembly.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include <Eigen/SparseCore>

#include "nxocp/errors.hpp"
#include "nxocp/quadrature.hpp"

namespace nxocp {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix from_triplets(int n, const Triplets& t) {
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

std::array<int, 6> cut_dofs(const ExtendedSpace& space, int e) {
    const auto d1 = space.element_dofs(e, Side::One);
    const auto d2 = space.element_dofs(e, Side::Two);
    return {d1[0], d1[1], d1[2], d2[0], d2[1], d2[2]};
}

// (w, v_h) contributions of a cell on one side of element e.
template <typename F>
void add_cell_load(const Discretization& disc, int e, Side s, const Triangle2& cell, F&& w, Eigen::VectorXd& out) {
    const Triangle2 parent = disc.mesh.triangle_points(e);
    const auto dofs = disc.space.element_dofs(e, s);
    const QuadRule rule = triangle_rule(cell, kVolumeDegree);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto lambda = barycentric(parent, rule.points[q]);
        const double wq = rule.weights[q] * w(rule.points[q]);
        for (std::size_t i = 0; i < 3; ++i) out[dofs[i]] += wq * lambda[i];
    }
}

void add_cell_mass(const Discretization& disc, int e, Side s, const Triangle2& cell, Triplets& out) {
    const Triangle2 parent = disc.mesh.triangle_points(e);
    const auto dofs = disc.space.element_dofs(e, s);
    const QuadRule rule = triangle_rule(cell, kVolumeDegree);
    Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto lambda = barycentric(parent, rule.points[q]);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                local(i, j) += rule.weights[q] * lambda[static_cast<std::size_t>(i)] * lambda[static_cast<std::size_t>(j)];
            }
        }
    }
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            out.emplace_back(dofs[i], dofs[j], local(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
    }
}

}  // namespace

SparseMatrix assemble_stiffness(const Discretization& disc, const Coefficients& alpha, const NitscheParams& params) {
    if (!(params.c_tilde > 0.0)) throw ConfigurationError("Nitsche penalty coefficient must be positive");
    const double lambda = params.lambda(disc.mesh.h(), alpha);
    const int nt = disc.mesh.num_triangles();
    Triplets trip;
    trip.reserve(static_cast<std::size_t>(nt) * 9 + static_cast<std::size_t>(disc.cuts.num_cut()) * 36);

    for (int e = 0; e < nt; ++e) {
        const Triangle2 tri = disc.mesh.triangle_points(e);
        const auto grads = barycentric_gradients(tri);
        if (!disc.cuts.is_cut(e)) {
            const Side s = disc.cuts.element_side(e);
            const auto dofs = disc.space.element_dofs(e, s);
            const double scale = alpha(s) * tri.area();
            for (std::size_t i = 0; i < 3; ++i) {
                for (std::size_t j = 0; j < 3; ++j) {
                    trip.emplace_back(dofs[i], dofs[j], scale * grads[i].dot(grads[j]));
                }
            }
            continue;
        }

        const CutGeometry& cut = disc.cuts.cut(e);
        const auto dofs = cut_dofs(disc.space, e);
        Eigen::Matrix<double, 6, 6> local = Eigen::Matrix<double, 6, 6>::Zero();

        for (Side s : {Side::One, Side::Two}) {
            double side_area = 0.0;
            for (const auto& t : cut.sub_tris(s)) side_area += t.area();
            const int off = 3 * index(s);
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    local(off + i, off + j) += alpha(s) * side_area *
                                               grads[static_cast<std::size_t>(i)].dot(grads[static_cast<std::size_t>(j)]);
                }
            }
        }

        // Flux normal into Omega_2.
        const Vec2 nu = -cut.normal;
        Eigen::Matrix<double, 6, 1> avg_flux;
        for (int i = 0; i < 3; ++i) {
            const double dn = grads[static_cast<std::size_t>(i)].dot(nu);
            avg_flux[i] = cut.k1 * alpha.alpha1 * dn;
            avg_flux[3 + i] = cut.k2 * alpha.alpha2 * dn;
        }
        const QuadRule rule = segment_quadrature(cut.q1, cut.q2, kInterfacePoints);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto lam = barycentric(tri, rule.points[q]);
            Eigen::Matrix<double, 6, 1> jump;
            for (int i = 0; i < 3; ++i) {
                jump[i] = lam[static_cast<std::size_t>(i)];
                jump[3 + i] = -lam[static_cast<std::size_t>(i)];
            }
            const double w = rule.weights[q];
            local.noalias() -= w * (jump * avg_flux.transpose() + avg_flux * jump.transpose());
            local.noalias() += (w * lambda) * (jump * jump.transpose());
        }
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < 6; ++j) {
                trip.emplace_back(dofs[i], dofs[j], local(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            }
        }
    }
    return from_triplets(disc.num_dofs(), trip);
}

SparseMatrix assemble_mass(const Discretization& disc) {
    Triplets trip;
    trip.reserve(static_cast<std::size_t>(disc.mesh.num_triangles()) * 9 +
                 static_cast<std::size_t>(disc.cuts.num_cut()) * 18);
    visit_integration_cells(disc, nullptr,
                            [&](const IntegrationCell& c) { add_cell_mass(disc, c.element, c.side, c.tri, trip); });
    return from_triplets(disc.num_dofs(), trip);
}

Eigen::VectorXd assemble_source(const Discretization& disc, const SideFunction& f) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(disc.num_dofs());
    if (!f) return out;
    visit_integration_cells(disc, nullptr, [&](const IntegrationCell& c) {
        add_cell_load(disc, c.element, c.side, c.tri, [&](const Point2& x) { return f(c.side, x); }, out);
    });
    return out;
}

Eigen::VectorXd assemble_interface_flux(const Discretization& disc, const PointFunction& g) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(disc.num_dofs());
    if (!g) return out;
    for (const CutGeometry& cut : disc.cuts.cuts()) {
        const Triangle2 tri = disc.mesh.triangle_points(cut.element);
        const auto d1 = disc.space.element_dofs(cut.element, Side::One);
        const auto d2 = disc.space.element_dofs(cut.element, Side::Two);
        const QuadRule rule = segment_quadrature(cut.q1, cut.q2, kInterfacePoints);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto lam = barycentric(tri, rule.points[q]);
            const double wg = rule.weights[q] * g(rule.points[q]);
            for (std::size_t i = 0; i < 3; ++i) {
                out[d1[i]] += cut.k2 * wg * lam[i];
                out[d2[i]] += cut.k1 * wg * lam[i];
            }
        }
    }
    return out;
}

Eigen::VectorXd assemble_control(const Discretization& disc, const ControlField& u, const SparseMatrix* mass) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(disc.num_dofs());
    if (const auto* coeffs = std::get_if<Eigen::VectorXd>(&u)) {
        if (coeffs->size() != disc.num_dofs()) {
            throw ConfigurationError("control coefficient vector has length " + std::to_string(coeffs->size()) +
                                     ", expected " + std::to_string(disc.num_dofs()));
        }
        if (mass != nullptr) return *mass * *coeffs;
        return assemble_mass(disc) * *coeffs;
    }
    if (const auto* fn = std::get_if<SideFunction>(&u)) {
        return assemble_source(disc, *fn);
    }
    if (const auto* pc = std::get_if<ProjectedControl>(&u)) {
        visit_integration_cells(disc, pc, [&](const IntegrationCell& c) {
            add_cell_load(
                disc, c.element, c.side, c.tri,
                [&](const Point2& x) {
                    switch (c.regime) {
                    case ControlRegime::Lower:
                        return pc->lower;
                    case ControlRegime::Upper:
                        return pc->upper;
                    case ControlRegime::Inactive:
                        break;
                    }
                    return pc->value(disc, c.element, c.side, x);
                },
                out);
        });
    }
    return out;
}

Eigen::VectorXd assemble_load(const Discretization& disc, const SideFunction& f, const PointFunction& g,
                              const ControlField& u, const SparseMatrix* mass) {
    return assemble_source(disc, f) + assemble_interface_flux(disc, g) + assemble_control(disc, u, mass);
}

ActiveSetLinearization linearize_projection(const Discretization& disc, const ProjectedControl& control) {
    Triplets trip;
    ActiveSetLinearization out;
    out.active_load = Eigen::VectorXd::Zero(disc.num_dofs());
    visit_integration_cells(disc, &control, [&](const IntegrationCell& c) {
        switch (c.regime) {
        case ControlRegime::Inactive:
            add_cell_mass(disc, c.element, c.side, c.tri, trip);
            break;
        case ControlRegime::Lower:
            add_cell_load(disc, c.element, c.side, c.tri, [&](const Point2&) { return control.lower; },
                          out.active_load);
            break;
        case ControlRegime::Upper:
            add_cell_load(disc, c.element, c.side, c.tri, [&](const Point2&) { return control.upper; },
                          out.active_load);
            break;
        }
    });
    out.inactive_mass = from_triplets(disc.num_dofs(), trip);
    return out;
}

Side dof_data_side(const Discretization& disc, int dof) {
    switch (disc.space.dof_side(dof)) {
    case DofSide::One:
        return Side::One;
    case DofSide::Two:
        return Side::Two;
    case DofSide::Both:
        break;
    }
    const double v = disc.levelset(disc.mesh.vertex(disc.space.dof_vertex(dof)));
    return (v < 0.0 && std::abs(v) >= kSnapTolerance * disc.mesh.h()) ? Side::One : Side::Two;
}

Eigen::VectorXd interpolate_boundary(const Discretization& disc, const SideFunction& boundary) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(disc.num_dofs());
    if (!boundary) return out;
    for (int d : disc.space.dirichlet_dofs()) {
        out[d] = boundary(dof_data_side(disc, d), disc.mesh.vertex(disc.space.dof_vertex(d)));
    }
    return out;
}

Eigen::VectorXd interpolate(const Discretization& disc, const SideFunction& f) {
    Eigen::VectorXd out(disc.num_dofs());
    for (int d = 0; d < disc.num_dofs(); ++d) {
        out[d] = f(dof_data_side(disc, d), disc.mesh.vertex(disc.space.dof_vertex(d)));
    }
    return out;
}

void apply_dirichlet(SparseMatrix& matrix, Eigen::VectorXd& rhs, const ExtendedSpace& space,
                     const Eigen::VectorXd& values) {
    Eigen::VectorXd prescribed = Eigen::VectorXd::Zero(matrix.rows());
    for (int d : space.dirichlet_dofs()) prescribed[d] = values[d];
    rhs -= matrix * prescribed;

    Triplets trip;
    trip.reserve(static_cast<std::size_t>(matrix.nonZeros()));
    for (int col = 0; col < matrix.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(matrix, col); it; ++it) {
            const auto r = static_cast<int>(it.row());
            if (!space.is_dirichlet(r) && !space.is_dirichlet(col)) trip.emplace_back(r, col, it.value());
        }
    }
    for (int d : space.dirichlet_dofs()) {
        trip.emplace_back(d, d, 1.0);
        rhs[d] = values[d];
    }
    matrix = from_triplets(static_cast<int>(matrix.rows()), trip);
}

DirichletReduction::DirichletReduction(const ExtendedSpace& space) {
    to_free_.assign(static_cast<std::size_t>(space.num_dofs()), -1);
    for (int d = 0; d < space.num_dofs(); ++d) {
        if (!space.is_dirichlet(d)) {
            to_free_[static_cast<std::size_t>(d)] = static_cast<int>(free_.size());
            free_.push_back(d);
        }
    }
}

SparseMatrix DirichletReduction::restrict_matrix(const SparseMatrix& m) const {
    Triplets trip;
    trip.reserve(static_cast<std::size_t>(m.nonZeros()));
    for (int col = 0; col < m.outerSize(); ++col) {
        const int fc = to_free_[static_cast<std::size_t>(col)];
        if (fc < 0) continue;
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
            const int fr = to_free_[static_cast<std::size_t>(it.row())];
            if (fr >= 0) trip.emplace_back(fr, fc, it.value());
        }
    }
    return from_triplets(num_free(), trip);
}

Eigen::VectorXd DirichletReduction::restrict_vector(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(num_free());
    for (int i = 0; i < num_free(); ++i) out[i] = v[free_[static_cast<std::size_t>(i)]];
    return out;
}

Eigen::VectorXd DirichletReduction::expand(const Eigen::VectorXd& free_values,
                                           const Eigen::VectorXd& constrained_values) const {
    Eigen::VectorXd out = constrained_values;
    for (int i = 0; i < num_free(); ++i) out[free_[static_cast<std::size_t>(i)]] = free_values[i];
    return out;
}

Eigen::VectorXd DirichletReduction::expand(const Eigen::VectorXd& free_values) const {
    return expand(free_values, Eigen::VectorXd::Zero(num_total()));
}

void write_matrix_coo(const SparseMatrix& m, std::ostream& out) {
    const auto old_flags = out.flags();
    const auto old_precision = out.precision();
    out << std::scientific;
    out.precision(17);
    out << "row,col,value\n";
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
            out << it.row() << ',' << col << ',' << it.value() << '\n';
        }
    }
    out.flags(old_flags);
    out.precision(old_precision);
}

}  // namespace nxocp
