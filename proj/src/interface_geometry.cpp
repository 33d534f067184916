#include "nxocp/interface_geometry.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "nxocp/errors.hpp"

namespace nxocp {

namespace {

constexpr double kRootTolerance = 1e-14;

struct VertexSign {
    double value;
    bool snapped;
    [[nodiscard]] bool negative() const { return !snapped && value < 0.0; }
    [[nodiscard]] bool positive() const { return !snapped && value > 0.0; }
};

std::array<VertexSign, 3> vertex_signs(const Mesh& mesh, const LevelSet& phi, int element) {
    const double tol = kSnapTolerance * mesh.h();
    std::array<VertexSign, 3> out{};
    const auto& tri = mesh.triangle(element);
    for (std::size_t k = 0; k < 3; ++k) {
        const double v = phi(mesh.vertex(tri[k]));
        out[k] = {v, std::abs(v) < tol};
    }
    return out;
}

// Root of phi on the edge from a vertex with a genuine sign to `to`.
Point2 edge_root(const LevelSet& phi, const Point2& from, const VertexSign& s_from, const Point2& to,
                 const VertexSign& s_to) {
    if (s_to.snapped) return to;
    const double f0 = s_from.value;
    const double f1 = s_to.value;
    auto at = [&](double t) { return Point2(from + t * (to - from)); };

    // One secant step is exact for affine level sets.
    const double t_secant = f0 / (f0 - f1);
    const Point2 x_secant = at(t_secant);
    const double f_secant = phi(x_secant);
    if (std::abs(f_secant) <= kRootTolerance) return x_secant;

    double lo = 0.0;
    double hi = 1.0;
    if ((f_secant < 0.0) == (f0 < 0.0)) {
        lo = t_secant;
    } else {
        hi = t_secant;
    }
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        t = 0.5 * (lo + hi);
        const double f = phi(at(t));
        if (std::abs(f) <= kRootTolerance || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon()) break;
        if ((f < 0.0) == (f0 < 0.0)) {
            lo = t;
        } else {
            hi = t;
        }
    }
    return at(t);
}

void push_if_nondegenerate(std::vector<Triangle2>& out, const Triangle2& t, double parent_area) {
    if (t.area() > 1e-14 * parent_area) out.push_back(t);
}

double total_area(const std::vector<Triangle2>& tris) {
    double s = 0.0;
    for (const auto& t : tris) s += t.area();
    return s;
}

}  // namespace

LevelSet::LevelSet(ValueFn value, GradientFn gradient) : value_(std::move(value)), gradient_(std::move(gradient)) {}

LevelSet LevelSet::line(double slope, double intercept) {
    return LevelSet([slope, intercept](const Point2& x) { return x.y() - slope * x.x() - intercept; },
                    [slope](const Point2&) { return Vec2(-slope, 1.0); });
}

LevelSet LevelSet::circle(const Point2& center, double radius) {
    const double r2 = radius * radius;
    return LevelSet([center, r2](const Point2& x) { return (x - center).squaredNorm() - r2; },
                    [center](const Point2& x) { return Vec2(2.0 * (x - center)); });
}

ElementClass classify_element(const Mesh& mesh, const LevelSet& phi, int element) {
    const auto signs = vertex_signs(mesh, phi, element);
    bool any_negative = false;
    bool any_positive = false;
    for (const auto& s : signs) {
        any_negative = any_negative || s.negative();
        any_positive = any_positive || s.positive();
    }
    if (any_negative && any_positive) return ElementClass::Cut;
    return any_negative ? ElementClass::Interior1 : ElementClass::Interior2;
}

CutGeometry compute_cut_geometry(const Mesh& mesh, const LevelSet& phi, int element) {
    if (classify_element(mesh, phi, element) != ElementClass::Cut) {
        throw GeometryError("cut geometry requested for element " + std::to_string(element) +
                            ", which is not crossed by the interface");
    }
    const auto signs = vertex_signs(mesh, phi, element);
    const Triangle2 tri = mesh.triangle_points(element);

    int n_negative = 0;
    for (const auto& s : signs) n_negative += s.negative() ? 1 : 0;
    // Snapped vertices are on the positive side, so the lone vertex is the
    // only negative one or the only non-negative one.
    int lone = -1;
    for (int k = 0; k < 3; ++k) {
        const bool neg = signs[static_cast<std::size_t>(k)].negative();
        if ((n_negative == 1 && neg) || (n_negative == 2 && !neg)) lone = k;
    }
    if (lone < 0 || signs[static_cast<std::size_t>(lone)].snapped) {
        throw GeometryError("element " + std::to_string(element) +
                            " does not meet the interface in two distinct edge points");
    }
    const auto il = static_cast<std::size_t>(lone);
    const auto ia = static_cast<std::size_t>((lone + 1) % 3);
    const auto ib = static_cast<std::size_t>((lone + 2) % 3);
    const Point2& L = tri.p[il];
    const Point2& A = tri.p[ia];
    const Point2& B = tri.p[ib];

    CutGeometry cut;
    cut.element = element;
    cut.q1 = edge_root(phi, L, signs[il], A, signs[ia]);
    cut.q2 = edge_root(phi, L, signs[il], B, signs[ib]);
    if ((cut.q2 - cut.q1).norm() <= kSnapTolerance * mesh.h()) {
        throw GeometryError("element " + std::to_string(element) + " has a degenerate interface chord");
    }

    const double parent_area = tri.area();
    std::vector<Triangle2> lone_tris;
    std::vector<Triangle2> quad_tris;
    push_if_nondegenerate(lone_tris, Triangle2{{L, cut.q1, cut.q2}}, parent_area);
    if ((cut.q1 - B).norm() <= (A - cut.q2).norm()) {
        push_if_nondegenerate(quad_tris, Triangle2{{cut.q1, A, B}}, parent_area);
        push_if_nondegenerate(quad_tris, Triangle2{{cut.q1, B, cut.q2}}, parent_area);
    } else {
        push_if_nondegenerate(quad_tris, Triangle2{{cut.q1, A, cut.q2}}, parent_area);
        push_if_nondegenerate(quad_tris, Triangle2{{A, B, cut.q2}}, parent_area);
    }

    const bool lone_in_one = signs[il].negative();
    cut.sub_tris_1 = lone_in_one ? std::move(lone_tris) : std::move(quad_tris);
    cut.sub_tris_2 = lone_in_one ? std::move(quad_tris) : std::move(lone_tris);
    cut.k1 = total_area(cut.sub_tris_1) / parent_area;
    cut.k2 = total_area(cut.sub_tris_2) / parent_area;

    const Vec2 d = cut.q2 - cut.q1;
    Vec2 n(-d.y(), d.x());
    n /= n.norm();
    if (n.dot(phi.gradient(0.5 * (cut.q1 + cut.q2))) > 0.0) n = -n;
    cut.normal = n;
    return cut;
}

std::pair<QuadRule, QuadRule> subtriangle_quadrature(const CutGeometry& cut, int degree) {
    if (degree != 2 && degree != 4) {
        throw ConfigurationError("sub-triangle quadrature supports degrees 2 and 4, got " +
                                 std::to_string(degree));
    }
    std::pair<QuadRule, QuadRule> out;
    for (const auto& t : cut.sub_tris_1) out.first.append(triangle_rule(t, degree));
    for (const auto& t : cut.sub_tris_2) out.second.append(triangle_rule(t, degree));
    return out;
}

CutInfo::CutInfo(const Mesh& mesh, const LevelSet& phi) {
    const int nt = mesh.num_triangles();
    classes_.resize(static_cast<std::size_t>(nt));
    cut_index_.assign(static_cast<std::size_t>(nt), -1);
    for (int e = 0; e < nt; ++e) {
        classes_[static_cast<std::size_t>(e)] = classify_element(mesh, phi, e);
        if (classes_[static_cast<std::size_t>(e)] == ElementClass::Cut) {
            cut_index_[static_cast<std::size_t>(e)] = static_cast<int>(cuts_.size());
            cuts_.push_back(compute_cut_geometry(mesh, phi, e));
        }
    }
}

Side CutInfo::element_side(int e) const {
    switch (element_class(e)) {
    case ElementClass::Interior1:
        return Side::One;
    case ElementClass::Interior2:
        return Side::Two;
    case ElementClass::Cut:
        break;
    }
    throw UsageError("element " + std::to_string(e) + " is cut and has no single side");
}

const CutGeometry& CutInfo::cut(int e) const {
    const int idx = cut_index_.at(static_cast<std::size_t>(e));
    if (idx < 0) {
        throw ConsistencyError("no cut geometry stored for element " + std::to_string(e));
    }
    return cuts_[static_cast<std::size_t>(idx)];
}

double CutInfo::interface_length() const {
    double s = 0.0;
    for (const auto& c : cuts_) s += c.segment_length();
    return s;
}

void write_integration_mesh_csv(const Mesh& mesh, const CutInfo& cuts, std::ostream& out) {
    const auto old_flags = out.flags();
    const auto old_precision = out.precision();
    out << std::scientific;
    out.precision(17);
    out << "element,side,x0,y0,x1,y1,x2,y2\n";
    auto write = [&out](int e, Side s, const Triangle2& t) {
        out << e << ',' << static_cast<int>(s);
        for (const auto& p : t.p) out << ',' << p.x() << ',' << p.y();
        out << '\n';
    };
    for (int e = 0; e < mesh.num_triangles(); ++e) {
        if (cuts.is_cut(e)) {
            for (Side s : {Side::One, Side::Two}) {
                for (const auto& t : cuts.cut(e).sub_tris(s)) write(e, s, t);
            }
        } else {
            write(e, cuts.element_side(e), mesh.triangle_points(e));
        }
    }
    out.flags(old_flags);
    out.precision(old_precision);
}

}  // namespace nxocp
