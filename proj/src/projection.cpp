#include "nxocp/projection.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "nxocp/errors.hpp"

namespace nxocp {

namespace {

struct PolyVertex {
    Point2 x;
    double w;
};
using Polygon = std::vector<PolyVertex>;

// Sutherland-Hodgman against the half-plane sign * (w - level) <= 0.
Polygon clip(const Polygon& poly, double level, double sign) {
    Polygon out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const PolyVertex& a = poly[i];
        const PolyVertex& b = poly[(i + 1) % n];
        const double da = sign * (a.w - level);
        const double db = sign * (b.w - level);
        if (da <= 0.0) out.push_back(a);
        if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
            const double t = da / (da - db);
            out.push_back({a.x + t * (b.x - a.x), level});
        }
    }
    return out;
}

void fan(const Polygon& poly, ControlRegime regime, double min_area,
         std::vector<std::pair<Triangle2, ControlRegime>>& out) {
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
        Triangle2 t{{poly[0].x, poly[i].x, poly[i + 1].x}};
        if (t.area() > min_area) out.emplace_back(t, regime);
    }
}

}  // namespace

double project_control(double p, double a, double lower, double upper) {
    if (!(a > 0.0)) throw ConfigurationError("projection: regularization a must be positive");
    if (lower > upper) throw ConfigurationError("projection: lower bound exceeds upper bound");
    return std::min(upper, std::max(lower, -p / a));
}

Eigen::VectorXd project_control(const Eigen::VectorXd& p, double a, double lower, double upper) {
    Eigen::VectorXd u(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) u[i] = project_control(p[i], a, lower, upper);
    return u;
}

double ProjectedControl::value(const Discretization& disc, int element, Side side, const Point2& x) const {
    return project_control(field_value(disc, costate, element, side, x), a, lower, upper);
}

Vec2 ProjectedControl::gradient(const Discretization& disc, int element, Side side, const Point2& x) const {
    const double w = -field_value(disc, costate, element, side, x) / a;
    if (w <= lower || w >= upper) return Vec2::Zero();
    return -field_gradient(disc, costate, element, side, x) / a;
}

std::vector<std::pair<Triangle2, ControlRegime>> split_by_bounds(const Triangle2& tri,
                                                                 const std::array<double, 3>& w_vertex,
                                                                 double lower, double upper) {
    std::vector<std::pair<Triangle2, ControlRegime>> out;
    const double wmin = std::min({w_vertex[0], w_vertex[1], w_vertex[2]});
    const double wmax = std::max({w_vertex[0], w_vertex[1], w_vertex[2]});
    if (wmax <= lower) {
        out.emplace_back(tri, ControlRegime::Lower);
        return out;
    }
    if (wmin >= upper) {
        out.emplace_back(tri, ControlRegime::Upper);
        return out;
    }
    if (wmin >= lower && wmax <= upper) {
        out.emplace_back(tri, ControlRegime::Inactive);
        return out;
    }
    const double min_area = 1e-14 * tri.area();
    const Polygon poly{{tri.p[0], w_vertex[0]}, {tri.p[1], w_vertex[1]}, {tri.p[2], w_vertex[2]}};
    Polygon rest = poly;
    if (wmin < lower) {
        fan(clip(poly, lower, 1.0), ControlRegime::Lower, min_area, out);
        rest = clip(rest, lower, -1.0);
    }
    if (wmax > upper) {
        fan(clip(rest, upper, -1.0), ControlRegime::Upper, min_area, out);
        rest = clip(rest, upper, 1.0);
    }
    fan(rest, ControlRegime::Inactive, min_area, out);
    return out;
}

void visit_integration_cells(const Discretization& disc, const ProjectedControl* split,
                             const std::function<void(const IntegrationCell&)>& visit) {
    const bool do_split = split != nullptr && split->bounded();
    auto emit = [&](int e, Side s, const Triangle2& t) {
        if (!do_split) {
            visit(IntegrationCell{e, s, t, ControlRegime::Inactive});
            return;
        }
        std::array<double, 3> w{};
        for (std::size_t i = 0; i < 3; ++i) {
            w[i] = -field_value(disc, split->costate, e, s, t.p[i]) / split->a;
        }
        for (const auto& [piece, regime] : split_by_bounds(t, w, split->lower, split->upper)) {
            visit(IntegrationCell{e, s, piece, regime});
        }
    };
    const int nt = disc.mesh.num_triangles();
    for (int e = 0; e < nt; ++e) {
        if (disc.cuts.is_cut(e)) {
            const CutGeometry& cut = disc.cuts.cut(e);
            for (Side s : {Side::One, Side::Two}) {
                for (const auto& t : cut.sub_tris(s)) emit(e, s, t);
            }
        } else {
            emit(e, disc.cuts.element_side(e), disc.mesh.triangle_points(e));
        }
    }
}

}  // namespace nxocp
