#include "nxocp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "nxocp/errors.hpp"

namespace nxocp {

double signed_area(const Point2& a, const Point2& b, const Point2& c) {
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

double triangle_area(const Point2& a, const Point2& b, const Point2& c) {
    return std::abs(signed_area(a, b, c));
}

double Triangle2::area() const { return triangle_area(p[0], p[1], p[2]); }

double Triangle2::diameter() const {
    return std::max({(p[0] - p[1]).norm(), (p[1] - p[2]).norm(), (p[2] - p[0]).norm()});
}

std::array<double, 3> barycentric(const Triangle2& t, const Point2& x) {
    const double total = signed_area(t.p[0], t.p[1], t.p[2]);
    const double l0 = signed_area(x, t.p[1], t.p[2]) / total;
    const double l1 = signed_area(t.p[0], x, t.p[2]) / total;
    return {l0, l1, 1.0 - l0 - l1};
}

std::array<Vec2, 3> barycentric_gradients(const Triangle2& t) {
    const auto& [p0, p1, p2] = t.p;
    const double two_area = 2.0 * signed_area(p0, p1, p2);
    return {Vec2((p1.y() - p2.y()) / two_area, (p2.x() - p1.x()) / two_area),
            Vec2((p2.y() - p0.y()) / two_area, (p0.x() - p2.x()) / two_area),
            Vec2((p0.y() - p1.y()) / two_area, (p1.x() - p0.x()) / two_area)};
}

Mesh::Mesh(const Rectangle& domain, int n) : domain_(domain), n_(n) {
    if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0)) {
        throw ConfigurationError("mesh: rectangle must satisfy x1 > x0 and y1 > y0");
    }
    if (n < 2) {
        throw ConfigurationError("mesh: subdivision count must be at least 2, got " + std::to_string(n));
    }
    const int nv = n + 1;
    const double dx = (domain.x1 - domain.x0) / n;
    const double dy = (domain.y1 - domain.y0) / n;
    h_ = std::hypot(dx, dy);

    vertices_.reserve(static_cast<std::size_t>(nv) * nv);
    boundary_.reserve(static_cast<std::size_t>(nv) * nv);
    for (int j = 0; j < nv; ++j) {
        for (int i = 0; i < nv; ++i) {
            // Snap the last row/column onto the rectangle edge exactly.
            const double x = (i == n) ? domain.x1 : domain.x0 + i * dx;
            const double y = (j == n) ? domain.y1 : domain.y0 + j * dy;
            vertices_.emplace_back(x, y);
            boundary_.push_back(static_cast<char>(i == 0 || j == 0 || i == n || j == n));
        }
    }

    triangles_.reserve(2 * static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int ll = j * nv + i;
            const int lr = ll + 1;
            const int ul = ll + nv;
            const int ur = ul + 1;
            triangles_.push_back({ll, lr, ur});
            triangles_.push_back({ll, ur, ul});
        }
    }
}

Triangle2 Mesh::triangle_points(int t) const {
    const auto& tri = triangle(t);
    return Triangle2{{vertex(tri[0]), vertex(tri[1]), vertex(tri[2])}};
}

std::vector<std::array<int, 2>> Mesh::edges() const {
    std::vector<std::array<int, 2>> out;
    out.reserve(triangles_.size() * 3);
    for (const auto& t : triangles_) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[static_cast<std::size_t>(k)];
            const int b = t[static_cast<std::size_t>((k + 1) % 3)];
            out.push_back({std::min(a, b), std::max(a, b)});
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Mesh build_uniform_mesh(const Rectangle& domain, int n) { return Mesh(domain, n); }

void write_mesh_csv(const Mesh& mesh, std::ostream& vertices_out, std::ostream& triangles_out) {
    const auto old_flags = vertices_out.flags();
    const auto old_precision = vertices_out.precision();
    vertices_out << std::scientific;
    vertices_out.precision(17);
    vertices_out << "id,x,y,boundary\n";
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        vertices_out << v << ',' << mesh.vertex(v).x() << ',' << mesh.vertex(v).y() << ','
                     << (mesh.is_boundary_vertex(v) ? 1 : 0) << '\n';
    }
    vertices_out.flags(old_flags);
    vertices_out.precision(old_precision);

    triangles_out << "id,v0,v1,v2\n";
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        triangles_out << t << ',' << tri[0] << ',' << tri[1] << ',' << tri[2] << '\n';
    }
}

}  // namespace nxocp
