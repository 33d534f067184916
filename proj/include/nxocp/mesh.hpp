#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

namespace nxocp {

using Point2 = Eigen::Vector2d;
using Vec2 = Eigen::Vector2d;

/// Axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rectangle {
    double x0 = 0.0;
    double x1 = 1.0;
    double y0 = 0.0;
    double y1 = 1.0;

    [[nodiscard]] double area() const { return (x1 - x0) * (y1 - y0); }
};

/// A physical triangle given by its corner points.
struct Triangle2 {
    std::array<Point2, 3> p;

    [[nodiscard]] double area() const;
    [[nodiscard]] double diameter() const;
    [[nodiscard]] Point2 centroid() const { return (p[0] + p[1] + p[2]) / 3.0; }
};

/// Signed area (positive for counter-clockwise corners).
double signed_area(const Point2& a, const Point2& b, const Point2& c);

/// Half the absolute shoelace value.
double triangle_area(const Point2& a, const Point2& b, const Point2& c);

/// Barycentric coordinates of `x` with respect to `t`.
std::array<double, 3> barycentric(const Triangle2& t, const Point2& x);

/// Gradients of the three barycentric coordinate functions of `t`.
std::array<Vec2, 3> barycentric_gradients(const Triangle2& t);

/// Uniform triangulation of a rectangle. Immutable after construction.
///
/// Vertex (i, j) has index j*(n+1)+i. Every cell is split along its
/// lower-left to upper-right diagonal into two counter-clockwise triangles.
class Mesh {
public:
    Mesh(const Rectangle& domain, int n);

    [[nodiscard]] const Rectangle& domain() const { return domain_; }
    [[nodiscard]] int n() const { return n_; }
    /// Largest triangle diameter (the cell diagonal).
    [[nodiscard]] double h() const { return h_; }

    [[nodiscard]] int num_vertices() const { return static_cast<int>(vertices_.size()); }
    [[nodiscard]] int num_triangles() const { return static_cast<int>(triangles_.size()); }

    [[nodiscard]] const std::vector<Point2>& vertices() const { return vertices_; }
    [[nodiscard]] const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
    [[nodiscard]] const Point2& vertex(int v) const { return vertices_[static_cast<std::size_t>(v)]; }
    [[nodiscard]] const std::array<int, 3>& triangle(int t) const {
        return triangles_[static_cast<std::size_t>(t)];
    }
    [[nodiscard]] Triangle2 triangle_points(int t) const;
    [[nodiscard]] bool is_boundary_vertex(int v) const {
        return boundary_[static_cast<std::size_t>(v)] != 0;
    }
    [[nodiscard]] const std::vector<char>& boundary_vertex_flags() const { return boundary_; }

    /// Unique undirected edges, each as (lower index, higher index).
    [[nodiscard]] std::vector<std::array<int, 2>> edges() const;

private:
    Rectangle domain_;
    int n_;
    double h_;
    std::vector<Point2> vertices_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<char> boundary_;
};

/// Validates its input and returns a uniform mesh with 2n^2 triangles.
Mesh build_uniform_mesh(const Rectangle& domain, int n);

/// Writes the vertex table (id,x,y,boundary) and triangle table (id,v0,v1,v2).
void write_mesh_csv(const Mesh& mesh, std::ostream& vertices_out, std::ostream& triangles_out);

}  // namespace nxocp
