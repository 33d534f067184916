#pragma once

#include <vector>

#include "nxocp/mesh.hpp"

namespace nxocp {

/// Quadrature points with positive weights.
struct QuadRule {
    std::vector<Point2> points;
    std::vector<double> weights;

    [[nodiscard]] std::size_t size() const { return points.size(); }
    [[nodiscard]] double total_weight() const;

    template <typename F>
    [[nodiscard]] double integrate(F&& f) const {
        double sum = 0.0;
        for (std::size_t q = 0; q < points.size(); ++q) {
            sum += weights[q] * f(points[q]);
        }
        return sum;
    }

    void append(const QuadRule& other);
};

/// Symmetric rule on the reference triangle (0,0),(1,0),(0,1).
/// Weights sum to 1/2. Supported degrees: 2 and 4.
QuadRule reference_triangle_rule(int degree);

/// The reference rule mapped onto `t`, weights scaled by |t|.
QuadRule triangle_rule(const Triangle2& t, int degree);

/// Gauss-Legendre nodes and weights on [-1, 1].
QuadRule gauss_legendre(int n_points);

/// Gauss-Legendre rule on the segment [a, b]; weights sum to |b - a|.
QuadRule segment_quadrature(const Point2& a, const Point2& b, int n_points);

}  // namespace nxocp
