#include "nxocp/quadrature.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>

#include "nxocp/errors.hpp"

namespace nxocp {

namespace {

struct BaryPoint {
    std::array<double, 3> lambda;
    double weight;  // normalized: weights of a rule sum to one
};

std::vector<BaryPoint> barycentric_rule(int degree) {
    std::vector<BaryPoint> rule;
    auto add_orbit = [&rule](double a, double b, double w) {
        rule.push_back({{a, b, b}, w});
        rule.push_back({{b, a, b}, w});
        rule.push_back({{b, b, a}, w});
    };
    switch (degree) {
    case 2:
        add_orbit(2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0);
        break;
    case 4:
        // Dunavant, 6 points.
        add_orbit(0.10810301816807022736, 0.44594849091596488632, 0.22338158967801146570);
        add_orbit(0.81684757298045851308, 0.09157621350977074346, 0.10995174365532186764);
        break;
    default:
        throw ConfigurationError("quadrature: unsupported triangle rule degree " + std::to_string(degree) +
                                 " (supported: 2, 4)");
    }
    return rule;
}

// Value and derivative of the Legendre polynomial P_n at x.
std::pair<double, double> legendre(int n, double x) {
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    const double dp = n * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

}  // namespace

double QuadRule::total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

void QuadRule::append(const QuadRule& other) {
    points.insert(points.end(), other.points.begin(), other.points.end());
    weights.insert(weights.end(), other.weights.begin(), other.weights.end());
}

QuadRule reference_triangle_rule(int degree) {
    return triangle_rule(Triangle2{{Point2(0, 0), Point2(1, 0), Point2(0, 1)}}, degree);
}

QuadRule triangle_rule(const Triangle2& t, int degree) {
    const auto bary = barycentric_rule(degree);
    const double area = t.area();
    QuadRule out;
    out.points.reserve(bary.size());
    out.weights.reserve(bary.size());
    for (const auto& bp : bary) {
        out.points.push_back(bp.lambda[0] * t.p[0] + bp.lambda[1] * t.p[1] + bp.lambda[2] * t.p[2]);
        out.weights.push_back(bp.weight * area);
    }
    return out;
}

QuadRule gauss_legendre(int n_points) {
    if (n_points < 1) {
        throw ConfigurationError("quadrature: Gauss-Legendre needs at least one point");
    }
    const int n = n_points;
    QuadRule out;
    out.points.resize(static_cast<std::size_t>(n));
    out.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Newton on P_n, starting from the asymptotic root estimate.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        auto [p, dp] = legendre(n, x);
        for (int it = 0; it < 100; ++it) {
            const double dx = p / dp;
            x -= dx;
            std::tie(p, dp) = legendre(n, x);
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(n - 1 - i);
        out.points[lo] = Point2(-x, 0.0);
        out.points[hi] = Point2(x, 0.0);
        out.weights[lo] = w;
        out.weights[hi] = w;
    }
    return out;
}

QuadRule segment_quadrature(const Point2& a, const Point2& b, int n_points) {
    if (n_points < 2) {
        throw ConfigurationError("quadrature: segment rule needs at least two points");
    }
    const QuadRule ref = gauss_legendre(n_points);
    const double half_length = 0.5 * (b - a).norm();
    const Point2 mid = 0.5 * (a + b);
    const Vec2 half_dir = 0.5 * (b - a);
    QuadRule out;
    out.points.reserve(ref.size());
    out.weights.reserve(ref.size());
    for (std::size_t q = 0; q < ref.size(); ++q) {
        out.points.push_back(mid + ref.points[q].x() * half_dir);
        out.weights.push_back(ref.weights[q] * half_length);
    }
    return out;
}

}  // namespace nxocp
