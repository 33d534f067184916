#pragma once

#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "nxocp/xfem_space.hpp"

namespace nxocp {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Pointwise projection onto [lower, upper] of -p/a.
/// Throws ConfigurationError if a <= 0 or lower > upper.
double project_control(double p, double a, double lower, double upper);

/// Vectorized form of project_control.
Eigen::VectorXd project_control(const Eigen::VectorXd& p, double a, double lower, double upper);

/// Control induced by a discrete co-state: u_h = clamp(-p_h / a, lower, upper).
struct ProjectedControl {
    Eigen::VectorXd costate;
    double a = 1.0;
    double lower = -kUnbounded;
    double upper = kUnbounded;

    [[nodiscard]] bool bounded() const { return lower > -kUnbounded || upper < kUnbounded; }
    [[nodiscard]] double value(const Discretization& disc, int element, Side side, const Point2& x) const;
    [[nodiscard]] Vec2 gradient(const Discretization& disc, int element, Side side, const Point2& x) const;
};

/// Which branch of the projection is active on an integration cell.
enum class ControlRegime { Lower, Inactive, Upper };

/// Triangle of the numerical integration mesh.
struct IntegrationCell {
    int element = -1;
    Side side = Side::One;
    Triangle2 tri;
    ControlRegime regime = ControlRegime::Inactive;
};

/// Visits the integration mesh: uncut elements whole, cut elements by
/// sub-triangle, and, when `split` is given and bounded, every such triangle
/// further divided along the lines where -p_h/a crosses a bound, so the
/// projected control is linear on each visited cell.
void visit_integration_cells(const Discretization& disc, const ProjectedControl* split,
                             const std::function<void(const IntegrationCell&)>& visit);

/// Splits `tri` (on which `w` is affine with vertex values `w_vertex`) into
/// pieces with w <= lower, lower <= w <= upper and w >= upper.
std::vector<std::pair<Triangle2, ControlRegime>> split_by_bounds(const Triangle2& tri,
                                                                 const std::array<double, 3>& w_vertex,
                                                                 double lower, double upper);

}  // namespace nxocp
