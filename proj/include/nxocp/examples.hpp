#pragma once

#include <functional>
#include <optional>
#include <string>

#include "nxocp/assembly.hpp"
#include "nxocp/interface_geometry.hpp"
#include "nxocp/mesh.hpp"
#include "nxocp/solver.hpp"

namespace nxocp {

using SideGradient = std::function<Vec2(Side, const Point2&)>;

/// A closed-form field given by one smooth extension per side.
struct ExactField {
    SideFunction value;
    SideGradient gradient;
};

/// Manufactured optimal control problem with known optimum (y, p, u).
/// Source data are derived from the strong equations per side:
///   f = -alpha_m lap y_m - u_m,  y_d = y_m + alpha_m lap p_m,
///   g = [alpha d_nu y],  g_adjoint = [alpha d_nu p],  y_b = y on the boundary,
/// with nu = grad(phi)/|grad(phi)| pointing into Omega_2.
struct ManufacturedProblem {
    int id = 0;
    std::string name;
    Rectangle domain;
    LevelSet levelset = LevelSet::line(0.0, 0.0);
    Coefficients alpha{1.0, 1.0};
    double a = 1.0;
    double lower = -kUnbounded;
    double upper = kUnbounded;
    /// lambda * h.
    double lambda_coef = 10.0;
    /// Errors are divided by the exact field norms.
    bool relative_errors = true;

    ExactField y;
    ExactField p;
    ExactField u;

    SideFunction f;
    SideFunction y_d;
    SideFunction y_b;
    PointFunction g;
    PointFunction g_adjoint;

    [[nodiscard]] bool bounded() const { return lower > -kUnbounded || upper < kUnbounded; }
    [[nodiscard]] NitscheParams nitsche() const { return NitscheParams{lambda_coef / alpha.max()}; }
    [[nodiscard]] OcpProblem ocp() const;
    [[nodiscard]] Discretization discretize(int n) const;
};

struct ExampleOptions {
    std::optional<double> a;
    std::optional<double> lambda_coef;
};

/// Examples 1 (straight interface), 2 (circle, box-constrained control) and
/// 3 (circle, unconstrained), plus id 0: a smooth problem without interface
/// for checking plain P1 behaviour. Unknown ids throw ConfigurationError.
ManufacturedProblem build_example(int id, const ExampleOptions& options = {});

/// Interface normal flux jump alpha_1 grad(w_1).nu - alpha_2 grad(w_2).nu at x.
double flux_jump(const ManufacturedProblem& problem, const ExactField& w, const Point2& x);

}  // namespace nxocp
