#include "nxocp/examples.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nxocp/errors.hpp"

namespace nxocp {

namespace {

using std::numbers::pi;

// A side-wise smooth field with its Laplacian, used to derive source data.
struct SmoothField {
    SideFunction value;
    SideGradient gradient;
    SideFunction laplacian;

    [[nodiscard]] ExactField exact() const { return ExactField{value, gradient}; }
};

// Assembles f, y_d, g, g_adjoint and y_b from y, p and u.
void derive_data(ManufacturedProblem& pr, const SmoothField& y, const SmoothField& p) {
    const Coefficients alpha = pr.alpha;
    const SideFunction u = pr.u.value;
    pr.y = y.exact();
    pr.p = p.exact();
    pr.f = [alpha, lap = y.laplacian, u](Side s, const Point2& x) { return -alpha(s) * lap(s, x) - u(s, x); };
    pr.y_d = [alpha, lap = p.laplacian, yv = y.value](Side s, const Point2& x) {
        return yv(s, x) + alpha(s) * lap(s, x);
    };
    pr.y_b = y.value;
    const ManufacturedProblem snapshot = pr;
    pr.g = [snapshot](const Point2& x) { return flux_jump(snapshot, snapshot.y, x); };
    pr.g_adjoint = [snapshot](const Point2& x) { return flux_jump(snapshot, snapshot.p, x); };
}

// Straight interface x2 = k x1 + b through the unit square.
ManufacturedProblem example1(double a) {
    const double k = -std::sqrt(3.0) / 3.0;
    const double b = (6.0 + std::sqrt(6.0) - 2.0 * std::sqrt(3.0)) / 6.0;

    ManufacturedProblem pr;
    pr.id = 1;
    pr.name = "example1";
    pr.domain = Rectangle{0.0, 1.0, 0.0, 1.0};
    pr.levelset = LevelSet::line(k, b);
    pr.alpha = Coefficients{1.0, 100.0};
    pr.a = a;
    pr.lambda_coef = 1000.0;
    pr.relative_errors = true;

    const Vec2 grad_phi(-k, 1.0);
    auto phi = [k, b](const Point2& x) { return x.y() - k * x.x() - b; };

    // y_1 = phi cos(x1 x2) / 200 + phi^3,  y_2 = phi cos(x1 x2) / 2.
    // lap(phi c) = -phi c rho^2 - 2 s (x1 - k x2),  lap(phi^3) = 6 phi (1 + k^2).
    SmoothField y;
    y.value = [phi](Side s, const Point2& x) {
        const double f = phi(x);
        const double c = std::cos(x.x() * x.y());
        return s == Side::One ? f * c / 200.0 + f * f * f : f * c / 2.0;
    };
    y.gradient = [phi, grad_phi](Side s, const Point2& x) -> Vec2 {
        const double f = phi(x);
        const double c = std::cos(x.x() * x.y());
        const double sn = std::sin(x.x() * x.y());
        const Vec2 grad_fc = c * grad_phi - f * sn * Vec2(x.y(), x.x());
        return s == Side::One ? Vec2(grad_fc / 200.0 + 3.0 * f * f * grad_phi) : Vec2(grad_fc / 2.0);
    };
    y.laplacian = [phi, k](Side s, const Point2& x) {
        const double f = phi(x);
        const double c = std::cos(x.x() * x.y());
        const double sn = std::sin(x.x() * x.y());
        const double rho2 = x.squaredNorm();
        const double lap_fc = -f * c * rho2 - 2.0 * sn * (x.x() - k * x.y());
        return s == Side::One ? lap_fc / 200.0 + 6.0 * f * (1.0 + k * k) : lap_fc / 2.0;
    };

    // z = phi q sin(x1 x2) with q = x1(x1-1) x2(x2-1); u_1 = z, u_2 = 100 z.
    struct ZTerms {
        double value;
        Vec2 gradient;
        double laplacian;
    };
    auto z_terms = [phi, grad_phi](const Point2& x) {
        const double x1 = x.x();
        const double x2 = x.y();
        const double f = phi(x);
        const double aa = x1 * (x1 - 1.0);
        const double bb = x2 * (x2 - 1.0);
        const double q = aa * bb;
        const Vec2 grad_q((2.0 * x1 - 1.0) * bb, aa * (2.0 * x2 - 1.0));
        const double lap_q = 2.0 * bb + 2.0 * aa;
        const double sn = std::sin(x1 * x2);
        const double c = std::cos(x1 * x2);
        const Vec2 grad_s = c * Vec2(x2, x1);
        const double lap_s = -sn * x.squaredNorm();
        const double w = q * sn;
        const Vec2 grad_w = sn * grad_q + q * grad_s;
        const double lap_w = q * lap_s + 2.0 * grad_q.dot(grad_s) + sn * lap_q;
        return ZTerms{f * w, w * grad_phi + f * grad_w, f * lap_w + 2.0 * grad_phi.dot(grad_w)};
    };
    auto scale = [](Side s) { return s == Side::One ? 1.0 : 100.0; };

    pr.u.value = [z_terms, scale](Side s, const Point2& x) { return scale(s) * z_terms(x).value; };
    pr.u.gradient = [z_terms, scale](Side s, const Point2& x) -> Vec2 { return scale(s) * z_terms(x).gradient; };

    SmoothField p;
    p.value = [z_terms, scale, a](Side s, const Point2& x) { return -a * scale(s) * z_terms(x).value; };
    p.gradient = [z_terms, scale, a](Side s, const Point2& x) -> Vec2 { return -a * scale(s) * z_terms(x).gradient; };
    p.laplacian = [z_terms, scale, a](Side s, const Point2& x) { return -a * scale(s) * z_terms(x).laplacian; };

    derive_data(pr, y, p);
    return pr;
}

// Q = (rho^2 - r^2)(x1^2 - 1)(x2^2 - 1) and its derivatives.
struct QTerms {
    double value;
    Vec2 gradient;
    double laplacian;
};

QTerms q_terms(const Point2& x, double r) {
    const double x1 = x.x();
    const double x2 = x.y();
    const double psi = x.squaredNorm() - r * r;
    const double aa = x1 * x1 - 1.0;
    const double bb = x2 * x2 - 1.0;
    return QTerms{psi * aa * bb, Vec2(2.0 * x1 * bb * (aa + psi), 2.0 * x2 * aa * (bb + psi)),
                  4.0 * aa * bb + 2.0 * psi * (aa + bb) + 8.0 * (x1 * x1 * bb + x2 * x2 * aa)};
}

// Common part of the circle examples: rho^3 / alpha_m plus the constant
// making y continuous at rho = r.
SmoothField radial_state(const Coefficients& alpha, double r) {
    const double shift = (1.0 / alpha.alpha1 - 1.0 / alpha.alpha2) * r * r * r;
    SmoothField y;
    y.value = [alpha, shift](Side s, const Point2& x) {
        const double rho = x.norm();
        return rho * rho * rho / alpha(s) + (s == Side::Two ? shift : 0.0);
    };
    y.gradient = [alpha](Side s, const Point2& x) -> Vec2 { return 3.0 * x.norm() * x / alpha(s); };
    y.laplacian = [alpha](Side s, const Point2& x) { return 9.0 * x.norm() / alpha(s); };
    return y;
}

// p = -5 a Q / alpha_m.
SmoothField circle_costate(const Coefficients& alpha, double r, double a) {
    SmoothField p;
    p.value = [alpha, r, a](Side s, const Point2& x) { return -5.0 * a * q_terms(x, r).value / alpha(s); };
    p.gradient = [alpha, r, a](Side s, const Point2& x) -> Vec2 {
        return -5.0 * a * q_terms(x, r).gradient / alpha(s);
    };
    p.laplacian = [alpha, r, a](Side s, const Point2& x) { return -5.0 * a * q_terms(x, r).laplacian / alpha(s); };
    return p;
}

ManufacturedProblem circle_base(int id, double r, const Coefficients& alpha, double a) {
    ManufacturedProblem pr;
    pr.id = id;
    pr.name = "example" + std::to_string(id);
    pr.domain = Rectangle{-1.0, 1.0, -1.0, 1.0};
    pr.levelset = LevelSet::circle(Point2::Zero(), r);
    pr.alpha = alpha;
    pr.a = a;
    return pr;
}

// Circle r = sqrt(3)/4, control constrained to [-1/2, 1/2].
ManufacturedProblem example2(double a) {
    const double r = std::sqrt(3.0) / 4.0;
    ManufacturedProblem pr = circle_base(2, r, Coefficients{1.0, 1000.0}, a);
    pr.lower = -0.5;
    pr.upper = 0.5;
    pr.lambda_coef = 5000.0;
    pr.relative_errors = true;

    const Coefficients alpha = pr.alpha;
    const double lo = pr.lower;
    const double hi = pr.upper;
    pr.u.value = [alpha, r, lo, hi](Side s, const Point2& x) {
        return std::clamp(5.0 * q_terms(x, r).value / alpha(s), lo, hi);
    };
    pr.u.gradient = [alpha, r, lo, hi](Side s, const Point2& x) -> Vec2 {
        const QTerms q = q_terms(x, r);
        const double w = 5.0 * q.value / alpha(s);
        if (w <= lo || w >= hi) return Vec2::Zero();
        return 5.0 * q.gradient / alpha(s);
    };

    // y_1 gains -10 psi sin(x1 x2); lap(psi s) = 4 s + 8 c x1 x2 - psi s rho^2.
    SmoothField y = radial_state(alpha, r);
    const SmoothField base = y;
    y.value = [base, r](Side s, const Point2& x) {
        const double v = base.value(s, x);
        if (s == Side::Two) return v;
        return v - 10.0 * (x.squaredNorm() - r * r) * std::sin(x.x() * x.y());
    };
    y.gradient = [base, r](Side s, const Point2& x) -> Vec2 {
        const Vec2 g = base.gradient(s, x);
        if (s == Side::Two) return g;
        const double psi = x.squaredNorm() - r * r;
        const double sn = std::sin(x.x() * x.y());
        const double c = std::cos(x.x() * x.y());
        return g - 10.0 * (2.0 * sn * x + psi * c * Vec2(x.y(), x.x()));
    };
    y.laplacian = [base, r](Side s, const Point2& x) {
        const double l = base.laplacian(s, x);
        if (s == Side::Two) return l;
        const double psi = x.squaredNorm() - r * r;
        const double sn = std::sin(x.x() * x.y());
        const double c = std::cos(x.x() * x.y());
        return l - 10.0 * (4.0 * sn + 8.0 * c * x.x() * x.y() - psi * sn * x.squaredNorm());
    };

    derive_data(pr, y, circle_costate(alpha, r, a));
    return pr;
}

// Circle r = 1/2, unconstrained control u = 5 Q / alpha_m.
ManufacturedProblem example3(double a) {
    const double r = 0.5;
    ManufacturedProblem pr = circle_base(3, r, Coefficients{1.0, 10.0}, a);
    pr.lambda_coef = 10000.0;
    pr.relative_errors = false;

    const Coefficients alpha = pr.alpha;
    pr.u.value = [alpha, r](Side s, const Point2& x) { return 5.0 * q_terms(x, r).value / alpha(s); };
    pr.u.gradient = [alpha, r](Side s, const Point2& x) -> Vec2 { return 5.0 * q_terms(x, r).gradient / alpha(s); };

    derive_data(pr, radial_state(alpha, r), circle_costate(alpha, r, a));
    return pr;
}

// No interface in the unit square: y = cos(pi x1 x2) + x1, u = sin(pi x1) sin(pi x2), p = -a u.
ManufacturedProblem smooth_reference(double a) {
    ManufacturedProblem pr;
    pr.id = 0;
    pr.name = "smooth";
    pr.domain = Rectangle{0.0, 1.0, 0.0, 1.0};
    pr.levelset = LevelSet::line(0.0, 10.0);
    pr.alpha = Coefficients{1.0, 1.0};
    pr.a = a;
    pr.lambda_coef = 10.0;
    pr.relative_errors = true;

    SmoothField y;
    y.value = [](Side, const Point2& x) { return std::cos(pi * x.x() * x.y()) + x.x(); };
    y.gradient = [](Side, const Point2& x) -> Vec2 {
        return -pi * std::sin(pi * x.x() * x.y()) * Vec2(x.y(), x.x()) + Vec2(1.0, 0.0);
    };
    y.laplacian = [](Side, const Point2& x) { return -pi * pi * x.squaredNorm() * std::cos(pi * x.x() * x.y()); };

    auto sine = [](const Point2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
    auto sine_grad = [](const Point2& x) -> Vec2 {
        return pi * Vec2(std::cos(pi * x.x()) * std::sin(pi * x.y()), std::sin(pi * x.x()) * std::cos(pi * x.y()));
    };
    pr.u.value = [sine](Side, const Point2& x) { return sine(x); };
    pr.u.gradient = [sine_grad](Side, const Point2& x) -> Vec2 { return sine_grad(x); };

    SmoothField p;
    p.value = [sine, a](Side, const Point2& x) { return -a * sine(x); };
    p.gradient = [sine_grad, a](Side, const Point2& x) -> Vec2 { return -a * sine_grad(x); };
    p.laplacian = [sine, a](Side, const Point2& x) { return 2.0 * pi * pi * a * sine(x); };

    derive_data(pr, y, p);
    return pr;
}

}  // namespace

OcpProblem ManufacturedProblem::ocp() const {
    OcpProblem out;
    out.alpha = alpha;
    out.a = a;
    out.lower = lower;
    out.upper = upper;
    out.nitsche = nitsche();
    out.f = f;
    out.y_d = y_d;
    out.y_b = y_b;
    out.g = g;
    out.g_adjoint = g_adjoint;
    return out;
}

Discretization ManufacturedProblem::discretize(int n) const { return Discretization(Mesh(domain, n), levelset); }

double flux_jump(const ManufacturedProblem& problem, const ExactField& w, const Point2& x) {
    const Vec2 grad = problem.levelset.gradient(x);
    const double norm = grad.norm();
    if (norm == 0.0) throw GeometryError("level set gradient vanishes on the interface");
    const Vec2 nu = grad / norm;
    return problem.alpha.alpha1 * w.gradient(Side::One, x).dot(nu) -
           problem.alpha.alpha2 * w.gradient(Side::Two, x).dot(nu);
}

ManufacturedProblem build_example(int id, const ExampleOptions& options) {
    if (options.a && !(*options.a > 0.0)) throw ConfigurationError("regularization parameter a must be positive");
    if (options.lambda_coef && !(*options.lambda_coef > 0.0)) {
        throw ConfigurationError("penalty coefficient must be positive");
    }
    ManufacturedProblem pr;
    switch (id) {
    case 0:
        pr = smooth_reference(options.a.value_or(0.01));
        break;
    case 1:
        pr = example1(options.a.value_or(0.01));
        break;
    case 2:
        pr = example2(options.a.value_or(1.0));
        break;
    case 3:
        pr = example3(options.a.value_or(0.01));
        break;
    default:
        throw ConfigurationError("unknown example id " + std::to_string(id) + " (expected 0, 1, 2 or 3)");
    }
    if (options.lambda_coef) pr.lambda_coef = *options.lambda_coef;
    return pr;
}

}  // namespace nxocp
