#include "nxocp/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>

#include "nxocp/errors.hpp"
#include "nxocp/quadrature.hpp"

namespace nxocp {

namespace {

struct DiscreteField {
    std::function<double(int, Side, const Point2&)> value;
    std::function<Vec2(int, Side, const Point2&)> gradient;
};

DiscreteField from_coefficients(const Discretization& disc, const Eigen::VectorXd& coeffs) {
    return DiscreteField{
        [&disc, &coeffs](int e, Side s, const Point2& x) { return field_value(disc, coeffs, e, s, x); },
        [&disc, &coeffs](int e, Side s, const Point2& x) { return field_gradient(disc, coeffs, e, s, x); }};
}

DiscreteField from_control(const Discretization& disc, const ProjectedControl& u) {
    return DiscreteField{[&disc, &u](int e, Side s, const Point2& x) { return u.value(disc, e, s, x); },
                         [&disc, &u](int e, Side s, const Point2& x) { return u.gradient(disc, e, s, x); }};
}

FieldErrors norms_of_difference(const Discretization& disc, const DiscreteField* discrete, const ExactField* exact,
                                const ProjectedControl* split) {
    auto value = [&](int e, Side s, const Point2& x) {
        double v = 0.0;
        if (exact != nullptr) v += exact->value(s, x);
        if (discrete != nullptr) v -= discrete->value(e, s, x);
        return v;
    };
    auto gradient = [&](int e, Side s, const Point2& x) -> Vec2 {
        Vec2 g = Vec2::Zero();
        if (exact != nullptr) g += exact->gradient(s, x);
        if (discrete != nullptr) g -= discrete->gradient(e, s, x);
        return g;
    };

    double l2 = 0.0;
    double h1 = 0.0;
    visit_integration_cells(disc, split, [&](const IntegrationCell& c) {
        const QuadRule rule = triangle_rule(c.tri, kVolumeDegree);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double v = value(c.element, c.side, rule.points[q]);
            l2 += rule.weights[q] * v * v;
            h1 += rule.weights[q] * gradient(c.element, c.side, rule.points[q]).squaredNorm();
        }
    });

    double interface = 0.0;
    for (const CutGeometry& cut : disc.cuts.cuts()) {
        const double h_t = disc.mesh.triangle_points(cut.element).diameter();
        const QuadRule rule = segment_quadrature(cut.q1, cut.q2, kInterfacePoints);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Point2& x = rule.points[q];
            const double jump = value(cut.element, Side::One, x) - value(cut.element, Side::Two, x);
            const double avg_flux = cut.k1 * gradient(cut.element, Side::One, x).dot(cut.normal) +
                                    cut.k2 * gradient(cut.element, Side::Two, x).dot(cut.normal);
            interface += rule.weights[q] * (h_t * avg_flux * avg_flux + jump * jump / h_t);
        }
    }
    return FieldErrors{std::sqrt(l2), std::sqrt(h1), std::sqrt(h1 + interface)};
}

FieldErrors divide(const FieldErrors& e, const FieldErrors& ref) {
    auto safe = [](double num, double den) { return den > 0.0 ? num / den : num; };
    return FieldErrors{safe(e.l2, ref.l2), safe(e.h1, ref.h1), safe(e.triple, ref.triple)};
}

std::string format_sci(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17e", v);
    return buf;
}

// Endpoint merging for polyline chaining.
class PointIndex {
public:
    explicit PointIndex(double tol) : tol_(tol) {}

    int insert(const Point2& p) {
        const auto ix = static_cast<long long>(std::floor(p.x() / cell()));
        const auto iy = static_cast<long long>(std::floor(p.y() / cell()));
        for (long long dx = -1; dx <= 1; ++dx) {
            for (long long dy = -1; dy <= 1; ++dy) {
                auto it = bins_.find(key(ix + dx, iy + dy));
                if (it == bins_.end()) continue;
                for (int id : it->second) {
                    if ((points_[static_cast<std::size_t>(id)] - p).norm() <= tol_) return id;
                }
            }
        }
        const int id = static_cast<int>(points_.size());
        points_.push_back(p);
        bins_[key(ix, iy)].push_back(id);
        return id;
    }

    [[nodiscard]] const std::vector<Point2>& points() const { return points_; }

private:
    [[nodiscard]] double cell() const { return 4.0 * tol_; }
    static long long key(long long ix, long long iy) { return ix * 73856093LL ^ iy * 19349663LL; }

    double tol_;
    std::vector<Point2> points_;
    std::unordered_map<long long, std::vector<int>> bins_;
};

std::vector<Polyline> chain_segments(const std::vector<std::pair<Point2, Point2>>& segments, double tol) {
    PointIndex index(tol);
    std::vector<std::pair<int, int>> edges;
    for (const auto& [a, b] : segments) {
        const int ia = index.insert(a);
        const int ib = index.insert(b);
        if (ia != ib) edges.emplace_back(ia, ib);
    }
    const std::size_t nn = index.points().size();
    std::vector<std::vector<int>> incident(nn);
    for (std::size_t k = 0; k < edges.size(); ++k) {
        incident[static_cast<std::size_t>(edges[k].first)].push_back(static_cast<int>(k));
        incident[static_cast<std::size_t>(edges[k].second)].push_back(static_cast<int>(k));
    }
    std::vector<char> used(edges.size(), 0);

    auto walk = [&](int start, Polyline& line) {
        int node = start;
        line.points.push_back(index.points()[static_cast<std::size_t>(node)]);
        while (true) {
            int next_edge = -1;
            for (int k : incident[static_cast<std::size_t>(node)]) {
                if (used[static_cast<std::size_t>(k)] == 0) {
                    next_edge = k;
                    break;
                }
            }
            if (next_edge < 0) break;
            used[static_cast<std::size_t>(next_edge)] = 1;
            const auto& e = edges[static_cast<std::size_t>(next_edge)];
            node = e.first == node ? e.second : e.first;
            line.points.push_back(index.points()[static_cast<std::size_t>(node)]);
        }
    };

    std::vector<Polyline> out;
    // Open chains start at nodes of odd degree; closed loops anywhere.
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t v = 0; v < nn; ++v) {
            const bool odd = incident[v].size() % 2 == 1;
            if (pass == 0 && !odd) continue;
            while (std::any_of(incident[v].begin(), incident[v].end(),
                               [&](int k) { return used[static_cast<std::size_t>(k)] == 0; })) {
                Polyline line;
                line.curve_id = static_cast<int>(out.size());
                walk(static_cast<int>(v), line);
                out.push_back(std::move(line));
            }
        }
    }
    return out;
}

}  // namespace

FieldErrors field_error(const Discretization& disc, const Eigen::VectorXd* discrete, const ExactField* exact) {
    if (discrete == nullptr) return norms_of_difference(disc, nullptr, exact, nullptr);
    const DiscreteField d = from_coefficients(disc, *discrete);
    return norms_of_difference(disc, &d, exact, nullptr);
}

ErrorReport compute_errors(const ManufacturedProblem& problem, const Discretization& disc,
                           const OcpSolution& solution) {
    ErrorReport r;
    r.n = disc.mesh.n();
    r.h = disc.mesh.h();
    r.relative = problem.relative_errors;

    const ProjectedControl control = solution.control();
    const DiscreteField y_h = from_coefficients(disc, solution.Y);
    const DiscreteField p_h = from_coefficients(disc, solution.P);
    const DiscreteField u_h = from_control(disc, control);
    const ProjectedControl* split = control.bounded() ? &control : nullptr;

    r.y = norms_of_difference(disc, &y_h, &problem.y, nullptr);
    r.p = norms_of_difference(disc, &p_h, &problem.p, nullptr);
    r.u = norms_of_difference(disc, &u_h, &problem.u, split);
    if (problem.relative_errors) {
        r.y = divide(r.y, norms_of_difference(disc, nullptr, &problem.y, nullptr));
        r.p = divide(r.p, norms_of_difference(disc, nullptr, &problem.p, nullptr));
        r.u = divide(r.u, norms_of_difference(disc, nullptr, &problem.u, split));
    }
    return r;
}

void StudyConfig::validate() const {
    if (ns.empty()) throw ConfigurationError("empty mesh size list");
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ns[i] < 4) throw ConfigurationError("mesh size N must be at least 4, got " + std::to_string(ns[i]));
        if (i > 0 && ns[i] <= ns[i - 1]) throw ConfigurationError("mesh sizes must be strictly increasing");
    }
    if (bounds && bounds->first > bounds->second) {
        throw ConfigurationError("control lower bound exceeds upper bound");
    }
    if (!(iteration.tol > 0.0) || iteration.max_iter < 1) {
        throw ConfigurationError("tolerance must be positive and max_iter at least 1");
    }
    iteration.linear.validate();
}

ManufacturedProblem configured_problem(const StudyConfig& config) {
    ManufacturedProblem pr = build_example(config.example, ExampleOptions{config.a, config.lambda_coef});
    if (config.bounds) {
        pr.lower = config.bounds->first;
        pr.upper = config.bounds->second;
    }
    return pr;
}

OcpSolution solve_problem(const ManufacturedProblem& problem, const Discretization& disc, const StudyConfig& config) {
    const OcpSystem system(disc, problem.ocp());
    OcpMethod method = config.method;
    if (method == OcpMethod::Auto) method = problem.bounded() ? OcpMethod::FixedPoint : OcpMethod::Unconstrained;
    switch (method) {
    case OcpMethod::Unconstrained:
        if (problem.bounded()) throw ConfigurationError("the block solve requires an unconstrained control");
        return solve_unconstrained_ocp(system, config.iteration.linear);
    case OcpMethod::SemiSmoothNewton:
        return solve_constrained_ssn(system, config.iteration);
    case OcpMethod::FixedPoint:
    case OcpMethod::Auto:
        break;
    }
    return solve_constrained_fixed_point(system, config.iteration);
}

std::vector<StudyRow> run_convergence_study(const StudyConfig& config,
                                            const std::function<void(const StudyRow&)>& on_row) {
    config.validate();
    const ManufacturedProblem problem = configured_problem(config);
    std::vector<StudyRow> rows;
    for (int n : config.ns) {
        const auto start = std::chrono::steady_clock::now();
        const Discretization disc = problem.discretize(n);
        const OcpSolution sol = solve_problem(problem, disc, config);
        StudyRow row;
        row.errors = compute_errors(problem, disc, sol);
        row.iterations = sol.iterations;
        row.converged = sol.converged;
        row.num_dofs = disc.num_dofs();
        row.num_cut = disc.cuts.num_cut();
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rows.push_back(row);
        if (on_row) on_row(row);
    }
    return rows;
}

double eoc(double coarse, double fine) {
    if (!(coarse > 0.0) || !(fine > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::log2(coarse / fine);
}

double select_error(const ErrorReport& r, const std::string& field, const std::string& norm) {
    const FieldErrors* f = nullptr;
    if (field == "u") f = &r.u;
    if (field == "y") f = &r.y;
    if (field == "p") f = &r.p;
    if (f == nullptr) throw ConfigurationError("unknown field '" + field + "'");
    if (norm == "L2") return f->l2;
    if (norm == "H1") return f->h1;
    if (norm == "triple") return f->triple;
    throw ConfigurationError("unknown norm '" + norm + "'");
}

void write_errors_csv(const std::vector<StudyRow>& rows, std::ostream& out) {
    static const char* const kFields[] = {"u", "y", "p"};
    static const char* const kNorms[] = {"L2", "H1", "triple"};
    out << "N,field,norm,error,eoc\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const char* field : kFields) {
            for (const char* norm : kNorms) {
                const double e = select_error(rows[i].errors, field, norm);
                out << rows[i].errors.n << ',' << field << ',' << norm << ',' << format_sci(e) << ',';
                if (i > 0) out << format_sci(eoc(select_error(rows[i - 1].errors, field, norm), e));
                out << '\n';
            }
        }
    }
}

void write_table(const std::vector<StudyRow>& rows, bool relative, std::ostream& out) {
    for (const char* norm : {"L2", "H1"}) {
        const std::string label = std::string(norm) == "L2" ? "||%s-%s_h||_0" : "|%s-%s_h|_1";
        char line[256];
        std::snprintf(line, sizeof(line), "%-5s", "N");
        out << line;
        for (const char* field : {"u", "y", "p"}) {
            char name[64];
            std::snprintf(name, sizeof(name), label.c_str(), field, field);
            std::string head = name;
            if (relative) head += " rel";
            std::snprintf(line, sizeof(line), "  %-16s %-5s", head.c_str(), "order");
            out << line;
        }
        out << '\n';
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::snprintf(line, sizeof(line), "%-5d", rows[i].errors.n);
            out << line;
            for (const char* field : {"u", "y", "p"}) {
                const double e = select_error(rows[i].errors, field, norm);
                std::string order;
                if (i > 0) {
                    char ob[16];
                    std::snprintf(ob, sizeof(ob), "%.2f", eoc(select_error(rows[i - 1].errors, field, norm), e));
                    order = ob;
                }
                std::snprintf(line, sizeof(line), "  %-16.4e %-5s", e, order.c_str());
                out << line;
            }
            out << '\n';
        }
        out << '\n';
    }
}

std::vector<Polyline> extract_contour(const Discretization& disc, const CellFunction& w, double level) {
    std::vector<std::pair<Point2, Point2>> segments;
    visit_integration_cells(disc, nullptr, [&](const IntegrationCell& c) {
        std::array<double, 3> d{};
        for (std::size_t i = 0; i < 3; ++i) d[i] = w(c, c.tri.p[i]) - level;
        std::vector<Point2> hits;
        for (std::size_t i = 0; i < 3; ++i) {
            const std::size_t j = (i + 1) % 3;
            if ((d[i] < 0.0) != (d[j] < 0.0)) {
                const double t = d[i] / (d[i] - d[j]);
                hits.push_back(c.tri.p[i] + t * (c.tri.p[j] - c.tri.p[i]));
            }
        }
        if (hits.size() == 2) segments.emplace_back(hits[0], hits[1]);
    });
    return chain_segments(segments, 1e-9 * disc.mesh.h());
}

std::vector<Polyline> extract_active_set_boundary(const Discretization& disc, const ProjectedControl& control) {
    std::vector<Polyline> out;
    const CellFunction w = [&](const IntegrationCell& c, const Point2& x) {
        return -field_value(disc, control.costate, c.element, c.side, x) / control.a;
    };
    for (double level : {control.lower, control.upper}) {
        if (!std::isfinite(level)) continue;
        for (Polyline& line : extract_contour(disc, w, level)) {
            line.curve_id = static_cast<int>(out.size());
            out.push_back(std::move(line));
        }
    }
    return out;
}

std::vector<Polyline> interface_polylines(const Discretization& disc) {
    std::vector<std::pair<Point2, Point2>> segments;
    for (const CutGeometry& cut : disc.cuts.cuts()) segments.emplace_back(cut.q1, cut.q2);
    return chain_segments(segments, 1e-9 * disc.mesh.h());
}

void write_polylines_csv(const std::vector<Polyline>& curves, std::ostream& out, int first_id, bool header) {
    if (header) out << "curve_id,x,y\n";
    int id = first_id;
    for (const Polyline& line : curves) {
        for (const Point2& p : line.points) out << id << ',' << format_sci(p.x()) << ',' << format_sci(p.y()) << '\n';
        ++id;
    }
}

double hausdorff_distance(const std::vector<Polyline>& a, const std::vector<Polyline>& b) {
    auto directed = [](const std::vector<Polyline>& from, const std::vector<Polyline>& to) {
        double worst = 0.0;
        for (const Polyline& la : from) {
            for (const Point2& p : la.points) {
                double best = std::numeric_limits<double>::infinity();
                for (const Polyline& lb : to) {
                    for (const Point2& q : lb.points) best = std::min(best, (p - q).norm());
                }
                worst = std::max(worst, best);
            }
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

}  // namespace nxocp
