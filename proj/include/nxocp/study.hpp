#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nxocp/examples.hpp"
#include "nxocp/solver.hpp"

namespace nxocp {

struct FieldErrors {
    double l2 = 0.0;
    /// Broken H1 seminorm.
    double h1 = 0.0;
    /// |||e|||^2 = |e|_1^2 + sum_T h_T ||{d_n e}||^2_Gamma_T + h_T^-1 ||[e]||^2_Gamma_T.
    double triple = 0.0;
};

struct ErrorReport {
    int n = 0;
    double h = 0.0;
    bool relative = true;
    FieldErrors u;
    FieldErrors y;
    FieldErrors p;
};

/// Errors of a discrete optimum against the exact fields of `problem`.
/// Exact fields are evaluated with the side of the discrete interface, and
/// divided by the exact norms when the problem uses relative errors.
ErrorReport compute_errors(const ManufacturedProblem& problem, const Discretization& disc,
                           const OcpSolution& solution);

/// Norms (L2, broken H1, triple) of a field: discrete DOF vector minus an
/// exact field. Either part may be absent.
FieldErrors field_error(const Discretization& disc, const Eigen::VectorXd* discrete, const ExactField* exact);

enum class OcpMethod { Auto, Unconstrained, FixedPoint, SemiSmoothNewton };

struct StudyConfig {
    int example = 1;
    std::vector<int> ns{16, 32, 64, 128, 256};
    std::optional<double> lambda_coef;
    std::optional<double> a;
    /// Replaces the example's bounds; (-inf, inf) removes them.
    std::optional<std::pair<double, double>> bounds;
    /// Auto: fixed point when bounded, block solve otherwise.
    OcpMethod method = OcpMethod::Auto;
    IterationConfig iteration;

    /// Throws ConfigurationError unless every N >= 4 and the list increases.
    void validate() const;
};

struct StudyRow {
    ErrorReport errors;
    int iterations = 0;
    bool converged = true;
    int num_dofs = 0;
    int num_cut = 0;
    double seconds = 0.0;
};

/// The configured example with option and bound overrides applied.
ManufacturedProblem configured_problem(const StudyConfig& config);

/// Solves the discrete optimum on one mesh with the configured method.
OcpSolution solve_problem(const ManufacturedProblem& problem, const Discretization& disc, const StudyConfig& config);

/// One row per N in order. `on_row` runs after every row, e.g. to flush
/// partial output; a failing solve propagates after the completed rows have
/// been reported.
std::vector<StudyRow> run_convergence_study(const StudyConfig& config,
                                            const std::function<void(const StudyRow&)>& on_row = {});

/// log2(coarse / fine); NaN when either is not positive.
double eoc(double coarse, double fine);

/// Error of one field and norm ("u","y","p" by "L2","H1","triple").
double select_error(const ErrorReport& r, const std::string& field, const std::string& norm);

/// CSV N,field,norm,error,eoc with the EOC on the finer row (empty on the first).
void write_errors_csv(const std::vector<StudyRow>& rows, std::ostream& out);

/// Aligned text tables of the L2 and H1 errors with order columns.
void write_table(const std::vector<StudyRow>& rows, bool relative, std::ostream& out);

struct Polyline {
    int curve_id = 0;
    std::vector<Point2> points;
};

/// Value of a scalar field on an integration cell.
using CellFunction = std::function<double(const IntegrationCell&, const Point2&)>;

/// Level curve w = level over the integration mesh, with w interpolated
/// linearly from the cell vertices, chained into polylines.
std::vector<Polyline> extract_contour(const Discretization& disc, const CellFunction& w, double level);

/// Boundary of the active set: curves where -p_h/a reaches a finite bound.
std::vector<Polyline> extract_active_set_boundary(const Discretization& disc, const ProjectedControl& control);

/// The discrete interface as polylines.
std::vector<Polyline> interface_polylines(const Discretization& disc);

/// CSV curve_id,x,y; curve ids are renumbered consecutively from `first_id`.
void write_polylines_csv(const std::vector<Polyline>& curves, std::ostream& out, int first_id = 0,
                         bool header = true);

/// Symmetric Hausdorff distance between the vertex sets of two curve sets.
double hausdorff_distance(const std::vector<Polyline>& a, const std::vector<Polyline>& b);

}  // namespace nxocp
