#pragma once

#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "nxocp/mesh.hpp"
#include "nxocp/quadrature.hpp"

namespace nxocp {

/// Subdomain label. Omega_1 is where the level set is negative.
enum class Side : int { One = 1, Two = 2 };

[[nodiscard]] constexpr Side other(Side s) { return s == Side::One ? Side::Two : Side::One; }
[[nodiscard]] constexpr int index(Side s) { return static_cast<int>(s) - 1; }

enum class ElementClass { Interior1, Interior2, Cut };

/// Signed distance-like function describing the interface.
/// phi < 0 in Omega_1, phi > 0 in Omega_2.
class LevelSet {
public:
    using ValueFn = std::function<double(const Point2&)>;
    using GradientFn = std::function<Vec2(const Point2&)>;

    LevelSet(ValueFn value, GradientFn gradient);

    /// phi = y - (slope*x + intercept): Omega_1 lies below the line.
    static LevelSet line(double slope, double intercept);
    /// phi = |x - center|^2 - r^2: Omega_1 is the open disc.
    static LevelSet circle(const Point2& center, double radius);

    [[nodiscard]] double operator()(const Point2& x) const { return value_(x); }
    [[nodiscard]] Vec2 gradient(const Point2& x) const { return gradient_(x); }

    /// Side of a point with the convention phi >= 0 -> Omega_2.
    [[nodiscard]] Side side(const Point2& x) const { return value_(x) < 0.0 ? Side::One : Side::Two; }

private:
    ValueFn value_;
    GradientFn gradient_;
};

/// Vertex values whose magnitude is below this fraction of h count as zero
/// and are assigned to Omega_2.
inline constexpr double kSnapTolerance = 1e-12;

/// Geometry of one element crossed by the interface, with the interface
/// replaced by the straight chord between its edge intersections.
struct CutGeometry {
    int element = -1;
    Point2 q1 = Point2::Zero();
    Point2 q2 = Point2::Zero();
    /// Unit normal of the chord pointing into Omega_1.
    Vec2 normal = Vec2::Zero();
    double k1 = 0.0;
    double k2 = 0.0;
    std::vector<Triangle2> sub_tris_1;
    std::vector<Triangle2> sub_tris_2;

    [[nodiscard]] double segment_length() const { return (q2 - q1).norm(); }
    [[nodiscard]] double k(Side s) const { return s == Side::One ? k1 : k2; }
    [[nodiscard]] const std::vector<Triangle2>& sub_tris(Side s) const {
        return s == Side::One ? sub_tris_1 : sub_tris_2;
    }
};

/// Classification of an element against the level set.
///
/// Vertex values are snapped first. An element is CUT when it has a vertex
/// strictly inside Omega_1 and one strictly inside Omega_2; an element that
/// only touches the interface at snapped vertices is interior to the side of
/// its remaining vertices.
ElementClass classify_element(const Mesh& mesh, const LevelSet& phi, int element);

/// Intersection points, chord normal, area fractions and sub-triangulation.
/// Throws GeometryError if the element is not cut.
CutGeometry compute_cut_geometry(const Mesh& mesh, const LevelSet& phi, int element);

/// Quadrature rules of the given degree (2 or 4) over the two sides.
std::pair<QuadRule, QuadRule> subtriangle_quadrature(const CutGeometry& cut, int degree);

/// Classification and cut geometry for a whole mesh. Immutable.
class CutInfo {
public:
    CutInfo(const Mesh& mesh, const LevelSet& phi);

    [[nodiscard]] ElementClass element_class(int e) const { return classes_[static_cast<std::size_t>(e)]; }
    [[nodiscard]] bool is_cut(int e) const { return element_class(e) == ElementClass::Cut; }
    /// Side of an uncut element. Throws UsageError for cut elements.
    [[nodiscard]] Side element_side(int e) const;
    /// Throws ConsistencyError if `e` has no cut geometry.
    [[nodiscard]] const CutGeometry& cut(int e) const;
    [[nodiscard]] const std::vector<CutGeometry>& cuts() const { return cuts_; }
    [[nodiscard]] int num_cut() const { return static_cast<int>(cuts_.size()); }
    [[nodiscard]] int num_elements() const { return static_cast<int>(classes_.size()); }

    /// Sum of chord lengths.
    [[nodiscard]] double interface_length() const;

private:
    std::vector<ElementClass> classes_;
    std::vector<int> cut_index_;
    std::vector<CutGeometry> cuts_;
};

/// Writes every integration triangle as `element,side,x0,y0,x1,y1,x2,y2`.
void write_integration_mesh_csv(const Mesh& mesh, const CutInfo& cuts, std::ostream& out);

}  // namespace nxocp
