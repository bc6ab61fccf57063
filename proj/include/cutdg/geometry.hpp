#pragma once

#include <memory>
#include <vector>

#include "cutdg/util.hpp"

namespace cutdg {

/// Uniform Cartesian background grid over an axis-aligned box.
struct BackgroundGrid {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  int nx = 1, ny = 1;

  double hx() const { return (x1 - x0) / nx; }
  double hy() const { return (y1 - y0) / ny; }
  double xline(int i) const { return x0 + i * hx(); }
  double yline(int j) const { return y0 + j * hy(); }
  /// Length scale used for geometric tolerances.
  double scale() const { return std::max(x1 - x0, y1 - y0); }
  void validate() const;
};

/// Which family of grid lines an intersection lies on: X means a vertical
/// line x = xline(index), Y a horizontal line y = yline(index).
enum class GridAxis { X, Y };

/// A transversal crossing of an embedded curve with one interior grid line.
struct IntersectionRecord {
  double s = 0.0;    ///< curve parameter of the crossing
  Vec2 point;        ///< crossing location, snapped onto the grid line
  GridAxis axis = GridAxis::X;
  int index = 0;     ///< grid line index within its family
};

enum class StopTag { UserSubinterval, Junction, GridIntersection };

/// A parameter at which the curve is split into face segments.
struct StopPoint {
  double s = 0.0;
  StopTag tag = StopTag::Junction;
};

enum class PointClass { Fluid, Embedded, Boundary };

/// A closed embedded boundary, parameterized on s in [0,1], traversed
/// counterclockwise around the region it removes from the domain.
/// Implementations provide analytic evaluation, derivatives, ray-crossing
/// counts and distances, so point classification is robust arbitrarily
/// close to the curve.
class ParametricCurve {
 public:
  virtual ~ParametricCurve() = default;

  /// Boundary point at parameter s in [0,1] (tiny round-off excursions are
  /// clamped); throws geometry_error otherwise.
  Vec2 eval(double s) const;
  /// Derivative of eval with respect to s.
  Vec2 deriv(double s) const;

  /// Parameters of tangent discontinuities / piece junctions, in (0,1).
  virtual std::vector<double> junction_params() const { return {}; }
  /// Number of crossings of the ray from p toward +x with the curve,
  /// counted with a half-open convention so shared endpoints never double
  /// count. Odd count = p inside the embedded region.
  virtual int ray_crossings(const Vec2& p) const = 0;
  /// Distance from p to the curve; if s_out is non-null it receives the
  /// parameter of (a) nearest point.
  virtual double distance(const Vec2& p, double* s_out = nullptr) const = 0;
  virtual void bounding_box(Vec2& lo, Vec2& hi) const = 0;

  /// Curve size scale (bounding box diagonal), used for tolerances.
  double scale() const;
  /// Checks closure eval(0)=eval(1) and sampled injectivity; throws
  /// geometry_error on failure.
  void validate() const;

 protected:
  virtual Vec2 eval_impl(double s) const = 0;
  virtual Vec2 deriv_impl(double s) const = 0;
};

/// Circle of radius r about c; s=0 at angle 0, counterclockwise.
class Circle : public ParametricCurve {
 public:
  Circle(Vec2 center, double radius);
  int ray_crossings(const Vec2& p) const override;
  double distance(const Vec2& p, double* s_out) const override;
  void bounding_box(Vec2& lo, Vec2& hi) const override;

 protected:
  Vec2 eval_impl(double s) const override;
  Vec2 deriv_impl(double s) const override;

 private:
  Vec2 c_;
  double r_;
};

/// Closed piecewise curve of straight lines and circular arcs. Each segment
/// runs from the previous segment's end point to its own end point; the last
/// end point must close the loop. Parameter is allocated uniformly per
/// segment; junctions at the segment boundaries.
class SegmentCurve : public ParametricCurve {
 public:
  struct Segment {
    bool is_arc = false;
    Vec2 end;     ///< segment end point
    Vec2 center;  ///< arc center (arcs only)
    bool ccw = true;  ///< arc sweep direction (arcs only)
  };

  /// start: first point of the loop; segments: ordered, final end == start.
  SegmentCurve(Vec2 start, std::vector<Segment> segments);
  std::vector<double> junction_params() const override;
  int ray_crossings(const Vec2& p) const override;
  double distance(const Vec2& p, double* s_out) const override;
  void bounding_box(Vec2& lo, Vec2& hi) const override;

 protected:
  Vec2 eval_impl(double s) const override;
  Vec2 deriv_impl(double s) const override;

 private:
  struct Piece {
    bool is_arc;
    Vec2 a, b;          // endpoints
    Vec2 center;        // arcs
    double r = 0.0;     // arcs
    double th0 = 0.0;   // arc start angle
    double dth = 0.0;   // signed sweep
  };
  std::vector<Piece> pieces_;
  int locate(double s, double& u) const;
};

/// Symmetric biconvex profile built from two circular arcs: chord length
/// `chord`, maximum thickness thickness_ratio*chord at midchord, leading
/// edge at s=0, lower arc for s in [0,1/2], upper arc for s in [1/2,1];
/// rotated by angle_deg (counterclockwise) about the midchord point
/// `center`. Traversal is counterclockwise around the enclosed profile.
std::unique_ptr<ParametricCurve> make_biconvex(double chord,
                                               double thickness_ratio,
                                               Vec2 center, double angle_deg);

/// Winding-number classification of a point against a set of disjoint
/// closed curves; Boundary when the distance to any curve is below
/// 1e-10 * domain_scale.
PointClass classify_point(const std::vector<const ParametricCurve*>& curves,
                          const Vec2& p, double domain_scale);

/// All transversal crossings of the curve with interior grid lines, sorted
/// by parameter. Bisection-refined so the crossed coordinate matches the
/// grid line to ~1e-12 of the domain scale, then snapped exactly onto it.
/// Throws geometry_error on tangencies or crossings that pass within
/// 1e-10 * min(hx,hy) of a grid node.
std::vector<IntersectionRecord> find_grid_intersections(
    const ParametricCurve& curve, const BackgroundGrid& grid);

/// Sorts stops ascending and merges duplicates within 1e-12 (cyclically,
/// treating s=1 as s=0). Grid-intersection tags win over junction tags,
/// which win over user tags.
std::vector<StopPoint> merge_stops(std::vector<StopPoint> stops);

/// Consecutive-parameter intervals covering the closed curve. With no stops
/// the single interval [0,1]; otherwise one interval per stop, the last one
/// wrapping past 1 (end = first stop + 1). Interval lengths sum to 1.
std::vector<std::pair<double, double>> split_curve_at_stops(
    const std::vector<StopPoint>& stops);

/// Checks that curves are pairwise disjoint (sampled separation above
/// min_separation) and not nested inside one another; throws geometry_error.
void check_curves_disjoint(const std::vector<const ParametricCurve*>& curves,
                           double min_separation);

}  // namespace cutdg
