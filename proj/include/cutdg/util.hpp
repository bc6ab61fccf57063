#pragma once

#include <cmath>
#include <cstdarg>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cutdg {

/// Base class for all errors thrown by the library.
struct error : std::runtime_error {
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid or inconsistent user configuration (unknown keys, bad values, ...).
struct config_error : error {
  using error::error;
};

/// Degenerate or unsupported embedded geometry (tangencies, grid-node hits, ...).
struct geometry_error : error {
  using error::error;
};

/// Mesh or operator construction failure (inverted maps, singular mass matrix, ...).
struct build_error : error {
  using error::error;
};

/// A state left the admissible set (non-positive depth, density, or pressure).
/// Carries enough context to locate the offending quadrature point.
struct admissibility_error : error {
  int element = -1;
  int point = -1;
  std::vector<double> state;

  admissibility_error(const std::string& what, int element_, int point_,
                      std::vector<double> state_)
      : error(what), element(element_), point(point_), state(std::move(state_)) {}
};

/// Time integration failure (step size underflow, too many rejections, ...).
struct time_integration_error : error {
  using error::error;
};

/// printf-style formatting into a std::string.
std::string strf(const char* fmt, ...);

/// Compensated (Kahan) accumulator for long sums of mixed-sign terms.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

/// A 2D point/vector with the handful of operations the mesh code needs.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double a) const { return {a * x, a * y}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  /// Rotation by -90 degrees; maps a CCW loop tangent to the outward normal.
  Vec2 rot_cw() const { return {y, -x}; }
  /// Rotation by +90 degrees.
  Vec2 rot_ccw() const { return {-y, x}; }
};

inline Vec2 operator*(double a, const Vec2& v) { return {a * v.x, a * v.y}; }

/// Runs fn(i) for i in [0, n). With nthreads <= 1 the loop runs inline;
/// otherwise work is split into contiguous chunks over a short-lived pool.
/// fn must only write to state owned by iteration i, so results are
/// independent of the thread count.
void parallel_for(int n, int nthreads, const std::function<void(int)>& fn);

}  // namespace cutdg
