#include "cutdg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cutdg {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double mod_two_pi(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r;
}

/// Internal circular-arc piece in world coordinates. Angles follow atan2;
/// dth is the signed sweep from th0. Endpoint coordinates are stored so
/// that adjacent pieces share bitwise-identical junction points.
struct ArcPiece {
  Vec2 center;
  double r = 0.0;
  double th0 = 0.0;
  double dth = 0.0;
  Vec2 a, b;
};

/// Ray-crossing count for a horizontal ray from p toward +x against an arc,
/// using the standard half-open [ylow, yhigh) bracket on y-monotone
/// sub-arcs. This makes shared junction points count exactly once for
/// through-going traversals and exactly 0 or 2 at local y extrema.
int arc_ray_crossings(const ArcPiece& A, const Vec2& p) {
  const double dir = (A.dth >= 0.0) ? 1.0 : -1.0;
  const double sweep = std::abs(A.dth);
  // Critical angles (cos th = 0) strictly inside the sweep, in traversal
  // order, each paired with its exact coordinate (cx, cy +- r).
  std::vector<double> offs;   // offsets from th0 along dir
  std::vector<Vec2> pts;      // coordinates at those offsets
  // Walk candidates th = pi/2 + k*pi; their offset along the sweep is
  // mod_two_pi(dir*(th - th0)) extended by full turns for sweeps > 2*pi.
  for (int k = 0; k < 2; ++k) {
    double th = M_PI_2 + k * M_PI;  // pi/2 (top, y=cy+r) or 3pi/2 (bottom)
    double base = mod_two_pi(dir * (th - A.th0));
    for (double off = (base < 1e-14 ? base + kTwoPi : base); off < sweep - 1e-14;
         off += kTwoPi) {
      Vec2 c = (k == 0) ? Vec2{A.center.x, A.center.y + A.r}
                        : Vec2{A.center.x, A.center.y - A.r};
      offs.push_back(off);
      pts.push_back(c);
    }
  }
  // sort split points by offset
  std::vector<int> order(offs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return offs[i] < offs[j]; });

  int count = 0;
  double off_a = 0.0;
  Vec2 pa = A.a;
  auto process = [&](double off_b, const Vec2& pb) {
    const double ya = pa.y, yb = pb.y;
    const bool bracket = (ya <= p.y && p.y < yb) || (yb <= p.y && p.y < ya);
    if (bracket) {
      double dy = p.y - A.center.y;
      double s2 = A.r * A.r - dy * dy;
      if (s2 < 0.0) s2 = 0.0;
      double mid = A.th0 + dir * 0.5 * (off_a + off_b);
      double sgn = (std::cos(mid) >= 0.0) ? 1.0 : -1.0;
      double xc = A.center.x + sgn * std::sqrt(s2);
      if (xc > p.x) ++count;
    }
    off_a = off_b;
    pa = pb;
  };
  for (int idx : order) process(offs[idx], pts[idx]);
  process(sweep, A.b);
  return count;
}

/// Distance from p to the arc; u_out in [0,1] is the fractional position of
/// the nearest point along the sweep.
double arc_distance(const ArcPiece& A, const Vec2& p, double* u_out) {
  Vec2 d = p - A.center;
  double rho = d.norm();
  double best;
  double u;
  if (rho < 1e-300) {
    best = A.r;
    u = 0.0;
  } else {
    double th = std::atan2(d.y, d.x);
    double dir = (A.dth >= 0.0) ? 1.0 : -1.0;
    double off = mod_two_pi(dir * (th - A.th0));
    double sweep = std::abs(A.dth);
    if (off <= sweep) {
      best = std::abs(rho - A.r);
      u = (sweep > 0.0) ? off / sweep : 0.0;
    } else {
      double da = (p - A.a).norm();
      double db = (p - A.b).norm();
      best = std::min(da, db);
      u = (da <= db) ? 0.0 : 1.0;
    }
  }
  if (u_out) *u_out = u;
  return best;
}

int line_ray_crossings(const Vec2& a, const Vec2& b, const Vec2& p) {
  const bool bracket = (a.y <= p.y && p.y < b.y) || (b.y <= p.y && p.y < a.y);
  if (!bracket) return 0;
  double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
  return (xc > p.x) ? 1 : 0;
}

double line_distance(const Vec2& a, const Vec2& b, const Vec2& p, double* u_out) {
  Vec2 ab = b - a;
  double len2 = ab.dot(ab);
  double u = (len2 > 0.0) ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  if (u_out) *u_out = u;
  return (p - (a + ab * u)).norm();
}

}  // namespace

void BackgroundGrid::validate() const {
  if (nx < 1 || ny < 1)
    throw config_error(strf("grid: need nx,ny >= 1 (got %d x %d)", nx, ny));
  if (!(x1 > x0) || !(y1 > y0))
    throw config_error("grid: domain box must have positive extent");
}

// ---------------------------------------------------------------------------
// ParametricCurve base

Vec2 ParametricCurve::eval(double s) const {
  if (s < -1e-12 || s > 1.0 + 1e-12)
    throw geometry_error(strf("curve parameter %.17g outside [0,1]", s));
  return eval_impl(std::clamp(s, 0.0, 1.0));
}

Vec2 ParametricCurve::deriv(double s) const {
  if (s < -1e-12 || s > 1.0 + 1e-12)
    throw geometry_error(strf("curve parameter %.17g outside [0,1]", s));
  return deriv_impl(std::clamp(s, 0.0, 1.0));
}

double ParametricCurve::scale() const {
  Vec2 lo, hi;
  bounding_box(lo, hi);
  return (hi - lo).norm();
}

void ParametricCurve::validate() const {
  const double sc = std::max(scale(), 1e-300);
  if ((eval(0.0) - eval(1.0)).norm() > 1e-12 * sc)
    throw geometry_error("curve is not closed: eval(0) != eval(1)");
  const int n = 1024;
  std::vector<Vec2> pts(n);
  for (int k = 0; k < n; ++k) pts[k] = eval(static_cast<double>(k) / n);
  // sampled self-intersection check (skip near-cyclic neighbors)
  for (int i = 0; i < n; ++i)
    for (int j = i + 3; j < n; ++j) {
      if (i == 0 && j >= n - 3) continue;  // cyclic neighbors of s=0
      if ((pts[i] - pts[j]).norm() <= 1e-8 * sc)
        throw geometry_error(
            strf("curve self-intersects near s=%.6f and s=%.6f",
                 static_cast<double>(i) / n, static_cast<double>(j) / n));
    }
  // orientation: counterclockwise traversal (positive sampled area)
  double area2 = 0.0;
  for (int k = 0; k < n; ++k) area2 += pts[k].cross(pts[(k + 1) % n]);
  if (area2 <= 0.0)
    throw geometry_error(
        "curve must be traversed counterclockwise around the region it removes");
}

// ---------------------------------------------------------------------------
// Circle

Circle::Circle(Vec2 center, double radius) : c_(center), r_(radius) {
  if (!(radius > 0.0)) throw geometry_error("circle: radius must be positive");
}

Vec2 Circle::eval_impl(double s) const {
  return {c_.x + r_ * std::cos(kTwoPi * s), c_.y + r_ * std::sin(kTwoPi * s)};
}

Vec2 Circle::deriv_impl(double s) const {
  return {-kTwoPi * r_ * std::sin(kTwoPi * s), kTwoPi * r_ * std::cos(kTwoPi * s)};
}

int Circle::ray_crossings(const Vec2& p) const {
  ArcPiece A{c_, r_, 0.0, kTwoPi, {c_.x + r_, c_.y}, {c_.x + r_, c_.y}};
  return arc_ray_crossings(A, p);
}

double Circle::distance(const Vec2& p, double* s_out) const {
  Vec2 d = p - c_;
  double rho = d.norm();
  if (s_out) {
    double th = (rho > 1e-300) ? std::atan2(d.y, d.x) : 0.0;
    double s = th / kTwoPi;
    if (s < 0.0) s += 1.0;
    *s_out = s;
  }
  return std::abs(rho - r_);
}

void Circle::bounding_box(Vec2& lo, Vec2& hi) const {
  lo = {c_.x - r_, c_.y - r_};
  hi = {c_.x + r_, c_.y + r_};
}

// ---------------------------------------------------------------------------
// SegmentCurve

SegmentCurve::SegmentCurve(Vec2 start, std::vector<Segment> segments) {
  if (segments.empty()) throw geometry_error("segment curve: no segments");
  Vec2 cur = start;
  for (const Segment& s : segments) {
    Piece p;
    p.is_arc = s.is_arc;
    p.a = cur;
    p.b = s.end;
    if (s.is_arc) {
      p.center = s.center;
      p.r = (p.a - s.center).norm();
      double rb = (p.b - s.center).norm();
      if (!(p.r > 0.0) || std::abs(rb - p.r) > 1e-9 * std::max(p.r, rb))
        throw geometry_error(
            strf("arc segment: endpoints at inconsistent radii %.17g vs %.17g",
                 p.r, rb));
      p.th0 = std::atan2(p.a.y - s.center.y, p.a.x - s.center.x);
      double th1 = std::atan2(p.b.y - s.center.y, p.b.x - s.center.x);
      if (s.ccw) {
        double d = mod_two_pi(th1 - p.th0);
        p.dth = (d < 1e-14) ? kTwoPi : d;  // coincident endpoints: full turn
      } else {
        double d = mod_two_pi(p.th0 - th1);
        p.dth = (d < 1e-14) ? -kTwoPi : -d;
      }
    } else {
      if ((p.b - p.a).norm() <= 0.0)
        throw geometry_error("line segment: zero length");
    }
    pieces_.push_back(p);
    cur = s.end;
  }
  if ((cur - start).norm() > 1e-12 * std::max(scale(), 1e-300))
    throw geometry_error("segment curve: segments do not close the loop");
}

std::vector<double> SegmentCurve::junction_params() const {
  std::vector<double> j;
  const int K = static_cast<int>(pieces_.size());
  for (int k = 1; k < K; ++k) j.push_back(static_cast<double>(k) / K);
  return j;
}

int SegmentCurve::locate(double s, double& u) const {
  const int K = static_cast<int>(pieces_.size());
  int k = std::min(static_cast<int>(s * K), K - 1);
  u = s * K - k;
  return k;
}

Vec2 SegmentCurve::eval_impl(double s) const {
  double u;
  int k = locate(s, u);
  const Piece& p = pieces_[k];
  if (!p.is_arc) return p.a + (p.b - p.a) * u;
  double th = p.th0 + u * p.dth;
  return {p.center.x + p.r * std::cos(th), p.center.y + p.r * std::sin(th)};
}

Vec2 SegmentCurve::deriv_impl(double s) const {
  double u;
  int k = locate(s, u);
  const Piece& p = pieces_[k];
  const double K = static_cast<double>(pieces_.size());
  if (!p.is_arc) return (p.b - p.a) * K;
  double th = p.th0 + u * p.dth;
  return Vec2{-p.r * std::sin(th), p.r * std::cos(th)} * (p.dth * K);
}

int SegmentCurve::ray_crossings(const Vec2& p) const {
  int c = 0;
  for (const Piece& pc : pieces_) {
    if (pc.is_arc) {
      ArcPiece A{pc.center, pc.r, pc.th0, pc.dth, pc.a, pc.b};
      c += arc_ray_crossings(A, p);
    } else {
      c += line_ray_crossings(pc.a, pc.b, p);
    }
  }
  return c;
}

double SegmentCurve::distance(const Vec2& p, double* s_out) const {
  double best = std::numeric_limits<double>::max();
  const int K = static_cast<int>(pieces_.size());
  for (int k = 0; k < K; ++k) {
    const Piece& pc = pieces_[k];
    double u, d;
    if (pc.is_arc) {
      ArcPiece A{pc.center, pc.r, pc.th0, pc.dth, pc.a, pc.b};
      d = arc_distance(A, p, &u);
    } else {
      d = line_distance(pc.a, pc.b, p, &u);
    }
    if (d < best) {
      best = d;
      if (s_out) *s_out = (k + u) / K;
    }
  }
  return best;
}

void SegmentCurve::bounding_box(Vec2& lo, Vec2& hi) const {
  lo = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  hi = {-std::numeric_limits<double>::max(), -std::numeric_limits<double>::max()};
  auto grow = [&](const Vec2& p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  };
  for (const Piece& pc : pieces_) {
    grow(pc.a);
    grow(pc.b);
    if (pc.is_arc) {
      // include axis extremes reached within the sweep
      const double dir = (pc.dth >= 0.0) ? 1.0 : -1.0;
      const double sweep = std::abs(pc.dth);
      const double cand[4] = {0.0, M_PI_2, M_PI, 3.0 * M_PI_2};
      const Vec2 extreme[4] = {{pc.center.x + pc.r, pc.center.y},
                               {pc.center.x, pc.center.y + pc.r},
                               {pc.center.x - pc.r, pc.center.y},
                               {pc.center.x, pc.center.y - pc.r}};
      for (int q = 0; q < 4; ++q) {
        double off = mod_two_pi(dir * (cand[q] - pc.th0));
        if (off <= sweep) grow(extreme[q]);
      }
    }
  }
}

std::unique_ptr<ParametricCurve> make_biconvex(double chord,
                                               double thickness_ratio,
                                               Vec2 center, double angle_deg) {
  if (!(chord > 0.0) || !(thickness_ratio > 0.0) || thickness_ratio >= 1.0)
    throw geometry_error("biconvex: need chord > 0 and thickness ratio in (0,1)");
  const double c = chord, t = thickness_ratio * chord;
  const double R = (c * c + t * t) / (4.0 * t);
  const double ca = std::cos(angle_deg * M_PI / 180.0);
  const double sa = std::sin(angle_deg * M_PI / 180.0);
  auto world = [&](Vec2 local) {
    return Vec2{center.x + ca * local.x - sa * local.y,
                center.y + sa * local.x + ca * local.y};
  };
  Vec2 le = world({-0.5 * c, 0.0});
  Vec2 te = world({0.5 * c, 0.0});
  Vec2 lower_center = world({0.0, R - 0.5 * t});   // lower arc bulges down
  Vec2 upper_center = world({0.0, 0.5 * t - R});   // upper arc bulges up
  std::vector<SegmentCurve::Segment> segs(2);
  segs[0] = {true, te, lower_center, true};  // leading -> trailing along bottom
  segs[1] = {true, le, upper_center, true};  // trailing -> leading along top
  return std::make_unique<SegmentCurve>(le, std::move(segs));
}

// ---------------------------------------------------------------------------
// Classification and intersections

PointClass classify_point(const std::vector<const ParametricCurve*>& curves,
                          const Vec2& p, double domain_scale) {
  for (const ParametricCurve* c : curves)
    if (c->distance(p) < 1e-10 * domain_scale) return PointClass::Boundary;
  for (const ParametricCurve* c : curves)
    if (c->ray_crossings(p) % 2 == 1) return PointClass::Embedded;
  return PointClass::Fluid;
}

namespace {

struct LineFamily {
  GridAxis axis;
  double base, h;   // line i at coordinate base + i*h
  int count;        // interior lines: i in [1, count-1]
  double (*coord)(const Vec2&);
};

double coord_x(const Vec2& p) { return p.x; }
double coord_y(const Vec2& p) { return p.y; }

}  // namespace

std::vector<IntersectionRecord> find_grid_intersections(
    const ParametricCurve& curve, const BackgroundGrid& grid) {
  grid.validate();
  const double sc = grid.scale();
  const double hmin = std::min(grid.hx(), grid.hy());

  // Sample parameters: uniform coarse sampling plus forced junction stops.
  const int M = std::max(64, 8 * (grid.nx + grid.ny));
  std::vector<double> S;
  S.reserve(M + 8);
  for (int k = 0; k <= M; ++k) S.push_back(static_cast<double>(k) / M);
  for (double j : curve.junction_params())
    if (j > 0.0 && j < 1.0) S.push_back(j);
  std::sort(S.begin(), S.end());
  S.erase(std::unique(S.begin(), S.end(),
                      [](double a, double b) { return b - a < 1e-15; }),
          S.end());
  std::vector<Vec2> P(S.size());
  for (size_t k = 0; k < S.size(); ++k) P[k] = curve.eval(S[k]);

  const LineFamily fams[2] = {
      {GridAxis::X, grid.x0, grid.hx(), grid.nx, &coord_x},
      {GridAxis::Y, grid.y0, grid.hy(), grid.ny, &coord_y}};

  std::vector<IntersectionRecord> recs;

  auto record_root = [&](double s, const LineFamily& F, int i) {
    Vec2 p = curve.eval(s);
    IntersectionRecord r;
    r.s = s;
    r.axis = F.axis;
    r.index = i;
    r.point = p;
    const double L = F.base + i * F.h;
    if (F.axis == GridAxis::X)
      r.point.x = L;
    else
      r.point.y = L;
    // reject crossings too close to a grid node
    const LineFamily& G = fams[F.axis == GridAxis::X ? 1 : 0];
    const double v = G.coord(r.point);
    const double j = std::round((v - G.base) / G.h);
    if (std::abs(v - (G.base + j * G.h)) < 1e-10 * hmin)
      throw geometry_error(
          strf("curve crosses a grid line within 1e-10 of a grid node near "
               "(%.12g, %.12g); perturb the grid resolution or the geometry",
               r.point.x, r.point.y));
    recs.push_back(r);
  };

  for (const LineFamily& F : fams) {
    for (size_t k = 0; k + 1 < S.size(); ++k) {
      const double ca = F.coord(P[k]), cb = F.coord(P[k + 1]);
      const double lo = std::min(ca, cb), hi = std::max(ca, cb);
      // widen by one line on each side so index roundoff cannot drop a
      // line an endpoint sits on to machine precision
      int ilo = static_cast<int>(std::floor((lo - F.base) / F.h));
      int ihi = static_cast<int>(std::ceil((hi - F.base) / F.h));
      ilo = std::max(ilo, 1);
      ihi = std::min(ihi, F.count - 1);
      for (int i = ilo; i <= ihi; ++i) {
        const double L = F.base + i * F.h;
        double fa = ca - L, fb = cb - L;
        if (fa == 0.0 && fb == 0.0)
          throw geometry_error(
              strf("curve lies along grid line at coordinate %.12g", L));
        if (fa == 0.0) {
          record_root(S[k], F, i);
        } else if (fa * fb < 0.0) {
          double a = S[k], b = S[k + 1];
          for (int it = 0; it < 80 && b - a > 1e-13; ++it) {
            double m = 0.5 * (a + b);
            double fm = F.coord(curve.eval(m)) - L;
            if (fm == 0.0) {
              a = b = m;
              break;
            }
            ((fa < 0.0) == (fm < 0.0)) ? a = m : b = m;
          }
          record_root(0.5 * (a + b), F, i);
        }
      }
    }

    // Tangency scan: intervals whose endpoints approach a line without a
    // sign change get a golden-section minimization of |f|.
    for (size_t k = 0; k + 1 < S.size(); ++k) {
      const double ca = F.coord(P[k]), cb = F.coord(P[k + 1]);
      // nearest line to the interval
      int i = static_cast<int>(std::round((0.5 * (ca + cb) - F.base) / F.h));
      if (i < 1 || i > F.count - 1) continue;
      const double L = F.base + i * F.h;
      double fa = ca - L, fb = cb - L;
      if (fa * fb < 0.0 || fa == 0.0 || fb == 0.0) continue;
      if (std::min(std::abs(fa), std::abs(fb)) > 0.25 * F.h) continue;
      // golden-section minimization of f^2 on [S[k], S[k+1]]
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double a = S[k], b = S[k + 1];
      double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
      auto f2 = [&](double s) {
        double f = F.coord(curve.eval(s)) - L;
        return f * f;
      };
      double f1 = f2(x1), f2v = f2(x2);
      for (int it = 0; it < 60 && b - a > 1e-13; ++it) {
        if (f1 < f2v) {
          b = x2;
          x2 = x1;
          f2v = f1;
          x1 = b - gr * (b - a);
          f1 = f2(x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2v;
          x2 = a + gr * (b - a);
          f2v = f2(x2);
        }
      }
      double smin = 0.5 * (a + b);
      if (std::sqrt(f2(smin)) < 1e-10 * sc) {
        bool near_root = false;
        for (const IntersectionRecord& r : recs) {
          double d = std::abs(r.s - smin);
          d = std::min(d, 1.0 - d);  // parameter is periodic
          if (d < 1e-9) near_root = true;
        }
        if (!near_root)
          throw geometry_error(
              strf("curve is tangent to the grid line at coordinate %.12g "
                   "near s=%.9f; perturb the grid resolution or the geometry",
                   L, smin));
      }
    }
  }

  std::sort(recs.begin(), recs.end(),
            [](const IntersectionRecord& a, const IntersectionRecord& b) {
              return a.s < b.s;
            });
  // Deduplicate in parameter (cyclically: s=1 is s=0).
  std::vector<IntersectionRecord> out;
  for (const IntersectionRecord& r : recs) {
    if (!out.empty() && r.s - out.back().s < 1e-12) {
      if (r.axis != out.back().axis || r.index != out.back().index)
        throw geometry_error(
            strf("curve crosses two grid lines at nearly the same parameter "
                 "s=%.12f (grid node degeneracy)", r.s));
      continue;
    }
    out.push_back(r);
  }
  if (out.size() >= 2) {
    const IntersectionRecord& first = out.front();
    const IntersectionRecord& last = out.back();
    if (first.s + (1.0 - last.s) < 1e-12) {
      if (last.axis != first.axis || last.index != first.index)
        throw geometry_error(
            "curve crosses two grid lines at nearly the same parameter near "
            "s=0 (grid node degeneracy)");
      out.pop_back();
    }
  }
  return out;
}

std::vector<StopPoint> merge_stops(std::vector<StopPoint> stops) {
  for (StopPoint& s : stops)
    if (s.s >= 1.0 - 1e-12) s.s = std::max(s.s - 1.0, 0.0);  // wrap onto [0,1)
  std::sort(stops.begin(), stops.end(),
            [](const StopPoint& a, const StopPoint& b) { return a.s < b.s; });
  std::vector<StopPoint> out;
  auto better = [](StopTag a, StopTag b) {  // true if a outranks b
    auto rank = [](StopTag t) {
      return t == StopTag::GridIntersection ? 2 : t == StopTag::Junction ? 1 : 0;
    };
    return rank(a) > rank(b);
  };
  for (const StopPoint& s : stops) {
    if (!out.empty() && s.s - out.back().s < 1e-12) {
      if (better(s.tag, out.back().tag)) out.back() = s;
      continue;
    }
    out.push_back(s);
  }
  // cyclic merge of a stop just below 1 with one at/near 0
  if (out.size() >= 2 && out.front().s + (1.0 - out.back().s) < 1e-12) {
    if (better(out.back().tag, out.front().tag)) {
      out.front().tag = out.back().tag;
    }
    out.pop_back();
  }
  return out;
}

std::vector<std::pair<double, double>> split_curve_at_stops(
    const std::vector<StopPoint>& stops) {
  std::vector<std::pair<double, double>> segs;
  if (stops.empty()) {
    segs.emplace_back(0.0, 1.0);
    return segs;
  }
  for (size_t k = 0; k + 1 < stops.size(); ++k)
    segs.emplace_back(stops[k].s, stops[k + 1].s);
  segs.emplace_back(stops.back().s, stops.front().s + 1.0);
  return segs;
}

void check_curves_disjoint(const std::vector<const ParametricCurve*>& curves,
                           double min_separation) {
  const int n = 256;
  for (size_t i = 0; i < curves.size(); ++i)
    for (size_t j = 0; j < curves.size(); ++j) {
      if (i == j) continue;
      Vec2 probe = curves[j]->eval(0.0);
      if (curves[i]->ray_crossings(probe) % 2 == 1)
        throw geometry_error(
            strf("embedded curves %zu and %zu are nested", i, j));
      if (j < i) continue;
      for (int k = 0; k < n; ++k) {
        Vec2 p = curves[i]->eval(static_cast<double>(k) / n);
        if (curves[j]->distance(p) < min_separation)
          throw geometry_error(
              strf("embedded curves %zu and %zu approach within %.3g",
                   i, j, min_separation));
      }
    }
}

}  // namespace cutdg
