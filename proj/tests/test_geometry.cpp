#include <doctest.h>

#include <cmath>

#include "cutdg/geometry.hpp"

using namespace cutdg;

namespace {

/// Finite-difference derivative oracle, central difference.
Vec2 fd_deriv(const ParametricCurve& c, double s, double h = 1e-6) {
  Vec2 a = c.eval(s - h), b = c.eval(s + h);
  return (b - a) * (0.5 / h);
}

SegmentCurve unit_square_ccw_around_interior() {
  // counterclockwise around the enclosed square [0,1]^2
  std::vector<SegmentCurve::Segment> segs(4);
  segs[0] = {false, {1.0, 0.0}, {}, true};
  segs[1] = {false, {1.0, 1.0}, {}, true};
  segs[2] = {false, {0.0, 1.0}, {}, true};
  segs[3] = {false, {0.0, 0.0}, {}, true};
  return SegmentCurve({0.0, 0.0}, std::move(segs));
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("circle evaluation matches the angular convention") {
  Circle c({0.0, 0.0}, 0.331);
  CHECK(c.eval(0.0).x == doctest::Approx(0.331).epsilon(1e-15));
  CHECK(c.eval(0.0).y == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(c.eval(0.25).x == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(c.eval(0.25).y == doctest::Approx(0.331).epsilon(1e-15));
  CHECK((c.eval(0.0) - c.eval(1.0)).norm() < 1e-15);
  CHECK_THROWS_AS(c.eval(1.5), geometry_error);
  CHECK_THROWS_AS(c.eval(-0.2), geometry_error);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("curve derivatives match finite differences") {
  Circle circ({0.2, -0.1}, 0.7);
  auto bic = make_biconvex(0.5, 0.2, {0.1, 0.3}, 25.0);
  SegmentCurve sq = unit_square_ccw_around_interior();
  for (double s : {0.05, 0.3, 0.6, 0.9}) {
    for (const ParametricCurve* c :
         std::initializer_list<const ParametricCurve*>{&circ, bic.get(), &sq}) {
      Vec2 d = c->deriv(s), f = fd_deriv(*c, s);
      CHECK((d - f).norm() < 1e-6 * (1.0 + d.norm()));
    }
  }
}

TEST_CASE("point classification: circle examples") {
  Circle c({0.0, 0.0}, 0.331);
  std::vector<const ParametricCurve*> cs{&c};
  CHECK(classify_point(cs, {0.0, 0.0}, 2.0) == PointClass::Embedded);
  CHECK(classify_point(cs, {0.9, 0.9}, 2.0) == PointClass::Fluid);
  CHECK(classify_point(cs, {0.331, 0.0}, 2.0) == PointClass::Boundary);
  CHECK(classify_point(cs, {0.331 + 1e-12, 0.0}, 2.0) == PointClass::Boundary);
  // robust arbitrarily close to the curve (outside the boundary band)
  CHECK(classify_point(cs, {0.331 + 1e-9, 0.0}, 2.0) == PointClass::Fluid);
  CHECK(classify_point(cs, {0.331 - 1e-9, 0.0}, 2.0) == PointClass::Embedded);
}

TEST_CASE("classification is independent of traversal direction") {
  // clockwise square: fails validation (orientation convention) but the
  // winding parity classification is identical to the CCW square.
  std::vector<SegmentCurve::Segment> segs(4);
  segs[0] = {false, {0.0, 1.0}, {}, true};
  segs[1] = {false, {1.0, 1.0}, {}, true};
  segs[2] = {false, {1.0, 0.0}, {}, true};
  segs[3] = {false, {0.0, 0.0}, {}, true};
  SegmentCurve cw({0.0, 0.0}, std::move(segs));
  CHECK_THROWS_AS(cw.validate(), geometry_error);
  SegmentCurve ccw = unit_square_ccw_around_interior();
  CHECK_NOTHROW(ccw.validate());
  for (Vec2 p : {Vec2{0.5, 0.5}, Vec2{-0.5, 0.5}, Vec2{0.25, 0.75},
                 Vec2{1.5, 0.0}, Vec2{-0.5, 0.0}}) {
    CHECK(cw.ray_crossings(p) % 2 == ccw.ray_crossings(p) % 2);
  }
  std::vector<const ParametricCurve*> cs{&ccw};
  CHECK(classify_point(cs, {0.5, 0.5}, 1.0) == PointClass::Embedded);
  CHECK(classify_point(cs, {-0.5, 0.0}, 1.0) == PointClass::Fluid);
  CHECK(classify_point(cs, {1.5, 0.0}, 1.0) == PointClass::Fluid);
}

TEST_CASE("biconvex profile geometry") {
  const double chord = 0.5, tau = 0.2;
  auto b = make_biconvex(chord, tau, {0.0, 0.0}, 0.0);
  CHECK_NOTHROW(b->validate());
  // leading edge at s=0, trailing edge at the junction s=0.5
  CHECK(b->eval(0.0).x == doctest::Approx(-0.25).epsilon(1e-13));
  CHECK(b->eval(0.0).y == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(b->eval(0.5).x == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(b->eval(0.5).y == doctest::Approx(0.0).epsilon(1e-13));
  REQUIRE(b->junction_params().size() == 1);
  CHECK(b->junction_params()[0] == doctest::Approx(0.5));
  // max thickness at midchord: s=0.25 is the bottom, s=0.75 the top
  CHECK(b->eval(0.25).y == doctest::Approx(-0.05).epsilon(1e-12));
  CHECK(b->eval(0.75).y == doctest::Approx(0.05).epsilon(1e-12));
  Vec2 lo, hi;
  b->bounding_box(lo, hi);
  CHECK(lo.x == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(hi.x == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(lo.y == doctest::Approx(-0.05).epsilon(1e-12));
  CHECK(hi.y == doctest::Approx(0.05).epsilon(1e-12));
  std::vector<const ParametricCurve*> cs{b.get()};
  CHECK(classify_point(cs, {0.0, 0.0}, 1.0) == PointClass::Embedded);
  CHECK(classify_point(cs, {0.0, 0.06}, 1.0) == PointClass::Fluid);
  CHECK(classify_point(cs, {0.3, 0.0}, 1.0) == PointClass::Fluid);
  CHECK(classify_point(cs, {-0.3, 0.0}, 1.0) == PointClass::Fluid);
  // points on the chord line inside the profile
  CHECK(classify_point(cs, {0.2, 0.0}, 1.0) == PointClass::Embedded);
  CHECK(classify_point(cs, {-0.2, 0.0}, 1.0) == PointClass::Embedded);
}

TEST_CASE("rotated biconvex stays consistent") {
  auto b = make_biconvex(0.5, 0.2, {1.0, 2.0}, 30.0);
  CHECK_NOTHROW(b->validate());
  const double ca = std::cos(M_PI / 6.0), sa = std::sin(M_PI / 6.0);
  Vec2 le = b->eval(0.0);
  CHECK(le.x == doctest::Approx(1.0 - 0.25 * ca).epsilon(1e-12));
  CHECK(le.y == doctest::Approx(2.0 - 0.25 * sa).epsilon(1e-12));
  std::vector<const ParametricCurve*> cs{b.get()};
  CHECK(classify_point(cs, {1.0, 2.0}, 1.0) == PointClass::Embedded);
}

TEST_CASE("grid intersections of the reference circle") {
  BackgroundGrid grid{-1.0, 1.0, -1.0, 1.0, 16, 16};
  Circle c({0.0, 0.0}, 0.331);
  auto recs = find_grid_intersections(c, grid);
  // interior lines at multiples of 0.125; |k*0.125| < 0.331 for k in
  // {-2,...,2}: 5 vertical and 5 horizontal lines, 2 crossings each.
  CHECK(recs.size() == 20);
  for (size_t k = 0; k < recs.size(); ++k) {
    const auto& r = recs[k];
    // point on the circle
    CHECK(std::abs(r.point.x * r.point.x + r.point.y * r.point.y -
                   0.331 * 0.331) < 1e-10);
    // crossed coordinate exactly on its grid line
    if (r.axis == GridAxis::X)
      CHECK(r.point.x == grid.xline(r.index));
    else
      CHECK(r.point.y == grid.yline(r.index));
    // consistency of s with the point
    CHECK((c.eval(r.s) - r.point).norm() < 1e-11);
    if (k > 0) CHECK(recs[k].s > recs[k - 1].s);
  }
  // closed-form oracle: crossings with the line x = 0.25
  std::vector<double> ys;
  for (const auto& r : recs)
    if (r.axis == GridAxis::X && grid.xline(r.index) == 0.25)
      ys.push_back(r.point.y);
  REQUIRE(ys.size() == 2);
  std::sort(ys.begin(), ys.end());
  const double y_exact = std::sqrt(0.331 * 0.331 - 0.25 * 0.25);
  CHECK(ys[0] == doctest::Approx(-y_exact).epsilon(1e-11));
  CHECK(ys[1] == doctest::Approx(y_exact).epsilon(1e-11));
}

TEST_CASE("a circle inside one background cell produces no intersections") {
  BackgroundGrid grid{-1.0, 1.0, -1.0, 1.0, 4, 4};
  Circle c({0.25, 0.25}, 0.2);  // strictly inside cell [0,0.5]x[0,0.5]
  CHECK(find_grid_intersections(c, grid).empty());
}

TEST_CASE("degenerate cuts are rejected") {
  BackgroundGrid grid{-1.0, 1.0, -1.0, 1.0, 5, 5};
  // tangent to the interior line x=0.2 at (0.2, 0.0123): not near a node
  Circle tangent({-0.03, 0.0123}, 0.23);
  CHECK_THROWS_AS(find_grid_intersections(tangent, grid),
                  geometry_error);
  // passes exactly through the grid node (0.25, 0)
  BackgroundGrid g16{-1.0, 1.0, -1.0, 1.0, 16, 16};
  Circle through_node({0.0, 0.0}, 0.25);
  CHECK_THROWS_AS(find_grid_intersections(through_node, g16), geometry_error);
}

TEST_CASE("stop merging and curve splitting") {
  using P = std::pair<double, double>;
  // spec examples: {0, 0.5} and the four quarter arcs
  auto segs = split_curve_at_stops(
      {{0.0, StopTag::Junction}, {0.5, StopTag::Junction}});
  REQUIRE(segs.size() == 2);
  CHECK(segs[0] == P{0.0, 0.5});
  CHECK(segs[1] == P{0.5, 1.0});
  segs = split_curve_at_stops({{0.0, StopTag::Junction},
                               {0.25, StopTag::Junction},
                               {0.5, StopTag::Junction},
                               {0.75, StopTag::Junction}});
  CHECK(segs.size() == 4);
  // no stops: whole curve
  segs = split_curve_at_stops({});
  REQUIRE(segs.size() == 1);
  CHECK(segs[0] == P{0.0, 1.0});
  // stops not containing 0: wrap segment, lengths still sum to 1
  segs = split_curve_at_stops(
      {{0.3, StopTag::GridIntersection}, {0.7, StopTag::GridIntersection}});
  REQUIRE(segs.size() == 2);
  CHECK(segs[1].second == doctest::Approx(1.3));
  double total = 0.0;
  for (auto& sg : segs) total += sg.second - sg.first;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));

  // merging: duplicates within 1e-12 collapse, intersection tags win
  auto merged = merge_stops({{0.5, StopTag::Junction},
                             {0.5 + 5e-13, StopTag::GridIntersection},
                             {0.2, StopTag::UserSubinterval}});
  REQUIRE(merged.size() == 2);
  CHECK(merged[0].s == doctest::Approx(0.2));
  CHECK(merged[1].tag == StopTag::GridIntersection);
  // cyclic merge: a stop just below 1 merges with s=0
  merged = merge_stops(
      {{0.0, StopTag::Junction}, {1.0 - 5e-13, StopTag::GridIntersection}});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].s == doctest::Approx(0.0));
  CHECK(merged[0].tag == StopTag::GridIntersection);

  // splitting counts match intersection counts when 0 is not a stop
  BackgroundGrid grid{-1.0, 1.0, -1.0, 1.0, 16, 16};
  Circle c({0.0, 0.0}, 0.331);
  auto recs = find_grid_intersections(c, grid);
  std::vector<StopPoint> stops;
  for (const auto& r : recs) stops.push_back({r.s, StopTag::GridIntersection});
  auto iv = split_curve_at_stops(merge_stops(stops));
  CHECK(iv.size() == recs.size());
}

TEST_CASE("disjointness and nesting checks") {
  Circle a({0.0, 0.0}, 0.3);
  Circle b({1.0, 0.0}, 0.3);
  Circle inner({0.0, 0.0}, 0.1);
  Circle close({0.65, 0.0}, 0.3);
  std::vector<const ParametricCurve*> ok{&a, &b};
  CHECK_NOTHROW(check_curves_disjoint(ok, 0.01));
  std::vector<const ParametricCurve*> nested{&a, &inner};
  CHECK_THROWS_AS(check_curves_disjoint(nested, 0.01), geometry_error);
  std::vector<const ParametricCurve*> near{&a, &close};
  CHECK_THROWS_AS(check_curves_disjoint(near, 0.1), geometry_error);
}

TEST_CASE("self-intersecting curves are rejected") {
  // figure-eight-like bowtie from line segments
  std::vector<SegmentCurve::Segment> segs(4);
  segs[0] = {false, {1.0, 1.0}, {}, true};
  segs[1] = {false, {1.0, 0.0}, {}, true};
  segs[2] = {false, {0.0, 1.0}, {}, true};
  segs[3] = {false, {0.0, 0.0}, {}, true};
  SegmentCurve bowtie({0.0, 0.0}, std::move(segs));
  CHECK_THROWS_AS(bowtie.validate(), geometry_error);
}

}  // TEST_SUITE
