#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cutdg/cut_mesh.hpp"

using namespace cutdg;

namespace {

/// Independent per-triangle area: det J has polynomial degree 2N-2, so a
/// degree-2N reference rule integrates it exactly.
double triangle_area(const TriangleMap& tri, int N) {
  const QuadratureRule ref = reference_rule(RefDomain::Triangle, 2 * N);
  double a = 0.0;
  for (int q = 0; q < ref.size(); ++q)
    a += ref.weights[q] *
         tri.det_jacobian(ref.points[q].x, ref.points[q].y);
  return a;
}

double lens_area(double chord, double tau) {
  const double t = tau * chord;
  const double R = (chord * chord + t * t) / (4.0 * t);
  const double phi = std::atan2(0.5 * chord, R - 0.5 * t);
  const double segment = R * R * phi - 0.5 * chord * (R - 0.5 * t);
  return 2.0 * segment;
}

}  // namespace

TEST_SUITE("mesh") {

TEST_CASE("uncut grid produces only Cartesian elements") {
  BackgroundGrid grid{-1.0, 1.0, -1.0, 1.0, 4, 4};
  CutMesh mesh = build_cut_mesh(grid, {}, 2);
  CHECK(mesh.elements.size() == 16);
  CHECK(mesh.n_cartesian() == 16);
  CHECK(mesh.n_cut() == 0);
  CHECK(mesh.n_removed() == 0);
  CHECK(mesh.faces.size() == 40);  // 5*4 vertical + 4*5 horizontal
  CHECK(mesh.fluid_area() == doctest::Approx(4.0).epsilon(1e-14));
  int tagged[4] = {0, 0, 0, 0};
  for (const Face& f : mesh.faces) {
    CHECK(f.kind == FaceKind::Cartesian);
    if (f.boundary == "left") ++tagged[0];
    if (f.boundary == "right") ++tagged[1];
    if (f.boundary == "bottom") ++tagged[2];
    if (f.boundary == "top") ++tagged[3];
  }
  for (int k = 0; k < 4; ++k) CHECK(tagged[k] == 4);
  auto table = face_connectivity(mesh);
  CHECK(table.size() == mesh.faces.size());
  for (const Element& e : mesh.elements) {
    CHECK(e.loop.size() == 4);
    const Vec2 r = mesh.loop_normal_integral(e);
    CHECK(std::abs(r.x) < 1e-13);
    CHECK(std::abs(r.y) < 1e-13);
    // tensor volume rule integrates the cell area exactly
    CHECK(e.vol.total_weight() == doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("circle cut mesh: area, closure, connectivity") {
  BackgroundGrid grid{-1.0, 1.0, -1.0, 1.0, 16, 16};
  Circle circ({0.0, 0.0}, 0.331);
  CutMesh mesh = build_cut_mesh(grid, {&circ}, 4);

  CHECK(mesh.n_cut() > 0);
  CHECK(mesh.n_removed() > 0);
  // cell containing the origin is fully embedded
  CHECK(mesh.cell_class[mesh.cell_index(8, 8)] == CellClass::Removed);

  const double exact = 4.0 - M_PI * 0.331 * 0.331;
  CHECK(std::abs(mesh.fluid_area() - exact) / exact < 1e-8);

  double max_closure = 0.0;
  for (const Element& e : mesh.elements) {
    const Vec2 r = mesh.loop_normal_integral(e);
    max_closure = std::max(max_closure, std::max(std::abs(r.x),
                                                 std::abs(r.y)));
  }
  CHECK(max_closure <= 1e-10);

  face_connectivity(mesh);  // throws on any structural defect

  for (const Element& e : mesh.elements) {
    if (e.cartesian) continue;
    CHECK(e.tris.size() >= 2);
    CHECK(e.loop.size() >= 3);
    // independent per-triangle areas reproduce the element volume
    double sum = 0.0;
    for (const TriangleMap& t : e.tris) sum += triangle_area(t, mesh.order);
    CHECK(std::abs(sum - e.volume) <= 1e-10 * e.volume);
    // pruned rule preserves the constant moment
    CHECK(std::abs(e.vol.total_weight() - e.volume) <= 1e-10 * e.volume);
    CHECK(static_cast<int>(e.vol.points.size()) <= 36 + 1);  // dim P^7 + 1
    for (double w : e.vol.weights) CHECK(w >= 0.0);
  }

  int n_curved = 0;
  for (const Face& f : mesh.faces) {
    if (f.kind != FaceKind::CutCurved) continue;
    ++n_curved;
    CHECK(f.boundary == "embedded");
    CHECK(f.curve == 0);
    CHECK(std::abs(f.a.norm() - 0.331) < 1e-10);
    CHECK(std::abs(f.b.norm() - 0.331) < 1e-10);
    // exact-geometry rule integrates the arc length R*(angle) exactly
    const FaceRule tr = face_rule(mesh, f, 10);
    const double arc = 2.0 * M_PI * 0.331 * (f.s1 - f.s0);
    CHECK(std::abs(tr.total_weight() - arc) < 1e-12);
    // the stored rule integrates the degree-N side; close but not exact
    CHECK(std::abs(f.rule.total_weight() - arc) < 1e-6 * arc);
    // normals on the stored rule point away from the fluid: outward from
    // the element means toward the circle center here
    for (int q = 0; q < f.rule.size(); ++q) {
      CHECK(std::abs(f.rule.normals[q].norm() - 1.0) < 1e-12);
      CHECK(f.rule.normals[q].dot(f.rule.points[q]) < 0.0);
    }
  }
  CHECK(n_curved > 0);
}

TEST_CASE("curved subtriangle sides interpolate the circle") {
  BackgroundGrid grid{-1.0, 1.0, -1.0, 1.0, 16, 16};
  Circle circ({0.0, 0.0}, 0.331);
  CutMesh mesh = build_cut_mesh(grid, {&circ}, 3);
  const std::vector<double> tk = side_interpolation_params(3);
  int checked = 0;
  for (const Element& e : mesh.elements) {
    if (e.cartesian) continue;
    // fan subtriangulation: triangle k belongs to loop face k
    REQUIRE(e.tris.size() == e.loop.size());
    for (size_t k = 0; k < e.loop.size(); ++k) {
      const Face& f = mesh.faces[e.loop[k].face];
      if (f.kind != FaceKind::CutCurved) continue;
      const TriangleMap& tri = e.tris[k];
      for (double t : tk) {
        CHECK(std::abs(tri.side_point(t).norm() - 0.331) < 1e-11);
      }
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("triangle map basics") {
  // affine map: constant Jacobian equal to twice the area
  TriangleMap tri = build_triangle_map({0.0, 0.0}, {{1.0, 0.0}, {0.0, 1.0}},
                                       3);
  CHECK(tri.affine());
  for (double r : {0.0, 0.3, 0.7})
    for (double t : {0.0, 0.2, 0.3}) {
      CHECK(tri.det_jacobian(r, t) == doctest::Approx(1.0).epsilon(1e-15));
    }
  CHECK((tri.map(1.0, 0.0) - Vec2{1.0, 0.0}).norm() < 1e-15);
  CHECK((tri.map(0.0, 1.0) - Vec2{0.0, 1.0}).norm() < 1e-15);
  CHECK((tri.map(0.0, 0.0) - Vec2{0.0, 0.0}).norm() < 1e-15);

  // straight sides stay affine for curved maps: r=0 side
  Circle circ({0.0, 0.0}, 0.331);
  std::vector<double> tk = side_interpolation_params(4);
  std::vector<Vec2> smp(5);
  for (int k = 0; k <= 4; ++k)
    smp[k] = circ.eval(0.05 + 0.07 * tk[k]);
  TriangleMap ct = build_triangle_map({0.0, 0.0}, smp, 4);
  CHECK(!ct.affine());
  for (double t : {0.25, 0.5, 0.9}) {
    const Vec2 p = ct.map(0.0, t);
    const Vec2 lin = ct.a * (1.0 - t) + ct.v2 * t;
    CHECK((p - lin).norm() < 1e-15);
  }

  // degenerate inputs
  CHECK_THROWS_AS(build_triangle_map({0.0, 0.0}, {{1.0, 1.0}, {2.0, 2.0}}, 2),
                  build_error);
  CHECK_THROWS_AS(build_triangle_map({0.0, 0.0}, {{0.0, 1.0}, {1.0, 0.0}}, 2),
                  build_error);  // inverted orientation
}

TEST_CASE("curved side interpolation superconverges") {
  Circle circ({0.0, 0.0}, 0.331);
  auto side_error = [&](double span) {
    std::vector<double> tk = side_interpolation_params(4);
    std::vector<Vec2> smp(5);
    for (int k = 0; k <= 4; ++k) smp[k] = circ.eval(span * tk[k]);
    TriangleMap tri = build_triangle_map({0.0, 0.0}, smp, 4);
    double err = 0.0;
    for (int k = 0; k <= 50; ++k) {
      const double t = k / 50.0;
      err = std::max(err, std::abs(tri.side_point(t).norm() - 0.331));
    }
    return err;
  };
  const double e0 = side_error(0.4 / (2.0 * M_PI));  // arc angle 0.4
  const double e1 = side_error(0.2 / (2.0 * M_PI));
  CHECK(e0 < 1e-6);
  CHECK(e1 < 0.07 * e0);  // fifth-order decay leaves ample margin
}

TEST_CASE("composite rules integrate exactly") {
  // unit square as two affine triangles, degree-2 moments
  TriangleMap t1 = build_triangle_map({0.0, 0.0}, {{1.0, 0.0}, {1.0, 1.0}},
                                      1);
  TriangleMap t2 = build_triangle_map({0.0, 0.0}, {{1.0, 1.0}, {0.0, 1.0}},
                                      1);
  QuadratureRule comp = composite_rule_from_maps({t1, t2}, 1, 2);
  for (int i = 0; i + 0 <= 2; ++i)
    for (int j = 0; i + j <= 2; ++j) {
      double m = 0.0;
      for (int q = 0; q < comp.size(); ++q)
        m += comp.weights[q] * std::pow(comp.points[q].x, i) *
             std::pow(comp.points[q].y, j);
      const double exact = 1.0 / ((i + 1.0) * (j + 1.0));
      CHECK(std::abs(m - exact) < 1e-13);
    }

  // same through the mesh-level API on a Cartesian element
  BackgroundGrid grid{0.0, 1.0, 0.0, 1.0, 1, 1};
  CutMesh mesh = build_cut_mesh(grid, {}, 1);
  QuadratureRule viaMesh = composite_volume_rule(mesh, mesh.elements[0], 2);
  double m00 = 0.0;
  for (double w : viaMesh.weights) m00 += w;
  CHECK(m00 == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("biconvex profile mesh: multi-piece cells and area") {
  BackgroundGrid grid{-0.5, 1.0, -0.5, 0.5, 12, 8};
  auto prof = make_biconvex(0.5, 0.2, {0.26, 0.013}, 0.0);
  CutMesh mesh = build_cut_mesh(grid, {prof.get()}, 4);

  const double exact = 1.5 * 1.0 - lens_area(0.5, 0.2);
  CHECK(std::abs(mesh.fluid_area() - exact) / exact < 1e-8);

  double max_closure = 0.0;
  for (const Element& e : mesh.elements) {
    const Vec2 r = mesh.loop_normal_integral(e);
    max_closure = std::max(max_closure, std::max(std::abs(r.x),
                                                 std::abs(r.y)));
  }
  CHECK(max_closure <= 1e-10);
  face_connectivity(mesh);

  // the thin profile splits mid-chord cells into two fluid pieces
  int max_pieces = 0;
  for (const auto& ids : mesh.cell_elems)
    max_pieces = std::max(max_pieces, static_cast<int>(ids.size()));
  CHECK(max_pieces >= 2);
}

TEST_CASE("mesh debug dump is well-formed") {
  BackgroundGrid grid{-1.0, 1.0, -1.0, 1.0, 2, 2};
  CutMesh mesh = build_cut_mesh(grid, {}, 1);
  std::ostringstream os;
  dump_mesh_debug(mesh, os);
  const std::string text = os.str();
  int lines = 0;
  for (char c : text) lines += c == '\n';
  // 2 section markers + 2 column headers + 4 elements + 12 faces
  CHECK(lines == 2 + 2 + 4 + 12);
  CHECK(text.find("cartesian") != std::string::npos);
  CHECK(text.find("0.25") == std::string::npos);  // volumes are 1.0 here
  CHECK(text.find(",1,") != std::string::npos);
}

TEST_CASE("degenerate meshes are rejected") {
  BackgroundGrid grid{-1.0, 1.0, -1.0, 1.0, 4, 4};
  // curve entirely inside one background cell
  Circle tiny({0.25, 0.25}, 0.2);
  CHECK_THROWS_AS(build_cut_mesh(grid, {&tiny}, 2), geometry_error);
  // curve reaching outside the domain
  Circle big({0.0, 0.0}, 1.5);
  CHECK_THROWS_AS(build_cut_mesh(grid, {&big}, 2), geometry_error);
}

}  // TEST_SUITE
