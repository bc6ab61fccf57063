#include "cutdg/cut_mesh.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <utility>

#include "cutdg/util.hpp"

namespace cutdg {

namespace {

double wrap_param(double s) {
  if (s > 1.0) s -= 1.0;
  return std::max(s, 0.0);
}

/// Gauss-Legendre nodes/weights transplanted to [0,1].
void gauss01(int n, std::vector<double>& x, std::vector<double>& w) {
  gauss_legendre(n, x, w);
  for (int q = 0; q < n; ++q) {
    x[q] = 0.5 * (x[q] + 1.0);
    w[q] *= 0.5;
  }
}

double shoelace2(const std::vector<Vec2>& poly) {
  KahanSum a2;
  const size_t m = poly.size();
  for (size_t k = 0; k < m; ++k) a2.add(poly[k].cross(poly[(k + 1) % m]));
  return a2.value();
}

Vec2 polygon_centroid(const std::vector<Vec2>& poly) {
  const size_t m = poly.size();
  double a2 = 0.0;
  Vec2 c{0.0, 0.0};
  for (size_t k = 0; k < m; ++k) {
    const Vec2& p = poly[k];
    const Vec2& q = poly[(k + 1) % m];
    const double w = p.cross(q);
    a2 += w;
    c += (p + q) * w;
  }
  if (std::abs(a2) < 1e-300) {
    c = {0.0, 0.0};
    for (const Vec2& p : poly) c += p;
    return c * (1.0 / static_cast<double>(m));
  }
  return c * (1.0 / (3.0 * a2));
}

FaceRule straight_rule(const Vec2& a, const Vec2& b, const Vec2& normal,
                       int n) {
  std::vector<double> x, w;
  gauss01(n, x, w);
  const double len = (b - a).norm();
  FaceRule r;
  r.points.resize(n);
  r.weights.resize(n);
  r.normals.assign(n, normal);
  for (int q = 0; q < n; ++q) {
    r.points[q] = a + (b - a) * x[q];
    r.weights[q] = w[q] * len;
  }
  return r;
}

/// Rule along a triangle's curved side: the side parameterization is the
/// degree-N polynomial the volume map sees, so surface and volume
/// quadrature describe the same region.
FaceRule mapped_side_rule(const TriangleMap& tri, int n) {
  std::vector<double> x, w;
  gauss01(n, x, w);
  FaceRule r;
  r.points.resize(n);
  r.weights.resize(n);
  r.normals.resize(n);
  for (int q = 0; q < n; ++q) {
    const Vec2 tan = tri.side_tangent(x[q]);
    const double len = tan.norm();
    if (!(len > 1e-300))
      throw build_error("vanishing tangent (cusp) on a curved face");
    r.points[q] = tri.side_point(x[q]);
    r.weights[q] = w[q] * len;
    r.normals[q] = tan.rot_cw() * (1.0 / len);
  }
  return r;
}

/// Directed boundary item of a cut-cell loop (fluid on the left).
struct BItem {
  Vec2 s{}, e{};
  int face = -1;  ///< pre-built face id, or -1 for a not-yet-created face
  double sign = 1.0;
  bool forward = true;
  int curve = -1;  ///< embedded-boundary items carry their curve piece
  double sa = 0.0, sb = 0.0;  ///< s-interval, traversed from sb down to sa
  int parent = -1;  ///< original loop item this sub-arc was split from
  double f0 = 0.0, f1 = 1.0;  ///< covered fraction of the parent arc
};

/// One subtriangle covering part of a loop item's boundary arc, placed at
/// fraction f0 (measured from the item's start corner) along the arc.
struct ArcPiece {
  int tri;
  double f0;
};

/// Triangle ownership of every original loop item: arcs that had to be
/// split while carving are covered by several pieces in traversal order.
using ItemPieces = std::vector<std::vector<ArcPiece>>;

std::vector<Vec2> curve_side_samples(const ParametricCurve& c, double sa,
                                     double sb, const Vec2& pa, const Vec2& pb,
                                     int N) {
  std::vector<double> tk = side_interpolation_params(N);
  std::vector<Vec2> smp(N + 1);
  smp.front() = pa;
  smp.back() = pb;
  for (int k = 1; k < N; ++k)
    smp[k] = c.eval(wrap_param(sb + (sa - sb) * tk[k]));
  return smp;
}

TriangleMap item_triangle(const CutMesh& mesh, const BItem& it,
                          const Vec2& apex) {
  const int N = mesh.order;
  const bool curved =
      it.curve >= 0 && it.face >= 0 &&
      mesh.faces[it.face].kind == FaceKind::CutCurved;
  if (!curved) return build_triangle_map(apex, {it.s, it.e}, N);
  return build_triangle_map(
      apex,
      curve_side_samples(*mesh.curves[it.curve], it.sa, it.sb, it.s, it.e, N),
      N);
}

/// Polygon that outlines the loop, sampling curved items so thin lens-shaped
/// pieces (two-item loops) still get a proper area and centroid.
std::vector<Vec2> loop_outline(const CutMesh& mesh,
                               const std::vector<BItem>& items) {
  std::vector<Vec2> poly;
  for (const BItem& it : items) {
    poly.push_back(it.s);
    const bool curved = it.curve >= 0 && it.face >= 0 &&
                        mesh.faces[it.face].kind == FaceKind::CutCurved;
    if (curved) {
      const ParametricCurve& c = *mesh.curves[it.curve];
      for (int j = 1; j <= 8; ++j)
        poly.push_back(c.eval(wrap_param(it.sb + (it.sa - it.sb) * j / 9.0)));
    }
  }
  return poly;
}

std::vector<TriangleMap> fan_triangulation(const CutMesh& mesh,
                                           const std::vector<BItem>& items,
                                           ItemPieces& pieces) {
  const Vec2 apex = polygon_centroid(loop_outline(mesh, items));
  std::vector<TriangleMap> tris;
  tris.reserve(items.size());
  pieces.assign(items.size(), {});
  for (size_t k = 0; k < items.size(); ++k) {
    tris.push_back(item_triangle(mesh, items[k], apex));
    pieces[k] = {{static_cast<int>(k), 0.0}};
  }
  return tris;
}

bool point_in_triangle(const Vec2& p, const Vec2& a, const Vec2& b,
                       const Vec2& c) {
  const double d1 = (b - a).cross(p - a);
  const double d2 = (c - b).cross(p - b);
  const double d3 = (a - c).cross(p - c);
  const double eps = 1e-14 * ((b - a).norm() + (c - b).norm()) *
                     ((b - a).norm() + (c - b).norm());
  return d1 > -eps && d2 > -eps && d3 > -eps;
}

/// A loop corner together with the item leaving it toward the next corner;
/// diagonals introduced while carving carry item -1 (straight).
struct RingNode {
  Vec2 p;
  int item;
};

bool item_is_curved(const CutMesh& mesh, const std::vector<BItem>& items,
                    int item) {
  return item >= 0 && items[item].curve >= 0 && items[item].face >= 0 &&
         mesh.faces[items[item].face].kind == FaceKind::CutCurved;
}

TriangleMap ring_triangle(const CutMesh& mesh, const std::vector<BItem>& items,
                          const Vec2& apex, int item, const Vec2& v1,
                          const Vec2& v2) {
  if (!item_is_curved(mesh, items, item))
    return build_triangle_map(apex, {v1, v2}, mesh.order);
  const BItem& it = items[item];
  return build_triangle_map(
      apex,
      curve_side_samples(*mesh.curves[it.curve], it.sa, it.sb, it.s, it.e,
                         mesh.order),
      mesh.order);
}

/// Polyline tracing ring edge k (from ring[k] to ring[k+1]), with interior
/// samples on curved items so geometric predicates see the actual arc.
std::vector<Vec2> edge_polyline(const CutMesh& mesh,
                                const std::vector<BItem>& items,
                                const std::vector<RingNode>& ring, int k) {
  const int n = static_cast<int>(ring.size());
  std::vector<Vec2> pts{ring[k].p};
  if (item_is_curved(mesh, items, ring[k].item)) {
    const BItem& it = items[ring[k].item];
    const ParametricCurve& c = *mesh.curves[it.curve];
    for (int j = 1; j <= 12; ++j)
      pts.push_back(c.eval(wrap_param(it.sb + (it.sa - it.sb) * j / 13.0)));
  }
  pts.push_back(ring[(k + 1) % n].p);
  return pts;
}

/// Crossing-parity point-in-polygon test (vertices given in loop order).
bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& q) {
  bool in = false;
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 &a = poly[j], &b = poly[i];
    if ((b.y > q.y) != (a.y > q.y)) {
      const double xc = b.x + (q.y - b.y) / (a.y - b.y) * (a.x - b.x);
      if (q.x < xc) in = !in;
    }
  }
  return in;
}

double dist_point_segment(const Vec2& q, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double l2 = d.dot(d);
  const double t =
      l2 > 0.0 ? std::clamp((q - a).dot(d) / l2, 0.0, 1.0) : 0.0;
  return (q - (a + d * t)).norm();
}

double dist_to_polyline(const std::vector<Vec2>& poly, const Vec2& q,
                        bool closed) {
  double d = std::numeric_limits<double>::infinity();
  const size_t n = poly.size();
  const size_t m = closed ? n : n - 1;
  for (size_t k = 0; k < m; ++k)
    d = std::min(d, dist_point_segment(q, poly[k], poly[(k + 1) % n]));
  return d;
}

/// Strict interior crossing of segments ab and cd; touching at endpoints or
/// collinear overlap does not count.
bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d,
                    double eps) {
  const double d1 = (b - a).cross(c - a);
  const double d2 = (b - a).cross(d - a);
  const double d3 = (d - c).cross(a - c);
  const double d4 = (d - c).cross(b - c);
  return ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) &&
         ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps));
}

/// Records that triangle `tri` covers ring item `item`; sub-arcs produced by
/// splitting report against their original loop item, ordered by arc fraction.
void record_piece(const std::vector<BItem>& items, ItemPieces& pieces,
                  int item, int tri) {
  if (item < 0) return;
  const BItem& it = items[item];
  const int root = it.parent >= 0 ? it.parent : item;
  if (pieces[root].empty() || pieces[root].back().tri != tri ||
      pieces[root].back().f0 != it.f0)
    pieces[root].push_back({tri, it.f0});
}

/// Ear-clips a ring whose edges are all straight, appending affine triangle
/// maps and recording item ownership.
void ear_clip_straight(const CutMesh& mesh, const std::vector<BItem>& items,
                       std::vector<RingNode> ring,
                       std::vector<TriangleMap>& tris, ItemPieces& pieces) {
  auto set_assoc = [&](int item, int tri) {
    record_piece(items, pieces, item, tri);
  };
  while (static_cast<int>(ring.size()) > 3) {
    const int n = static_cast<int>(ring.size());
    int ear = -1;
    for (int v = 0; v < n && ear < 0; ++v) {
      const int p = (v + n - 1) % n, q = (v + 1) % n;
      const Vec2 &A = ring[p].p, &B = ring[v].p, &C = ring[q].p;
      if ((B - A).cross(C - B) <= 1e-14 * (B - A).norm() * (C - B).norm())
        continue;
      bool blocked = false;
      for (int u = 0; u < n && !blocked; ++u) {
        if (u == p || u == v || u == q) continue;
        blocked = point_in_triangle(ring[u].p, A, B, C);
      }
      if (!blocked) ear = v;
    }
    if (ear < 0)
      throw build_error(
          "cut element could not be subtriangulated (no valid ear)");
    const int p = (ear + n - 1) % n, q = (ear + 1) % n;
    const int ti = static_cast<int>(tris.size());
    tris.push_back(
        build_triangle_map(ring[p].p, {ring[ear].p, ring[q].p}, mesh.order));
    set_assoc(ring[p].item, ti);
    set_assoc(ring[ear].item, ti);
    ring[p].item = -1;  // the new edge p -> q is a straight diagonal
    ring.erase(ring.begin() + ear);
  }
  const int ti = static_cast<int>(tris.size());
  tris.push_back(
      build_triangle_map(ring[0].p, {ring[1].p, ring[2].p}, mesh.order));
  for (int k = 0; k < 3; ++k) set_assoc(ring[k].item, ti);
}

/// Triangulates a ring by carving off each curved item first: the arc's
/// triangle apex is chosen among the other corners by probing the curved
/// map's Jacobian at the volume rule points and checking that the triangle
/// and its two new diagonals stay inside the region. The remaining straight
/// sub-polygons are ear-clipped. This handles concave arcs that bulge deep
/// into the element, where a fan from the centroid folds over. Arcs that no
/// corner can span without folding (e.g. a boundary sweeping more than half a
/// turn inside one cell) are bisected in parameter and carved piecewise.
void carve_ring(const CutMesh& mesh, std::vector<BItem>& items,
                std::vector<RingNode> ring, const QuadratureRule& probe,
                double scale, std::vector<TriangleMap>& tris,
                ItemPieces& pieces) {
  const int n = static_cast<int>(ring.size());
  int iv1 = -1;
  for (int k = 0; k < n && iv1 < 0; ++k)
    if (item_is_curved(mesh, items, ring[k].item)) iv1 = k;
  if (iv1 < 0) {
    ear_clip_straight(mesh, items, std::move(ring), tris, pieces);
    return;
  }
  if (n < 3)
    throw build_error(
        "cut element loop around a curved side has fewer than 3 corners");
  const int iv2 = (iv1 + 1) % n;
  const int citem = ring[iv1].item;

  std::vector<std::vector<Vec2>> epoly(n);
  std::vector<Vec2> outline;
  for (int k = 0; k < n; ++k) {
    epoly[k] = edge_polyline(mesh, items, ring, k);
    outline.insert(outline.end(), epoly[k].begin(), epoly[k].end() - 1);
  }

  // Rank apex candidates by how far the curved map stays from folding.
  struct Cand {
    int w;
    double rel;
    TriangleMap tri;
  };
  std::vector<Cand> cands;
  for (int w = 0; w < n; ++w) {
    if (w == iv1 || w == iv2) continue;
    // A size-2 leftover ring (apex adjacent to the arc) is only empty when
    // the coinciding real edge is straight.
    if ((w + 1) % n == iv1 && item_is_curved(mesh, items, ring[w].item))
      continue;
    if ((iv2 + 1) % n == w && item_is_curved(mesh, items, ring[iv2].item))
      continue;
    TriangleMap tri;
    try {
      tri = ring_triangle(mesh, items, ring[w].p, citem, ring[iv1].p,
                          ring[iv2].p);
    } catch (const build_error&) {
      continue;
    }
    double mindet = std::numeric_limits<double>::infinity();
    for (int q = 0; q < probe.size(); ++q)
      mindet = std::min(
          mindet, tri.det_jacobian(probe.points[q].x, probe.points[q].y));
    for (const auto& rt : {std::pair{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0},
                           {0.5, 0.0}, {0.0, 0.5}, {0.5, 0.5}})
      mindet = std::min(mindet, tri.det_jacobian(rt.first, rt.second));
    const double affdet = (tri.v1 - tri.a).cross(tri.v2 - tri.a);
    const double rel = mindet / affdet;
    if (!(rel > 1e-9)) continue;
    cands.push_back({w, rel, tri});
  }
  std::sort(cands.begin(), cands.end(),
            [](const Cand& a, const Cand& b) { return a.rel > b.rel; });

  const double eps_area = 1e-12 * scale * scale;
  const double eps_len = 1e-10 * scale;
  for (const Cand& cd : cands) {
    const int w = cd.w;
    // Sampled boundary of the curved triangle: apex -> v1 -> arc -> v2.
    std::vector<Vec2> ct{ring[w].p};
    ct.insert(ct.end(), epoly[iv1].begin(), epoly[iv1].end());
    const std::array<Vec2, 3> corners{ring[w].p, ring[iv1].p, ring[iv2].p};

    bool bad = false;
    // 1. No other boundary geometry may sit strictly inside the triangle.
    for (int k = 0; k < n && !bad; ++k) {
      if (k == iv1) continue;
      for (size_t s = 0; s + 1 < epoly[k].size() && !bad; ++s) {
        const Vec2& q = epoly[k][s];
        bool corner = false;
        for (const Vec2& c : corners)
          corner = corner || (q - c).norm() < 1e-12 * scale;
        if (corner) continue;
        bad = point_in_polygon(ct, q) && dist_to_polyline(ct, q, true) > eps_len;
      }
    }
    // 2. The two new diagonals must stay inside the region and cross nothing.
    const std::array<std::array<Vec2, 2>, 2> diags{
        {{ring[w].p, ring[iv1].p}, {ring[w].p, ring[iv2].p}}};
    for (const auto& dg : diags) {
      if (bad) break;
      const Vec2 mid = (dg[0] + dg[1]) * 0.5;
      if (!point_in_polygon(outline, mid) &&
          dist_to_polyline(outline, mid, true) > eps_len) {
        bad = true;
        break;
      }
      for (int k = 0; k < n && !bad; ++k)
        for (size_t s = 0; s + 1 < epoly[k].size() && !bad; ++s)
          bad = segments_cross(dg[0], dg[1], epoly[k][s], epoly[k][s + 1],
                               eps_area);
    }
    if (bad) continue;

    const int ti = static_cast<int>(tris.size());
    tris.push_back(cd.tri);
    record_piece(items, pieces, citem, ti);
    // Split the ring along the diagonals v2 -> ... -> w and w -> ... -> v1.
    std::vector<RingNode> A, B;
    for (int k = iv2;; k = (k + 1) % n) {
      A.push_back(ring[k]);
      if (k == w) break;
    }
    A.back().item = -1;  // closing diagonal w -> v2
    for (int k = w;; k = (k + 1) % n) {
      B.push_back(ring[k]);
      if (k == iv1) break;
    }
    B.back().item = -1;  // closing diagonal v1 -> w
    for (auto* sub : {&A, &B}) {
      if (sub->size() >= 3) {
        carve_ring(mesh, items, std::move(*sub), probe, scale, tris, pieces);
      } else if (sub->size() == 2) {
        // The real edge coincides with a straight side of the new triangle.
        record_piece(items, pieces, sub->front().item, ti);
      }
    }
    return;
  }

  // No corner spans this arc with a valid map: bisect it in parameter and
  // carve the halves. Each half keeps its position along the original item
  // so the face quadrature can later be assembled in traversal order.
  const BItem arc = items[citem];
  if (arc.f1 - arc.f0 <= 1.0 / 64.0)
    throw build_error(
        "cut element could not be subtriangulated around its curved boundary");
  const double smid = 0.5 * (arc.sa + arc.sb);
  const double fmid = 0.5 * (arc.f0 + arc.f1);
  const Vec2 pmid = mesh.curves[arc.curve]->eval(wrap_param(smid));
  const int root = arc.parent >= 0 ? arc.parent : citem;
  BItem h1 = arc, h2 = arc;
  h1.parent = h2.parent = root;
  h1.e = pmid;
  h1.sa = smid;  // first half: traversed from sb down to smid
  h1.f1 = fmid;
  h2.s = pmid;
  h2.sb = smid;  // second half: traversed from smid down to sa
  h2.f0 = fmid;
  const int i1 = static_cast<int>(items.size());
  items.push_back(h1);
  const int i2 = static_cast<int>(items.size());
  items.push_back(h2);
  ring[iv1].item = i1;
  ring.insert(ring.begin() + iv1 + 1, {pmid, i2});
  carve_ring(mesh, items, std::move(ring), probe, scale, tris, pieces);
}

/// Fan subtriangulation with a curved-first carving fallback; validates the
/// maps by building the composite volume rule (which requires det J > 0 at
/// every rule point).
void triangulate_items(const CutMesh& mesh, const std::vector<BItem>& items,
                       int M, std::vector<TriangleMap>& tris,
                       ItemPieces& pieces, QuadratureRule& composite) {
  try {
    tris = fan_triangulation(mesh, items, pieces);
    composite = composite_rule_from_maps(tris, mesh.order, M);
    return;
  } catch (const build_error&) {
    // fall through to the carving path
  }
  const int m = static_cast<int>(items.size());
  if (m < 3)
    throw build_error(
        "cut element loop has fewer than 3 pieces and the fan "
        "subtriangulation failed");
  tris.clear();
  pieces.assign(items.size(), {});
  std::vector<BItem> work = items;  // carving may append split sub-arcs
  std::vector<RingNode> ring(m);
  for (int k = 0; k < m; ++k) ring[k] = {work[k].s, k};
  const double scale = std::min(mesh.grid.hx(), mesh.grid.hy());
  const int D = M * mesh.order + 2 * (mesh.order - 1);
  const QuadratureRule probe =
      reference_rule(RefDomain::Triangle, std::min(D, 50));
  carve_ring(mesh, work, std::move(ring), probe, scale, tris, pieces);
  composite = composite_rule_from_maps(tris, mesh.order, M);
  for (auto& pc : pieces)
    std::sort(pc.begin(), pc.end(),
              [](const ArcPiece& a, const ArcPiece& b) { return a.f0 < b.f0; });
}

std::vector<BItem> items_from_loop(const CutMesh& mesh, const Element& elem) {
  std::vector<BItem> items;
  items.reserve(elem.loop.size());
  for (const FaceUse& u : elem.loop) {
    const Face& f = mesh.faces[u.face];
    BItem it;
    it.s = u.forward ? f.a : f.b;
    it.e = u.forward ? f.b : f.a;
    it.face = u.face;
    it.sign = u.sign;
    it.forward = u.forward;
    if (f.curve >= 0) {
      it.curve = f.curve;
      it.sa = f.s0;
      it.sb = f.s1;
    }
    items.push_back(it);
  }
  return items;
}

int default_curved_points(int N) { return std::max(2 * N + 2, N * (N + 1) / 2); }

}  // namespace

const char* to_string(FaceKind k) {
  switch (k) {
    case FaceKind::Cartesian: return "cartesian";
    case FaceKind::CutStraight: return "cut-straight";
    case FaceKind::CutCurved: return "cut-curved";
  }
  return "?";
}

const char* to_string(CellClass c) {
  switch (c) {
    case CellClass::Cartesian: return "cartesian";
    case CellClass::Cut: return "cut";
    case CellClass::Removed: return "removed";
  }
  return "?";
}

double FaceRule::total_weight() const {
  KahanSum s;
  for (double w : weights) s.add(w);
  return s.value();
}

Vec2 TriangleMap::map(double r, double t) const {
  Vec2 p = a * (1.0 - r - t) + v1 * r + v2 * t;
  if (!e.empty()) {
    Vec2 et = e.back();
    for (int k = static_cast<int>(e.size()) - 2; k >= 0; --k)
      et = e[k] + et * t;
    p += et * (r * t);
  }
  return p;
}

void TriangleMap::jacobian(double r, double t, Vec2& g_r, Vec2& g_t) const {
  g_r = v1 - a;
  g_t = v2 - a;
  if (!e.empty()) {
    Vec2 et = e.back(), det{0.0, 0.0};
    for (int k = static_cast<int>(e.size()) - 2; k >= 0; --k) {
      det = et + det * t;
      et = e[k] + et * t;
    }
    g_r += et * t;
    g_t += et * r + det * (r * t);
  }
}

double TriangleMap::det_jacobian(double r, double t) const {
  Vec2 g_r, g_t;
  jacobian(r, t, g_r, g_t);
  return g_r.cross(g_t);
}

Vec2 TriangleMap::side_point(double t) const { return map(1.0 - t, t); }

Vec2 TriangleMap::side_tangent(double t) const {
  Vec2 g_r, g_t;
  jacobian(1.0 - t, t, g_r, g_t);
  return g_t - g_r;
}

std::vector<double> side_interpolation_params(int N) {
  std::vector<double> x, w;
  gauss_lobatto(N + 1, x, w);
  for (double& t : x) t = 0.5 * (t + 1.0);
  return x;
}

TriangleMap build_triangle_map(const Vec2& apex,
                               const std::vector<Vec2>& side_samples, int N) {
  if (N < 1) throw config_error("triangle map degree must be >= 1");
  const int n = static_cast<int>(side_samples.size()) - 1;
  if (n != 1 && n != N)
    throw config_error(
        strf("triangle map needs 2 or N+1 side samples, got %d for N=%d",
             n + 1, N));
  const Vec2 v1 = side_samples.front(), v2 = side_samples.back();
  const double orient2 = (v1 - apex).cross(v2 - apex);
  const double scale2 = (v1 - apex).norm() * (v2 - apex).norm();
  if (!(orient2 > 1e-14 * scale2))
    throw build_error(
        strf("subtriangle vertices are collinear or inverted "
             "(doubled signed area %.3e)", orient2));
  TriangleMap tri;
  tri.a = apex;
  tri.v1 = v1;
  tri.v2 = v2;
  if (n >= 2) {
    // e(t_k) = (sample_k - chord(t_k)) / (t_k (1 - t_k)) at the interior
    // Gauss-Lobatto parameters; monomial Vandermonde solve for e's
    // coefficients (sizes are tiny).
    const std::vector<double> tk = side_interpolation_params(n);
    const int ne = n - 1;
    Eigen::MatrixXd V(ne, ne);
    Eigen::MatrixXd rhs(ne, 2);
    for (int k = 1; k < n; ++k) {
      const double t = tk[k];
      double tp = 1.0;
      for (int j = 0; j < ne; ++j) {
        V(k - 1, j) = tp;
        tp *= t;
      }
      const Vec2 chord = v1 * (1.0 - t) + v2 * t;
      const Vec2 d = (side_samples[k] - chord) * (1.0 / (t * (1.0 - t)));
      rhs(k - 1, 0) = d.x;
      rhs(k - 1, 1) = d.y;
    }
    const Eigen::MatrixXd coef = V.partialPivLu().solve(rhs);
    tri.e.resize(ne);
    for (int j = 0; j < ne; ++j) tri.e[j] = {coef(j, 0), coef(j, 1)};
  }
  return tri;
}

QuadratureRule composite_rule_from_maps(const std::vector<TriangleMap>& tris,
                                        int N, int M) {
  if (N < 1 || M < 1) throw config_error("composite rule needs N, M >= 1");
  const int D = M * N + 2 * (N - 1);
  const QuadratureRule ref = reference_rule(RefDomain::Triangle, D);
  QuadratureRule out;
  out.points.reserve(ref.size() * tris.size());
  out.weights.reserve(ref.size() * tris.size());
  for (const TriangleMap& tri : tris) {
    for (int q = 0; q < ref.size(); ++q) {
      const double r = ref.points[q].x, t = ref.points[q].y;
      const double det = tri.det_jacobian(r, t);
      if (!(det > 0.0))
        throw build_error(
            strf("non-positive subtriangle Jacobian (det=%.3e) at a volume "
                 "rule point", det));
      out.points.push_back(tri.map(r, t));
      out.weights.push_back(ref.weights[q] * det);
    }
  }
  return out;
}

int CutMesh::n_cartesian() const {
  int n = 0;
  for (const Element& e : elements) n += e.cartesian ? 1 : 0;
  return n;
}

int CutMesh::n_cut() const {
  return static_cast<int>(elements.size()) - n_cartesian();
}

int CutMesh::n_removed() const {
  int n = 0;
  for (CellClass c : cell_class) n += (c == CellClass::Removed) ? 1 : 0;
  return n;
}

double CutMesh::fluid_area() const {
  KahanSum s;
  for (const Element& e : elements) s.add(e.volume);
  return s.value();
}

Vec2 CutMesh::loop_normal_integral(const Element& e) const {
  KahanSum nx, ny;
  for (const FaceUse& u : e.loop) {
    const FaceRule& r = faces[u.face].rule;
    for (int q = 0; q < r.size(); ++q) {
      nx.add(u.sign * r.weights[q] * r.normals[q].x);
      ny.add(u.sign * r.weights[q] * r.normals[q].y);
    }
  }
  return {nx.value(), ny.value()};
}

std::vector<TriangleMap> subtriangulate(const CutMesh& mesh,
                                        const Element& elem) {
  if (elem.cartesian) {
    // split the background cell into two affine triangles
    const Vec2 p00 = elem.box_lo, p11 = elem.box_hi;
    const Vec2 p10{p11.x, p00.y}, p01{p00.x, p11.y};
    return {build_triangle_map(p00, {p10, p11}, mesh.order),
            build_triangle_map(p00, {p11, p01}, mesh.order)};
  }
  const std::vector<BItem> items = items_from_loop(mesh, elem);
  std::vector<TriangleMap> tris;
  ItemPieces pieces;
  QuadratureRule comp;
  const int M = mesh.options.volume_degree > 0 ? mesh.options.volume_degree
                                               : 2 * mesh.order - 1;
  triangulate_items(mesh, items, M, tris, pieces, comp);
  return tris;
}

QuadratureRule composite_volume_rule(const CutMesh& mesh, const Element& elem,
                                     int M) {
  if (elem.cartesian)
    return composite_rule_from_maps(subtriangulate(mesh, elem), mesh.order, M);
  return composite_rule_from_maps(elem.tris, mesh.order, M);
}

FaceRule face_rule(const CutMesh& mesh, const Face& face, int n_pts) {
  if (n_pts < 1) throw config_error("face rule needs at least one point");
  if (face.kind != FaceKind::CutCurved) {
    if (face.rule.normals.empty())
      throw build_error("face has no stored rule to take the normal from");
    return straight_rule(face.a, face.b, face.rule.normals.front(), n_pts);
  }
  const ParametricCurve& c = *mesh.curves[face.curve];
  std::vector<double> x, w;
  gauss01(n_pts, x, w);
  FaceRule r;
  r.points.resize(n_pts);
  r.weights.resize(n_pts);
  r.normals.resize(n_pts);
  const double ds = face.s0 - face.s1;  // traversal runs from s1 down to s0
  for (int q = 0; q < n_pts; ++q) {
    const double s = wrap_param(face.s1 + ds * x[q]);
    const Vec2 tan = c.deriv(s) * ds;  // d/dt of the traversal
    const double len = tan.norm();
    if (!(len > 1e-300))
      throw geometry_error(strf("zero curve tangent at s=%.12g (cusp)", s));
    r.points[q] = c.eval(s);
    r.weights[q] = w[q] * len;
    r.normals[q] = tan.rot_cw() * (1.0 / len);
  }
  return r;
}

std::vector<NeighborEntry> face_connectivity(const CutMesh& mesh) {
  std::vector<NeighborEntry> table;
  table.reserve(mesh.faces.size());
  auto uses_in_loop = [&](int elem, int face, double want_sign) {
    int count = 0;
    for (const FaceUse& u : mesh.elements[elem].loop)
      if (u.face == face && u.sign == want_sign) ++count;
    return count;
  };
  for (const Face& f : mesh.faces) {
    if (f.rule.size() == 0)
      throw build_error(strf("face %d has an empty quadrature rule", f.id));
    for (const Vec2& n : f.rule.normals)
      if (std::abs(n.norm() - 1.0) > 1e-12)
        throw build_error(strf("face %d has a non-unit normal", f.id));
    if (f.interior()) {
      if (f.elem_minus < 0 || f.elem_plus < 0 || f.elem_minus == f.elem_plus)
        throw build_error(strf("face %d has inconsistent neighbors", f.id));
      if (uses_in_loop(f.elem_minus, f.id, +1.0) != 1 ||
          uses_in_loop(f.elem_plus, f.id, -1.0) != 1)
        throw build_error(
            strf("face %d is not referenced consistently by its neighbors",
                 f.id));
    } else {
      if (f.elem_minus < 0 || f.boundary.empty())
        throw build_error(strf("boundary face %d lacks owner or tag", f.id));
      if (uses_in_loop(f.elem_minus, f.id, +1.0) != 1)
        throw build_error(
            strf("boundary face %d is not referenced by its owner", f.id));
    }
    table.push_back({f.id, f.elem_minus, f.elem_plus});
  }
  return table;
}

void dump_mesh_debug(const CutMesh& mesh, std::ostream& os) {
  os << "# elements\nid,type,ci,cj,volume,nfaces\n";
  for (const Element& e : mesh.elements)
    os << e.id << ',' << (e.cartesian ? "cartesian" : "cut") << ',' << e.ci
       << ',' << e.cj << ',' << strf("%.12g", e.volume) << ','
       << e.loop.size() << '\n';
  os << "# faces\nid,kind,ax,ay,bx,by,minus,plus,boundary\n";
  for (const Face& f : mesh.faces)
    os << f.id << ',' << to_string(f.kind) << ','
       << strf("%.12g,%.12g,%.12g,%.12g", f.a.x, f.a.y, f.b.x, f.b.y) << ','
       << f.elem_minus << ',' << f.elem_plus << ',' << f.boundary << '\n';
}

CutMesh build_cut_mesh(const BackgroundGrid& grid,
                       std::vector<const ParametricCurve*> curves, int N,
                       const MeshOptions& opts) {
  grid.validate();
  if (N < 1 || N > 8)
    throw config_error(strf("mapping degree N=%d out of supported range", N));

  CutMesh mesh;
  mesh.grid = grid;
  mesh.curves = std::move(curves);
  mesh.order = N;
  mesh.options = opts;

  const int nx = grid.nx, ny = grid.ny;
  const double hx = grid.hx(), hy = grid.hy();
  const double hmin = std::min(hx, hy);
  const double sc = grid.scale();
  const int n_str = opts.face_points > 0 ? opts.face_points : N + 1;
  const int n_crv = opts.face_points > 0 ? opts.face_points
                                         : default_curved_points(N);
  const int Mvol = opts.volume_degree > 0 ? opts.volume_degree : 2 * N - 1;

  // ---------------------------------------------------------------- curves
  for (const ParametricCurve* c : mesh.curves) {
    c->validate();
    Vec2 lo, hi;
    c->bounding_box(lo, hi);
    if (!(lo.x > grid.x0 && hi.x < grid.x1 && lo.y > grid.y0 &&
          hi.y < grid.y1))
      throw geometry_error(
          "embedded curve is not strictly inside the background domain");
  }
  check_curves_disjoint(mesh.curves, hmin / 10.0);

  const int nc = static_cast<int>(mesh.curves.size());
  std::vector<std::vector<IntersectionRecord>> recs(nc);
  std::vector<std::vector<std::pair<double, double>>> intervals(nc);
  for (int k = 0; k < nc; ++k) {
    recs[k] = find_grid_intersections(*mesh.curves[k], grid);
    if (recs[k].empty())
      throw geometry_error(
          "embedded curve does not intersect any grid line; refine the grid");
    std::vector<StopPoint> stops;
    for (const IntersectionRecord& r : recs[k])
      stops.push_back({r.s, StopTag::GridIntersection});
    const std::vector<double> junctions = mesh.curves[k]->junction_params();
    if (!junctions.empty()) stops.push_back({0.0, StopTag::Junction});
    for (double j : junctions) stops.push_back({j, StopTag::Junction});
    intervals[k] = split_curve_at_stops(merge_stops(stops));
  }

  // Exact stop-point lookup: grid intersections use the snapped record
  // point so loop chaining can match endpoints bitwise.
  auto stop_point = [&](int k, double s) -> Vec2 {
    if (s >= 1.0 - 1e-12) s = std::max(s - 1.0, 0.0);
    for (const IntersectionRecord& r : recs[k]) {
      double d = std::abs(r.s - s);
      d = std::min(d, 1.0 - d);
      if (d < 5e-12) return r.point;
    }
    return mesh.curves[k]->eval(wrap_param(s));
  };

  // ------------------------------------------------- crossing points/edges
  // vertical edge (i,j): on line x=xline(i), j-th cell row; horizontal edge
  // (i,j): on line y=yline(j), i-th cell column.
  auto vkey = [&](int i, int j) { return i * ny + j; };
  auto hkey = [&](int i, int j) { return j * nx + i; };
  std::vector<std::vector<Vec2>> vcross((nx + 1) * ny), hcross(nx * (ny + 1));
  for (int k = 0; k < nc; ++k) {
    for (const IntersectionRecord& r : recs[k]) {
      if (r.axis == GridAxis::X) {
        const int j = static_cast<int>(std::floor((r.point.y - grid.y0) / hy));
        if (j < 0 || j >= ny)
          throw geometry_error("grid intersection outside the domain");
        vcross[vkey(r.index, j)].push_back(r.point);
      } else {
        const int i = static_cast<int>(std::floor((r.point.x - grid.x0) / hx));
        if (i < 0 || i >= nx)
          throw geometry_error("grid intersection outside the domain");
        hcross[hkey(i, r.index)].push_back(r.point);
      }
    }
  }
  for (auto& v : vcross)
    std::sort(v.begin(), v.end(),
              [](const Vec2& a, const Vec2& b) { return a.y < b.y; });
  for (auto& v : hcross)
    std::sort(v.begin(), v.end(),
              [](const Vec2& a, const Vec2& b) { return a.x < b.x; });

  // ------------------------------------------------- curve pieces per cell
  std::vector<std::vector<std::pair<int, int>>> cell_pieces(nx * ny);
  for (int k = 0; k < nc; ++k) {
    for (size_t v = 0; v < intervals[k].size(); ++v) {
      const auto [sa, sb] = intervals[k][v];
      const Vec2 pm = mesh.curves[k]->eval(wrap_param(0.5 * (sa + sb)));
      int ci = static_cast<int>(std::floor((pm.x - grid.x0) / hx));
      int cj = static_cast<int>(std::floor((pm.y - grid.y0) / hy));
      ci = std::min(std::max(ci, 0), nx - 1);
      cj = std::min(std::max(cj, 0), ny - 1);
      cell_pieces[mesh.cell_index(ci, cj)].push_back(
          {k, static_cast<int>(v)});
    }
  }

  // -------------------------------------------------- node/cell classes
  std::vector<PointClass> node_class((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const PointClass pc = classify_point(
          mesh.curves, {grid.xline(i), grid.yline(j)}, sc);
      if (pc == PointClass::Boundary)
        throw geometry_error(
            strf("grid node (%.12g, %.12g) lies on an embedded curve",
                 grid.xline(i), grid.yline(j)));
      node_class[i + (nx + 1) * j] = pc;
    }

  mesh.cell_class.assign(nx * ny, CellClass::Cartesian);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const bool has_cross = !vcross[vkey(i, j)].empty() ||
                             !vcross[vkey(i + 1, j)].empty() ||
                             !hcross[hkey(i, j)].empty() ||
                             !hcross[hkey(i, j + 1)].empty();
      const bool has_piece = !cell_pieces[mesh.cell_index(i, j)].empty();
      int fluid = 0;
      fluid += node_class[i + (nx + 1) * j] == PointClass::Fluid;
      fluid += node_class[i + 1 + (nx + 1) * j] == PointClass::Fluid;
      fluid += node_class[i + (nx + 1) * (j + 1)] == PointClass::Fluid;
      fluid += node_class[i + 1 + (nx + 1) * (j + 1)] == PointClass::Fluid;
      CellClass cls;
      if (has_cross || has_piece) {
        if (!has_cross || !has_piece)
          throw geometry_error(
              strf("cell (%d,%d): embedded geometry touches the cell "
                   "inconsistently", i, j));
        cls = CellClass::Cut;
      } else if (fluid == 4) {
        cls = CellClass::Cartesian;
      } else if (fluid == 0) {
        const Vec2 center{grid.x0 + (i + 0.5) * hx, grid.y0 + (j + 0.5) * hy};
        if (classify_point(mesh.curves, center, sc) != PointClass::Embedded)
          throw geometry_error(
              strf("cell (%d,%d): inconsistent interior classification", i,
                   j));
        cls = CellClass::Removed;
      } else {
        throw geometry_error(
            strf("cell (%d,%d): mixed corner classification without "
                 "boundary crossings", i, j));
      }
      mesh.cell_class[mesh.cell_index(i, j)] = cls;
    }

  // ------------------------------------------------------- straight faces
  // Each grid edge's fluid sub-segments become faces exactly once; both
  // incident cells later reference the same face ids.
  std::vector<std::vector<int>> vfaces((nx + 1) * ny), hfaces(nx * (ny + 1));
  auto classify_mid = [&](const Vec2& p) {
    const PointClass pc = classify_point(mesh.curves, p, sc);
    if (pc == PointClass::Boundary)
      throw geometry_error(
          strf("edge midpoint (%.12g, %.12g) degenerately close to an "
               "embedded curve", p.x, p.y));
    return pc;
  };
  auto build_edge_faces = [&](const Vec2& n0, const Vec2& n1,
                              PointClass c0, PointClass c1,
                              const std::vector<Vec2>& cross, FaceKind full,
                              const Vec2& normal, const std::string& btag,
                              std::vector<int>& out) {
    std::vector<Vec2> pts;
    pts.push_back(n0);
    pts.insert(pts.end(), cross.begin(), cross.end());
    pts.push_back(n1);
    PointClass prev = c0;
    for (size_t k = 0; k + 1 < pts.size(); ++k) {
      const PointClass mid = classify_mid((pts[k] + pts[k + 1]) * 0.5);
      const bool first = k == 0, last = k + 2 == pts.size();
      if ((first && mid != c0) || (last && mid != c1) ||
          (!first && mid == prev))
        throw geometry_error(
            strf("inconsistent fluid/embedded alternation on grid edge near "
                 "(%.12g, %.12g)", pts[k].x, pts[k].y));
      prev = mid;
      if (mid != PointClass::Fluid) continue;
      Face f;
      f.id = static_cast<int>(mesh.faces.size());
      f.kind = (pts.size() == 2) ? full : FaceKind::CutStraight;
      f.a = pts[k];
      f.b = pts[k + 1];
      f.boundary = btag;
      f.rule = straight_rule(f.a, f.b, normal, n_str);
      out.push_back(f.id);
      mesh.faces.push_back(std::move(f));
    }
  };
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const Vec2 n0{grid.xline(i), grid.yline(j)};
      const Vec2 n1{grid.xline(i), grid.yline(j + 1)};
      const PointClass c0 = node_class[i + (nx + 1) * j];
      const PointClass c1 = node_class[i + (nx + 1) * (j + 1)];
      const std::vector<Vec2>& cross = vcross[vkey(i, j)];
      if (cross.empty() && c0 == PointClass::Embedded &&
          c1 == PointClass::Embedded)
        continue;
      const bool left_b = i == 0, right_b = i == nx;
      const Vec2 normal = left_b ? Vec2{-1.0, 0.0} : Vec2{1.0, 0.0};
      const std::string btag = left_b ? "left" : (right_b ? "right" : "");
      build_edge_faces(n0, n1, c0, c1, cross, FaceKind::Cartesian, normal,
                       btag, vfaces[vkey(i, j)]);
    }
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Vec2 n0{grid.xline(i), grid.yline(j)};
      const Vec2 n1{grid.xline(i + 1), grid.yline(j)};
      const PointClass c0 = node_class[i + (nx + 1) * j];
      const PointClass c1 = node_class[i + 1 + (nx + 1) * j];
      const std::vector<Vec2>& cross = hcross[hkey(i, j)];
      if (cross.empty() && c0 == PointClass::Embedded &&
          c1 == PointClass::Embedded)
        continue;
      const bool bot_b = j == 0, top_b = j == ny;
      const Vec2 normal = bot_b ? Vec2{0.0, -1.0} : Vec2{0.0, 1.0};
      const std::string btag = bot_b ? "bottom" : (top_b ? "top" : "");
      build_edge_faces(n0, n1, c0, c1, cross, FaceKind::Cartesian, normal,
                       btag, hfaces[hkey(i, j)]);
    }

  // ------------------------------------------------------------- elements
  mesh.cell_elems.assign(nx * ny, {});
  // Loop-side bookkeeping for a cell's four sides, in CCW traversal order:
  // bottom (+x), right (+y), top (-x), left (-y).
  auto side_uses = [&](int i, int j) {
    struct SideUse {
      int face;
      double sign;
      bool forward;
    };
    std::vector<SideUse> uses;
    for (int f : hfaces[hkey(i, j)])  // bottom
      uses.push_back({f, j == 0 ? +1.0 : -1.0, true});
    for (int f : vfaces[vkey(i + 1, j)])  // right
      uses.push_back({f, +1.0, true});
    {
      const std::vector<int>& top = hfaces[hkey(i, j + 1)];
      for (auto it = top.rbegin(); it != top.rend(); ++it)
        uses.push_back({*it, +1.0, false});
    }
    {
      const std::vector<int>& left = vfaces[vkey(i, j)];
      for (auto it = left.rbegin(); it != left.rend(); ++it)
        uses.push_back({*it, i == 0 ? +1.0 : -1.0, false});
    }
    return uses;
  };
  auto attach_side = [&](Face& f, int elem, double sign) {
    if (sign > 0) {
      if (f.elem_minus >= 0)
        throw build_error(strf("face %d claimed twice on its minus side",
                               f.id));
      f.elem_minus = elem;
    } else {
      if (f.elem_plus >= 0)
        throw build_error(strf("face %d claimed twice on its plus side",
                               f.id));
      f.elem_plus = elem;
    }
  };

  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const CellClass cls = mesh.cell_class[mesh.cell_index(i, j)];
      if (cls == CellClass::Removed) continue;
      const Vec2 lo{grid.xline(i), grid.yline(j)};
      const Vec2 hi{grid.xline(i + 1), grid.yline(j + 1)};

      if (cls == CellClass::Cartesian) {
        Element el;
        el.id = static_cast<int>(mesh.elements.size());
        el.ci = i;
        el.cj = j;
        el.cartesian = true;
        el.box_lo = lo;
        el.box_hi = hi;
        for (const auto& u : side_uses(i, j)) {
          el.loop.push_back({u.face, u.sign, u.forward});
          attach_side(mesh.faces[u.face], el.id, u.sign);
        }
        if (el.loop.size() != 4)
          throw build_error(
              strf("cartesian cell (%d,%d) has %d boundary faces", i, j,
                   static_cast<int>(el.loop.size())));
        // at least N+1 points per direction (keeps the tensor Legendre
        // basis exactly orthonormal); more when a higher volume degree is
        // requested
        const int nq1 = std::max(N + 1, (Mvol + 2) / 2);
        std::vector<double> gx, gw;
        gauss_legendre(nq1, gx, gw);
        for (int qj = 0; qj < nq1; ++qj)
          for (int qi = 0; qi < nq1; ++qi) {
            el.vol.points.push_back(
                {lo.x + 0.5 * hx * (gx[qi] + 1.0),
                 lo.y + 0.5 * hy * (gx[qj] + 1.0)});
            el.vol.weights.push_back(gw[qi] * gw[qj] * 0.25 * hx * hy);
          }
        el.vol_unpruned = el.vol;
        el.volume = hx * hy;
        mesh.cell_elems[mesh.cell_index(i, j)].push_back(el.id);
        mesh.elements.push_back(std::move(el));
        continue;
      }

      // ---- cut cell: assemble directed boundary items and chain loops
      std::vector<BItem> items;
      for (const auto& u : side_uses(i, j)) {
        const Face& f = mesh.faces[u.face];
        BItem it;
        it.s = u.forward ? f.a : f.b;
        it.e = u.forward ? f.b : f.a;
        it.face = u.face;
        it.sign = u.sign;
        it.forward = u.forward;
        items.push_back(it);
      }
      for (const auto& [k, v] : cell_pieces[mesh.cell_index(i, j)]) {
        const auto [sa, sb] = intervals[k][v];
        BItem it;
        it.curve = k;
        it.sa = sa;
        it.sb = sb;
        it.s = stop_point(k, sb);
        it.e = stop_point(k, sa);
        items.push_back(it);
      }

      std::vector<char> used(items.size(), 0);
      auto find_next = [&](const Vec2& at) {
        int exact = -1, close = -1, n_exact = 0, n_close = 0;
        for (size_t m = 0; m < items.size(); ++m) {
          if (used[m]) continue;
          if (items[m].s.x == at.x && items[m].s.y == at.y) {
            exact = static_cast<int>(m);
            ++n_exact;
          } else if ((items[m].s - at).norm() < 1e-9 * hmin) {
            close = static_cast<int>(m);
            ++n_close;
          }
        }
        if (n_exact == 1) return exact;
        if (n_exact == 0 && n_close == 1) return close;
        if (n_exact + n_close == 0) return -1;
        throw geometry_error(
            strf("cell (%d,%d): ambiguous boundary chaining", i, j));
      };

      size_t n_used = 0;
      while (n_used < items.size()) {
        size_t first = 0;
        while (used[first]) ++first;
        std::vector<int> chain{static_cast<int>(first)};
        used[first] = 1;
        ++n_used;
        while (true) {
          const BItem& cur = items[chain.back()];
          if ((cur.e - items[first].s).norm() < 1e-9 * hmin &&
              chain.size() > 1)
            break;
          const int nxt = find_next(cur.e);
          if (nxt < 0) {
            if ((cur.e - items[first].s).norm() < 1e-9 * hmin) break;
            throw geometry_error(
                strf("cell (%d,%d): cut boundary does not close", i, j));
          }
          chain.push_back(nxt);
          used[nxt] = 1;
          ++n_used;
        }

        Element el;
        el.id = static_cast<int>(mesh.elements.size());
        el.ci = i;
        el.cj = j;
        el.cartesian = false;
        el.box_lo = lo;
        el.box_hi = hi;

        // create embedded-boundary faces, then the loop
        std::vector<BItem> loop_items;
        for (int idx : chain) {
          BItem it = items[idx];
          if (it.curve >= 0 && it.face < 0) {
            const ParametricCurve& c = *mesh.curves[it.curve];
            Face f;
            f.id = static_cast<int>(mesh.faces.size());
            f.curve = it.curve;
            f.s0 = it.sa;
            f.s1 = it.sb;
            f.a = it.s;
            f.b = it.e;
            f.boundary = "embedded";
            f.elem_minus = el.id;
            // straightness: max deviation of curve samples from the chord
            const Vec2 chord = f.b - f.a;
            const double clen = chord.norm();
            double dev = 0.0;
            for (int q = 1; q <= 5; ++q) {
              const Vec2 p =
                  c.eval(wrap_param(it.sb + (it.sa - it.sb) * q / 6.0));
              dev = std::max(dev,
                             std::abs(chord.cross(p - f.a)) /
                                 std::max(clen, 1e-300));
            }
            f.kind = dev < 1e-12 * sc ? FaceKind::CutStraight
                                      : FaceKind::CutCurved;
            if (f.kind == FaceKind::CutStraight) {
              const Vec2 nrm = chord.rot_cw() * (1.0 / clen);
              f.rule = straight_rule(f.a, f.b, nrm, n_str);
            }
            it.face = f.id;
            it.sign = +1.0;
            it.forward = true;
            mesh.faces.push_back(std::move(f));
          } else {
            attach_side(mesh.faces[it.face], el.id, it.sign);
          }
          el.loop.push_back({it.face, it.sign, it.forward});
          loop_items.push_back(it);
        }

        const double area2 = shoelace2(loop_outline(mesh, loop_items));
        if (!(area2 > 1e-14 * hx * hy))
          throw geometry_error(
              strf("cell (%d,%d): cut element with vanishing area", i, j));

        ItemPieces pieces;
        try {
          triangulate_items(mesh, loop_items, Mvol, el.tris, pieces,
                            el.vol_unpruned);
        } catch (const build_error& err) {
          throw build_error(
              strf("cell (%d,%d): %s", i, j, err.what()));
        }
        for (size_t m = 0; m < loop_items.size(); ++m) {
          Face& f = mesh.faces[loop_items[m].face];
          if (f.kind != FaceKind::CutCurved || f.rule.size() > 0) continue;
          if (pieces[m].empty())
            throw build_error(
                strf("cell (%d,%d): curved face without owning subtriangle",
                     i, j));
          // Concatenate the side rules of the covering subtriangles in arc
          // order; an unsplit arc contributes exactly one side rule.
          FaceRule r;
          for (const ArcPiece& pc : pieces[m]) {
            const FaceRule sub = mapped_side_rule(el.tris[pc.tri], n_crv);
            r.points.insert(r.points.end(), sub.points.begin(),
                            sub.points.end());
            r.weights.insert(r.weights.end(), sub.weights.begin(),
                             sub.weights.end());
            r.normals.insert(r.normals.end(), sub.normals.begin(),
                             sub.normals.end());
          }
          f.rule = std::move(r);
        }

        el.volume = el.vol_unpruned.total_weight();
        if (opts.prune) {
          const PruneResult pr = caratheodory_prune(el.vol_unpruned, Mvol, N);
          el.vol = pr.rule;
        } else {
          el.vol = el.vol_unpruned;
        }
        mesh.cell_elems[mesh.cell_index(i, j)].push_back(el.id);
        mesh.elements.push_back(std::move(el));
      }
    }

  // ------------------------------------------------------- final checks
  for (Face& f : mesh.faces) {
    if (f.boundary.empty() && (f.elem_minus < 0 || f.elem_plus < 0))
      throw build_error(
          strf("interior face %d is missing a neighbor (minus=%d plus=%d)",
               f.id, f.elem_minus, f.elem_plus));
    if (!f.boundary.empty() && f.elem_minus < 0)
      throw build_error(strf("boundary face %d has no owner", f.id));
  }
  return mesh;
}

}  // namespace cutdg
