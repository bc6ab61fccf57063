#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cutdg/geometry.hpp"
#include "cutdg/quadrature.hpp"

namespace cutdg {

/// Classification of background cells after cutting.
enum class CellClass { Cartesian, Cut, Removed };

/// Face geometry categories: full background-grid edges, straight pieces of
/// cut cells (partial grid edges or straight embedded segments), and curved
/// embedded segments.
enum class FaceKind { Cartesian, CutStraight, CutCurved };

const char* to_string(FaceKind k);
const char* to_string(CellClass c);

/// Quadrature rule along one face: physical points, positive arclength
/// weights, and one unit normal per point. Normals point out of the face's
/// minus-side element (see Face).
struct FaceRule {
  std::vector<Vec2> points;
  std::vector<double> weights;
  std::vector<Vec2> normals;

  int size() const { return static_cast<int>(points.size()); }
  double total_weight() const;
};

/// Degree-N polynomial map g from the reference triangle
/// {(r,t) : r >= 0, t >= 0, r + t <= 1} into the plane:
///
///   g(r,t) = a (1 - r - t) + v1 r + v2 t + r t e(t),
///
/// with e a vector polynomial of degree <= N-2. The sides r=0 and t=0 are
/// mapped affinely; the side r+t=1 (from v1 at t=0 to v2 at t=1) carries the
/// curved geometry. An empty e yields the affine map.
struct TriangleMap {
  Vec2 a{}, v1{}, v2{};
  std::vector<Vec2> e;  ///< deviation coefficients, e(t) = sum_k e[k] t^k

  Vec2 map(double r, double t) const;
  void jacobian(double r, double t, Vec2& g_r, Vec2& g_t) const;
  double det_jacobian(double r, double t) const;
  /// Point on the (possibly curved) side r+t=1: g(1-t, t).
  Vec2 side_point(double t) const;
  /// Tangent d/dt of side_point.
  Vec2 side_tangent(double t) const;
  bool affine() const { return e.empty(); }
};

/// Interpolates a degree-N triangle map from samples of its curved side.
/// `side_samples` holds either the two straight-side endpoints {v1, v2}
/// (affine map, any N) or N+1 points sampled at the Gauss-Lobatto parameters
/// t_k of [0,1]; samples front/back become v1/v2 and the interior samples are
/// interpolated exactly by the curved side.
/// Throws build_error on collinear/inverted vertex configurations.
TriangleMap build_triangle_map(const Vec2& apex,
                               const std::vector<Vec2>& side_samples, int N);

/// The Gauss-Lobatto parameters in [0,1] used for curved-side interpolation.
std::vector<double> side_interpolation_params(int N);

/// One face of the mesh. Faces are stored once and shared by their one or
/// two incident elements; stored normals point out of `elem_minus`, and an
/// element using the face with sign -1 is on the plus side.
struct Face {
  int id = -1;
  FaceKind kind = FaceKind::Cartesian;
  Vec2 a{}, b{};     ///< endpoints, in the minus-side element's loop order
  int curve = -1;    ///< embedding curve index for cut faces on the geometry
  double s0 = 0.0;   ///< curve parameter interval, s0 < s1 (s1 may exceed 1
  double s1 = 0.0;   ///< cyclically); traversal runs from s1 down to s0
  int elem_minus = -1;   ///< element the stored normals point out of
  int elem_plus = -1;    ///< other element, or -1 for boundary faces
  std::string boundary;  ///< "left/right/bottom/top/embedded" when boundary
  FaceRule rule;

  bool interior() const { return elem_plus >= 0; }
};

/// Reference to a face from an element's boundary loop; sign +1 means the
/// stored normals already point out of this element, and `forward` tells
/// whether this element traverses the face from endpoint a to b (fluid on
/// the left) or from b to a.
struct FaceUse {
  int face = -1;
  double sign = 1.0;
  bool forward = true;
};

/// One mesh element: an uncut background cell or one connected fluid piece
/// of a cut cell.
struct Element {
  int id = -1;
  int ci = -1, cj = -1;  ///< background cell index
  bool cartesian = true;
  std::vector<FaceUse> loop;      ///< closed boundary loop, fluid on the left
  std::vector<TriangleMap> tris;  ///< subtriangulation (cut elements only)
  QuadratureRule vol;             ///< operating volume rule
  QuadratureRule vol_unpruned;    ///< composite rule before pruning
  double volume = 0.0;            ///< area
  Vec2 box_lo{}, box_hi{};        ///< background cell box (basis scaling)
};

struct MeshOptions {
  /// Face quadrature point count; 0 selects N+1 on straight faces and
  /// max(2N+2, N(N+1)/2) on curved faces.
  int face_points = 0;
  /// Volume rule exactness target; 0 selects 2N-1.
  int volume_degree = 0;
  /// Compress cut-element volume rules (kept on except for diagnostics).
  bool prune = true;
};

struct CutMesh {
  BackgroundGrid grid{};
  std::vector<const ParametricCurve*> curves;  ///< non-owning
  int order = 1;  ///< geometric mapping degree N
  MeshOptions options{};
  std::vector<Face> faces;
  std::vector<Element> elements;
  std::vector<CellClass> cell_class;        ///< nx*ny, row-major (i + nx*j)
  std::vector<std::vector<int>> cell_elems; ///< element ids per cell

  int cell_index(int i, int j) const { return i + grid.nx * j; }
  int n_cartesian() const;
  int n_cut() const;
  int n_removed() const;
  double fluid_area() const;
  /// Discrete boundary integral of the outward normal over one element's
  /// loop (zero for a watertight element).
  Vec2 loop_normal_integral(const Element& e) const;
};

/// Builds the cut mesh: classifies cells against the embedded curves, forms
/// faces and face connectivity, chains cut-cell boundaries into closed
/// loops (one element per connected fluid piece), subtriangulates cut
/// elements with degree-N maps, and attaches volume/face quadrature.
CutMesh build_cut_mesh(const BackgroundGrid& grid,
                       std::vector<const ParametricCurve*> curves, int N,
                       const MeshOptions& opts = {});

/// Re-derives the subtriangulation of a built element from its face loop.
std::vector<TriangleMap> subtriangulate(const CutMesh& mesh,
                                        const Element& elem);

/// Composite volume rule over a set of triangle maps: per triangle, a
/// reference rule of degree M*N + 2(N-1) mapped through g with weights
/// scaled by det(Dg). Throws build_error on non-positive Jacobians.
QuadratureRule composite_rule_from_maps(const std::vector<TriangleMap>& tris,
                                        int N, int M);

/// Composite volume rule of an element with refinement parameter M
/// (per-triangle degree M*N + 2(N-1)).
QuadratureRule composite_volume_rule(const CutMesh& mesh, const Element& elem,
                                     int M);

/// Quadrature rule on the true face geometry with n_pts Gauss points:
/// weights carry |dgamma/ds| times the interval length, normals are unit
/// rotations of the tangent pointing out of the minus-side element. (The
/// rule stored on curved faces instead integrates along the degree-N
/// subtriangle side so that surface and volume quadrature see the same
/// geometry; this function provides the exact-geometry counterpart.)
FaceRule face_rule(const CutMesh& mesh, const Face& face, int n_pts);

struct NeighborEntry {
  int face = -1;
  int minus = -1;
  int plus = -1;  ///< -1 for boundary faces
};

/// Verifies structural connectivity (interior faces referenced by exactly
/// two elements with opposite orientation signs, matching quadrature point
/// lists, unit normals) and returns the face-neighbor table.
std::vector<NeighborEntry> face_connectivity(const CutMesh& mesh);

/// Plain-text CSV dump of elements and faces for inspection and golden
/// tests.
void dump_mesh_debug(const CutMesh& mesh, std::ostream& os);

}  // namespace cutdg
