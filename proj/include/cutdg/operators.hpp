#pragma once

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <memory>
#include <vector>

#include "cutdg/cut_mesh.hpp"

namespace cutdg {

/// Polynomial approximation space of one element.
enum class BasisKind {
  TensorProduct,  ///< Q^N on the background cell (uncut elements)
  TotalDegree     ///< P^N on the physical cut element
};

/// Nodal (Lagrange) basis of one element, carried by a modal backbone:
/// tensor-product Legendre polynomials scaled to the background cell box,
/// recombined on cut elements so the modal family is orthonormal with
/// respect to the element volume rule. Nodes are Gauss-Lobatto grids on
/// uncut elements and approximate Fekete points on cut elements.
struct ElementBasis {
  BasisKind kind = BasisKind::TensorProduct;
  int order = 1;  ///< polynomial degree N
  int dim = 0;    ///< (N+1)^2 tensor-product, (N+1)(N+2)/2 total-degree
  Vec2 box_lo{}, box_hi{};  ///< scaling box (background cell)
  std::vector<std::pair<int, int>> powers;  ///< per-mode Legendre degrees
  Eigen::MatrixXd T;       ///< modal recombination, Psi = Phi_Legendre * T
  std::vector<Vec2> nodes;  ///< interpolation nodes (physical)
  Eigen::MatrixXd Vn_inv;   ///< inverse of the modal Vandermonde at nodes
  double node_cond = 0.0;   ///< condition number of that Vandermonde

  /// Orthonormal modal family evaluated at points (rows = points).
  Eigen::MatrixXd modal(const std::vector<Vec2>& pts) const;
  /// d/dx_d of the modal family, d in {0,1}.
  Eigen::MatrixXd modal_deriv(const std::vector<Vec2>& pts, int d) const;
};

/// Builds the nodal basis of one element (see ElementBasis). Throws
/// build_error when the element volume rule cannot resolve P^N.
ElementBasis build_basis(const CutMesh& mesh, const Element& elem);

/// Selects (N+1)(N+2)/2 interpolation nodes for a cut element from the
/// candidate cloud of volume quadrature and face quadrature points by
/// column-pivoted QR on the modal Vandermonde (greedy conditioning
/// maximization). Throws build_error if the cloud is rank-deficient.
std::vector<Vec2> approximate_fekete_points(const CutMesh& mesh,
                                            const Element& elem, int N);

/// Nodal generalized Vandermonde: (V)_{ij} = l_j(x_i) for the Lagrange
/// basis l of `basis`. Points may lie slightly outside the element
/// (polynomial extrapolation, used for face evaluation).
Eigen::MatrixXd vandermonde(const ElementBasis& basis,
                            const std::vector<Vec2>& pts);

/// Same for the derivative d l_j / d x_d.
Eigen::MatrixXd vandermonde_deriv(const ElementBasis& basis,
                                  const std::vector<Vec2>& pts, int d);

/// Differentiation matrix: maps nodal values of p to nodal values of
/// dp/dx_d, exactly for p in the basis span.
Eigen::MatrixXd differentiation_matrix(const ElementBasis& basis, int d);

/// Location of one boundary-loop face's quadrature block inside the stacked
/// face-point layout of an element (faces in loop order, points in stored
/// rule order).
struct FaceSlot {
  int offset = 0;
  int count = 0;
};

/// The full operator family of one element, acting on nodal coefficient
/// vectors (dimension dim) and on stacked point values [volume; face].
struct ElementOperators {
  ElementBasis basis;
  int n_q = 0;  ///< volume quadrature points
  int n_f = 0;  ///< stacked face quadrature points
  std::vector<FaceSlot> slots;  ///< one per loop face

  Eigen::MatrixXd Vq;  ///< volume interpolation, n_q x dim
  Eigen::MatrixXd Vf;  ///< face interpolation, n_f x dim
  Eigen::VectorXd wq;  ///< volume weights (diagonal of W)
  Eigen::VectorXd wf;  ///< face weights (diagonal of W_f)
  Eigen::MatrixXd M;   ///< mass matrix Vq^T W Vq
  Eigen::MatrixXd Pq;  ///< quadrature projection M^{-1} Vq^T W
  Eigen::MatrixXd E;   ///< face extrapolation Vf Pq
  std::array<Eigen::MatrixXd, 2> D;  ///< nodal differentiation
  std::array<Eigen::MatrixXd, 2> Q;  ///< generalized SBP, Pq^T M D_d Pq
  /// Boundary integration diagonal: face weight times outward normal
  /// component (outward from THIS element).
  std::array<Eigen::VectorXd, 2> bn;
  /// Skew-hybridized operator on stacked values, (n_q+n_f)^2:
  /// 0.5 [[Q_d - Q_d^T, E^T B_d], [-B_d E, B_d]].
  std::array<Eigen::MatrixXd, 2> QH;

  double perimeter = 0.0;  ///< total face weight
  double mass_cond = 0.0;  ///< spectral condition number of M
};

/// Builds the operator family of one element and enforces the
/// constant-annihilation bound ||QH_d 1||_inf <= 1e-9 * perimeter.
/// Throws build_error (naming the element) when the mass matrix is not SPD
/// or annihilation fails.
ElementOperators build_element_operators(const CutMesh& mesh,
                                         const Element& elem);

/// ||QH_d * ones||_inf for d = 0,1: discrete derivative of constants.
std::array<double, 2> constant_annihilation_check(const ElementOperators& ops);

/// Accuracy diagnostic: residual of the hybridized differentiation identity
///   [phi_q; phi_f]^T QH_d [u_q; u_f] = integral(phi du/dx_d)
/// maximized over box-scaled monomials u of total degree <= 2N-1, all basis
/// test functions phi, and both directions; the right side uses a boosted
/// quadrature of the element. Diagnostic only, never fatal.
double sbp_accuracy_check(const CutMesh& mesh, const Element& elem,
                          const ElementOperators& ops);

/// Per-mesh operator table. Uncut elements share one operator set (their
/// geometry is translation-invariant); cut elements own theirs.
struct OperatorTable {
  std::vector<std::shared_ptr<const ElementOperators>> ops;

  const ElementOperators& of(int elem_id) const { return *ops[elem_id]; }
};

/// Builds operators for every element of the mesh.
OperatorTable build_all_operators(const CutMesh& mesh);

/// Physical node positions of an element under a (possibly shared) operator
/// set: the basis nodes translated into the element's own cell box.
std::vector<Vec2> element_nodes(const Element& elem,
                                const ElementOperators& ops);

/// CSV diagnostic report: per element, point counts, condition numbers and
/// SBP residuals (accuracy column only when with_accuracy is set).
void operator_report(const CutMesh& mesh, const OperatorTable& table,
                     std::ostream& os, bool with_accuracy = false);

}  // namespace cutdg
