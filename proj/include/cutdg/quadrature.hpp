#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cutdg/util.hpp"

namespace cutdg {

/// A quadrature rule in one or two dimensions. 1D rules leave y = 0.
struct QuadratureRule {
  std::vector<Vec2> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(points.size()); }
  double total_weight() const {
    KahanSum s;
    for (double w : weights) s.add(w);
    return s.value();
  }
};

/// n-point Gauss-Legendre rule on [-1,1]; exact for polynomials of degree
/// 2n-1. Nodes are exactly symmetric about 0.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

/// n-point Gauss-Jacobi rule for the weight (1-x)^alpha (1+x)^beta on
/// [-1,1]; exact for p(x) of degree 2n-1 against that weight.
void gauss_jacobi(int n, double alpha, double beta, std::vector<double>& x,
                  std::vector<double>& w);

/// n-point Gauss-Lobatto-Legendre nodes on [-1,1] (n >= 2), endpoints
/// included; the associated weights integrate degree 2n-3 exactly.
void gauss_lobatto(int n, std::vector<double>& x, std::vector<double>& w);

enum class RefDomain { Interval, Triangle, Square };

/// Reference-domain rule with strictly positive weights, exact for all
/// polynomials of total degree <= degree. Interval = [-1,1], Square =
/// [-1,1]^2, Triangle = {(r,t) : r,t >= 0, r+t <= 1}. Triangle rules are
/// collapsed Gauss-Legendre x Gauss-Jacobi(1,0) tensor rules and are
/// supported up to degree 50.
QuadratureRule reference_rule(RefDomain domain, int degree);

/// Total-degree monomial basis on a bounding box, orthonormalized against a
/// reference quadrature rule. Used as the (well conditioned) moment basis
/// for pruning and exactness checks.
class MomentBasis {
 public:
  /// Builds the basis of total degree <= degree, orthonormal with respect to
  /// the discrete inner product defined by `reference`. Throws build_error
  /// if the reference rule cannot resolve the basis (rank deficiency).
  MomentBasis(const QuadratureRule& reference, int degree);

  int degree() const { return degree_; }
  int dim() const { return dim_; }

  /// Rows = points, columns = basis functions.
  Eigen::MatrixXd evaluate(const std::vector<Vec2>& pts) const;

  /// Moments sum_j w_j phi_i(x_j) of a rule against this basis.
  Eigen::VectorXd moments(const QuadratureRule& rule) const;

 private:
  int degree_ = 0;
  int dim_ = 0;
  Vec2 lo_, hi_;
  Eigen::MatrixXd coeff_;  // maps raw scaled monomials -> orthonormal basis

  Eigen::MatrixXd evaluate_raw(const std::vector<Vec2>& pts) const;
};

/// max_i |(moments of test)_i - b_i| / (1 + |b_i|) where b are the moments
/// of `reference` against the orthonormalized moment basis of total degree
/// `degree` built from `reference`.
double exactness_error(const QuadratureRule& test, const QuadratureRule& reference,
                       int degree);

struct PruneResult {
  QuadratureRule rule;        ///< surviving points and weights
  std::vector<int> kept;      ///< indices into the input rule
  int iterations = 0;         ///< null-vector elimination steps performed
  double moment_error = 0.0;  ///< exactness_error of the result vs the input
  int moment_dim = 0;         ///< dim of the total-degree moment space
};

/// Carathéodory pruning. Repeatedly computes a null vector dw of the moment
/// matrix of the active points (via a QR factorization of a working window
/// of dim+1 columns), steps the weights by w - alpha*dw with the sign of
/// alpha chosen to zero the most weights (ties broken by smaller |alpha|),
/// and drops zeroed points, until at most dim(P^degree)+1 points remain.
/// Weights stay nonnegative and all moments of total degree <= degree are
/// preserved to round-off. Weights below 1e-14 * total weight are dropped.
///
/// If unisolvency_degree >= 0, the surviving points are additionally
/// required to be unisolvent for P^unisolvency_degree; on failure pruning
/// is re-run keeping one extra point (and so on, a few times) before
/// giving up with build_error.
PruneResult caratheodory_prune(const QuadratureRule& input, int degree,
                               int unisolvency_degree = -1);

}  // namespace cutdg
