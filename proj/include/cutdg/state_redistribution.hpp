#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cutdg/cut_mesh.hpp"
#include "cutdg/operators.hpp"

namespace cutdg {

/// Group of elements whose solutions are merged to stabilize a small cut
/// element. Every element owns exactly one neighborhood; full-size elements
/// own the trivial singleton {themselves}.
struct MergeNeighborhood {
  int owner = -1;
  std::vector<int> members;  ///< owner first, then grafted face-neighbors
  double combined_volume = 0.0;
};

/// Conservative redistribution of the solution on small cut elements,
/// applied after each accepted time step to relax their CFL restriction.
///
/// Each element whose fluid volume falls below `threshold` times the
/// background cell area owns a merge neighborhood, grown by repeatedly
/// adding the largest face-neighbor of the current group until the combined
/// volume reaches the threshold. Applying the operator
///   1. L2-projects the piecewise solution over each neighborhood onto the
///      total-degree space on the neighborhood's bounding box, weighting
///      every member by the reciprocal of its overlap count (the number of
///      neighborhoods it belongs to), and
///   2. replaces each element's solution by the equal-weight average of the
///      merged polynomials covering it, re-projected onto the element's own
///      approximation space.
/// The reciprocal-overlap weights in step 1 are exactly what makes the
/// equal-weight average in step 2 conservative. The map is linear, preserves
/// globally polynomial fields of the scheme's degree, and is the identity on
/// elements that belong to no merged group.
class RedistributionOperator {
 public:
  /// Builds neighborhoods and projection data for a mesh whose operators
  /// have been assembled. `threshold` is the minimum fluid volume as a
  /// fraction of the background cell area, in (0, 1].
  RedistributionOperator(const CutMesh& mesh, const OperatorTable& ops,
                         double threshold = 0.5, int n_threads = 1);

  const std::vector<MergeNeighborhood>& neighborhoods() const {
    return nbhd_;
  }
  /// Number of neighborhoods (equivalently, merged groups) containing the
  /// element.
  int overlap(int element) const { return overlap_[element]; }
  double threshold() const { return threshold_; }
  /// True when every neighborhood is a singleton; apply() is then a no-op.
  bool trivial() const { return trivial_; }
  /// Number of non-singleton neighborhoods.
  int n_merged() const;

  /// Redistributes the flat nodal solution in place. The layout matches the
  /// discretization: element e occupies coeff_dim(e) * n_vars values,
  /// variable-major, at consecutive offsets in element-id order.
  void apply(std::vector<double>& solution, int n_vars) const;

 private:
  struct NeighborhoodData {
    Eigen::LLT<Eigen::MatrixXd> gram;      ///< overlap-weighted merged Gram
    std::vector<Eigen::MatrixXd> psi;      ///< per member: merged basis at
                                           ///< the member's volume points
  };
  struct ElementScatter {
    std::vector<std::pair<int, int>> from;  ///< (neighborhood, member slot)
    bool own_singleton = false;  ///< own solution enters the average as-is
  };

  const CutMesh* mesh_;
  const OperatorTable* ops_;
  double threshold_;
  int n_threads_;
  bool trivial_;
  int merged_dim_;  ///< dimension of the total-degree merged space
  std::vector<MergeNeighborhood> nbhd_;  ///< indexed by owner element id
  std::vector<int> overlap_;
  std::vector<int> dim_off_;  ///< cumulative basis dimensions per element
  std::vector<NeighborhoodData> data_;
  std::vector<ElementScatter> scatter_;
  std::vector<std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>>> mass_;
};

}  // namespace cutdg
