#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cutdg/conservation_laws.hpp"
#include "cutdg/cut_mesh.hpp"
#include "cutdg/operators.hpp"

namespace cutdg {

/// Interface flux selection for the semi-discrete right-hand side: pure
/// entropy conservative two-point fluxes, or entropy stable with local
/// Lax-Friedrichs dissipation added at interfaces and boundaries.
enum class FluxMode { EntropyConservative, EntropyStable };

/// Boundary treatment of one boundary tag ("left", ..., "embedded").
template <class Law>
struct BoundaryCondition {
  enum class Kind {
    Wall,           ///< reflective: normal momentum mirrored, scalars copied
    Prescribed,     ///< exterior state is a given function of (x, t)
    Extrapolation,  ///< exterior copies the interior trace (outflow)
    Freestream      ///< fixed exterior state (inlet)
  };
  using StateFn = std::function<typename Law::State(Vec2, double)>;

  Kind kind = Kind::Wall;
  StateFn prescribed;                   ///< Prescribed only
  typename Law::State freestream{};     ///< Freestream only

  static BoundaryCondition wall() { return {Kind::Wall, nullptr, {}}; }
  static BoundaryCondition extrapolation() {
    return {Kind::Extrapolation, nullptr, {}};
  }
  static BoundaryCondition prescribed_state(StateFn f) {
    return {Kind::Prescribed, std::move(f), {}};
  }
  static BoundaryCondition freestream_state(typename Law::State u) {
    return {Kind::Freestream, nullptr, u};
  }
};

/// Boundary tag -> treatment. Every boundary tag present in the mesh must
/// have an entry.
template <class Law>
using BoundaryTable = std::map<std::string, BoundaryCondition<Law>>;

/// Exterior (ghost) state seen across a boundary face point with outward
/// unit normal n at position x and time t. Throws admissibility_error when
/// a prescribed state function returns an inadmissible state.
template <class Law>
typename Law::State ghost_state(const BoundaryCondition<Law>& bc,
                                const typename Law::State& interior,
                                const Vec2& n, const Vec2& x, double t,
                                const Law& law);

/// Combined normal numerical flux n . f* at one face point. The
/// EntropyConservative mode combines the directional two-point fluxes with
/// the normal components; the EntropyStable mode uses the dissipative flux
/// whose jump penalty is applied once (never rescaled per direction).
template <class Law>
typename Law::State interface_flux(const Law& law, FluxMode mode,
                                   const typename Law::State& interior,
                                   const typename Law::State& exterior,
                                   const Vec2& n);

/// Entropy-projected conserved variables of one element: the solution is
/// mapped to entropy variables at volume quadrature points, L2-projected
/// onto the polynomial space, evaluated at volume and face points, and
/// mapped back to conserved variables.
template <class Law>
struct EntropyProjectedState {
  int n_q = 0;  ///< volume point count; face points follow
  std::vector<typename Law::State> values;

  const typename Law::State& volume(int q) const { return values[q]; }
  const typename Law::State& face(int i) const { return values[n_q + i]; }
  int n_f() const { return static_cast<int>(values.size()) - n_q; }
};

/// Exact time-dependent depth field with unit advection velocity, used to
/// manufacture a forced shallow water solution for convergence studies:
///   h(x, y, t) = a sin(kx x) sin(ky y) cos(w t) + h0,  (u1, u2) = (1, 1).
struct ManufacturedSolution {
  double amplitude = 1.0;
  double mean_depth = 3.0;
  double kx = 6.283185307179586;  ///< 2 pi
  double ky = 6.283185307179586;
  double omega = 3.141592653589793;  ///< pi

  ShallowWater::State state(Vec2 p, double t) const;
  /// Forcing s = du/dt + df1/dx + df2/dy of the manufactured field,
  /// evaluated analytically.
  ShallowWater::State source(const ShallowWater& law, Vec2 p, double t) const;
};

/// Semi-discrete entropy-stable discretization on a cut mesh: per element
/// flux differencing with the hybridized skew operator, entropy projection,
/// interface and boundary numerical fluxes, optional forcing.
///
/// Solution layout: one flat coefficient vector; element e occupies
/// [offset(e), offset(e) + coeff_dim(e) * n_vars), variable-major (all
/// coefficients of variable 0 first). Coefficients are nodal values at the
/// element's interpolation nodes.
template <class Law>
class Discretization {
 public:
  static constexpr int n_vars = Law::n_vars;
  using State = typename Law::State;
  using StateFn = std::function<State(Vec2, double)>;

  /// Validates connectivity and boundary coverage; factorizes mass
  /// matrices. The mesh and operator table must outlive the object.
  Discretization(const CutMesh& mesh, const OperatorTable& table, Law law,
                 BoundaryTable<Law> bcs, int n_threads = 1);

  int n_elements() const { return static_cast<int>(mesh_->elements.size()); }
  int coeff_dim(int e) const { return table_->of(e).basis.dim; }
  int offset(int e) const { return offsets_[e]; }
  int size() const { return offsets_.back(); }

  const CutMesh& mesh() const { return *mesh_; }
  const OperatorTable& operators() const { return *table_; }
  const Law& law() const { return law_; }

  /// Volume forcing added to du/dt (projected onto the element space).
  void set_source(StateFn s) { source_ = std::move(s); }

  /// Quadrature L2 projection of an initial state onto the solution space.
  std::vector<double> project(const std::function<State(Vec2)>& f) const;

  /// Entropy projection of one element's solution (see
  /// EntropyProjectedState). Throws admissibility_error with element and
  /// point context when the solution or its projection leaves the
  /// admissible set.
  EntropyProjectedState<Law> entropy_project(
      int e, const std::vector<double>& U) const;

  /// Flux-difference term: stacked vector with entry i equal to
  /// 2 sum_j QH_d(i,j) fEC_d(u_i, u_j), one column per variable. With
  /// exploit_symmetry the sum runs over structural nonzeros only and each
  /// off-diagonal flux evaluation serves the (i,j) and (j,i) entries; the
  /// dense path is a brute-force reference over all pairs.
  Eigen::MatrixXd flux_difference(const ElementOperators& ops,
                                  const EntropyProjectedState<Law>& proj,
                                  int d, bool exploit_symmetry = true) const;

  /// Semi-discrete right-hand side du/dt at time t.
  void rhs(const std::vector<double>& U, double t, FluxMode mode,
           std::vector<double>& dudt) const;
  std::vector<double> rhs(const std::vector<double>& U, double t,
                          FluxMode mode) const;

  /// Brute-force reference assembly: dense flux-difference loops, no
  /// symmetry shortcuts. For verification on small meshes.
  void rhs_reference(const std::vector<double>& U, double t, FluxMode mode,
                     std::vector<double>& dudt) const;

  /// Global entropy residual sum_e v_h^T M du/dt with v_h the L2-projected
  /// entropy variables. Zero to round-off for the conservative flux mode,
  /// nonpositive for the stable mode. Intended to be evaluated at accepted
  /// step states (not at internal stages).
  double entropy_residual(const std::vector<double>& U,
                          const std::vector<double>& dudt) const;

  /// Integral of the entropy density over the fluid domain.
  double total_entropy(const std::vector<double>& U) const;

  /// Integral of each conserved variable over the fluid domain.
  std::array<double, Law::n_vars> total_integrals(
      const std::vector<double>& U) const;

  /// Per-variable L2 error against an exact state function at time t,
  /// using each element's volume quadrature.
  std::array<double, Law::n_vars> l2_error(const std::vector<double>& U,
                                           const StateFn& exact,
                                           double t) const;

  /// CFL-style time step estimate: min over elements of
  /// cfl * min(hx, hy) / ((2N+1) lambda_max), wavespeeds sampled at volume
  /// quadrature points.
  double suggest_timestep(const std::vector<double>& U, double cfl) const;

 private:
  struct ElementCache {
    Eigen::MatrixXd PE;  ///< [Vq; Vf] Pq, entropy-projection evaluation
    Eigen::LLT<Eigen::MatrixXd> M_llt;
  };
  struct SideRef {
    int elem = -1;
    int offset = 0;  ///< into the element's stacked face points
  };
  struct FaceSides {
    SideRef minus, plus;
    const BoundaryCondition<Law>* bc = nullptr;
  };

  void rhs_impl(const std::vector<double>& U, double t, FluxMode mode,
                bool dense, std::vector<double>& dudt) const;
  void assemble_element(int e,
                        const std::vector<EntropyProjectedState<Law>>& proj,
                        double t, FluxMode mode, bool dense,
                        std::vector<double>& dudt) const;
  void require_size(const std::vector<double>& U) const;

  const CutMesh* mesh_;
  const OperatorTable* table_;
  Law law_;
  BoundaryTable<Law> bcs_;
  StateFn source_;
  int n_threads_ = 1;
  std::vector<int> offsets_;
  std::vector<std::unique_ptr<ElementCache>> cache_store_;
  std::vector<const ElementCache*> cache_;  ///< per element, shared
  std::vector<FaceSides> face_sides_;       ///< per face id
};

}  // namespace cutdg
