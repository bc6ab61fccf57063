#include "cutdg/discretization.hpp"

#include <cmath>
#include <cstddef>

#include "cutdg/util.hpp"

namespace cutdg {

namespace {

template <class Law>
typename Law::State row_state(const Eigen::MatrixXd& m, int i) {
  typename Law::State u{};
  for (int k = 0; k < Law::n_vars; ++k) u[k] = m(i, k);
  return u;
}

template <class Law>
std::vector<double> state_vec(const typename Law::State& u) {
  return std::vector<double>(u.begin(), u.end());
}

}  // namespace

template <class Law>
typename Law::State ghost_state(const BoundaryCondition<Law>& bc,
                                const typename Law::State& interior,
                                const Vec2& n, const Vec2& x, double t,
                                const Law& law) {
  using Kind = typename BoundaryCondition<Law>::Kind;
  switch (bc.kind) {
    case Kind::Wall: {
      typename Law::State g = interior;
      const double mn = g[1] * n.x + g[2] * n.y;
      g[1] -= 2.0 * mn * n.x;
      g[2] -= 2.0 * mn * n.y;
      return g;
    }
    case Kind::Prescribed: {
      typename Law::State g = bc.prescribed(x, t);
      if (!law.admissible(g))
        throw admissibility_error("prescribed boundary state inadmissible",
                                  -1, -1, state_vec<Law>(g));
      return g;
    }
    case Kind::Extrapolation:
      return interior;
    case Kind::Freestream:
      return bc.freestream;
  }
  throw error("unreachable boundary condition kind");
}

template <class Law>
typename Law::State interface_flux(const Law& law, FluxMode mode,
                                   const typename Law::State& interior,
                                   const typename Law::State& exterior,
                                   const Vec2& n) {
  if (mode == FluxMode::EntropyStable)
    return law.lf_flux(interior, exterior, n);
  const auto f0 = law.ec_flux(interior, exterior, 0);
  const auto f1 = law.ec_flux(interior, exterior, 1);
  typename Law::State out{};
  for (int k = 0; k < Law::n_vars; ++k) out[k] = n.x * f0[k] + n.y * f1[k];
  return out;
}

ShallowWater::State ManufacturedSolution::state(Vec2 p, double t) const {
  const double h = amplitude * std::sin(kx * p.x) * std::sin(ky * p.y) *
                       std::cos(omega * t) +
                   mean_depth;
  return {h, h, h};  // unit velocity in both directions
}

ShallowWater::State ManufacturedSolution::source(const ShallowWater& law,
                                                 Vec2 p, double t) const {
  const double sx = std::sin(kx * p.x), cx = std::cos(kx * p.x);
  const double sy = std::sin(ky * p.y), cy = std::cos(ky * p.y);
  const double st = std::sin(omega * t), ct = std::cos(omega * t);
  const double h = amplitude * sx * sy * ct + mean_depth;
  const double ht = -amplitude * omega * sx * sy * st;
  const double hx = amplitude * kx * cx * sy * ct;
  const double hy = amplitude * ky * sx * cy * ct;
  // with m = (h, h): mass eq s0 = ht + hx + hy; momentum adds g h grad(h)
  const double adv = ht + hx + hy;
  return {adv, adv + law.g * h * hx, adv + law.g * h * hy};
}

template <class Law>
Discretization<Law>::Discretization(const CutMesh& mesh,
                                    const OperatorTable& table, Law law,
                                    BoundaryTable<Law> bcs, int n_threads)
    : mesh_(&mesh),
      table_(&table),
      law_(law),
      bcs_(std::move(bcs)),
      n_threads_(n_threads) {
  face_connectivity(mesh);  // validates structural connectivity

  const int ne = n_elements();
  offsets_.resize(ne + 1);
  offsets_[0] = 0;
  for (int e = 0; e < ne; ++e)
    offsets_[e + 1] = offsets_[e] + coeff_dim(e) * n_vars;

  // factorizations and projection-evaluation matrices, one per distinct
  // operator set (uncut elements share one)
  cache_.resize(ne, nullptr);
  std::unordered_map<const ElementOperators*, const ElementCache*> seen;
  for (int e = 0; e < ne; ++e) {
    const ElementOperators* ops = table_->ops[e].get();
    auto it = seen.find(ops);
    if (it == seen.end()) {
      auto cache = std::make_unique<ElementCache>();
      cache->PE.resize(ops->n_q + ops->n_f, ops->n_q);
      cache->PE.topRows(ops->n_q) = ops->Vq * ops->Pq;
      cache->PE.bottomRows(ops->n_f) = ops->Vf * ops->Pq;
      cache->M_llt.compute(ops->M);
      if (cache->M_llt.info() != Eigen::Success)
        throw build_error(
            strf("element %d: mass matrix factorization failed", e));
      it = seen.emplace(ops, cache.get()).first;
      cache_store_.push_back(std::move(cache));
    }
    cache_[e] = it->second;
  }

  // face-side lookup: which element sees a face through which slot
  face_sides_.resize(mesh_->faces.size());
  for (int e = 0; e < ne; ++e) {
    const Element& elem = mesh_->elements[e];
    const ElementOperators& ops = table_->of(e);
    for (std::size_t k = 0; k < elem.loop.size(); ++k) {
      const FaceUse& use = elem.loop[k];
      SideRef& side = use.sign > 0.0 ? face_sides_[use.face].minus
                                     : face_sides_[use.face].plus;
      side = {e, ops.slots[k].offset};
    }
  }
  for (const Face& f : mesh_->faces) {
    FaceSides& sides = face_sides_[f.id];
    if (f.interior()) {
      if (sides.minus.elem < 0 || sides.plus.elem < 0)
        throw config_error(strf("face %d: dangling interior face", f.id));
    } else {
      auto it = bcs_.find(f.boundary);
      if (it == bcs_.end())
        throw config_error(
            strf("no boundary condition for tag '%s'", f.boundary.c_str()));
      sides.bc = &it->second;
    }
  }
}

template <class Law>
void Discretization<Law>::require_size(const std::vector<double>& U) const {
  if (static_cast<int>(U.size()) != size())
    throw error(strf("solution vector has %zu entries, discretization %d",
                     U.size(), size()));
}

template <class Law>
std::vector<double> Discretization<Law>::project(
    const std::function<State(Vec2)>& f) const {
  std::vector<double> U(static_cast<std::size_t>(size()));
  for (int e = 0; e < n_elements(); ++e) {
    const Element& elem = mesh_->elements[e];
    const ElementOperators& ops = table_->of(e);
    Eigen::MatrixXd fq(ops.n_q, n_vars);
    for (int q = 0; q < ops.n_q; ++q) {
      const State u = f(elem.vol.points[q]);
      for (int k = 0; k < n_vars; ++k) fq(q, k) = u[k];
    }
    Eigen::Map<Eigen::MatrixXd>(U.data() + offset(e), coeff_dim(e), n_vars) =
        ops.Pq * fq;
  }
  return U;
}

template <class Law>
EntropyProjectedState<Law> Discretization<Law>::entropy_project(
    int e, const std::vector<double>& U) const {
  require_size(U);
  const ElementOperators& ops = table_->of(e);
  const Eigen::Map<const Eigen::MatrixXd> coeff(U.data() + offset(e),
                                                coeff_dim(e), n_vars);
  const Eigen::MatrixXd uq = ops.Vq * coeff;
  Eigen::MatrixXd vq(ops.n_q, n_vars);
  for (int q = 0; q < ops.n_q; ++q) {
    const State u = row_state<Law>(uq, q);
    if (!law_.admissible(u))
      throw admissibility_error("inadmissible state at volume quadrature point",
                                e, q, state_vec<Law>(u));
    const State v = law_.entropy_variables(u);
    for (int k = 0; k < n_vars; ++k) vq(q, k) = v[k];
  }
  const Eigen::MatrixXd vproj = cache_[e]->PE * vq;

  EntropyProjectedState<Law> out;
  out.n_q = ops.n_q;
  out.values.resize(static_cast<std::size_t>(ops.n_q + ops.n_f));
  for (int i = 0; i < ops.n_q + ops.n_f; ++i) {
    const State u = law_.entropy_to_state(row_state<Law>(vproj, i));
    if (!law_.admissible(u))
      throw admissibility_error("entropy projection inadmissible", e, i,
                                state_vec<Law>(u));
    out.values[static_cast<std::size_t>(i)] = u;
  }
  return out;
}

template <class Law>
Eigen::MatrixXd Discretization<Law>::flux_difference(
    const ElementOperators& ops, const EntropyProjectedState<Law>& proj,
    int d, bool exploit_symmetry) const {
  const int nq = ops.n_q, n = ops.n_q + ops.n_f;
  const Eigen::MatrixXd& QH = ops.QH[d];
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n_vars);

  if (!exploit_symmetry) {
    // brute force over every pair, no structural assumptions
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double w = 2.0 * QH(i, j);
        const State f = law_.ec_flux(proj.values[i], proj.values[j], d);
        for (int k = 0; k < n_vars; ++k) out(i, k) += w * f[k];
      }
    return out;
  }

  // off-diagonal structure is globally skew (QH(j,i) = -QH(i,j)) and the
  // flux is symmetric, so one evaluation serves both entries; face-face
  // off-diagonal entries are structural zeros
  for (int i = 0; i < nq; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double w = 2.0 * QH(i, j);
      if (w == 0.0) continue;
      const State f = law_.ec_flux(proj.values[i], proj.values[j], d);
      for (int k = 0; k < n_vars; ++k) {
        out(i, k) += w * f[k];
        out(j, k) -= w * f[k];
      }
    }
  // boundary diagonal: consistency flux times the boundary weight
  for (int a = nq; a < n; ++a) {
    const double w = 2.0 * QH(a, a);
    if (w == 0.0) continue;
    const State f = law_.physical_flux(proj.values[a], d);
    for (int k = 0; k < n_vars; ++k) out(a, k) += w * f[k];
  }
  return out;
}

template <class Law>
void Discretization<Law>::assemble_element(
    int e, const std::vector<EntropyProjectedState<Law>>& proj, double t,
    FluxMode mode, bool dense, std::vector<double>& dudt) const {
  const Element& elem = mesh_->elements[e];
  const ElementOperators& ops = table_->of(e);
  const int nq = ops.n_q;

  Eigen::MatrixXd acc = flux_difference(ops, proj[e], 0, !dense);
  acc += flux_difference(ops, proj[e], 1, !dense);

  // interface and boundary corrections B (f* - f(u_f)), face rows only
  for (std::size_t k = 0; k < elem.loop.size(); ++k) {
    const FaceUse& use = elem.loop[k];
    const Face& face = mesh_->faces[use.face];
    const FaceSlot slot = ops.slots[k];
    const FaceSides& sides = face_sides_[face.id];
    for (int i = 0; i < slot.count; ++i) {
      const int p = slot.offset + i;
      const State& ui = proj[e].face(p);
      const Vec2 n = use.sign * face.rule.normals[i];
      State ue;
      if (face.interior()) {
        const SideRef& other = use.sign > 0.0 ? sides.plus : sides.minus;
        ue = proj[other.elem].face(other.offset + i);
      } else {
        ue = ghost_state(*sides.bc, ui, n, face.rule.points[i], t, law_);
      }
      const State fstar = interface_flux(law_, mode, ui, ue, n);
      const State f0 = law_.physical_flux(ui, 0);
      const State f1 = law_.physical_flux(ui, 1);
      const double w = ops.wf[p];
      for (int k2 = 0; k2 < n_vars; ++k2)
        acc(nq + p, k2) += w * (fstar[k2] - (n.x * f0[k2] + n.y * f1[k2]));
    }
  }

  // weak-form solve: M du/dt = -(Vq^T acc_vol + Vf^T acc_face) + source
  Eigen::MatrixXd r = ops.Vq.transpose() * acc.topRows(nq) +
                      ops.Vf.transpose() * acc.bottomRows(ops.n_f);
  Eigen::MatrixXd du = -cache_[e]->M_llt.solve(r);
  if (source_) {
    Eigen::MatrixXd sq(nq, n_vars);
    for (int q = 0; q < nq; ++q) {
      const State s = source_(elem.vol.points[q], t);
      for (int k = 0; k < n_vars; ++k) sq(q, k) = s[k];
    }
    du += ops.Pq * sq;
  }
  Eigen::Map<Eigen::MatrixXd>(dudt.data() + offset(e), coeff_dim(e), n_vars) =
      du;
}

template <class Law>
void Discretization<Law>::rhs_impl(const std::vector<double>& U, double t,
                                   FluxMode mode, bool dense,
                                   std::vector<double>& dudt) const {
  require_size(U);
  dudt.resize(U.size());
  std::vector<EntropyProjectedState<Law>> proj(
      static_cast<std::size_t>(n_elements()));
  parallel_for(n_elements(), n_threads_,
               [&](int e) { proj[e] = entropy_project(e, U); });
  parallel_for(n_elements(), n_threads_, [&](int e) {
    assemble_element(e, proj, t, mode, dense, dudt);
  });
}

template <class Law>
void Discretization<Law>::rhs(const std::vector<double>& U, double t,
                              FluxMode mode, std::vector<double>& dudt) const {
  rhs_impl(U, t, mode, false, dudt);
}

template <class Law>
std::vector<double> Discretization<Law>::rhs(const std::vector<double>& U,
                                             double t, FluxMode mode) const {
  std::vector<double> dudt;
  rhs_impl(U, t, mode, false, dudt);
  return dudt;
}

template <class Law>
void Discretization<Law>::rhs_reference(const std::vector<double>& U,
                                        double t, FluxMode mode,
                                        std::vector<double>& dudt) const {
  rhs_impl(U, t, mode, true, dudt);
}

template <class Law>
double Discretization<Law>::entropy_residual(
    const std::vector<double>& U, const std::vector<double>& dudt) const {
  require_size(U);
  require_size(dudt);
  KahanSum total;
  for (int e = 0; e < n_elements(); ++e) {
    const ElementOperators& ops = table_->of(e);
    const Eigen::Map<const Eigen::MatrixXd> coeff(U.data() + offset(e),
                                                  coeff_dim(e), n_vars);
    const Eigen::Map<const Eigen::MatrixXd> dcoeff(dudt.data() + offset(e),
                                                   coeff_dim(e), n_vars);
    const Eigen::MatrixXd uq = ops.Vq * coeff;
    Eigen::MatrixXd vq(ops.n_q, n_vars);
    for (int q = 0; q < ops.n_q; ++q) {
      const State v = law_.entropy_variables(row_state<Law>(uq, q));
      for (int k = 0; k < n_vars; ++k) vq(q, k) = v[k];
    }
    const Eigen::MatrixXd vh = ops.Pq * vq;       // projected entropy vars
    const Eigen::MatrixXd mdu = ops.M * dcoeff;   // mass-weighted rate
    for (int k = 0; k < n_vars; ++k)
      for (int i = 0; i < vh.rows(); ++i) total.add(vh(i, k) * mdu(i, k));
  }
  return total.value();
}

template <class Law>
double Discretization<Law>::total_entropy(const std::vector<double>& U) const {
  require_size(U);
  KahanSum total;
  for (int e = 0; e < n_elements(); ++e) {
    const ElementOperators& ops = table_->of(e);
    const Eigen::Map<const Eigen::MatrixXd> coeff(U.data() + offset(e),
                                                  coeff_dim(e), n_vars);
    const Eigen::MatrixXd uq = ops.Vq * coeff;
    for (int q = 0; q < ops.n_q; ++q)
      total.add(ops.wq[q] * law_.entropy(row_state<Law>(uq, q)));
  }
  return total.value();
}

template <class Law>
std::array<double, Law::n_vars> Discretization<Law>::total_integrals(
    const std::vector<double>& U) const {
  require_size(U);
  std::array<KahanSum, Law::n_vars> total{};
  for (int e = 0; e < n_elements(); ++e) {
    const ElementOperators& ops = table_->of(e);
    const Eigen::Map<const Eigen::MatrixXd> coeff(U.data() + offset(e),
                                                  coeff_dim(e), n_vars);
    const Eigen::MatrixXd uq = ops.Vq * coeff;
    for (int q = 0; q < ops.n_q; ++q)
      for (int k = 0; k < n_vars; ++k) total[k].add(ops.wq[q] * uq(q, k));
  }
  std::array<double, Law::n_vars> out{};
  for (int k = 0; k < n_vars; ++k) out[k] = total[k].value();
  return out;
}

template <class Law>
std::array<double, Law::n_vars> Discretization<Law>::l2_error(
    const std::vector<double>& U, const StateFn& exact, double t) const {
  require_size(U);
  std::array<KahanSum, Law::n_vars> sq{};
  for (int e = 0; e < n_elements(); ++e) {
    const Element& elem = mesh_->elements[e];
    const ElementOperators& ops = table_->of(e);
    const Eigen::Map<const Eigen::MatrixXd> coeff(U.data() + offset(e),
                                                  coeff_dim(e), n_vars);
    const Eigen::MatrixXd uq = ops.Vq * coeff;
    for (int q = 0; q < ops.n_q; ++q) {
      const State ue = exact(elem.vol.points[q], t);
      for (int k = 0; k < n_vars; ++k) {
        const double d = uq(q, k) - ue[k];
        sq[k].add(ops.wq[q] * d * d);
      }
    }
  }
  std::array<double, Law::n_vars> out{};
  for (int k = 0; k < n_vars; ++k) out[k] = std::sqrt(sq[k].value());
  return out;
}

template <class Law>
double Discretization<Law>::suggest_timestep(const std::vector<double>& U,
                                             double cfl) const {
  require_size(U);
  double dt = std::numeric_limits<double>::infinity();
  const int N = mesh_->order;
  for (int e = 0; e < n_elements(); ++e) {
    const Element& elem = mesh_->elements[e];
    const ElementOperators& ops = table_->of(e);
    const Eigen::Map<const Eigen::MatrixXd> coeff(U.data() + offset(e),
                                                  coeff_dim(e), n_vars);
    const Eigen::MatrixXd uq = ops.Vq * coeff;
    double lam = 0.0;
    for (int q = 0; q < ops.n_q; ++q) {
      const State u = row_state<Law>(uq, q);
      if (!law_.admissible(u))
        throw admissibility_error("inadmissible state in time step estimate",
                                  e, q, state_vec<Law>(u));
      lam = std::max(lam, law_.max_wavespeed(u, u, {1.0, 0.0}));
      lam = std::max(lam, law_.max_wavespeed(u, u, {0.0, 1.0}));
    }
    // cut elements ride on the background cell scale (stabilized by state
    // redistribution, never by shrinking dt)
    const double h = std::min(elem.box_hi.x - elem.box_lo.x,
                              elem.box_hi.y - elem.box_lo.y);
    if (lam > 0.0) dt = std::min(dt, cfl * h / ((2 * N + 1) * lam));
  }
  if (!std::isfinite(dt))
    throw error("time step estimate: no wave speeds found (zero velocity "
                "and zero sound speed everywhere?)");
  return dt;
}

template class Discretization<ShallowWater>;
template class Discretization<CompressibleEuler>;

template ShallowWater::State ghost_state<ShallowWater>(
    const BoundaryCondition<ShallowWater>&, const ShallowWater::State&,
    const Vec2&, const Vec2&, double, const ShallowWater&);
template CompressibleEuler::State ghost_state<CompressibleEuler>(
    const BoundaryCondition<CompressibleEuler>&,
    const CompressibleEuler::State&, const Vec2&, const Vec2&, double,
    const CompressibleEuler&);
template ShallowWater::State interface_flux<ShallowWater>(
    const ShallowWater&, FluxMode, const ShallowWater::State&,
    const ShallowWater::State&, const Vec2&);
template CompressibleEuler::State interface_flux<CompressibleEuler>(
    const CompressibleEuler&, FluxMode, const CompressibleEuler::State&,
    const CompressibleEuler::State&, const Vec2&);

}  // namespace cutdg
