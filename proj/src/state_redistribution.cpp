#include "cutdg/state_redistribution.hpp"

#include <algorithm>
#include <memory>
#include <set>
#include <unordered_map>

#include "cutdg/util.hpp"

namespace cutdg {

namespace {

/// Legendre polynomials P_0..P_N at the (scaled) abscissa.
void legendre_row(double xi, int N, double* out) {
  out[0] = 1.0;
  if (N >= 1) out[1] = xi;
  for (int k = 2; k <= N; ++k)
    out[k] = ((2 * k - 1) * xi * out[k - 1] - (k - 1) * out[k - 2]) / k;
}

/// Values of the total-degree-N Legendre product basis on the box
/// [lo, hi], evaluated at the given points. Modes are ordered by total
/// degree, then by x-degree.
Eigen::MatrixXd merged_basis(const std::vector<Vec2>& pts, const Vec2& lo,
                             const Vec2& hi, int N) {
  const int dim = (N + 1) * (N + 2) / 2;
  Eigen::MatrixXd phi(pts.size(), dim);
  std::vector<double> px(N + 1), py(N + 1);
  for (std::size_t q = 0; q < pts.size(); ++q) {
    const double xi = (2.0 * pts[q].x - lo.x - hi.x) / (hi.x - lo.x);
    const double eta = (2.0 * pts[q].y - lo.y - hi.y) / (hi.y - lo.y);
    legendre_row(xi, N, px.data());
    legendre_row(eta, N, py.data());
    int c = 0;
    for (int deg = 0; deg <= N; ++deg)
      for (int a = deg; a >= 0; --a) phi(q, c++) = px[a] * py[deg - a];
  }
  return phi;
}

}  // namespace

RedistributionOperator::RedistributionOperator(const CutMesh& mesh,
                                               const OperatorTable& ops,
                                               double threshold,
                                               int n_threads)
    : mesh_(&mesh),
      ops_(&ops),
      threshold_(threshold),
      n_threads_(n_threads) {
  if (!(threshold > 0.0) || threshold > 1.0)
    throw config_error(
        strf("redistribution threshold %g outside (0, 1]", threshold));
  const int n_elems = static_cast<int>(mesh.elements.size());
  const double target = threshold * mesh.grid.hx() * mesh.grid.hy();

  dim_off_.assign(n_elems + 1, 0);
  for (int e = 0; e < n_elems; ++e)
    dim_off_[e + 1] = dim_off_[e] + ops.of(e).basis.dim;

  // ------------------------------------------------ face adjacency
  std::vector<std::set<int>> adj(n_elems);
  for (const Face& f : mesh.faces)
    if (f.interior()) {
      adj[f.elem_minus].insert(f.elem_plus);
      adj[f.elem_plus].insert(f.elem_minus);
    }

  // ------------------------------------------------ grow neighborhoods
  nbhd_.resize(n_elems);
  for (int e = 0; e < n_elems; ++e) {
    MergeNeighborhood& nb = nbhd_[e];
    nb.owner = e;
    nb.members = {e};
    nb.combined_volume = mesh.elements[e].volume;
    std::set<int> inside{e};
    std::set<int> cand(adj[e].begin(), adj[e].end());
    while (nb.combined_volume < target) {
      int best = -1;
      double best_vol = -1.0;
      for (int c : cand)
        if (mesh.elements[c].volume > best_vol) {
          best = c;
          best_vol = mesh.elements[c].volume;
        }
      if (best < 0)
        throw build_error(
            strf("element %d (volume fraction %.3e) has no face neighbors "
                 "left to merge with",
                 e, mesh.elements[e].volume / (target / threshold)));
      nb.members.push_back(best);
      nb.combined_volume += best_vol;
      inside.insert(best);
      cand.erase(best);
      for (int c : adj[best])
        if (!inside.count(c)) cand.insert(c);
    }
  }
  trivial_ = true;
  for (const MergeNeighborhood& nb : nbhd_)
    if (nb.members.size() > 1) trivial_ = false;

  // ------------------------------------------------ overlap counts
  overlap_.assign(n_elems, 0);
  for (const MergeNeighborhood& nb : nbhd_)
    for (int m : nb.members) ++overlap_[m];

  // ------------------------------------------------ scatter bookkeeping
  scatter_.resize(n_elems);
  for (int j = 0; j < n_elems; ++j) {
    if (nbhd_[j].members.size() < 2) continue;
    for (std::size_t s = 0; s < nbhd_[j].members.size(); ++s)
      scatter_[nbhd_[j].members[s]].from.push_back(
          {j, static_cast<int>(s)});
  }
  for (int e = 0; e < n_elems; ++e)
    scatter_[e].own_singleton =
        nbhd_[e].members.size() < 2 && !scatter_[e].from.empty();

  // ------------------------------------------------ projection data
  const int N = mesh.order;
  merged_dim_ = (N + 1) * (N + 2) / 2;
  data_.resize(n_elems);
  parallel_for(n_elems, n_threads_, [&](int j) {
    const MergeNeighborhood& nb = nbhd_[j];
    if (nb.members.size() < 2) return;
    Vec2 lo = mesh.elements[nb.members[0]].box_lo;
    Vec2 hi = mesh.elements[nb.members[0]].box_hi;
    for (int m : nb.members) {
      lo.x = std::min(lo.x, mesh.elements[m].box_lo.x);
      lo.y = std::min(lo.y, mesh.elements[m].box_lo.y);
      hi.x = std::max(hi.x, mesh.elements[m].box_hi.x);
      hi.y = std::max(hi.y, mesh.elements[m].box_hi.y);
    }
    NeighborhoodData& nd = data_[j];
    nd.psi.resize(nb.members.size());
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(merged_dim_, merged_dim_);
    for (std::size_t s = 0; s < nb.members.size(); ++s) {
      const Element& el = mesh.elements[nb.members[s]];
      nd.psi[s] = merged_basis(el.vol.points, lo, hi, N);
      const Eigen::Map<const Eigen::VectorXd> w(el.vol.weights.data(),
                                                el.vol.size());
      gram += (1.0 / overlap_[nb.members[s]]) * nd.psi[s].transpose() *
              w.asDiagonal() * nd.psi[s];
    }
    nd.gram.compute(gram);
    if (nd.gram.info() != Eigen::Success)
      throw build_error(strf(
          "merged projection matrix for the neighborhood of element %d is "
          "singular",
          j));
  });

  // ------------------------------------------------ element mass solves
  mass_.resize(n_elems);
  std::unordered_map<const ElementOperators*,
                     std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>>>
      cache;
  for (int e = 0; e < n_elems; ++e) {
    if (scatter_[e].from.empty()) continue;  // identity: no solve needed
    const ElementOperators* oe = &ops.of(e);
    auto it = cache.find(oe);
    if (it == cache.end()) {
      auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(oe->M);
      if (llt->info() != Eigen::Success)
        throw build_error(
            strf("element %d mass matrix is not SPD", e));
      it = cache.emplace(oe, std::move(llt)).first;
    }
    mass_[e] = it->second;
  }
}

int RedistributionOperator::n_merged() const {
  int n = 0;
  for (const MergeNeighborhood& nb : nbhd_)
    if (nb.members.size() > 1) ++n;
  return n;
}

void RedistributionOperator::apply(std::vector<double>& solution,
                                   int n_vars) const {
  if (trivial_) return;
  const int n_elems = static_cast<int>(nbhd_.size());
  if (static_cast<int>(solution.size()) != dim_off_[n_elems] * n_vars)
    throw config_error(
        strf("redistribution: solution has %zu values, expected %d",
             solution.size(), dim_off_[n_elems] * n_vars));
  auto coeffs = [&](int e) {
    return Eigen::Map<const Eigen::MatrixXd>(
        solution.data() + dim_off_[e] * n_vars, dim_off_[e + 1] - dim_off_[e],
        n_vars);
  };

  // merge: overlap-weighted L2 projection onto each neighborhood's space
  std::vector<Eigen::MatrixXd> qhat(n_elems);
  parallel_for(n_elems, n_threads_, [&](int j) {
    const MergeNeighborhood& nb = nbhd_[j];
    if (nb.members.size() < 2) return;
    const NeighborhoodData& nd = data_[j];
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(merged_dim_, n_vars);
    for (std::size_t s = 0; s < nb.members.size(); ++s) {
      const int m = nb.members[s];
      const Element& el = mesh_->elements[m];
      const Eigen::Map<const Eigen::VectorXd> w(el.vol.weights.data(),
                                                el.vol.size());
      const Eigen::MatrixXd vals = ops_->of(m).Vq * coeffs(m);
      rhs += (1.0 / overlap_[m]) * nd.psi[s].transpose() *
             (w.asDiagonal() * vals);
    }
    qhat[j] = nd.gram.solve(rhs);
  });

  // scatter: equal-weight average of the covering merged polynomials,
  // projected back onto each element's own space (elements in no merged
  // group keep their solution bit for bit)
  parallel_for(n_elems, n_threads_, [&](int k) {
    const ElementScatter& sc = scatter_[k];
    if (sc.from.empty()) return;
    const Element& el = mesh_->elements[k];
    const ElementOperators& ok = ops_->of(k);
    Eigen::MatrixXd vals =
        Eigen::MatrixXd::Zero(el.vol.size(), n_vars);
    for (const auto& [j, s] : sc.from) vals += data_[j].psi[s] * qhat[j];
    const Eigen::Map<const Eigen::VectorXd> w(el.vol.weights.data(),
                                              el.vol.size());
    Eigen::MatrixXd next =
        mass_[k]->solve(ok.Vq.transpose() * (w.asDiagonal() * vals));
    if (sc.own_singleton) next += coeffs(k);
    next *= 1.0 / overlap_[k];
    Eigen::Map<Eigen::MatrixXd>(solution.data() + dim_off_[k] * n_vars,
                                next.rows(), n_vars) = next;
  });
}

}  // namespace cutdg
