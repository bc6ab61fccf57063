#include "cutdg/operators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace cutdg {

namespace {

/// Legendre values P_0..P_N at x (recurrence, stable for |x| <~ 1).
void legendre_row(int N, double x, double* P) {
  P[0] = 1.0;
  if (N >= 1) P[1] = x;
  for (int k = 1; k < N; ++k)
    P[k + 1] = ((2 * k + 1) * x * P[k] - k * P[k - 1]) / (k + 1);
}

/// Derivatives P'_0..P'_N via P'_{k+1} = P'_{k-1} + (2k+1) P_k.
void legendre_deriv_row(int N, const double* P, double* dP) {
  dP[0] = 0.0;
  if (N >= 1) dP[1] = 1.0;
  for (int k = 1; k < N; ++k) dP[k + 1] = dP[k - 1] + (2 * k + 1) * P[k];
}

constexpr int kMaxOrder = 8;

/// Raw modal rows: products of box-normalized Legendre polynomials
/// following basis.powers; optionally differentiated in direction d
/// (d = -1 for plain values).
Eigen::MatrixXd raw_modal(const ElementBasis& b, const std::vector<Vec2>& pts,
                          int d) {
  const int N = b.order;
  const double hx = b.box_hi.x - b.box_lo.x;
  const double hy = b.box_hi.y - b.box_lo.y;
  Eigen::MatrixXd out(pts.size(), b.powers.size());
  double Px[kMaxOrder + 1], Py[kMaxOrder + 1];
  double dPx[kMaxOrder + 1], dPy[kMaxOrder + 1];
  double nx[kMaxOrder + 1], ny[kMaxOrder + 1];
  for (int k = 0; k <= N; ++k) {
    nx[k] = std::sqrt((2 * k + 1) / hx);
    ny[k] = std::sqrt((2 * k + 1) / hy);
  }
  for (size_t p = 0; p < pts.size(); ++p) {
    const double xh = (2.0 * pts[p].x - (b.box_lo.x + b.box_hi.x)) / hx;
    const double yh = (2.0 * pts[p].y - (b.box_lo.y + b.box_hi.y)) / hy;
    legendre_row(N, xh, Px);
    legendre_row(N, yh, Py);
    if (d == 0) legendre_deriv_row(N, Px, dPx);
    if (d == 1) legendre_deriv_row(N, Py, dPy);
    for (size_t m = 0; m < b.powers.size(); ++m) {
      const auto [i, j] = b.powers[m];
      double v;
      if (d == 0)
        v = dPx[i] * (2.0 / hx) * Py[j];
      else if (d == 1)
        v = Px[i] * dPy[j] * (2.0 / hy);
      else
        v = Px[i] * Py[j];
      out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m)) =
          v * nx[i] * ny[j];
    }
  }
  return out;
}

std::vector<std::pair<int, int>> mode_powers(BasisKind kind, int N) {
  std::vector<std::pair<int, int>> powers;
  if (kind == BasisKind::TensorProduct) {
    for (int j = 0; j <= N; ++j)
      for (int i = 0; i <= N; ++i) powers.emplace_back(i, j);
  } else {
    for (int deg = 0; deg <= N; ++deg)
      for (int i = deg; i >= 0; --i) powers.emplace_back(i, deg - i);
  }
  return powers;
}

double condition_number(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 0.0)
    return std::numeric_limits<double>::infinity();
  return s(0) / (s(s.size() - 1));
}

/// Candidate cloud for node selection: composite volume quadrature points
/// plus all face quadrature points.
std::vector<Vec2> node_candidates(const CutMesh& mesh, const Element& elem) {
  std::vector<Vec2> cand = elem.vol_unpruned.points;
  if (cand.empty()) cand = elem.vol.points;
  for (const FaceUse& use : elem.loop) {
    const FaceRule& r = mesh.faces[use.face].rule;
    cand.insert(cand.end(), r.points.begin(), r.points.end());
  }
  return cand;
}

/// Skeleton basis without nodes: box, mode set and modal recombination.
ElementBasis modal_skeleton(const Element& elem, int N) {
  ElementBasis b;
  b.kind = elem.cartesian ? BasisKind::TensorProduct : BasisKind::TotalDegree;
  b.order = N;
  b.box_lo = elem.box_lo;
  b.box_hi = elem.box_hi;
  b.powers = mode_powers(b.kind, N);
  b.dim = static_cast<int>(b.powers.size());
  if (elem.cartesian) {
    // box-scaled Legendre products are orthonormal under the exact tensor
    // Gauss rule already
    b.T = Eigen::MatrixXd::Identity(b.dim, b.dim);
    return b;
  }
  // Gram-orthonormalize against the element volume rule so the modal mass
  // matrix is the identity.
  b.T = Eigen::MatrixXd::Identity(b.dim, b.dim);
  const Eigen::MatrixXd phi = raw_modal(b, elem.vol.points, -1);
  Eigen::MatrixXd gram = phi.transpose() *
                         Eigen::Map<const Eigen::VectorXd>(
                             elem.vol.weights.data(), elem.vol.size())
                             .asDiagonal() *
                         phi;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw build_error(strf(
        "element %d: volume rule cannot resolve the degree-%d space "
        "(modal Gram matrix not SPD)",
        elem.id, N));
  b.T = llt.matrixL()
            .transpose()
            .solve(Eigen::MatrixXd::Identity(b.dim, b.dim));
  return b;
}

}  // namespace

Eigen::MatrixXd ElementBasis::modal(const std::vector<Vec2>& pts) const {
  return raw_modal(*this, pts, -1) * T;
}

Eigen::MatrixXd ElementBasis::modal_deriv(const std::vector<Vec2>& pts,
                                          int d) const {
  return raw_modal(*this, pts, d) * T;
}

std::vector<Vec2> approximate_fekete_points(const CutMesh& mesh,
                                            const Element& elem, int N) {
  if (N < 1 || N > kMaxOrder)
    throw config_error(strf("node selection: unsupported degree %d", N));
  const ElementBasis b = modal_skeleton(elem, N);
  const std::vector<Vec2> cand = node_candidates(mesh, elem);
  if (static_cast<int>(cand.size()) < b.dim)
    throw build_error(strf("element %d: only %zu node candidates for a "
                           "%d-dimensional space",
                           elem.id, cand.size(), b.dim));
  const Eigen::MatrixXd psiT = b.modal(cand).transpose();  // dim x n_cand
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(psiT);
  if (qr.rank() < b.dim)
    throw build_error(strf(
        "element %d: node candidate cloud is rank-deficient (%d < %d) for "
        "degree %d",
        elem.id, static_cast<int>(qr.rank()), b.dim, N));
  std::vector<Vec2> nodes(b.dim);
  const auto& perm = qr.colsPermutation().indices();
  for (int k = 0; k < b.dim; ++k) nodes[k] = cand[perm(k)];
  return nodes;
}

ElementBasis build_basis(const CutMesh& mesh, const Element& elem) {
  ElementBasis b = modal_skeleton(elem, mesh.order);
  const int N = b.order;
  if (elem.cartesian) {
    std::vector<double> gll, wl;
    gauss_lobatto(N + 1, gll, wl);
    b.nodes.reserve(b.dim);
    const Vec2 c = (b.box_lo + b.box_hi) * 0.5;
    const Vec2 h{(b.box_hi.x - b.box_lo.x) * 0.5,
                 (b.box_hi.y - b.box_lo.y) * 0.5};
    for (int j = 0; j <= N; ++j)
      for (int i = 0; i <= N; ++i)
        b.nodes.push_back({c.x + h.x * gll[i], c.y + h.y * gll[j]});
  } else {
    b.nodes = approximate_fekete_points(mesh, elem, N);
  }
  const Eigen::MatrixXd Vn = b.modal(b.nodes);
  b.node_cond = condition_number(Vn);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Vn);
  if (!std::isfinite(b.node_cond) || b.node_cond > 1e12)
    throw build_error(strf(
        "element %d: interpolation nodes give an ill-conditioned basis "
        "(cond %.3e)",
        elem.id, b.node_cond));
  b.Vn_inv = lu.inverse();
  return b;
}

Eigen::MatrixXd vandermonde(const ElementBasis& basis,
                            const std::vector<Vec2>& pts) {
  return basis.modal(pts) * basis.Vn_inv;
}

Eigen::MatrixXd vandermonde_deriv(const ElementBasis& basis,
                                  const std::vector<Vec2>& pts, int d) {
  return basis.modal_deriv(pts, d) * basis.Vn_inv;
}

Eigen::MatrixXd differentiation_matrix(const ElementBasis& basis, int d) {
  return vandermonde_deriv(basis, basis.nodes, d);
}

std::array<double, 2> constant_annihilation_check(
    const ElementOperators& ops) {
  std::array<double, 2> r{};
  const Eigen::VectorXd ones =
      Eigen::VectorXd::Ones(ops.n_q + ops.n_f);
  for (int d = 0; d < 2; ++d)
    r[d] = (ops.QH[d] * ones).cwiseAbs().maxCoeff();
  return r;
}

ElementOperators build_element_operators(const CutMesh& mesh,
                                         const Element& elem) {
  ElementOperators ops;
  ops.basis = build_basis(mesh, elem);
  const int dim = ops.basis.dim;

  ops.n_q = elem.vol.size();
  ops.wq = Eigen::Map<const Eigen::VectorXd>(elem.vol.weights.data(),
                                             ops.n_q);
  ops.Vq = vandermonde(ops.basis, elem.vol.points);

  // stacked face layout: loop order, stored rule order within each face
  std::vector<Vec2> fpts;
  std::vector<double> fw;
  std::vector<Vec2> fnrm;  // outward from this element
  ops.slots.reserve(elem.loop.size());
  for (const FaceUse& use : elem.loop) {
    const FaceRule& r = mesh.faces[use.face].rule;
    ops.slots.push_back({static_cast<int>(fpts.size()), r.size()});
    for (int q = 0; q < r.size(); ++q) {
      fpts.push_back(r.points[q]);
      fw.push_back(r.weights[q]);
      fnrm.push_back(r.normals[q] * use.sign);
    }
  }
  ops.n_f = static_cast<int>(fpts.size());
  ops.Vf = vandermonde(ops.basis, fpts);
  ops.wf = Eigen::Map<const Eigen::VectorXd>(fw.data(), ops.n_f);
  ops.perimeter = ops.wf.sum();
  for (int d = 0; d < 2; ++d) {
    ops.bn[d].resize(ops.n_f);
    for (int q = 0; q < ops.n_f; ++q)
      ops.bn[d](q) = fw[q] * (d == 0 ? fnrm[q].x : fnrm[q].y);
  }

  ops.M = ops.Vq.transpose() * ops.wq.asDiagonal() * ops.Vq;
  Eigen::LLT<Eigen::MatrixXd> llt(ops.M);
  if (llt.info() != Eigen::Success)
    throw build_error(strf("element %d: mass matrix not SPD (volume rule "
                           "insufficient for the degree-%d space)",
                           elem.id, mesh.order));
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ops.M);
    const auto& ev = es.eigenvalues();
    ops.mass_cond = ev(dim - 1) / ev(0);
  }
  ops.Pq = llt.solve(ops.Vq.transpose() * ops.wq.asDiagonal());
  ops.E = ops.Vf * ops.Pq;
  for (int d = 0; d < 2; ++d) {
    ops.D[d] = differentiation_matrix(ops.basis, d);
    ops.Q[d] = ops.Pq.transpose() * (ops.M * ops.D[d]) * ops.Pq;
    const int n = ops.n_q + ops.n_f;
    ops.QH[d].setZero(n, n);
    ops.QH[d].topLeftCorner(ops.n_q, ops.n_q) =
        0.5 * (ops.Q[d] - ops.Q[d].transpose());
    ops.QH[d].topRightCorner(ops.n_q, ops.n_f) =
        (ops.E.transpose() * ops.bn[d].asDiagonal()) * 0.5;
    ops.QH[d].bottomLeftCorner(ops.n_f, ops.n_q) =
        (ops.bn[d].asDiagonal() * ops.E) * -0.5;
    for (int q = 0; q < ops.n_f; ++q)
      ops.QH[d](ops.n_q + q, ops.n_q + q) = 0.5 * ops.bn[d](q);
  }

  const std::array<double, 2> ann = constant_annihilation_check(ops);
  for (int d = 0; d < 2; ++d)
    if (!(ann[d] <= 1e-9 * ops.perimeter))
      throw build_error(strf(
          "element %d: discrete derivative of constants is %.3e in "
          "direction %d (limit %.3e); face and volume quadrature are "
          "geometrically inconsistent",
          elem.id, ann[d], d, 1e-9 * ops.perimeter));
  return ops;
}

double sbp_accuracy_check(const CutMesh& mesh, const Element& elem,
                          const ElementOperators& ops) {
  const int N = mesh.order;
  const ElementBasis& b = ops.basis;

  // boosted reference quadrature resolving phi * du (degree up to 3N-1,
  // composed with degree-N maps on cut elements)
  QuadratureRule boost;
  if (elem.cartesian) {
    std::vector<double> gx, gw;
    gauss_legendre(2 * N, gx, gw);
    const Vec2 c = (elem.box_lo + elem.box_hi) * 0.5;
    const Vec2 h{(elem.box_hi.x - elem.box_lo.x) * 0.5,
                 (elem.box_hi.y - elem.box_lo.y) * 0.5};
    for (size_t j = 0; j < gx.size(); ++j)
      for (size_t i = 0; i < gx.size(); ++i) {
        boost.points.push_back({c.x + h.x * gx[i], c.y + h.y * gx[j]});
        boost.weights.push_back(gw[i] * gw[j] * h.x * h.y);
      }
  } else {
    // per-triangle degree (3N-2)N + 2(N-1) = 3N^2 - 2 matches the composed
    // integrand exactly; clamp to the supported simplex-rule degree
    const int M = std::min(3 * N - 2, (52 - 2 * N) / N);
    boost = composite_volume_rule(mesh, elem, M);
  }
  // work in the basis's own box frame; shared Cartesian operators carry the
  // representative element's basis and the residual is translation-invariant
  const Vec2 shift = b.box_lo - elem.box_lo;
  for (Vec2& p : boost.points) p += shift;
  const Eigen::MatrixXd phiB = vandermonde(b, boost.points);
  const Eigen::VectorXd wB = Eigen::Map<const Eigen::VectorXd>(
      boost.weights.data(), boost.size());

  // box-scaled monomial evaluation helpers
  const Vec2 c = (b.box_lo + b.box_hi) * 0.5;
  const Vec2 h{(b.box_hi.x - b.box_lo.x) * 0.5,
               (b.box_hi.y - b.box_lo.y) * 0.5};
  auto mono = [&](const Vec2& p, int a, int bb) {
    return std::pow((p.x - c.x) / h.x, a) * std::pow((p.y - c.y) / h.y, bb);
  };
  auto dmono = [&](const Vec2& p, int a, int bb, int d) {
    if (d == 0)
      return a == 0 ? 0.0
                    : a * std::pow((p.x - c.x) / h.x, a - 1) / h.x *
                          std::pow((p.y - c.y) / h.y, bb);
    return bb == 0 ? 0.0
                   : bb * std::pow((p.y - c.y) / h.y, bb - 1) / h.y *
                         std::pow((p.x - c.x) / h.x, a);
  };

  std::vector<Vec2> vpts = elem.vol.points;
  for (Vec2& p : vpts) p += shift;
  std::vector<Vec2> fpts;
  fpts.reserve(ops.n_f);
  for (const FaceUse& use : elem.loop) {
    const FaceRule& r = mesh.faces[use.face].rule;
    for (const Vec2& p : r.points) fpts.push_back(p + shift);
  }

  Eigen::MatrixXd Vstack(ops.n_q + ops.n_f, b.dim);
  Vstack.topRows(ops.n_q) = ops.Vq;
  Vstack.bottomRows(ops.n_f) = ops.Vf;

  double worst = 0.0;
  for (int deg = 0; deg <= 2 * N - 1; ++deg)
    for (int a = deg; a >= 0; --a) {
      const int bb = deg - a;
      Eigen::VectorXd u(ops.n_q + ops.n_f);
      for (int q = 0; q < ops.n_q; ++q) u(q) = mono(vpts[q], a, bb);
      for (int q = 0; q < ops.n_f; ++q)
        u(ops.n_q + q) = mono(fpts[q], a, bb);
      for (int d = 0; d < 2; ++d) {
        const Eigen::VectorXd lhs = Vstack.transpose() * (ops.QH[d] * u);
        Eigen::VectorXd du(boost.size());
        for (int q = 0; q < boost.size(); ++q)
          du(q) = dmono(boost.points[q], a, bb, d);
        const Eigen::VectorXd rhs = phiB.transpose() * (wB.cwiseProduct(du));
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
      }
    }
  return worst;
}

std::vector<Vec2> element_nodes(const Element& elem,
                                const ElementOperators& ops) {
  const Vec2 shift = elem.box_lo - ops.basis.box_lo;
  std::vector<Vec2> out = ops.basis.nodes;
  for (Vec2& p : out) p = p + shift;
  return out;
}

OperatorTable build_all_operators(const CutMesh& mesh) {
  OperatorTable table;
  table.ops.resize(mesh.elements.size());
  std::shared_ptr<const ElementOperators> shared_cartesian;
  for (const Element& e : mesh.elements) {
    if (e.cartesian) {
      if (!shared_cartesian)
        shared_cartesian = std::make_shared<const ElementOperators>(
            build_element_operators(mesh, e));
      table.ops[e.id] = shared_cartesian;
    } else {
      table.ops[e.id] = std::make_shared<const ElementOperators>(
          build_element_operators(mesh, e));
    }
  }
  return table;
}

void operator_report(const CutMesh& mesh, const OperatorTable& table,
                     std::ostream& os, bool with_accuracy) {
  os << "element,type,n_q,n_f,dim,mass_cond,node_cond,const_resid_x,"
        "const_resid_y";
  if (with_accuracy) os << ",sbp_accuracy";
  os << "\n";
  char buf[128];
  for (const Element& e : mesh.elements) {
    const ElementOperators& ops = table.of(e.id);
    const auto ann = constant_annihilation_check(ops);
    os << e.id << ',' << (e.cartesian ? "cartesian" : "cut") << ','
       << ops.n_q << ',' << ops.n_f << ',' << ops.basis.dim;
    std::snprintf(buf, sizeof buf, ",%.6g,%.6g,%.3e,%.3e", ops.mass_cond,
                  ops.basis.node_cond, ann[0], ann[1]);
    os << buf;
    if (with_accuracy) {
      std::snprintf(buf, sizeof buf, ",%.3e",
                    sbp_accuracy_check(mesh, e, ops));
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace cutdg
