#include "cutdg/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cutdg {

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw build_error("gauss_legendre: need n >= 1");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-based initial guess for the i-th root (descending order).
    double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Evaluate P_n and P'_n by the three-term recurrence.
      double p0 = 1.0, p1 = xi;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
      double dx = p1 / dp;
      xi -= dx;
      if (std::abs(dx) < 1e-15) {
        // One polishing step, then stop.
        p0 = 1.0;
        p1 = xi;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
        xi -= p1 / dp;
        break;
      }
    }
    x[i] = -xi;  // store ascending
    x[n - 1 - i] = xi;
    double wi = 2.0 / ((1.0 - xi * xi) * dp * dp);
    w[i] = wi;
    w[n - 1 - i] = wi;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;  // exact symmetry for odd counts
}

void gauss_jacobi(int n, double alpha, double beta, std::vector<double>& x,
                  std::vector<double>& w) {
  if (n < 1) throw build_error("gauss_jacobi: need n >= 1");
  if (alpha <= -1.0 || beta <= -1.0)
    throw build_error("gauss_jacobi: need alpha, beta > -1");
  // Recurrence coefficients of the monic Jacobi polynomials; Golub-Welsch.
  Eigen::VectorXd diag(n), off(std::max(n - 1, 0));
  const double ab = alpha + beta;
  diag[0] = (beta - alpha) / (ab + 2.0);
  for (int k = 1; k < n; ++k) {
    double d = (2.0 * k + ab) * (2.0 * k + ab + 2.0);
    diag[k] = (beta * beta - alpha * alpha) / d;
    double num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
    double den = (2.0 * k + ab) * (2.0 * k + ab) * (2.0 * k + ab + 1.0) *
                 (2.0 * k + ab - 1.0);
    off[k - 1] = std::sqrt(num / den);
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) J(k, k) = diag[k];
  for (int k = 0; k + 1 < n; ++k) J(k, k + 1) = J(k + 1, k) = off[k];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success)
    throw build_error("gauss_jacobi: eigenvalue solve failed");
  const double mu0 = std::pow(2.0, ab + 1.0) * std::tgamma(alpha + 1.0) *
                     std::tgamma(beta + 1.0) / std::tgamma(ab + 2.0);
  x.resize(n);
  w.resize(n);
  for (int k = 0; k < n; ++k) {
    x[k] = es.eigenvalues()[k];
    double q0 = es.eigenvectors()(0, k);
    w[k] = mu0 * q0 * q0;
  }
}

void gauss_lobatto(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 2) throw build_error("gauss_lobatto: need n >= 2");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  x[0] = -1.0;
  x[n - 1] = 1.0;
  if (n > 2) {
    // Interior Lobatto nodes are the Gauss-Jacobi(1,1) nodes.
    std::vector<double> xi, wi;
    gauss_jacobi(n - 2, 1.0, 1.0, xi, wi);
    for (int k = 0; k < n - 2; ++k) x[k + 1] = xi[k];
  }
  // Enforce exact symmetry, then w_i = 2 / (n(n-1) P_{n-1}(x_i)^2).
  for (int i = 0; i < n / 2; ++i) {
    double s = 0.5 * (x[n - 1 - i] - x[i]);
    x[i] = -s;
    x[n - 1 - i] = s;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  for (int i = 0; i < n; ++i) {
    double p0 = 1.0, p1 = x[i];
    for (int k = 2; k <= n - 1; ++k) {
      double p2 = ((2 * k - 1) * x[i] * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double pn1 = (n == 2) ? x[i] : p1;
    w[i] = 2.0 / (n * (n - 1) * pn1 * pn1);
  }
}

QuadratureRule reference_rule(RefDomain domain, int degree) {
  if (degree < 0) throw build_error("reference_rule: negative degree");
  const int n = degree / 2 + 1;  // ceil((degree+1)/2)
  QuadratureRule rule;
  switch (domain) {
    case RefDomain::Interval: {
      std::vector<double> x, w;
      gauss_legendre(n, x, w);
      for (int i = 0; i < n; ++i) {
        rule.points.push_back({x[i], 0.0});
        rule.weights.push_back(w[i]);
      }
      break;
    }
    case RefDomain::Square: {
      std::vector<double> x, w;
      gauss_legendre(n, x, w);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          rule.points.push_back({x[i], x[j]});
          rule.weights.push_back(w[i] * w[j]);
        }
      break;
    }
    case RefDomain::Triangle: {
      if (degree > 50)
        throw build_error(
            strf("reference_rule: triangle degree %d exceeds supported 50", degree));
      // Duffy collapse r = u(1-v), t = v with u ~ Gauss-Legendre and
      // v ~ Gauss-Jacobi(1,0); the (1-v) Jacobian is absorbed by the
      // Jacobi weight, so the rule is exact for total degree <= degree.
      std::vector<double> xu, wu, xv, wv;
      gauss_legendre(n, xu, wu);
      gauss_jacobi(n, 1.0, 0.0, xv, wv);
      for (int j = 0; j < n; ++j) {
        double v = 0.5 * (xv[j] + 1.0);
        for (int i = 0; i < n; ++i) {
          double u = 0.5 * (xu[i] + 1.0);
          rule.points.push_back({u * (1.0 - v), v});
          rule.weights.push_back(0.5 * wu[i] * 0.25 * wv[j]);
        }
      }
      break;
    }
  }
  return rule;
}

namespace {

/// Exponent pairs (a,b) with a+b <= degree, graded lexicographic.
std::vector<std::pair<int, int>> monomial_exponents(int degree) {
  std::vector<std::pair<int, int>> e;
  for (int d = 0; d <= degree; ++d)
    for (int b = 0; b <= d; ++b) e.emplace_back(d - b, b);
  return e;
}

}  // namespace

MomentBasis::MomentBasis(const QuadratureRule& reference, int degree)
    : degree_(degree), dim_((degree + 1) * (degree + 2) / 2) {
  if (reference.size() < dim_)
    throw build_error(
        strf("MomentBasis: reference rule has %d points, need >= %d",
             reference.size(), dim_));
  lo_ = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  hi_ = {-std::numeric_limits<double>::max(), -std::numeric_limits<double>::max()};
  for (const Vec2& p : reference.points) {
    lo_.x = std::min(lo_.x, p.x);
    lo_.y = std::min(lo_.y, p.y);
    hi_.x = std::max(hi_.x, p.x);
    hi_.y = std::max(hi_.y, p.y);
  }
  if (hi_.x - lo_.x < 1e-300) hi_.x = lo_.x + 1.0;
  if (hi_.y - lo_.y < 1e-300) hi_.y = lo_.y + 1.0;

  Eigen::MatrixXd raw = evaluate_raw(reference.points);
  Eigen::MatrixXd A = raw;
  for (int i = 0; i < A.rows(); ++i)
    A.row(i) *= std::sqrt(std::max(reference.weights[i], 0.0));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd R =
      qr.matrixQR().topRows(dim_).triangularView<Eigen::Upper>();
  double rmax = R.diagonal().cwiseAbs().maxCoeff();
  for (int i = 0; i < dim_; ++i)
    if (std::abs(R(i, i)) <= 1e-13 * rmax)
      throw build_error("MomentBasis: reference rule is rank deficient");
  coeff_ = R.triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(dim_, dim_));
  // Fix signs so the first basis function is a positive constant, etc.
  for (int j = 0; j < dim_; ++j)
    if (R(j, j) < 0.0) coeff_.col(j) *= -1.0;
}

Eigen::MatrixXd MomentBasis::evaluate_raw(const std::vector<Vec2>& pts) const {
  const auto expo = monomial_exponents(degree_);
  Eigen::MatrixXd raw(pts.size(), dim_);
  const double cx = 0.5 * (lo_.x + hi_.x), sx = 2.0 / (hi_.x - lo_.x);
  const double cy = 0.5 * (lo_.y + hi_.y), sy = 2.0 / (hi_.y - lo_.y);
  for (size_t i = 0; i < pts.size(); ++i) {
    const double X = (pts[i].x - cx) * sx;
    const double Y = (pts[i].y - cy) * sy;
    for (int j = 0; j < dim_; ++j)
      raw(i, j) = std::pow(X, expo[j].first) * std::pow(Y, expo[j].second);
  }
  return raw;
}

Eigen::MatrixXd MomentBasis::evaluate(const std::vector<Vec2>& pts) const {
  return evaluate_raw(pts) * coeff_;
}

Eigen::VectorXd MomentBasis::moments(const QuadratureRule& rule) const {
  Eigen::MatrixXd phi = evaluate(rule.points);
  Eigen::Map<const Eigen::VectorXd> w(rule.weights.data(), rule.size());
  return phi.transpose() * w;
}

double exactness_error(const QuadratureRule& test, const QuadratureRule& reference,
                       int degree) {
  MomentBasis basis(reference, degree);
  Eigen::VectorXd b = basis.moments(reference);
  Eigen::VectorXd m = basis.moments(test);
  double err = 0.0;
  for (int i = 0; i < b.size(); ++i)
    err = std::max(err, std::abs(m[i] - b[i]) / (1.0 + std::abs(b[i])));
  return err;
}

namespace {

/// One pruning pass down to `target` surviving points. Operates on a sliding
/// window of at most dim+1 active points; a null vector supported on the
/// window is a null vector of the full moment matrix, so every elimination
/// step preserves all moments exactly.
struct PruneWorker {
  const Eigen::MatrixXd& phi;  // n x dim, rows = points of the input rule
  std::vector<double> w;
  std::vector<char> alive;
  int iterations = 0;

  PruneWorker(const Eigen::MatrixXd& phi_all, const std::vector<double>& weights)
      : phi(phi_all), w(weights), alive(weights.size(), 1) {}

  int run(int target) {
    const int n = static_cast<int>(w.size());
    const int dim = static_cast<int>(phi.cols());
    double total = 0.0;
    for (double v : w) total += v;
    const double floor_w = 1e-14 * total;

    std::vector<int> win;
    int next = 0;
    int active = 0;
    for (int i = 0; i < n; ++i) {
      if (w[i] <= floor_w) alive[i] = 0;
      if (alive[i]) ++active;
    }
    auto refill = [&]() {
      while (static_cast<int>(win.size()) < dim + 1 && next < n) {
        if (alive[next]) win.push_back(next);
        ++next;
      }
    };
    refill();
    while (active > target && static_cast<int>(win.size()) == dim + 1) {
      // Null vector of the window's moment submatrix via full QR.
      Eigen::MatrixXd Wt(dim + 1, dim);
      for (int r = 0; r <= dim; ++r) Wt.row(r) = phi.row(win[r]);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(Wt);
      Eigen::VectorXd z = Eigen::MatrixXd(qr.householderQ()).col(dim);
      double zmax = z.cwiseAbs().maxCoeff();
      if (!(zmax > 0.0))
        throw build_error("caratheodory_prune: degenerate null vector");
      const double tolz = 1e-14 * zmax;
      // Fix the (arbitrary) QR sign: first non-negligible entry positive.
      for (int r = 0; r <= dim; ++r) {
        if (std::abs(z[r]) > tolz) {
          if (z[r] < 0.0) z = -z;
          break;
        }
      }

      // alpha+ = min over z_i > 0 of w_i/z_i ; alpha- = max over z_i < 0.
      double ap = std::numeric_limits<double>::infinity();
      double am = -std::numeric_limits<double>::infinity();
      for (size_t r = 0; r < win.size(); ++r) {
        if (z[r] > tolz) ap = std::min(ap, w[win[r]] / z[r]);
        if (z[r] < -tolz) am = std::max(am, w[win[r]] / z[r]);
      }
      auto count_zeroed = [&](double a) {
        int c = 0;
        for (size_t r = 0; r < win.size(); ++r) {
          double nw = w[win[r]] - a * z[r];
          if (nw <= floor_w + 1e-12 * std::abs(a * z[r])) ++c;
        }
        return c;
      };
      double a;
      if (!std::isfinite(ap) && !std::isfinite(am))
        throw build_error("caratheodory_prune: one-signed null vector");
      if (!std::isfinite(ap)) {
        a = am;
      } else if (!std::isfinite(am)) {
        a = ap;
      } else {
        int cp = count_zeroed(ap), cm = count_zeroed(am);
        if (cp != cm)
          a = (cp > cm) ? ap : am;
        else
          // Strict inequality: an exact tie on |alpha| selects the negative
          // step direction.
          a = (std::abs(ap) < std::abs(am)) ? ap : am;
      }

      int removed = 0;
      std::vector<int> survivors;
      survivors.reserve(win.size());
      for (size_t r = 0; r < win.size(); ++r) {
        double nw = w[win[r]] - a * z[r];
        if (nw <= floor_w + 1e-12 * std::abs(a * z[r])) nw = 0.0;
        w[win[r]] = nw;
        if (nw <= floor_w) {
          alive[win[r]] = 0;
          ++removed;
          --active;
        } else {
          survivors.push_back(win[r]);
        }
      }
      if (removed == 0)
        throw build_error("caratheodory_prune: stalled elimination");
      win = std::move(survivors);
      ++iterations;
      refill();
    }
    return active;
  }
};

bool points_unisolvent(const std::vector<Vec2>& pts, int degree) {
  const int dim = (degree + 1) * (degree + 2) / 2;
  if (static_cast<int>(pts.size()) < dim) return false;
  QuadratureRule tmp;
  tmp.points = pts;
  tmp.weights.assign(pts.size(), 1.0);
  // Scaled monomial Vandermonde; rank test with a relative threshold.
  Vec2 lo = pts[0], hi = pts[0];
  for (const Vec2& p : pts) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }
  if (hi.x - lo.x < 1e-300) hi.x = lo.x + 1.0;
  if (hi.y - lo.y < 1e-300) hi.y = lo.y + 1.0;
  Eigen::MatrixXd V(pts.size(), dim);
  int col = 0;
  for (int d = 0; d <= degree; ++d)
    for (int b = 0; b <= d; ++b, ++col)
      for (size_t i = 0; i < pts.size(); ++i) {
        double X = (2.0 * pts[i].x - lo.x - hi.x) / (hi.x - lo.x);
        double Y = (2.0 * pts[i].y - lo.y - hi.y) / (hi.y - lo.y);
        V(i, col) = std::pow(X, d - b) * std::pow(Y, b);
      }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
  qr.setThreshold(1e-10);
  return qr.rank() == dim;
}

}  // namespace

PruneResult caratheodory_prune(const QuadratureRule& input, int degree,
                               int unisolvency_degree) {
  for (double v : input.weights)
    if (!(v >= 0.0))
      throw build_error("caratheodory_prune: input weights must be >= 0");
  const int dim_target = (degree + 1) * (degree + 2) / 2;
  if (input.size() <= dim_target + 1) {
    // Already at (or below) the Caratheodory bound: nothing to do, and the
    // moment basis may not even be resolvable by so few points.
    PruneResult res;
    res.rule = input;
    res.kept.resize(input.size());
    for (int i = 0; i < input.size(); ++i) res.kept[i] = i;
    res.moment_dim = dim_target;
    return res;
  }
  MomentBasis basis(input, degree);
  const int dim = basis.dim();
  Eigen::MatrixXd phi = basis.evaluate(input.points);

  PruneResult best;
  const int max_extra = 8;
  for (int extra = 0; extra <= max_extra; ++extra) {
    PruneWorker worker(phi, input.weights);
    worker.run(dim + 1 + extra);

    PruneResult res;
    res.moment_dim = dim;
    res.iterations = worker.iterations;
    for (size_t i = 0; i < worker.w.size(); ++i)
      if (worker.alive[i]) {
        res.kept.push_back(static_cast<int>(i));
        res.rule.points.push_back(input.points[i]);
        res.rule.weights.push_back(worker.w[i]);
      }
    if (unisolvency_degree >= 0 &&
        !points_unisolvent(res.rule.points, unisolvency_degree)) {
      best = std::move(res);
      continue;  // retry keeping one more point
    }
    Eigen::VectorXd b = basis.moments(input);
    Eigen::VectorXd m = basis.moments(res.rule);
    for (int i = 0; i < b.size(); ++i)
      res.moment_error = std::max(
          res.moment_error, std::abs(m[i] - b[i]) / (1.0 + std::abs(b[i])));
    return res;
  }
  throw build_error(
      strf("caratheodory_prune: could not reach a unisolvent point set for "
           "degree %d within %d extra points",
           unisolvency_degree, max_extra));
}

}  // namespace cutdg
