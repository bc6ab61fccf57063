#include "cutdg/conservation_laws.hpp"

#include <cmath>
#include <limits>

namespace cutdg {

double log_mean(double a, double b) {
  const double f = (a - b) / (a + b);
  const double v = f * f;
  // |f| < 1e-4: the direct quotient loses ~4 digits to cancellation while
  // the truncated series is exact to round-off (next term ~ v^4 < 1e-32)
  if (v < 1e-8)
    return 0.5 * (a + b) / (1.0 + v * (1.0 / 3.0 + v * (0.2 + v / 7.0)));
  // log1p form of log(a/b) keeps full precision just above the cutoff,
  // where the quotient a/b rounds to 1 + O(1e-4)
  return (a - b) / std::log1p((a - b) / b);
}

namespace {

bool finite3(const std::array<double, 3>& u) {
  return std::isfinite(u[0]) && std::isfinite(u[1]) && std::isfinite(u[2]);
}

bool finite4(const std::array<double, 4>& u) {
  return std::isfinite(u[0]) && std::isfinite(u[1]) && std::isfinite(u[2]) &&
         std::isfinite(u[3]);
}

}  // namespace

// ---------------------------------------------------------------- ShallowWater

bool ShallowWater::admissible(const State& u) const {
  return finite3(u) && u[0] > 0.0;
}

void ShallowWater::require_admissible(const State& u) const {
  if (!admissible(u))
    throw admissibility_error(
        strf("inadmissible shallow water state: h=%.6e", u[0]), -1, -1,
        {u.begin(), u.end()});
}

ShallowWater::State ShallowWater::physical_flux(const State& u, int d) const {
  const double h = u[0];
  const double u1 = u[1] / h, u2 = u[2] / h;
  const double press = 0.5 * g * h * h;
  if (d == 0) return {u[1], u[1] * u1 + press, u[1] * u2};
  return {u[2], u[2] * u1, u[2] * u2 + press};
}

double ShallowWater::entropy(const State& u) const {
  const double h = u[0];
  return 0.5 * (u[1] * u[1] + u[2] * u[2]) / h + 0.5 * g * h * h;
}

ShallowWater::State ShallowWater::entropy_variables(const State& u) const {
  const double h = u[0];
  const double u1 = u[1] / h, u2 = u[2] / h;
  return {g * h - 0.5 * (u1 * u1 + u2 * u2), u1, u2};
}

ShallowWater::State ShallowWater::entropy_to_state(const State& v) const {
  const double h = (v[0] + 0.5 * (v[1] * v[1] + v[2] * v[2])) / g;
  return {h, h * v[1], h * v[2]};
}

double ShallowWater::entropy_flux(const State& u, int d) const {
  const double h = u[0];
  return (entropy(u) + 0.5 * g * h * h) * u[d + 1] / h;
}

double ShallowWater::entropy_potential(const State& u, int d) const {
  const double h = u[0];
  return 0.5 * g * h * h * u[d + 1] / h;
}

double ShallowWater::sound_speed(const State& u) const {
  return std::sqrt(g * u[0]);
}

double ShallowWater::max_wavespeed(const State& ul, const State& ur,
                                   const Vec2& n) const {
  const double unl = (ul[1] * n.x + ul[2] * n.y) / ul[0];
  const double unr = (ur[1] * n.x + ur[2] * n.y) / ur[0];
  return std::max(std::abs(unl) + sound_speed(ul),
                  std::abs(unr) + sound_speed(ur));
}

ShallowWater::State ShallowWater::ec_flux(const State& ul, const State& ur,
                                          int d) const {
  const double hl = ul[0], hr = ur[0];
  const double u1l = ul[1] / hl, u1r = ur[1] / hr;
  const double u2l = ul[2] / hl, u2r = ur[2] / hr;
  const double u1a = 0.5 * (u1l + u1r), u2a = 0.5 * (u2l + u2r);
  // product mean of the directional mass flux h u_d, paired with the
  // pressure combination 1/2 g h_L h_R so the entropy condition closes
  const double mass = 0.5 * (ul[d + 1] + ur[d + 1]);
  const double press = 0.5 * g * hl * hr;
  if (d == 0) return {mass, mass * u1a + press, mass * u2a};
  return {mass, mass * u1a, mass * u2a + press};
}

ShallowWater::State ShallowWater::lf_flux(const State& ul, const State& ur,
                                          const Vec2& n) const {
  const State fxl = physical_flux(ul, 0), fyl = physical_flux(ul, 1);
  const State fxr = physical_flux(ur, 0), fyr = physical_flux(ur, 1);
  const double lam = max_wavespeed(ul, ur, n);
  State out;
  for (int k = 0; k < n_vars; ++k)
    out[k] = 0.5 * (n.x * (fxl[k] + fxr[k]) + n.y * (fyl[k] + fyr[k])) -
             0.5 * lam * (ur[k] - ul[k]);
  return out;
}

// ----------------------------------------------------------- CompressibleEuler

double CompressibleEuler::pressure(const State& u) const {
  return (gamma - 1.0) *
         (u[3] - 0.5 * (u[1] * u[1] + u[2] * u[2]) / u[0]);
}

bool CompressibleEuler::admissible(const State& u) const {
  return finite4(u) && u[0] > 0.0 && pressure(u) > 0.0;
}

void CompressibleEuler::require_admissible(const State& u) const {
  if (!admissible(u))
    throw admissibility_error(
        strf("inadmissible gas state: rho=%.6e p=%.6e", u[0],
             finite4(u) && u[0] > 0.0 ? pressure(u)
                                      : std::numeric_limits<double>::quiet_NaN()),
        -1, -1, {u.begin(), u.end()});
}

CompressibleEuler::State CompressibleEuler::physical_flux(const State& u,
                                                          int d) const {
  const double rho = u[0];
  const double u1 = u[1] / rho, u2 = u[2] / rho;
  const double p = pressure(u);
  const double ud = d == 0 ? u1 : u2;
  State out{u[d + 1], u[1] * ud, u[2] * ud, (u[3] + p) * ud};
  out[d + 1] += p;
  return out;
}

double CompressibleEuler::entropy(const State& u) const {
  const double s = std::log(pressure(u)) - gamma * std::log(u[0]);
  return -u[0] * s / (gamma - 1.0);
}

CompressibleEuler::State CompressibleEuler::entropy_variables(
    const State& u) const {
  const double rho = u[0];
  const double u1 = u[1] / rho, u2 = u[2] / rho;
  const double p = pressure(u);
  const double s = std::log(p) - gamma * std::log(rho);
  return {(gamma - s) / (gamma - 1.0) - 0.5 * rho * (u1 * u1 + u2 * u2) / p,
          rho * u1 / p, rho * u2 / p, -rho / p};
}

CompressibleEuler::State CompressibleEuler::entropy_to_state(
    const State& v) const {
  const double u1 = -v[1] / v[3], u2 = -v[2] / v[3];
  const double s =
      gamma - (gamma - 1.0) * (v[0] - 0.5 * (v[1] * v[1] + v[2] * v[2]) / v[3]);
  const double rho = std::exp(-(s + std::log(-v[3])) / (gamma - 1.0));
  const double p = -rho / v[3];
  return {rho, rho * u1, rho * u2,
          p / (gamma - 1.0) + 0.5 * rho * (u1 * u1 + u2 * u2)};
}

double CompressibleEuler::entropy_flux(const State& u, int d) const {
  return entropy(u) * u[d + 1] / u[0];
}

double CompressibleEuler::entropy_potential(const State& u, int d) const {
  return u[d + 1];
}

double CompressibleEuler::sound_speed(const State& u) const {
  return std::sqrt(gamma * pressure(u) / u[0]);
}

double CompressibleEuler::max_wavespeed(const State& ul, const State& ur,
                                        const Vec2& n) const {
  const double unl = (ul[1] * n.x + ul[2] * n.y) / ul[0];
  const double unr = (ur[1] * n.x + ur[2] * n.y) / ur[0];
  return std::max(std::abs(unl) + sound_speed(ul),
                  std::abs(unr) + sound_speed(ur));
}

CompressibleEuler::State CompressibleEuler::ec_flux(const State& ul,
                                                    const State& ur,
                                                    int d) const {
  const double rhol = ul[0], rhor = ur[0];
  const double u1l = ul[1] / rhol, u1r = ur[1] / rhor;
  const double u2l = ul[2] / rhol, u2r = ur[2] / rhor;
  const double pl = pressure(ul), pr = pressure(ur);

  const double rho_log = log_mean(rhol, rhor);
  const double u1a = 0.5 * (u1l + u1r), u2a = 0.5 * (u2l + u2r);
  const double pa = 0.5 * (pl + pr);
  // inverse of the logarithmic mean of rho/p, written to stay well scaled
  const double rho_p_log = log_mean(rhol / pl, rhor / pr);
  // average of the pointwise kinetic products, not of the squares: this is
  // what makes the flux both entropy conservative and pressure-robust
  const double vel_prod = 0.5 * (u1l * u1r + u2l * u2r);

  const double uda = d == 0 ? u1a : u2a;
  const double mass = rho_log * uda;
  State out;
  out[0] = mass;
  out[1] = mass * u1a;
  out[2] = mass * u2a;
  out[d + 1] += pa;
  const double udl = d == 0 ? u1l : u2l, udr = d == 0 ? u1r : u2r;
  out[3] = mass * (vel_prod + 1.0 / ((gamma - 1.0) * rho_p_log)) +
           0.5 * (pl * udr + pr * udl);
  return out;
}

CompressibleEuler::State CompressibleEuler::lf_flux(const State& ul,
                                                    const State& ur,
                                                    const Vec2& n) const {
  const State fxl = physical_flux(ul, 0), fyl = physical_flux(ul, 1);
  const State fxr = physical_flux(ur, 0), fyr = physical_flux(ur, 1);
  const double lam = max_wavespeed(ul, ur, n);
  State out;
  for (int k = 0; k < n_vars; ++k)
    out[k] = 0.5 * (n.x * (fxl[k] + fxr[k]) + n.y * (fyl[k] + fyr[k])) -
             0.5 * lam * (ur[k] - ul[k]);
  return out;
}

}  // namespace cutdg
