#include <array>
#include <cmath>
#include <random>

#include "cutdg/conservation_laws.hpp"
#include "doctest.h"

using namespace cutdg;

namespace {

/// High-precision logarithmic mean: long-double quotient away from the
/// diagonal, long-double series near it (truncation below 1e-30 for
/// |a-b|/(a+b) <= 1e-3).
double log_mean_reference(double a, double b) {
  const long double al = a, bl = b;
  const long double f = (al - bl) / (al + bl);
  const long double v = f * f;
  if (std::abs((double)f) <= 1e-3) {
    const long double ser =
        1.0L + v * (1.0L / 3.0L +
                    v * (1.0L / 5.0L +
                         v * (1.0L / 7.0L + v * (1.0L / 9.0L + v / 11.0L))));
    return (double)(0.5L * (al + bl) / ser);
  }
  return (double)((al - bl) / (std::log(al) - std::log(bl)));
}

template <class Law>
typename Law::State random_state(const Law&, std::mt19937& rng);

template <>
ShallowWater::State random_state(const ShallowWater&, std::mt19937& rng) {
  std::uniform_real_distribution<double> hdist(0.5, 2.0), udist(-1.0, 1.0);
  const double h = hdist(rng);
  return {h, h * udist(rng), h * udist(rng)};
}

template <>
CompressibleEuler::State random_state(const CompressibleEuler& law,
                                      std::mt19937& rng) {
  std::uniform_real_distribution<double> rdist(0.5, 2.0), udist(-1.0, 1.0),
      pdist(0.5, 2.0);
  const double rho = rdist(rng);
  const double u1 = udist(rng), u2 = udist(rng);
  const double p = pdist(rng);
  return {rho, rho * u1, rho * u2,
          p / (law.gamma - 1.0) + 0.5 * rho * (u1 * u1 + u2 * u2)};
}

/// Central finite-difference gradient of a scalar function of the state.
template <class Law, class F>
typename Law::State fd_gradient(const Law& law, const typename Law::State& u,
                                F f) {
  typename Law::State grad{};
  for (int k = 0; k < Law::n_vars; ++k) {
    const double eps = 1e-6 * std::max(1.0, std::abs(u[k]));
    typename Law::State up = u, um = u;
    up[k] += eps;
    um[k] -= eps;
    grad[k] = (f(law, up) - f(law, um)) / (2.0 * eps);
  }
  return grad;
}

template <class Law>
void check_entropy_pair(const Law& law, unsigned seed) {
  std::mt19937 rng(seed);

  // entropy variables match the finite-difference gradient of U
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = random_state(law, rng);
    const auto v = law.entropy_variables(u);
    const auto g = fd_gradient(
        law, u, [](const Law& l, const typename Law::State& w) {
          return l.entropy(w);
        });
    for (int k = 0; k < Law::n_vars; ++k)
      CHECK(std::abs(v[k] - g[k]) <=
            1e-6 * std::max(1.0, std::abs(v[k])));
  }

  // chain rule dF_d/du = v . df_d/du by finite differences
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = random_state(law, rng);
    const auto v = law.entropy_variables(u);
    for (int d = 0; d < 2; ++d) {
      const auto dF = fd_gradient(
          law, u, [d](const Law& l, const typename Law::State& w) {
            return l.entropy_flux(w, d);
          });
      for (int k = 0; k < Law::n_vars; ++k) {
        double vdf = 0.0;
        const double eps = 1e-6 * std::max(1.0, std::abs(u[k]));
        typename Law::State up = u, um = u;
        up[k] += eps;
        um[k] -= eps;
        const auto fp = law.physical_flux(up, d);
        const auto fm = law.physical_flux(um, d);
        for (int i = 0; i < Law::n_vars; ++i)
          vdf += v[i] * (fp[i] - fm[i]) / (2.0 * eps);
        CHECK(std::abs(dF[k] - vdf) <= 2e-6 * std::max(1.0, std::abs(dF[k])));
      }
    }
  }

  // round trip through entropy variables
  for (int trial = 0; trial < 1000; ++trial) {
    const auto u = random_state(law, rng);
    const auto back = law.entropy_to_state(law.entropy_variables(u));
    for (int k = 0; k < Law::n_vars; ++k)
      CHECK(back[k] == doctest::Approx(u[k]).epsilon(1e-12));
  }

  // potential identity psi_d = v . f_d - F_d, closed form vs definition
  for (int trial = 0; trial < 1000; ++trial) {
    const auto u = random_state(law, rng);
    const auto v = law.entropy_variables(u);
    for (int d = 0; d < 2; ++d) {
      const auto f = law.physical_flux(u, d);
      double vf = 0.0;
      for (int k = 0; k < Law::n_vars; ++k) vf += v[k] * f[k];
      CHECK(std::abs(law.entropy_potential(u, d) -
                     (vf - law.entropy_flux(u, d))) <= 1e-13 * 10.0);
    }
  }
}

template <class Law>
void check_two_point_conditions(const Law& law, unsigned seed) {
  std::mt19937 rng(seed);

  // consistency: the two-point flux collapses to the physical flux
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = random_state(law, rng);
    for (int d = 0; d < 2; ++d) {
      const auto fd = law.physical_flux(u, d);
      const auto fe = law.ec_flux(u, u, d);
      for (int k = 0; k < Law::n_vars; ++k)
        CHECK(std::abs(fe[k] - fd[k]) <= 1e-13);
    }
  }

  for (int trial = 0; trial < 1000; ++trial) {
    const auto ul = random_state(law, rng);
    const auto ur = random_state(law, rng);
    const auto vl = law.entropy_variables(ul);
    const auto vr = law.entropy_variables(ur);
    for (int d = 0; d < 2; ++d) {
      const auto f = law.ec_flux(ul, ur, d);
      const auto fswap = law.ec_flux(ur, ul, d);
      double cond = 0.0;
      for (int k = 0; k < Law::n_vars; ++k) {
        CHECK(std::abs(f[k] - fswap[k]) <= 1e-12);  // symmetry
        cond += (vr[k] - vl[k]) * f[k];
      }
      cond -= law.entropy_potential(ur, d) - law.entropy_potential(ul, d);
      CHECK(std::abs(cond) <= 1e-12);  // entropy conservation
    }
  }
}

template <class Law>
void check_dissipative_flux(const Law& law, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);

  // consistency with the normal physical flux
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = random_state(law, rng);
    const double th = ang(rng);
    const Vec2 n{std::cos(th), std::sin(th)};
    const auto f = law.lf_flux(u, u, n);
    const auto fx = law.physical_flux(u, 0);
    const auto fy = law.physical_flux(u, 1);
    for (int k = 0; k < Law::n_vars; ++k)
      CHECK(std::abs(f[k] - (n.x * fx[k] + n.y * fy[k])) <= 1e-13);
  }

  double min_margin = 1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto ul = random_state(law, rng);
    const auto ur = random_state(law, rng);
    const double th = ang(rng);
    const Vec2 n{std::cos(th), std::sin(th)};
    const auto f = law.lf_flux(ul, ur, n);
    const auto fback = law.lf_flux(ur, ul, {-n.x, -n.y});
    const auto vl = law.entropy_variables(ul);
    const auto vr = law.entropy_variables(ur);
    double vjump_f = 0.0;
    for (int k = 0; k < Law::n_vars; ++k) {
      CHECK(std::abs(f[k] + fback[k]) <= 1e-13);  // anti-symmetry
      vjump_f += (vr[k] - vl[k]) * f[k];
    }
    const double psi_jump =
        n.x * (law.entropy_potential(ur, 0) - law.entropy_potential(ul, 0)) +
        n.y * (law.entropy_potential(ur, 1) - law.entropy_potential(ul, 1));
    min_margin = std::min(min_margin, psi_jump - vjump_f);
    CHECK(vjump_f <= psi_jump + 1e-12);  // entropy stability
  }
  MESSAGE("dissipative flux entropy margin (min over pairs): ", min_margin);
}

template <class Law>
typename Law::State rot90(const typename Law::State& u) {
  typename Law::State out = u;
  out[1] = -u[2];
  out[2] = u[1];
  return out;
}

template <class Law>
void check_rotation(const Law& law, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ul = random_state(law, rng);
    const auto ur = random_state(law, rng);
    const auto rl = rot90<Law>(ul), rr = rot90<Law>(ur);

    // physical flux: y-flux of the rotated state is the rotated x-flux
    const auto fx = law.physical_flux(ul, 0);
    const auto fy = law.physical_flux(rl, 1);
    const auto fxr = rot90<Law>(fx);
    for (int k = 0; k < Law::n_vars; ++k)
      CHECK(std::abs(fy[k] - fxr[k]) <= 1e-13);

    // two-point flux commutes with the rotation
    const auto ec = rot90<Law>(law.ec_flux(ul, ur, 0));
    const auto ecr = law.ec_flux(rl, rr, 1);
    for (int k = 0; k < Law::n_vars; ++k)
      CHECK(std::abs(ec[k] - ecr[k]) <= 1e-13);

    // dissipative flux commutes with rotating state and normal together
    const double th = ang(rng);
    const Vec2 n{std::cos(th), std::sin(th)};
    const Vec2 nr{-n.y, n.x};
    const auto lf = rot90<Law>(law.lf_flux(ul, ur, n));
    const auto lfr = law.lf_flux(rl, rr, nr);
    for (int k = 0; k < Law::n_vars; ++k)
      CHECK(std::abs(lf[k] - lfr[k]) <= 1e-13);
  }
}

}  // namespace

TEST_SUITE("physics") {

TEST_CASE("logarithmic mean matches a high-precision reference") {
  // spread of separations straddling the series cutoff at |a-b|/(a+b)=1e-4
  for (const double f :
       {0.5, 1e-1, 1e-2, 1e-3, 2e-4, 1.001e-4, 0.999e-4, 1e-5, 1e-7, 1e-10}) {
    for (const double scale : {1e-3, 1.0, 7.3e2}) {
      const double a = scale * (1.0 + f), b = scale * (1.0 - f);
      const double ref = log_mean_reference(a, b);
      CHECK(log_mean(a, b) == doctest::Approx(ref).epsilon(1e-13));
      CHECK(log_mean(b, a) == doctest::Approx(ref).epsilon(1e-13));
    }
  }
  CHECK(log_mean(2.0, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
  // mean value property: between min and max, below the arithmetic mean
  CHECK(log_mean(1.0, 3.0) > 1.0);
  CHECK(log_mean(1.0, 3.0) < 2.0);
}

TEST_CASE("shallow water fluxes match hand-evaluated values") {
  ShallowWater law;  // g = 1
  const ShallowWater::State lake{2.0, 0.0, 0.0};
  const auto f = law.physical_flux(lake, 0);
  CHECK(f[0] == doctest::Approx(0.0));
  CHECK(f[1] == doctest::Approx(2.0));  // 1/2 g h^2
  CHECK(f[2] == doctest::Approx(0.0));

  ShallowWater law2;
  law2.g = 2.0;
  const ShallowWater::State u{2.0, 3.0, -1.0};  // h=2, u1=1.5, u2=-0.5
  const auto f1 = law2.physical_flux(u, 0);
  CHECK(f1[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(f1[1] == doctest::Approx(8.5).epsilon(1e-14));
  CHECK(f1[2] == doctest::Approx(-1.5).epsilon(1e-14));
  const auto f2 = law2.physical_flux(u, 1);
  CHECK(f2[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(f2[1] == doctest::Approx(-1.5).epsilon(1e-14));
  CHECK(f2[2] == doctest::Approx(4.5).epsilon(1e-14));

  CHECK(law2.entropy(u) == doctest::Approx(6.5).epsilon(1e-14));
  const auto v = law2.entropy_variables(u);
  CHECK(v[0] == doctest::Approx(2.75).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(v[2] == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(law2.entropy_flux(u, 0) == doctest::Approx(15.75).epsilon(1e-14));
  CHECK(law2.entropy_potential(u, 0) == doctest::Approx(6.0).epsilon(1e-14));

  // still water has zero entropy potential
  CHECK(law.entropy_potential(lake, 0) == doctest::Approx(0.0));
  CHECK(law.entropy_potential(lake, 1) == doctest::Approx(0.0));
}

TEST_CASE("gas dynamics fluxes match hand-evaluated values") {
  CompressibleEuler law;  // gamma = 1.4
  // rho=2, velocity (0.3,-0.4), p=1.5 -> E = 1.5/0.4 + 0.25 = 4
  const CompressibleEuler::State u{2.0, 0.6, -0.8, 4.0};
  CHECK(law.pressure(u) == doctest::Approx(1.5).epsilon(1e-14));
  const auto f1 = law.physical_flux(u, 0);
  CHECK(f1[0] == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(f1[1] == doctest::Approx(1.68).epsilon(1e-14));
  CHECK(f1[2] == doctest::Approx(-0.24).epsilon(1e-14));
  CHECK(f1[3] == doctest::Approx(1.65).epsilon(1e-14));
  const auto f2 = law.physical_flux(u, 1);
  CHECK(f2[0] == doctest::Approx(-0.8).epsilon(1e-14));
  CHECK(f2[1] == doctest::Approx(-0.24).epsilon(1e-14));
  CHECK(f2[2] == doctest::Approx(1.82).epsilon(1e-14));
  CHECK(f2[3] == doctest::Approx(-2.2).epsilon(1e-14));
  CHECK(law.entropy_potential(u, 0) == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(law.entropy_potential(u, 1) == doctest::Approx(-0.8).epsilon(1e-14));

  // stagnation: momentum flux is pure pressure, potentials vanish
  const CompressibleEuler::State rest{1.7, 0.0, 0.0, 2.3};
  const auto fr = law.physical_flux(rest, 0);
  CHECK(fr[0] == doctest::Approx(0.0));
  CHECK(fr[1] == doctest::Approx(0.92).epsilon(1e-14));
  CHECK(fr[2] == doctest::Approx(0.0));
  CHECK(fr[3] == doctest::Approx(0.0));
  CHECK(law.entropy_potential(rest, 0) == doctest::Approx(0.0));
  CHECK(law.entropy_potential(rest, 1) == doctest::Approx(0.0));
}

TEST_CASE("entropy pairs are gradients and invert cleanly") {
  check_entropy_pair(ShallowWater{}, 20260801u);
  ShallowWater heavy;
  heavy.g = 9.81;
  check_entropy_pair(heavy, 20260802u);
  check_entropy_pair(CompressibleEuler{}, 20260803u);
  CompressibleEuler stiff;
  stiff.gamma = 1.67;
  check_entropy_pair(stiff, 20260804u);
}

TEST_CASE("entropy conservative fluxes satisfy the two-point conditions") {
  check_two_point_conditions(ShallowWater{}, 20260811u);
  ShallowWater heavy;
  heavy.g = 9.81;
  check_two_point_conditions(heavy, 20260812u);
  check_two_point_conditions(CompressibleEuler{}, 20260813u);
  CompressibleEuler stiff;
  stiff.gamma = 1.67;
  check_two_point_conditions(stiff, 20260814u);
}

TEST_CASE("dissipative flux is entropy stable and anti-symmetric") {
  check_dissipative_flux(ShallowWater{}, 20260821u);
  check_dissipative_flux(CompressibleEuler{}, 20260822u);
}

TEST_CASE("fluxes rotate with the frame") {
  check_rotation(ShallowWater{}, 20260831u);
  check_rotation(CompressibleEuler{}, 20260832u);
}

TEST_CASE("wavespeed estimate bounds both states") {
  ShallowWater law;  // g = 1
  const ShallowWater::State l{1.0, 0.0, 0.0};
  const ShallowWater::State r{4.0, 8.0, 0.0};  // u1 = 2, c = 2
  CHECK(law.max_wavespeed(l, r, {1.0, 0.0}) == doctest::Approx(4.0));
  CHECK(law.max_wavespeed(r, l, {1.0, 0.0}) == doctest::Approx(4.0));
  CHECK(law.max_wavespeed(l, l, {0.0, 1.0}) == doctest::Approx(1.0));

  CompressibleEuler gas;
  const CompressibleEuler::State rest{1.0, 0.0, 0.0, 2.5};  // p = 1
  CHECK(gas.max_wavespeed(rest, rest, {1.0, 0.0}) ==
        doctest::Approx(std::sqrt(1.4)).epsilon(1e-14));

  std::mt19937 rng(20260841u);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ul = random_state(gas, rng);
    const auto ur = random_state(gas, rng);
    const Vec2 n{1.0, 0.0};
    const double lam = gas.max_wavespeed(ul, ur, n);
    CHECK(lam >= std::abs(ul[1] / ul[0]));
    CHECK(lam >= std::abs(ur[1] / ur[0]));
  }
}

TEST_CASE("inadmissible states are rejected with context") {
  ShallowWater law;
  CHECK_FALSE(law.admissible({-0.5, 0.0, 0.0}));
  CHECK_FALSE(law.admissible({0.0, 0.0, 0.0}));
  CHECK_FALSE(law.admissible({std::nan(""), 0.0, 0.0}));
  CHECK(law.admissible({0.5, 1.0, -1.0}));
  CHECK_THROWS_AS(law.require_admissible({-1.0, 0.0, 0.0}),
                  admissibility_error);
  try {
    law.require_admissible({-1.0, 2.0, 3.0});
  } catch (const admissibility_error& e) {
    REQUIRE(e.state.size() == 3);
    CHECK(e.state[0] == doctest::Approx(-1.0));
    CHECK(e.state[2] == doctest::Approx(3.0));
  }

  CompressibleEuler gas;
  CHECK_FALSE(gas.admissible({-1.0, 0.0, 0.0, 1.0}));
  CHECK_FALSE(gas.admissible({1.0, 2.0, 0.0, 1.0}));  // p < 0
  CHECK(gas.admissible({1.0, 0.5, 0.0, 1.0}));
  CHECK_THROWS_AS(gas.require_admissible({1.0, 2.0, 0.0, 1.0}),
                  admissibility_error);
}

}  // TEST_SUITE
