#pragma once

#include <array>

#include "cutdg/util.hpp"

namespace cutdg {

/// Logarithmic mean (a - b) / (log a - log b) for positive arguments, with a
/// guarded series expansion for nearly equal inputs so the 0/0 degeneracy is
/// removed without a branch discontinuity.
double log_mean(double a, double b);

/// Shallow water equations with constant bathymetry, in conservative
/// variables u = (h, h u1, h u2) with gravity g. The entropy pair is the
/// total energy U = 1/2 h |u|^2 + 1/2 g h^2 with fluxes F_d = (U + 1/2 g
/// h^2) u_d; the entropy-conservative two-point flux pairs product means of
/// (h u_d) with the pressure combination 1/2 g h_L h_R.
struct ShallowWater {
  static constexpr int n_vars = 3;
  using State = std::array<double, 3>;

  double g = 1.0;

  /// h > 0 and all components finite.
  bool admissible(const State& u) const;
  /// Throws admissibility_error carrying the state if not admissible.
  void require_admissible(const State& u) const;

  /// Flux column f_d, d = 0 (x) or 1 (y).
  State physical_flux(const State& u, int d) const;
  /// Entropy (total energy) U.
  double entropy(const State& u) const;
  /// Entropy variables v = dU/du = (g h - |u|^2/2, u1, u2).
  State entropy_variables(const State& u) const;
  /// Inverse of entropy_variables.
  State entropy_to_state(const State& v) const;
  /// Entropy flux F_d.
  double entropy_flux(const State& u, int d) const;
  /// Entropy potential psi_d = v . f_d - F_d = 1/2 g h^2 u_d.
  double entropy_potential(const State& u, int d) const;

  /// Gravity wave speed sqrt(g h).
  double sound_speed(const State& u) const;
  /// Davis estimate max(|u_L . n| + c_L, |u_R . n| + c_R) for unit n.
  double max_wavespeed(const State& ul, const State& ur, const Vec2& n) const;

  /// Entropy-conservative two-point flux in coordinate direction d.
  State ec_flux(const State& ul, const State& ur, int d) const;
  /// Entropy-stable local Lax-Friedrichs flux through a face with normal n:
  /// n . {f} - lambda/2 (u_R - u_L).
  State lf_flux(const State& ul, const State& ur, const Vec2& n) const;
};

/// Compressible Euler equations in conservative variables
/// u = (rho, rho u1, rho u2, E) with ideal-gas pressure
/// p = (gamma - 1)(E - 1/2 rho |u|^2). The entropy pair is
/// U = -rho s / (gamma - 1) with s = log p - gamma log rho and F_d = u_d U;
/// the entropy-conservative two-point flux uses logarithmic means of rho and
/// rho/p and preserves pressure equilibrium.
struct CompressibleEuler {
  static constexpr int n_vars = 4;
  using State = std::array<double, 4>;

  double gamma = 1.4;

  double pressure(const State& u) const;

  /// rho > 0, p > 0, all components finite.
  bool admissible(const State& u) const;
  void require_admissible(const State& u) const;

  State physical_flux(const State& u, int d) const;
  double entropy(const State& u) const;
  State entropy_variables(const State& u) const;
  State entropy_to_state(const State& v) const;
  double entropy_flux(const State& u, int d) const;
  /// psi_d = rho u_d.
  double entropy_potential(const State& u, int d) const;

  /// Acoustic speed sqrt(gamma p / rho).
  double sound_speed(const State& u) const;
  double max_wavespeed(const State& ul, const State& ur, const Vec2& n) const;

  State ec_flux(const State& ul, const State& ur, int d) const;
  State lf_flux(const State& ul, const State& ur, const Vec2& n) const;
};

}  // namespace cutdg
