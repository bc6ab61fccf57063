#pragma once

#include <functional>
#include <vector>

#include "cutdg/util.hpp"

namespace cutdg {

/// Right-hand side of a semi-discrete system du/dt = f(u, t). The callee
/// fills `dudt` (pre-sized to u.size()) and may throw admissibility_error
/// when the supplied state leaves the physically admissible set; the
/// integrator treats that as a rejected step.
using OdeRhs = std::function<void(const std::vector<double>& u, double t,
                                  std::vector<double>& dudt)>;

/// Bookkeeping for one accepted step, passed to hooks and kept in the log.
struct StepRecord {
  double t = 0.0;      ///< Time reached after the step.
  double dt = 0.0;     ///< Step size that was taken.
  double error = 0.0;  ///< Scaled embedded error estimate (<= 1 on accept).
  int index = 0;       ///< Zero-based accepted-step counter.
};

/// Post-step callback, run after each accepted step in registration order
/// (stabilization first, then logging/snapshots, per the caller's setup).
/// It may modify the state in place; returning true reports a modification,
/// which makes the integrator refresh its reused final stage before the
/// next step.
using StepHook =
    std::function<bool(const StepRecord& step, std::vector<double>& u)>;

/// Controls for the adaptive embedded Runge-Kutta driver.
///
/// Tolerances must be positive (reltol may be zero for purely absolute
/// control); the shrink/growth limits must satisfy
/// 0 < min_factor < 1 < max_factor. Integration always starts at t = 0.
struct IntegratorConfig {
  double abstol = 1e-8;     ///< Absolute tolerance per component.
  double reltol = 1e-6;     ///< Relative tolerance per component.
  double dt0 = 0.0;         ///< Initial step size; required positive.
  double t_end = 0.0;       ///< Final time; required positive.
  double safety = 0.9;      ///< Safety factor in the step-size update.
  double min_factor = 0.1;  ///< Strongest allowed step shrink per update.
  double max_factor = 5.0;  ///< Strongest allowed step growth per update.
  std::vector<StepHook> hooks;  ///< Run after each accepted step, in order.
};

/// Outcome of a single trial step.
struct StepResult {
  std::vector<double> state;  ///< Candidate state at t + dt.
  double error = 0.0;         ///< Scaled error estimate; accept when <= 1.
  bool admissible = true;     ///< False when the rhs rejected a stage state.
};

/// Takes one Dormand-Prince 5(4) step of size dt from (state, t).
///
/// The candidate state carries the fifth-order weights; the error is the
/// scaled RMS of the difference to the embedded fourth-order solution,
///   error = sqrt(mean_i (e_i / (abstol + reltol max(|u_i|, |u'_i|)))^2),
/// so values <= 1 mean the step meets the configured tolerances. If the
/// rhs throws admissibility_error at any stage, the returned result has
/// admissible = false, an infinite error, and the unchanged input state.
/// Only the tolerances of `config` are read here.
StepResult rk_step(const OdeRhs& rhs, const std::vector<double>& state,
                   double t, double dt, const IntegratorConfig& config);

/// Full integration log: final state plus per-step records and counters.
struct IntegrationResult {
  std::vector<double> state;      ///< State at the final time.
  double t = 0.0;                 ///< Final time reached (== t_end).
  long n_accepted = 0;            ///< Accepted steps.
  long n_rejected = 0;            ///< Rejected attempts (error or admissibility).
  long n_rhs = 0;                 ///< Total rhs evaluations.
  std::vector<StepRecord> steps;  ///< One record per accepted step.
};

/// Integrates du/dt = rhs(u, t) from t = 0 to config.t_end.
///
/// Step sizes follow a PI controller on the embedded error estimate:
/// attempts with scaled error > 1 are retried with a reduced step, and
/// attempts where the rhs reports an inadmissible stage state are retried
/// at half the step. The final step is clamped so the run ends exactly at
/// t_end. Hooks run after every accepted step. If rejections drive the
/// step below 1e-14 * t_end the run aborts with "step size collapse"
/// (time_integration_error). Identical inputs produce bitwise-identical
/// trajectories.
IntegrationResult integrate(const OdeRhs& rhs, std::vector<double> state,
                            const IntegratorConfig& config);

}  // namespace cutdg
