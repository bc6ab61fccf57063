#include "cutdg/time_integration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cutdg {

namespace {

// Dormand-Prince 5(4) tableau. The seventh stage evaluates the rhs at the
// fifth-order candidate (its row of weights equals kB), so an accepted step
// hands its last stage to the next step as a free first stage.
constexpr double kC[7] = {0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0,
                          8.0 / 9.0, 1.0, 1.0};
constexpr double kA2[1] = {1.0 / 5.0};
constexpr double kA3[2] = {3.0 / 40.0, 9.0 / 40.0};
constexpr double kA4[3] = {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0};
constexpr double kA5[4] = {19372.0 / 6561.0, -25360.0 / 2187.0,
                           64448.0 / 6561.0, -212.0 / 729.0};
constexpr double kA6[5] = {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0};
// Fifth-order propagation weights (stage 7 carries weight zero).
constexpr double kB[6] = {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
                          -2187.0 / 6784.0, 11.0 / 84.0};
// Difference between the fifth- and embedded fourth-order weights.
constexpr double kE[7] = {71.0 / 57600.0,      0.0, -71.0 / 16695.0,
                          71.0 / 1920.0,       -17253.0 / 339200.0,
                          22.0 / 525.0,        -1.0 / 40.0};

// PI controller exponents (integral order 1/5 with derivative damping).
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - 0.75 * kBeta;

/// Scratch vectors reused across attempts of one integration.
struct StageWork {
  std::vector<double> k[7];
  std::vector<double> ytmp;

  void resize(std::size_t n) {
    for (auto& v : k) v.resize(n);
    ytmp.resize(n);
  }
};

void check_tolerances(const IntegratorConfig& config) {
  if (!(config.abstol > 0.0))
    throw config_error("absolute tolerance must be positive");
  if (!(config.reltol >= 0.0))
    throw config_error("relative tolerance must be non-negative");
}

void check_config(const IntegratorConfig& config) {
  check_tolerances(config);
  if (!(config.dt0 > 0.0))
    throw config_error("initial step size must be positive");
  if (!(config.t_end > 0.0))
    throw config_error("final time must be positive");
  if (!(config.safety > 0.0 && config.safety <= 1.0))
    throw config_error("safety factor must lie in (0, 1]");
  if (!(config.min_factor > 0.0 && config.min_factor < 1.0 &&
        config.max_factor > 1.0))
    throw config_error(
        "step-size factors must satisfy 0 < min factor < 1 < max factor");
}

/// Runs stages 2..7 of one trial step; w.k[0] must already hold rhs(u, t).
/// Fills `unew` with the fifth-order candidate, leaves rhs(t + dt, unew) in
/// w.k[6], and returns the scaled RMS error estimate. Admissibility errors
/// from the rhs propagate to the caller.
double dp5_trial(const OdeRhs& rhs, const std::vector<double>& u, double t,
                 double dt, const IntegratorConfig& config, StageWork& w,
                 std::vector<double>& unew, long& n_rhs) {
  const std::size_t n = u.size();
  const double* const rows[5] = {kA2, kA3, kA4, kA5, kA6};
  for (int s = 1; s <= 5; ++s) {
    const double* a = rows[s - 1];
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < s; ++j) acc += a[j] * w.k[j][i];
      w.ytmp[i] = u[i] + dt * acc;
    }
    rhs(w.ytmp, t + kC[s] * dt, w.k[s]);
    ++n_rhs;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 6; ++j) acc += kB[j] * w.k[j][i];
    unew[i] = u[i] + dt * acc;
  }
  rhs(unew, t + dt, w.k[6]);
  ++n_rhs;

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 7; ++j) acc += kE[j] * w.k[j][i];
    const double scale =
        config.abstol +
        config.reltol * std::max(std::abs(u[i]), std::abs(unew[i]));
    const double e = dt * acc / scale;
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

}  // namespace

StepResult rk_step(const OdeRhs& rhs, const std::vector<double>& state,
                   double t, double dt, const IntegratorConfig& config) {
  check_tolerances(config);
  if (!(dt > 0.0)) throw config_error("time step must be positive");
  if (state.empty()) throw config_error("state vector is empty");

  StageWork w;
  w.resize(state.size());
  StepResult out;
  out.state.resize(state.size());
  long n_rhs = 0;
  try {
    rhs(state, t, w.k[0]);
    out.error = dp5_trial(rhs, state, t, dt, config, w, out.state, n_rhs);
  } catch (const admissibility_error&) {
    out.state = state;
    out.error = std::numeric_limits<double>::infinity();
    out.admissible = false;
  }
  return out;
}

IntegrationResult integrate(const OdeRhs& rhs, std::vector<double> state,
                            const IntegratorConfig& config) {
  check_config(config);
  if (state.empty()) throw config_error("state vector is empty");

  IntegrationResult res;
  res.state = std::move(state);
  const std::size_t n = res.state.size();
  StageWork w;
  w.resize(n);
  std::vector<double> unew(n);

  const double dt_floor = 1e-14 * config.t_end;
  double t = 0.0;
  double dt = config.dt0;
  double facold = 1e-4;     // seeds the derivative term of the controller
  bool have_k1 = false;     // rhs(t, state) cached in w.k[0]
  bool rejected_run = false;  // suppress growth right after a rejection

  while (t < config.t_end) {
    if (dt < dt_floor)
      throw time_integration_error(
          strf("step size collapse at t = %.17g (dt = %.3g)", t, dt));

    bool last = false;
    double dt_try = dt;
    if (t + dt_try >= config.t_end) {
      dt_try = config.t_end - t;
      last = true;
    }

    double err;
    try {
      if (!have_k1) {
        rhs(res.state, t, w.k[0]);
        ++res.n_rhs;
        have_k1 = true;
      }
      err = dp5_trial(rhs, res.state, t, dt_try, config, w, unew, res.n_rhs);
    } catch (const admissibility_error&) {
      // A stage state left the admissible set; retry at half the step.
      // The first stage depends only on the accepted state, so a cached
      // value stays valid across retries.
      ++res.n_rejected;
      rejected_run = true;
      dt = 0.5 * dt_try;
      continue;
    }

    if (err > 1.0) {
      ++res.n_rejected;
      rejected_run = true;
      dt = dt_try *
           std::max(config.min_factor, config.safety * std::pow(err, -kExpo));
      continue;
    }

    // Accepted: adopt the candidate and recycle its final stage.
    res.state.swap(unew);
    w.k[0].swap(w.k[6]);
    t = last ? config.t_end : t + dt_try;

    StepRecord rec;
    rec.t = t;
    rec.dt = dt_try;
    rec.error = err;
    rec.index = static_cast<int>(res.n_accepted);
    ++res.n_accepted;

    bool modified = false;
    for (const StepHook& hook : config.hooks)
      if (hook(rec, res.state)) modified = true;
    if (modified) have_k1 = false;
    res.steps.push_back(rec);

    double fac;
    if (err == 0.0) {
      fac = config.max_factor;
    } else {
      fac = config.safety * std::pow(facold, kBeta) * std::pow(err, -kExpo);
      fac = std::clamp(fac, config.min_factor, config.max_factor);
    }
    if (rejected_run) fac = std::min(fac, 1.0);
    rejected_run = false;
    facold = std::max(err, 1e-4);
    dt = dt_try * fac;
  }

  res.t = t;
  return res;
}

}  // namespace cutdg
