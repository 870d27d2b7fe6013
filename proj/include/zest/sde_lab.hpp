#pragma once

// Euler-Maruyama simulation of dX = S(X; theta0) dt + sigma(X; h0) dW on a
// uniform observation grid, and the short-time moment scaling diagnostic.

#include "zest/csv.hpp"
#include "zest/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

namespace zest {

/// t_i = i * Delta_n with Delta_n = n^(gamma - 1), so t_n = n^gamma and
/// Delta_n * t_n = n^(2 gamma - 1) -> 0 for gamma < 1/2.
struct GridSchedule {
  int n = 1000;
  double gamma = 0.4;

  double delta() const { return std::pow(static_cast<double>(n), gamma - 1.0); }
  double horizon() const { return n * delta(); }
  double time(int i) const { return i * delta(); }

  void validate() const {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "GridSchedule: n must be >= 1");
    if (!(gamma > 0.0 && gamma < 0.5))
      throw Error(ErrorKind::InvalidArgument, "GridSchedule: gamma must lie in (0, 1/2)");
  }
};

struct PathRecord {
  std::vector<double> fine_times;
  std::vector<double> fine_states;
  std::vector<std::size_t> obs_indices;
  std::uint64_t rng_seed = 0;
  bool has_fine = true;
};

/// Discrete observations X_{t_0}, ..., X_{t_n}.
struct ObservationSet {
  std::vector<double> times;
  std::vector<double> values;

  int n() const { return static_cast<int>(values.size()) - 1; }
  double horizon() const { return times.back() - times.front(); }
};

inline ObservationSet observations(const PathRecord& p) {
  ObservationSet o;
  o.times.reserve(p.obs_indices.size());
  o.values.reserve(p.obs_indices.size());
  for (std::size_t k : p.obs_indices) {
    o.times.push_back(p.fine_times[k]);
    o.values.push_back(p.fine_states[k]);
  }
  return o;
}

struct SimOptions {
  /// Testing hook: forces every Gaussian increment to zero.
  bool zero_noise = false;
  /// Starting state before burn-in (0 when unset).
  std::optional<double> x0;
  /// Keep the full fine grid (needed by the compensator oracle).
  bool keep_fine = true;
};

namespace detail {

/// One Euler-Maruyama step with explosion and ellipticity guards.
inline double euler_step(const ModelSpec& m, double x, double dt, double sqrt_dt, double xi) {
  const double s2 = m.sigma2(x, m.h0());
  if (s2 < m.diffusion.c_lower)
    throw Error(ErrorKind::Ellipticity, "simulate_path: sigma^2 below the ellipticity floor");
  const double nx = x + m.s(x, m.theta0()) * dt + std::sqrt(s2) * sqrt_dt * xi;
  if (!std::isfinite(nx)) throw Error(ErrorKind::Explosion, "simulate_path: state became non-finite");
  return nx;
}

}  // namespace detail

inline PathRecord simulate_path(const ModelSpec& model, const GridSchedule& sched, int substeps,
                                double burn_in_time, std::uint64_t seed, const SimOptions& opt = {}) {
  sched.validate();
  if (substeps < 1) throw Error(ErrorKind::InvalidArgument, "simulate_path: substeps must be >= 1");
  if (!(burn_in_time >= 0.0)) throw Error(ErrorKind::InvalidArgument, "simulate_path: burn_in_time must be >= 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] { return opt.zero_noise ? 0.0 : normal(rng); };

  const double big_dt = sched.delta();
  const double dt = big_dt / substeps;
  const double sqrt_dt = std::sqrt(dt);
  double x = opt.x0.value_or(0.0);

  const auto burn_steps = static_cast<long long>(std::ceil(burn_in_time / dt));
  for (long long k = 0; k < burn_steps; ++k) x = detail::euler_step(model, x, dt, sqrt_dt, draw());

  PathRecord p;
  p.rng_seed = seed;
  p.has_fine = opt.keep_fine;
  const std::size_t total = static_cast<std::size_t>(sched.n) * substeps;
  if (opt.keep_fine) {
    p.fine_times.resize(total + 1);
    p.fine_states.resize(total + 1);
    p.obs_indices.resize(sched.n + 1);
    p.fine_states[0] = x;
    p.fine_times[0] = 0.0;
    for (std::size_t k = 1; k <= total; ++k) {
      x = detail::euler_step(model, x, dt, sqrt_dt, draw());
      p.fine_states[k] = x;
      const std::size_t i = k / substeps, r = k % substeps;
      p.fine_times[k] = (r == 0) ? sched.time(static_cast<int>(i)) : sched.time(static_cast<int>(i)) + r * dt;
    }
    for (int i = 0; i <= sched.n; ++i) p.obs_indices[i] = static_cast<std::size_t>(i) * substeps;
  } else {
    p.fine_times.resize(sched.n + 1);
    p.fine_states.resize(sched.n + 1);
    p.obs_indices.resize(sched.n + 1);
    p.fine_states[0] = x;
    p.fine_times[0] = 0.0;
    p.obs_indices[0] = 0;
    for (int i = 1; i <= sched.n; ++i) {
      for (int r = 0; r < substeps; ++r) x = detail::euler_step(model, x, dt, sqrt_dt, draw());
      p.fine_states[i] = x;
      p.fine_times[i] = sched.time(i);
      p.obs_indices[i] = static_cast<std::size_t>(i);
    }
  }
  return p;
}

inline void write_path_csv(std::ostream& os, const PathRecord& p) {
  csv::write_row(os, {"time", "state"});
  for (std::size_t k = 0; k < p.fine_states.size(); ++k)
    csv::write_row(os, {csv::num(p.fine_times[k]), csv::num(p.fine_states[k])});
}

inline void write_observations_csv(std::ostream& os, const ObservationSet& o) {
  csv::write_row(os, {"time", "state"});
  for (std::size_t k = 0; k < o.values.size(); ++k)
    csv::write_row(os, {csv::num(o.times[k]), csv::num(o.values[k])});
}

/// Draws approximately stationary states: one long run after burn-in, sampled
/// every `spacing` time units.
inline std::vector<double> stationary_draws(const ModelSpec& model, int count, double spacing, double dt,
                                            double burn_in_time, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sqrt_dt = std::sqrt(dt);
  double x = 0.0;
  const auto burn = static_cast<long long>(std::ceil(burn_in_time / dt));
  for (long long k = 0; k < burn; ++k) x = detail::euler_step(model, x, dt, sqrt_dt, normal(rng));
  const auto gap = std::max<long long>(1, static_cast<long long>(std::llround(spacing / dt)));
  std::vector<double> out(count);
  for (int c = 0; c < count; ++c) {
    for (long long k = 0; k < gap; ++k) x = detail::euler_step(model, x, dt, sqrt_dt, normal(rng));
    out[c] = x;
  }
  return out;
}

struct ScalingReport {
  int k = 2;
  std::vector<double> deltas;
  std::vector<double> moments;  // estimates of E sup_{[0,Delta]} |X_t - X_0|^k
  double slope = 0.0;           // fitted d log(moment) / d log(Delta), expected k/2
  double intercept = 0.0;
  double d_k = 0.0;             // max over Delta of moment / Delta^(k/2)
};

/// Least-squares slope and intercept of y on x.
inline std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) { mx += x[i]; my += y[i]; }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

/// Estimates E sup_{t in [0, Delta]} |X_t - X_0|^k from stationary starts for
/// each Delta, resolving the supremum with `substeps` Euler steps per window.
inline ScalingReport moment_scaling_check(const ModelSpec& model, int k, std::span<const double> delta_list,
                                          int reps, std::uint64_t seed, int substeps = 200) {
  if (k != 2 && k != 4 && k != 8)
    throw Error(ErrorKind::InvalidArgument, "moment_scaling_check: k must be 2, 4 or 8");
  if (delta_list.size() < 2) throw Error(ErrorKind::InvalidArgument, "moment_scaling_check: need >= 2 deltas");
  const auto [mn, mx] = std::minmax_element(delta_list.begin(), delta_list.end());
  if (*mx < 10.0 * *mn)
    throw Error(ErrorKind::InvalidArgument, "moment_scaling_check: delta_list must span at least a decade");
  if (*mx > 1.0) throw Error(ErrorKind::InvalidArgument, "moment_scaling_check: deltas must be <= 1");
  if (reps < 2) throw Error(ErrorKind::InvalidArgument, "moment_scaling_check: reps must be >= 2");

  std::mt19937_64 rng(seed);
  const std::vector<double> starts = stationary_draws(model, reps, 1.0, 1e-3, 50.0, rng);
  std::normal_distribution<double> normal(0.0, 1.0);

  ScalingReport rep;
  rep.k = k;
  std::vector<double> lx, ly;
  for (double delta : delta_list) {
    const double dt = delta / substeps;
    const double sqrt_dt = std::sqrt(dt);
    double acc = 0.0;
    for (double x0 : starts) {
      double x = x0, sup = 0.0;
      for (int s = 0; s < substeps; ++s) {
        x = detail::euler_step(model, x, dt, sqrt_dt, normal(rng));
        sup = std::max(sup, std::abs(x - x0));
      }
      acc += std::pow(sup, k);
    }
    const double moment = acc / reps;
    if (!std::isfinite(moment) || !(moment > 0.0))
      throw Error(ErrorKind::NonFinite, "moment_scaling_check: moment estimate is not finite and positive");
    rep.deltas.push_back(delta);
    rep.moments.push_back(moment);
    lx.push_back(std::log(delta));
    ly.push_back(std::log(moment));
    rep.d_k = std::max(rep.d_k, moment / std::pow(delta, 0.5 * k));
  }
  std::tie(rep.slope, rep.intercept) = fit_line(lx, ly);
  return rep;
}

}  // namespace zest
