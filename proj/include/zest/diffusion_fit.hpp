#pragma once

// Estimating function for discretely observed ergodic diffusions, its
// compensator, quadratic-variation least squares for the nuisance, and the
// quadrature oracles built on the stationary density.

#include "zest/measure.hpp"
#include "zest/sde_lab.hpp"
#include "zest/sieve_fit.hpp"
#include "zest/zsolve.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace zest {

/// Psi_n(theta, h) = (1/t_n) sum_i Sdot(X_{i-1}; theta) / sigma^2(X_{i-1}; h)
///                   * [X_i - X_{i-1} - S(X_{i-1}; theta) dt_i].
inline Vec psi_n(const ModelSpec& m, const Vec& theta, const SieveFunction& h, const ObservationSet& obs) {
  if (obs.n() < 1) throw Error(ErrorKind::InvalidArgument, "psi_n: need at least one increment");
  const int d = m.dim();
  Vec acc = Vec::Zero(d), g(d);
  for (int i = 1; i <= obs.n(); ++i) {
    const double x = obs.values[i - 1];
    const double dt = obs.times[i] - obs.times[i - 1];
    m.s_dot(x, theta, g);
    acc += ((obs.values[i] - x - m.s(x, theta) * dt) / m.sigma2(x, h)) * g;
  }
  return acc / obs.horizon();
}

/// Compensator: the bracket becomes int_{t_{i-1}}^{t_i} S(X_t; theta0) dt -
/// S(X_{i-1}; theta) dt_i, the integral taken by the trapezoid rule on the
/// fine grid. Simulation-only oracle.
inline Vec psi_tilde_n(const ModelSpec& m, const Vec& theta, const SieveFunction& h, const PathRecord& path) {
  if (!path.has_fine || path.obs_indices.size() < 2)
    throw Error(ErrorKind::InvalidArgument, "psi_tilde_n: path lacks the fine grid");
  const int d = m.dim();
  const Vec& th0 = m.theta0();
  Vec acc = Vec::Zero(d), g(d);
  for (std::size_t i = 1; i < path.obs_indices.size(); ++i) {
    const std::size_t a = path.obs_indices[i - 1], b = path.obs_indices[i];
    double integral = 0.0;
    double prev = m.s(path.fine_states[a], th0);
    for (std::size_t k = a + 1; k <= b; ++k) {
      const double cur = m.s(path.fine_states[k], th0);
      integral += 0.5 * (prev + cur) * (path.fine_times[k] - path.fine_times[k - 1]);
      prev = cur;
    }
    const double x = path.fine_states[a];
    const double dt = path.fine_times[b] - path.fine_times[a];
    m.s_dot(x, theta, g);
    acc += ((integral - m.s(x, theta) * dt) / m.sigma2(x, h)) * g;
  }
  const double horizon = path.fine_times[path.obs_indices.back()] - path.fine_times[path.obs_indices.front()];
  return acc / horizon;
}

/// A_n(h) = (1/t_n) sum_i (|dX_i|^2 / dt_i - sigma^2(X_{i-1}; h))^2 dt_i.
inline double a_n(const ModelSpec& m, const SieveFunction& h, const ObservationSet& obs) {
  double acc = 0.0;
  for (int i = 1; i <= obs.n(); ++i) {
    const double dt = obs.times[i] - obs.times[i - 1];
    const double dx = obs.values[i] - obs.values[i - 1];
    const double r = dx * dx / dt - m.sigma2(obs.values[i - 1], h);
    acc += r * r * dt;
  }
  return acc / obs.horizon();
}

inline SievePoints qv_data(const ObservationSet& obs) {
  SievePoints q;
  const int n = obs.n();
  q.x.resize(n);
  q.y.resize(n);
  q.w.resize(n);
  const double horizon = obs.horizon();
  for (int i = 1; i <= n; ++i) {
    const double dt = obs.times[i] - obs.times[i - 1];
    const double dx = obs.values[i] - obs.values[i - 1];
    q.x[i - 1] = obs.values[i - 1];
    q.y[i - 1] = dx * dx / dt;
    q.w[i - 1] = dt / horizon;
  }
  return q;
}

/// Near-minimizer of A_n over the sieve (sigma^2(x; h) = h(x)).
inline SieveFitResult minimize_a_n(const ObservationSet& obs, const SieveDescriptor& desc, int iters = 500,
                                   double roughness_coef = 2.0) {
  const SievePoints q = qv_data(obs);
  return fit_sieve_points(q, desc, iters, vanishing_roughness(roughness_coef, q.x.size()));
}

// ---------------------------------------------------------------------------
// Stationary density and quadrature oracles

inline std::vector<double> default_quadrature_grid() { return linspace(-8.0, 8.0, 4001); }

/// Speed density m(x) = exp(int_{x0}^x 2 S(u; theta)/sigma^2(u; h) du) / sigma^2(x; h),
/// cumulative trapezoid from the grid point nearest zero, normalized on the grid.
inline std::vector<double> stationary_density(const ModelSpec& m, const Vec& theta, const SieveFunction& h,
                                              std::span<const double> grid) {
  const std::size_t n = grid.size();
  if (n < 3) throw Error(ErrorKind::InvalidArgument, "stationary_density: grid too small");
  std::vector<double> ratio(n), logm(n);
  for (std::size_t i = 0; i < n; ++i) ratio[i] = 2.0 * m.s(grid[i], theta) / m.sigma2(grid[i], h);
  std::size_t ref = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(grid[i]) < std::abs(grid[ref])) ref = i;
  std::vector<double> cum(n, 0.0);
  for (std::size_t i = ref + 1; i < n; ++i)
    cum[i] = cum[i - 1] + 0.5 * (ratio[i] + ratio[i - 1]) * (grid[i] - grid[i - 1]);
  for (std::size_t i = ref; i-- > 0;)
    cum[i] = cum[i + 1] - 0.5 * (ratio[i] + ratio[i + 1]) * (grid[i + 1] - grid[i]);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    logm[i] = cum[i] - std::log(m.sigma2(grid[i], h));
    mx = std::max(mx, logm[i]);
  }
  std::vector<double> dens(n);
  for (std::size_t i = 0; i < n; ++i) dens[i] = std::exp(logm[i] - mx);
  // Positive recurrence on the grid: the density must have died out at both ends.
  constexpr double edge_tol = 1e-8;
  if (dens.front() > edge_tol || dens.back() > edge_tol)
    throw Error(ErrorKind::GridTooNarrow,
                "stationary_density: density does not decay at the grid edge (widen the grid or the drift "
                "is not ergodic)");
  const std::vector<double> w = trapezoid_weights(grid);
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) mass += w[i] * dens[i];
  for (double& v : dens) v /= mass;
  return dens;
}

inline Measure stationary_measure(const ModelSpec& m, const Vec& theta, const SieveFunction& h,
                                  std::span<const double> grid) {
  const std::vector<double> dens = stationary_density(m, theta, h, grid);
  Measure mu;
  mu.x.assign(grid.begin(), grid.end());
  mu.w = trapezoid_weights(grid);
  for (std::size_t i = 0; i < dens.size(); ++i) mu.w[i] *= dens[i];
  return mu;
}

/// Stationary law at (theta0, h0). The default grid is doubled (same spacing)
/// until the density has decayed at both edges, up to [-64, 64].
inline Measure true_stationary_measure(const ModelSpec& m) {
  for (double half = 8.0;; half *= 2.0) {
    try {
      return stationary_measure(m, m.theta0(), m.h0(), linspace(-half, half, static_cast<int>(500 * half) + 1));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::GridTooNarrow || half >= 64.0) throw;
    }
  }
}

/// I(theta, h) = int Sdot Sdot' / sigma^2 dmu with mu from the stationary density.
inline InfoReport fisher_info(const ModelSpec& m, const Vec& theta, const SieveFunction& h,
                              std::span<const double> grid) {
  const Measure mu = stationary_measure(m, theta, h, grid);
  return info_report(information(m, theta, h, mu));
}

struct ScanReport {
  std::vector<Vec> thetas;
  std::vector<double> norms;  // |Psi(theta, h)| at each grid point
  std::vector<double> eps;
  std::vector<double> min_outside;  // inf over |theta - theta0| > eps
};

/// Evaluates the limit map Psi(theta, h) on a parameter grid and reports the
/// smallest norm outside each eps-ball around theta0.
inline ScanReport identifiability_scan(const ModelSpec& m, const SieveFunction& h, std::span<const Vec> thetas,
                                       const Measure& mu, std::span<const double> eps_list) {
  ScanReport r;
  r.thetas.assign(thetas.begin(), thetas.end());
  for (const Vec& th : thetas) r.norms.push_back(limit_psi(m, th, h, mu).norm());
  for (double e : eps_list) {
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.thetas.size(); ++i)
      if ((r.thetas[i] - m.theta0()).norm() > e) mn = std::min(mn, r.norms[i]);
    r.eps.push_back(e);
    r.min_outside.push_back(mn);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Two-step pipeline

/// Plug-in information (1/t_n) sum Sdot Sdot' / sigma^2 dt_i along the observations.
inline Mat empirical_info(const ModelSpec& m, const Vec& theta, const SieveFunction& h, const ObservationSet& obs) {
  const int d = m.dim();
  Mat I = Mat::Zero(d, d);
  Vec g(d);
  for (int i = 1; i <= obs.n(); ++i) {
    const double x = obs.values[i - 1];
    m.s_dot(x, theta, g);
    I.noalias() += ((obs.times[i] - obs.times[i - 1]) / m.sigma2(x, h)) * g * g.transpose();
  }
  return I / obs.horizon();
}

struct DiffusionFitOptions {
  int sieve_iters = 500;
  double roughness_coef = 2.0;
  int max_iter = 50;
  int grid_per_dim = 21;
  bool one_step = false;                 // one Newton step from the unweighted estimate
  std::optional<SieveFunction> fixed_h;  // oracle: skip A_n and use this h
};

struct DiffusionEstimate {
  std::optional<SieveFitResult> h_fit;  // empty when h was fixed
  SieveFunction h_hat;
  Vec theta_init;  // unweighted (sigma^2 = 1) root, used by the one-step variant
  Vec theta_hat;
  double psi_norm = 0.0;
  std::vector<TraceRow> trace;
};

/// h_hat from A_n, then theta_hat solving Psi_n(theta, h_hat) = 0.
inline DiffusionEstimate estimate_diffusion(const ModelSpec& m, const ObservationSet& obs,
                                            const DiffusionFitOptions& opt = {}) {
  DiffusionEstimate e;
  if (opt.fixed_h) {
    e.h_hat = *opt.fixed_h;
  } else {
    e.h_fit = minimize_a_n(obs, m.sieve(), opt.sieve_iters, opt.roughness_coef);
    e.h_hat = e.h_fit->h;
  }
  const double n = static_cast<double>(obs.n());
  const double tol = operational_tolerance(std::sqrt(obs.horizon()), n);
  auto psi = [&](const Vec& th) { return psi_n(m, th, e.h_hat, obs); };
  if (opt.one_step) {
    const SieveFunction unit = SieveFunction::constant(m.sieve(), 1.0);
    auto psi_unit = [&](const Vec& th) { return psi_n(m, th, unit, obs); };
    e.theta_init = solve_z(psi_unit, m.space, std::nullopt, tol, opt.max_iter, opt.grid_per_dim).theta;
    e.theta_hat = m.space.clamp(one_step(e.theta_init, psi(e.theta_init), empirical_info(m, e.theta_init, e.h_hat, obs)));
    e.psi_norm = psi(e.theta_hat).norm();
    return e;
  }
  SolveResult r = solve_z(psi, m.space, std::nullopt, tol, opt.max_iter, opt.grid_per_dim);
  e.theta_hat = r.theta;
  e.psi_norm = r.psi_norm;
  e.trace = std::move(r.trace);
  return e;
}

}  // namespace zest
