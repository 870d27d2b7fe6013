#pragma once

// Estimation for the heteroscedastic autoregression: the estimating function
// and its compensator, least squares for theta, residual least squares for the
// variance function, ergodic information, and the LAN decomposition.

#include "zest/measure.hpp"
#include "zest/series_lab.hpp"
#include "zest/sieve_fit.hpp"
#include "zest/stats.hpp"
#include "zest/zsolve.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace zest {

/// Psi_n(theta, h) = (1/n) sum_i Sdot(X_{i-1}; theta) / sigma^2(X_{i-1}; h)
///                   * (X_i - S(X_{i-1}; theta)).
inline Vec psi_n_ts(const ModelSpec& m, const Vec& theta, const SieveFunction& h, const SeriesRecord& s) {
  if (s.n() < 1) throw Error(ErrorKind::InvalidArgument, "psi_n_ts: need at least q + 1 values");
  const int d = m.dim();
  Vec acc = Vec::Zero(d), g(d);
  std::vector<double> buf;
  for (int i = 1; i <= s.n(); ++i) {
    const State lag = s.lags(i, buf);
    m.drift.s_dot(lag, theta, g);
    acc += ((s.x(i) - m.drift.s(lag, theta)) / m.diffusion.sigma2(lag, h)) * g;
  }
  return acc / static_cast<double>(s.n());
}

/// Compensator: X_i replaced by its conditional mean S(X_{i-1}; theta0).
inline Vec psi_tilde_ts(const ModelSpec& m, const Vec& theta, const SieveFunction& h, const SeriesRecord& s) {
  if (s.n() < 1) throw Error(ErrorKind::InvalidArgument, "psi_tilde_ts: need at least q + 1 values");
  const int d = m.dim();
  Vec acc = Vec::Zero(d), g(d);
  std::vector<double> buf;
  for (int i = 1; i <= s.n(); ++i) {
    const State lag = s.lags(i, buf);
    m.drift.s_dot(lag, theta, g);
    acc += ((m.drift.s(lag, m.theta0()) - m.drift.s(lag, theta)) / m.diffusion.sigma2(lag, h)) * g;
  }
  return acc / static_cast<double>(s.n());
}

/// A_n(theta) = (1/n) sum_i (X_i - S(X_{i-1}; theta))^2.
inline double ls_criterion(const ModelSpec& m, const Vec& theta, const SeriesRecord& s) {
  double acc = 0.0;
  std::vector<double> buf;
  for (int i = 1; i <= s.n(); ++i) {
    const double r = s.x(i) - m.drift.s(s.lags(i, buf), theta);
    acc += r * r;
  }
  return acc / static_cast<double>(s.n());
}

struct LsOptions {
  int grid_per_dim = 21;
  int max_iter = 100;
};

struct LsResult {
  Vec theta;
  double criterion = 0.0;
  double grid_min = 0.0;
  bool on_boundary = false;  // warning: the minimizer sits on the edge of the box
};

/// Lattice scan of A_n over the box, then projected Gauss-Newton from the
/// best lattice point; only decreasing steps are accepted.
inline LsResult ls_theta(const ModelSpec& m, const SeriesRecord& s, const LsOptions& opt = {}) {
  if (s.n() < 1) throw Error(ErrorKind::InvalidArgument, "ls_theta: need at least q + 1 values");
  const ParamSpace& box = m.space;
  const int d = m.dim();
  LsResult r;
  r.grid_min = std::numeric_limits<double>::infinity();
  for (const Vec& th : theta_lattice(box, opt.grid_per_dim)) {
    const double v = ls_criterion(m, th, s);
    if (v < r.grid_min) {
      r.grid_min = v;
      r.theta = th;
    }
  }
  r.criterion = r.grid_min;

  std::vector<double> buf;
  Vec g(d);
  for (int it = 0; it < opt.max_iter; ++it) {
    Mat JtJ = Mat::Zero(d, d);
    Vec Jtr = Vec::Zero(d);
    for (int i = 1; i <= s.n(); ++i) {
      const State lag = s.lags(i, buf);
      m.drift.s_dot(lag, r.theta, g);
      JtJ.noalias() += g * g.transpose();
      Jtr += (s.x(i) - m.drift.s(lag, r.theta)) * g;
    }
    JtJ.diagonal().array() += 1e-12 * (1.0 + JtJ.trace());
    const Vec step = JtJ.ldlt().solve(Jtr);
    if (!step.allFinite()) break;
    double lambda = 1.0;
    bool accepted = false;
    for (int halve = 0; halve < 30; ++halve, lambda *= 0.5) {
      const Vec next = box.clamp(r.theta + lambda * step);
      const double v = ls_criterion(m, next, s);
      if (v < r.criterion) {
        const double moved = (next - r.theta).norm();
        r.theta = next;
        r.criterion = v;
        accepted = moved > 1e-14 * (1.0 + r.theta.norm());
        break;
      }
    }
    if (!accepted) break;
  }
  for (int k = 0; k < d; ++k) {
    const double tol = 1e-9 * (box.upper[k] - box.lower[k]);
    if (r.theta[k] <= box.lower[k] + tol || r.theta[k] >= box.upper[k] - tol) r.on_boundary = true;
  }
  return r;
}

/// B_n(h) = (1/n) sum_i (|X_i - S(X_{i-1}; theta)|^2 - sigma^2(X_{i-1}; h))^2.
inline double b_n(const ModelSpec& m, const Vec& theta, const SieveFunction& h, const SeriesRecord& s) {
  double acc = 0.0;
  std::vector<double> buf;
  for (int i = 1; i <= s.n(); ++i) {
    const State lag = s.lags(i, buf);
    const double e = s.x(i) - m.drift.s(lag, theta);
    const double r = e * e - m.diffusion.sigma2(lag, h);
    acc += r * r;
  }
  return acc / static_cast<double>(s.n());
}

/// Squared residuals against the first lag, the data of B_n.
inline SievePoints squared_residuals(const ModelSpec& m, const Vec& theta, const SeriesRecord& s) {
  SievePoints out;
  const int n = s.n();
  out.x.resize(n);
  out.y.resize(n);
  out.w.assign(n, 1.0 / n);
  std::vector<double> buf;
  for (int i = 1; i <= n; ++i) {
    const State lag = s.lags(i, buf);
    const double e = s.x(i) - m.drift.s(lag, theta);
    out.x[i - 1] = lag[0];
    out.y[i - 1] = e * e;
  }
  return out;
}

struct BnOptions {
  int iters = 500;
  double roughness_coef = 2.0;  // weight coef / sqrt(n); 0 disables the penalty
};

/// Near-minimizer of B_n over the sieve for sigma^2(x; h) = h(x_1).
inline SieveFitResult b_n_minimize(const ModelSpec& m, const SeriesRecord& s, const Vec& theta_ls,
                                   const SieveDescriptor& desc, const BnOptions& opt = {}) {
  if (s.q != 1) throw Error(ErrorKind::InvalidArgument, "b_n_minimize: the sieve variance needs q = 1");
  desc.validate();
  return fit_sieve_points(squared_residuals(m, theta_ls, s), desc, opt.iters,
                          vanishing_roughness(opt.roughness_coef, static_cast<std::size_t>(s.n())));
}

/// Ergodic average (1/n) sum Sdot Sdot' / sigma^2 over the lags of a long series.
inline InfoReport fisher_info_ts(const ModelSpec& m, const SeriesRecord& s, const Vec& theta, const SieveFunction& h) {
  const int d = m.dim();
  Mat I = Mat::Zero(d, d);
  Vec g(d);
  std::vector<double> buf;
  for (int i = 1; i <= s.n(); ++i) {
    const State lag = s.lags(i, buf);
    m.drift.s_dot(lag, theta, g);
    I.noalias() += g * g.transpose() / m.diffusion.sigma2(lag, h);
  }
  return info_report(I / static_cast<double>(s.n()));
}

// ---------------------------------------------------------------------------
// Two-step pipeline

struct SeriesFitOptions {
  LsOptions ls;
  BnOptions bn;
  int max_iter = 50;
  bool one_step = false;                  // one Newton step from theta_LS instead of a full solve
  std::optional<SieveFunction> fixed_h;   // oracle: skip B_n and use this h
};

struct SeriesEstimate {
  LsResult ls;
  std::optional<SieveFitResult> h_fit;  // empty when h was fixed
  SieveFunction h_hat;
  Vec theta_hat;
  double psi_norm = 0.0;
  std::vector<TraceRow> trace;
};

inline SeriesEstimate estimate_series(const ModelSpec& m, const SeriesRecord& s, const SeriesFitOptions& opt = {}) {
  SeriesEstimate e;
  e.ls = ls_theta(m, s, opt.ls);
  if (opt.fixed_h) {
    e.h_hat = *opt.fixed_h;
  } else {
    e.h_fit = b_n_minimize(m, s, e.ls.theta, m.sieve(), opt.bn);
    e.h_hat = e.h_fit->h;
  }
  auto psi = [&](const Vec& th) { return psi_n_ts(m, th, e.h_hat, s); };
  const double n = static_cast<double>(s.n());
  if (opt.one_step) {
    const InfoReport info = fisher_info_ts(m, s, e.ls.theta, e.h_hat);
    if (info.singular) throw Error(ErrorKind::SingularMatrix, "estimate_series: plug-in information is singular");
    e.theta_hat = m.space.clamp(one_step(e.ls.theta, psi(e.ls.theta), info.info));
    e.psi_norm = psi(e.theta_hat).norm();
    return e;
  }
  SolveResult r = solve_z(psi, m.space, e.ls.theta, operational_tolerance(std::sqrt(n), n), opt.max_iter);
  e.theta_hat = r.theta;
  e.psi_norm = r.psi_norm;
  e.trace = std::move(r.trace);
  return e;
}

// ---------------------------------------------------------------------------
// LAN decomposition under Gaussian noise

struct LanProbe {
  Vec u;
  double delta_nu = 0.0;
  double b_nu = 0.0;
  double log_lr = 0.0;             // direct log-likelihood ratio
  double identity_residual = 0.0;  // |log_lr - (delta_nu - b_nu)|
};

/// Delta_{n,u}, B_{n,u} and the directly computed log dP_{n,u}/dP_{n,0} for one
/// series, with theta_u = theta0 + u / sqrt(n).
inline LanProbe lan_values(const ModelSpec& m, const SeriesRecord& s, const Vec& u) {
  const double n = static_cast<double>(s.n());
  const Vec& th0 = m.theta0();
  const Vec thu = th0 + u / std::sqrt(n);
  LanProbe p;
  p.u = u;
  std::vector<double> buf;
  constexpr double log2pi = 1.8378770664093453;  // log(2 pi)
  for (int i = 1; i <= s.n(); ++i) {
    const State lag = s.lags(i, buf);
    const double s2 = m.diffusion.sigma2(lag, m.h0());
    const double s0 = m.drift.s(lag, th0), su = m.drift.s(lag, thu);
    const double r0 = s.x(i) - s0, ru = s.x(i) - su;
    p.delta_nu += r0 * (su - s0) / s2;
    p.b_nu += (su - s0) * (su - s0) / (2.0 * s2);
    const double log_fu = -0.5 * (log2pi + std::log(s2)) - ru * ru / (2.0 * s2);
    const double log_f0 = -0.5 * (log2pi + std::log(s2)) - r0 * r0 / (2.0 * s2);
    p.log_lr += log_fu - log_f0;
  }
  p.identity_residual = std::abs(p.log_lr - (p.delta_nu - p.b_nu));
  return p;
}

struct LanReport {
  std::vector<LanProbe> probes;
  double var_delta = 0.0;
  double mean_b = 0.0;
  double uiu = 0.0;  // u' I u from the supplied information
  double max_identity_residual = 0.0;
};

/// Replicates lan_values over Gaussian-noise series of length n.
inline LanReport lan_probe(const ModelSpec& m, const Vec& u, int n, int reps, std::uint64_t seed, const Mat& info) {
  if (reps < 2) throw Error(ErrorKind::InvalidArgument, "lan_probe: reps must be >= 2");
  LanReport r;
  SeriesConfig cfg;
  cfg.q = m.q;
  cfg.n = n;
  cfg.noise = NoiseKind::Gauss;
  std::vector<double> deltas, bs;
  for (int k = 0; k < reps; ++k) {
    const SeriesRecord s = simulate_series(m, cfg, derive_seed(seed, static_cast<std::uint64_t>(n), k));
    r.probes.push_back(lan_values(m, s, u));
    deltas.push_back(r.probes.back().delta_nu);
    bs.push_back(r.probes.back().b_nu);
    r.max_identity_residual = std::max(r.max_identity_residual, r.probes.back().identity_residual);
  }
  r.var_delta = stats::variance(deltas);
  r.mean_b = stats::mean(bs);
  r.uiu = u.dot(info * u);
  return r;
}

}  // namespace zest
