#pragma once

// Weighted least squares over the sieve: minimize sum_i w_i (y_i - h(x_i))^2
// over knot values subject to the value and slope bounds. The criterion is a
// convex quadratic in the knot values.

#include "zest/function_class.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace zest {

struct SieveQuadratic {
  Mat gram;       // sum w phi phi'
  Vec rhs;        // sum w y phi
  double c0 = 0;  // sum w y^2

  /// sum w (y - phi'v)^2 for knot values v.
  double value(const Vec& v) const { return c0 - 2.0 * rhs.dot(v) + v.dot(gram * v); }
};

inline SieveQuadratic assemble_sieve_quadratic(std::span<const double> xs, std::span<const double> ys,
                                               std::span<const double> ws, const SieveDescriptor& desc) {
  if (xs.size() != ys.size() || xs.size() != ws.size())
    throw Error(ErrorKind::InvalidArgument, "sieve fit: xs, ys, ws must have equal length");
  const int n = desc.n_knots;
  SieveQuadratic q{Mat::Zero(n, n), Vec::Zero(n), 0.0};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const BasisPoint b = basis_point(desc, xs[i]);
    const double w = ws[i], y = ys[i];
    q.gram(b.j, b.j) += w * b.w0 * b.w0;
    q.gram(b.j, b.j + 1) += w * b.w0 * b.w1;
    q.gram(b.j + 1, b.j) += w * b.w0 * b.w1;
    q.gram(b.j + 1, b.j + 1) += w * b.w1 * b.w1;
    q.rhs[b.j] += w * y * b.w0;
    q.rhs[b.j + 1] += w * y * b.w1;
    q.c0 += w * y * y;
  }
  return q;
}

struct SieveFitOptions {
  int iters = 500;
  /// Weight of the first-difference penalty sum_j (v_{j+1} - v_j)^2. It only
  /// selects among (near-)minimizers: knots the data never reach inherit the
  /// values of their neighbours instead of staying arbitrary.
  double roughness = 0.0;
};

struct SieveFitResult {
  SieveFunction h;
  double objective = 0.0;  // unpenalized criterion at h
  int iterations = 0;
  int halvings = 0;
  bool stalled = false;
  std::vector<double> trace;  // penalized objective per accepted iterate
};

/// Euclidean projection onto the sieve constraints (value box and neighbour
/// steps) by Dykstra's alternating scheme over three sets: the box, the
/// even-indexed knot pairs and the odd-indexed knot pairs. Each set has a
/// closed-form projection. A final project_to_class removes round-off.
inline SieveFunction euclidean_projection(const Vec& v, const SieveDescriptor& desc, int max_cycles = 20000) {
  const int n = desc.n_knots;
  const double s = desc.max_step();
  auto pair_proj = [&](Vec& x, int first) {
    for (int j = first; j + 1 < n; j += 2) {
      const double d = x[j + 1] - x[j];
      if (std::abs(d) > s) {
        const double mid = 0.5 * (x[j] + x[j + 1]), half = 0.5 * std::copysign(s, d);
        x[j] = mid - half;
        x[j + 1] = mid + half;
      }
    }
  };
  Vec x = v;
  Vec p0 = Vec::Zero(n), p1 = Vec::Zero(n), p2 = Vec::Zero(n);
  for (int c = 0; c < max_cycles; ++c) {
    const Vec before = x;
    Vec y = x + p0;
    x = y.cwiseMax(desc.v_lo).cwiseMin(desc.v_hi);
    p0 = y - x;
    y = x + p1;
    x = y;
    pair_proj(x, 0);
    p1 = y - x;
    y = x + p2;
    x = y;
    pair_proj(x, 1);
    p2 = y - x;
    if ((x - before).lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + x.lpNorm<Eigen::Infinity>())) break;
  }
  return project_to_class(std::span<const double>(x.data(), n), desc);
}

/// Monotone accelerated projected gradient (FISTA) on the penalized quadratic
/// with step 1/L, L the largest Hessian eigenvalue, and Euclidean projections.
inline SieveFitResult fit_sieve(const SieveQuadratic& q, const SieveDescriptor& desc, const SieveFitOptions& opt) {
  if (opt.iters < 1) throw Error(ErrorKind::InvalidArgument, "sieve fit: iters must be >= 1");
  const int n = desc.n_knots;
  Mat P = q.gram;
  if (opt.roughness > 0.0) {
    for (int j = 0; j + 1 < n; ++j) {
      P(j, j) += opt.roughness;
      P(j + 1, j + 1) += opt.roughness;
      P(j, j + 1) -= opt.roughness;
      P(j + 1, j) -= opt.roughness;
    }
  }
  auto objective = [&](const Vec& v) { return q.c0 - 2.0 * q.rhs.dot(v) + v.dot(P * v); };
  auto as_vec = [n](const SieveFunction& h) { return Vec(Eigen::Map<const Vec>(h.values().data(), n)); };

  // Unconstrained start; a vanishing ridge keeps knots without data solvable.
  const double scale = std::max(P.trace() / n, std::numeric_limits<double>::min());
  Mat Pr = P;
  Pr.diagonal().array() += 1e-12 * scale;
  Vec start = Pr.ldlt().solve(q.rhs);
  for (int j = 0; j < n; ++j)
    if (!std::isfinite(start[j])) start[j] = desc.v_lo;
  SieveFunction cur = euclidean_projection(start, desc);
  Vec v = as_vec(cur);
  double fv = objective(v);

  const double lmax = Eigen::SelfAdjointEigenSolver<Mat>(P, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double step = lmax > 0.0 ? 0.5 / lmax : 1.0;  // gradient is 2 (P v - rhs)

  SieveFitResult res;
  res.trace.push_back(fv);
  Vec y = v;
  double t = 1.0;
  int idle = 0;
  for (int it = 0; it < opt.iters; ++it) {
    const Vec grad = 2.0 * (P * y - q.rhs);
    SieveFunction cand = euclidean_projection(y - step * grad, desc);
    const Vec z = as_vec(cand);
    const double fz = objective(z);
    ++res.iterations;
    const Vec prev = v;
    if (fz < fv) {
      v = z;
      cur = std::move(cand);
      const double gain = fv - fz;
      fv = fz;
      res.trace.push_back(fv);
      idle = gain <= 1e-15 * (1.0 + std::abs(fv)) ? idle + 1 : 0;
    } else {
      ++res.halvings;  // non-monotone candidate rejected
      ++idle;
    }
    if (idle >= 40) {
      res.stalled = true;
      break;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = v + (t / tn) * (z - v) + ((t - 1.0) / tn) * (v - prev);
    t = tn;
  }
  res.objective = q.value(v);
  res.h = std::move(cur);
  return res;
}

/// Data (x_i, y_i, w_i) of a weighted least-squares fit of h.
struct SievePoints {
  std::vector<double> x, y, w;
};

/// Penalty weight c / sqrt(N): vanishes as the sample grows so the result
/// stays a near-minimizer of the unpenalized criterion.
inline double vanishing_roughness(double coef, std::size_t n_obs) {
  return n_obs == 0 ? 0.0 : coef / std::sqrt(static_cast<double>(n_obs));
}

inline SieveFitResult fit_sieve_points(const SievePoints& p, const SieveDescriptor& desc, int iters,
                                       double roughness) {
  SieveFitOptions opt;
  opt.iters = iters;
  opt.roughness = roughness;
  return fit_sieve(assemble_sieve_quadratic(p.x, p.y, p.w, desc), desc, opt);
}

}  // namespace zest
