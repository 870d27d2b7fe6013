#pragma once

// Discrete approximations of the invariant law (quadrature grids or empirical
// samples) and the population functionals integrated against them.

#include "zest/model.hpp"

#include <Eigen/Eigenvalues>

#include <limits>
#include <span>
#include <vector>

namespace zest {

/// Weighted point set standing in for mu (diffusion) or mu_q (series, q = 1).
struct Measure {
  std::vector<double> x;
  std::vector<double> w;

  template <typename F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(x[i]);
    return s;
  }
};

inline Measure empirical_measure(std::span<const double> xs) {
  Measure m;
  m.x.assign(xs.begin(), xs.end());
  m.w.assign(xs.size(), xs.empty() ? 0.0 : 1.0 / static_cast<double>(xs.size()));
  return m;
}

/// Composite trapezoid weights on an increasing grid.
inline std::vector<double> trapezoid_weights(std::span<const double> grid) {
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double h = grid[i] - grid[i - 1];
    w[i - 1] += 0.5 * h;
    w[i] += 0.5 * h;
  }
  return w;
}

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = (n == 1) ? a : a + (b - a) * i / (n - 1);
  return g;
}

/// I(theta, h) = int Sdot Sdot' / sigma^2(x; h) dmu.
inline Mat information(const ModelSpec& m, const Vec& theta, const SieveFunction& h, const Measure& mu) {
  const int d = m.dim();
  Mat I = Mat::Zero(d, d);
  Vec g(d);
  for (std::size_t i = 0; i < mu.x.size(); ++i) {
    m.s_dot(mu.x[i], theta, g);
    I.noalias() += (mu.w[i] / m.sigma2(mu.x[i], h)) * g * g.transpose();
  }
  return I;
}

/// Covariance kernel of the limit field Z:
/// E Z(th,h) Z(th',h')' = int Sdot(th) Sdot(th')' sigma^2(h0) / (sigma^2(h) sigma^2(h')) dmu.
inline Mat limit_covariance(const ModelSpec& m, const Vec& th1, const SieveFunction& h1, const Vec& th2,
                            const SieveFunction& h2, const Measure& mu) {
  const int d = m.dim();
  Mat C = Mat::Zero(d, d);
  Vec g1(d), g2(d);
  for (std::size_t i = 0; i < mu.x.size(); ++i) {
    const double x = mu.x[i];
    m.s_dot(x, th1, g1);
    m.s_dot(x, th2, g2);
    const double scale = mu.w[i] * m.sigma2(x, m.h0()) / (m.sigma2(x, h1) * m.sigma2(x, h2));
    C.noalias() += scale * g1 * g2.transpose();
  }
  return C;
}

/// Limit estimating map Psi(theta, h) = int Sdot(th)/sigma^2(h) [S(th0) - S(th)] dmu.
inline Vec limit_psi(const ModelSpec& m, const Vec& theta, const SieveFunction& h, const Measure& mu) {
  const int d = m.dim();
  Vec out = Vec::Zero(d);
  Vec g(d);
  for (std::size_t i = 0; i < mu.x.size(); ++i) {
    const double x = mu.x[i];
    m.s_dot(x, theta, g);
    out += (mu.w[i] * (m.s(x, m.theta0()) - m.s(x, theta)) / m.sigma2(x, h)) * g;
  }
  return out;
}

struct InfoReport {
  Mat info;
  double condition = 0.0;
  bool singular = false;
};

/// Eigen-based invertibility report for a symmetric PSD matrix.
inline InfoReport info_report(Mat I) {
  I = 0.5 * (I + I.transpose());
  InfoReport r{I, std::numeric_limits<double>::infinity(), true};
  const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(I, Eigen::EigenvaluesOnly).eigenvalues();
  const double hi = ev.maxCoeff(), lo = ev.minCoeff();
  if (hi > 0.0 && lo > 0.0) r.condition = hi / lo;
  r.singular = !(hi > 0.0) || !(r.condition < 1e12);
  return r;
}

}  // namespace zest
