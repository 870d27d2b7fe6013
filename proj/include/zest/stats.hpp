#pragma once

#include "zest/types.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace zest::stats {

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Unbiased sample covariance of the rows of `draws` (R x d).
inline Mat covariance(const Mat& draws) {
  const Eigen::Index r = draws.rows();
  if (r < 2) return Mat::Zero(draws.cols(), draws.cols());
  const Mat centered = draws.rowwise() - draws.colwise().mean();
  Mat c = centered.transpose() * centered / static_cast<double>(r - 1);
  return 0.5 * (c + c.transpose());
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

/// Kolmogorov-Smirnov distance of the sample to the standard normal law.
inline double ks_normal(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = normal_cdf(v[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

/// Asymptotic 5% critical value of the one-sample KS statistic.
inline double ks_critical_5pct(std::size_t n) { return 1.36 / std::sqrt(static_cast<double>(n)); }

inline double skewness(std::span<const double> v) {
  const double m = mean(v);
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    const double c = x - m;
    m2 += c * c;
    m3 += c * c * c;
  }
  m2 /= v.size();
  m3 /= v.size();
  return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

inline double excess_kurtosis(std::span<const double> v) {
  const double m = mean(v);
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double c = x - m;
    m2 += c * c;
    m4 += c * c * c * c;
  }
  m2 /= v.size();
  m4 /= v.size();
  return m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
}

/// Largest entrywise deviation of `est` from `ref`, each entry scaled by
/// sqrt(ref_ii ref_jj). On the diagonal this is |est_ii / ref_ii - 1|.
inline double scaled_matrix_error(const Mat& est, const Mat& ref) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < ref.rows(); ++i)
    for (Eigen::Index j = 0; j < ref.cols(); ++j)
      worst = std::max(worst, std::abs(est(i, j) - ref(i, j)) / std::sqrt(ref(i, i) * ref(j, j)));
  return worst;
}

}  // namespace zest::stats
