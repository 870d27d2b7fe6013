#pragma once

// Nuisance space: bounded-Lipschitz piecewise-linear functions on a uniform
// knot grid over [l0, r0], constant outside, with the sup metric.

#include "zest/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace zest {

struct SieveDescriptor {
  double l0 = -4.0;
  double r0 = 4.0;
  int n_knots = 16;
  double v_lo = 0.25;
  double v_hi = 4.0;
  double slope_max = 1.0;

  double spacing() const { return (r0 - l0) / (n_knots - 1); }
  double knot(int j) const { return l0 + j * spacing(); }
  /// Largest admissible jump between neighbouring knot values.
  double max_step() const { return slope_max * spacing(); }

  void validate() const {
    if (!(n_knots >= 2)) throw Error(ErrorKind::InvalidArgument, "sieve: n_knots must be >= 2");
    if (!(l0 < r0)) throw Error(ErrorKind::InvalidArgument, "sieve: l0 must be < r0");
    if (!(v_lo > 0.0)) throw Error(ErrorKind::InvalidArgument, "sieve: v_lo must be > 0");
    if (!(v_lo <= v_hi)) throw Error(ErrorKind::InvalidArgument, "sieve: v_lo must be <= v_hi");
    if (!(slope_max > 0.0)) throw Error(ErrorKind::InvalidArgument, "sieve: slope_max must be > 0");
  }

  bool operator==(const SieveDescriptor&) const = default;
};

/// Knot index and the two hat-basis weights of x: h(x) = w0 v[j] + w1 v[j+1].
struct BasisPoint {
  int j;
  double w0;
  double w1;
};

inline BasisPoint basis_point(const SieveDescriptor& d, double x) {
  if (x <= d.l0) return {0, 1.0, 0.0};
  if (x >= d.r0) return {d.n_knots - 2, 0.0, 1.0};
  const double t = (x - d.l0) / d.spacing();
  int j = static_cast<int>(t);
  if (j > d.n_knots - 2) j = d.n_knots - 2;
  const double frac = t - j;
  return {j, 1.0 - frac, frac};
}

class SieveFunction {
 public:
  SieveFunction() = default;
  SieveFunction(SieveDescriptor desc, std::vector<double> values)
      : desc_(desc), values_(std::move(values)) {
    desc_.validate();
    if (static_cast<int>(values_.size()) != desc_.n_knots)
      throw Error(ErrorKind::InvalidArgument, "sieve: values length must equal n_knots");
  }

  /// Samples f at the knots; the result is not projected.
  template <typename F>
  static SieveFunction from_function(const SieveDescriptor& desc, F&& f) {
    std::vector<double> v(desc.n_knots);
    for (int j = 0; j < desc.n_knots; ++j) v[j] = f(desc.knot(j));
    return SieveFunction(desc, std::move(v));
  }

  static SieveFunction constant(const SieveDescriptor& desc, double value) {
    return SieveFunction(desc, std::vector<double>(desc.n_knots, value));
  }

  double operator()(double x) const {
    const BasisPoint b = basis_point(desc_, x);
    return b.w0 * values_[b.j] + b.w1 * values_[b.j + 1];
  }

  const SieveDescriptor& descriptor() const { return desc_; }
  const std::vector<double>& values() const { return values_; }

  bool feasible(double tol = 1e-12) const {
    const double step = desc_.max_step();
    for (std::size_t j = 0; j < values_.size(); ++j) {
      if (values_[j] < desc_.v_lo - tol || values_[j] > desc_.v_hi + tol) return false;
      if (j > 0 && std::abs(values_[j] - values_[j - 1]) > step + tol) return false;
    }
    return true;
  }

 private:
  SieveDescriptor desc_;
  std::vector<double> values_;
};

inline double eval(const SieveFunction& h, double x) { return h(x); }

/// d_H(h, g) = sup_x |h(x) - g(x)|. Exact as the max knot gap: the difference
/// of two same-grid piecewise-linear functions attains its sup at a knot.
inline double sup_metric(const SieveFunction& h, const SieveFunction& g) {
  if (!(h.descriptor() == g.descriptor()))
    throw Error(ErrorKind::DescriptorMismatch, "sup_metric: sieve descriptors differ");
  double m = 0.0;
  for (std::size_t j = 0; j < h.values().size(); ++j)
    m = std::max(m, std::abs(h.values()[j] - g.values()[j]));
  return m;
}

/// Clamp into [v_lo, v_hi], then enforce the slope bound. The forward and the
/// backward clamping passes each give a feasible function; the result is their
/// average, which stays feasible by convexity and is symmetric in direction.
inline SieveFunction project_to_class(std::span<const double> values, const SieveDescriptor& desc) {
  desc.validate();
  const auto n = static_cast<std::size_t>(desc.n_knots);
  if (values.size() != n)
    throw Error(ErrorKind::InvalidArgument, "project_to_class: values length must equal n_knots");
  std::vector<double> v(values.begin(), values.end());
  for (double& x : v) x = std::clamp(x, desc.v_lo, desc.v_hi);
  const double step = desc.max_step();

  std::vector<double> fwd = v;
  for (std::size_t j = 1; j < n; ++j)
    fwd[j] = std::clamp(fwd[j], fwd[j - 1] - step, fwd[j - 1] + step);
  std::vector<double> bwd = v;
  for (std::size_t j = n - 1; j-- > 0;)
    bwd[j] = std::clamp(bwd[j], bwd[j + 1] - step, bwd[j + 1] + step);

  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = 0.5 * (fwd[j] + bwd[j]);
  return SieveFunction(desc, std::move(out));
}

// ---------------------------------------------------------------------------
// Covering numbers

/// N(H_sieve, d_H, eps) upper bound. When the exact integer count overflows
/// 64 bits, `overflow` is set and only `log_count` is meaningful.
struct CoveringCount {
  bool overflow = false;
  std::uint64_t count = 1;
  double log_count = 0.0;
};

/// Value lattice used for the cover: the range [v_lo, v_hi] is cut into K
/// cells of equal width w <= eps; centers sit at cell midpoints.
struct CoverLattice {
  int cells;
  double width;
  int max_jump;  // admissible |k_{j+1} - k_j| between neighbouring knots
};

inline CoverLattice cover_lattice(const SieveDescriptor& desc, double eps) {
  const double range = desc.v_hi - desc.v_lo;
  const double kcells = std::ceil(range / eps - 1e-12);
  if (kcells > 1e8)
    throw Error(ErrorKind::InvalidArgument, "covering_number: eps too small for the value range");
  const int cells = std::max(1, static_cast<int>(kcells));
  const double width = range > 0.0 ? range / cells : 0.0;
  int jump = cells;
  if (width > 0.0) {
    // A feasible h rounds knot-wise to centers that differ by at most
    // max_step + width; equivalently the gap between cells is <= max_step.
    const double j = std::floor(desc.max_step() / width + 1e-12) + 1.0;
    jump = static_cast<int>(std::min<double>(j, cells));
  }
  return {cells, width, jump};
}

/// Counts lattice paths k_0..k_{n-1} in [0, K) with |k_{j+1} - k_j| <= J.
/// Every sieve function lies within width/2 < eps of the piecewise-linear
/// function through the centers of its path, so the count bounds N(eps).
inline CoveringCount covering_number(const SieveDescriptor& desc, double eps) {
  desc.validate();
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "covering_number: eps must be > 0");
  const CoverLattice lat = cover_lattice(desc, eps);
  const int K = lat.cells;
  const int J = lat.max_jump;
  if (K == 1) return {};

  // Exact pass in unsigned 128-bit with overflow detection against 2^64.
  using u128 = unsigned __int128;
  const u128 limit = static_cast<u128>(std::numeric_limits<std::uint64_t>::max());
  std::vector<u128> cur(K, 1), prefix(K + 1), next(K);
  bool overflow = false;
  for (int step = 1; step < desc.n_knots && !overflow; ++step) {
    prefix[0] = 0;
    for (int k = 0; k < K; ++k) prefix[k + 1] = prefix[k] + cur[k];
    for (int k = 0; k < K; ++k) {
      const int lo = std::max(0, k - J);
      const int hi = std::min(K - 1, k + J);
      next[k] = prefix[hi + 1] - prefix[lo];
      if (next[k] > limit) overflow = true;
    }
    cur.swap(next);
  }
  if (!overflow) {
    u128 total = 0;
    for (int k = 0; k < K; ++k) {
      total += cur[k];
      if (total > limit) { overflow = true; break; }
    }
    if (!overflow) {
      const auto c = static_cast<std::uint64_t>(total);
      return {false, c, std::log(static_cast<double>(c))};
    }
  }

  // Log-domain pass: rescale each sweep by its max, accumulate the log scale.
  std::vector<double> lc(K, 1.0), lp(K + 1), ln(K);
  double log_scale = 0.0;
  for (int step = 1; step < desc.n_knots; ++step) {
    lp[0] = 0.0;
    for (int k = 0; k < K; ++k) lp[k + 1] = lp[k] + lc[k];
    double mx = 0.0;
    for (int k = 0; k < K; ++k) {
      const int lo = std::max(0, k - J);
      const int hi = std::min(K - 1, k + J);
      ln[k] = lp[hi + 1] - lp[lo];
      mx = std::max(mx, ln[k]);
    }
    for (int k = 0; k < K; ++k) lc[k] = ln[k] / mx;
    log_scale += std::log(mx);
  }
  double total = 0.0;
  for (double x : lc) total += x;
  return {true, 0, log_scale + std::log(total)};
}

/// Trapezoid rule for the integral of sqrt(log N(eps)) over the given grid.
inline double entropy_integral(const SieveDescriptor& desc, std::span<const double> eps_grid) {
  if (eps_grid.size() < 2)
    throw Error(ErrorKind::InvalidArgument, "entropy_integral: need at least two grid points");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0 && eps_grid[i] <= 1.0))
      throw Error(ErrorKind::InvalidArgument, "entropy_integral: grid must lie in (0, 1]");
    if (i > 0 && !(eps_grid[i] > eps_grid[i - 1]))
      throw Error(ErrorKind::InvalidArgument, "entropy_integral: grid must be strictly increasing");
  }
  std::vector<double> f(eps_grid.size());
  for (std::size_t i = 0; i < eps_grid.size(); ++i)
    f[i] = std::sqrt(std::max(0.0, covering_number(desc, eps_grid[i]).log_count));
  double s = 0.0;
  for (std::size_t i = 1; i < f.size(); ++i)
    s += 0.5 * (f[i] + f[i - 1]) * (eps_grid[i] - eps_grid[i - 1]);
  return s;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const SieveDescriptor& d) {
  j = nlohmann::json{{"l0", d.l0}, {"r0", d.r0}, {"n_knots", d.n_knots},
                     {"v_lo", d.v_lo}, {"v_hi", d.v_hi}, {"slope_max", d.slope_max}};
}

inline void from_json(const nlohmann::json& j, SieveDescriptor& d) {
  SieveDescriptor def;
  d.l0 = j.value("l0", def.l0);
  d.r0 = j.value("r0", def.r0);
  d.n_knots = j.value("n_knots", def.n_knots);
  d.v_lo = j.value("v_lo", def.v_lo);
  d.v_hi = j.value("v_hi", def.v_hi);
  d.slope_max = j.value("slope_max", def.slope_max);
  d.validate();
}

inline void to_json(nlohmann::json& j, const SieveFunction& h) {
  const auto& d = h.descriptor();
  j = nlohmann::json{{"l0", d.l0}, {"r0", d.r0}, {"values", h.values()},
                     {"v_lo", d.v_lo}, {"v_hi", d.v_hi}, {"slope_max", d.slope_max}};
}

inline void from_json(const nlohmann::json& j, SieveFunction& h) {
  SieveDescriptor d;
  d.l0 = j.at("l0").get<double>();
  d.r0 = j.at("r0").get<double>();
  d.v_lo = j.at("v_lo").get<double>();
  d.v_hi = j.at("v_hi").get<double>();
  d.slope_max = j.at("slope_max").get<double>();
  auto values = j.at("values").get<std::vector<double>>();
  d.n_knots = static_cast<int>(values.size());
  h = SieveFunction(d, std::move(values));
}

}  // namespace zest
