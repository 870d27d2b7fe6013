#pragma once

// Nonlinear heteroscedastic autoregression X_i = S(X_{i-1..i-q}; theta0) +
// sigma(X_{i-1}; h0) w_i with Gaussian or martingale-difference noise.

#include "zest/csv.hpp"
#include "zest/model.hpp"

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

namespace zest {

enum class NoiseKind { Gauss, Martingale };

/// Conditional fourth-moment bound of the martingale noise generator.
inline constexpr double kMartingaleL4 = 9.0;

struct SeriesConfig {
  int q = 1;
  int n = 1000;
  std::vector<double> initial;  // (X_0, ..., X_{1-q}); zeros when empty
  NoiseKind noise = NoiseKind::Gauss;
  int burn_in = 500;
};

/// values holds X_{1-q}, ..., X_0, X_1, ..., X_n (oldest first); noise holds
/// w_1, ..., w_n when the record was simulated.
struct SeriesRecord {
  int q = 1;
  std::vector<double> values;
  std::vector<double> noise;

  int n() const { return static_cast<int>(values.size()) - q; }
  /// X_i for 1 - q <= i <= n.
  double x(int i) const { return values[static_cast<std::size_t>(i + q - 1)]; }
  /// Lag vector (X_{i-1}, ..., X_{i-q}) for 1 <= i <= n, written into buf.
  State lags(int i, std::vector<double>& buf) const {
    buf.resize(q);
    for (int k = 0; k < q; ++k) buf[k] = x(i - 1 - k);
    return State(buf);
  }
};

/// Wraps an observed sequence: the first q entries become the fixed initial lags.
inline SeriesRecord series_from_values(std::vector<double> values, int q = 1) {
  if (static_cast<int>(values.size()) < q + 1)
    throw Error(ErrorKind::InvalidArgument, "series: need at least q + 1 values");
  return SeriesRecord{q, std::move(values), {}};
}

/// Two-point law on {a, -b} with P(a) = p: mean 0, variance 1,
/// E w^4 = (1-p)^2/p + p^2/(1-p).
struct TwoPoint {
  double p, a, b;
  explicit TwoPoint(double prob) : p(prob), a(std::sqrt((1.0 - prob) / prob)), b(std::sqrt(prob / (1.0 - prob))) {}
  double fourth_moment() const { return (1.0 - p) * (1.0 - p) / p + p * p / (1.0 - p); }
};

/// Mixing probability depends on the sign of the previous observation.
inline TwoPoint martingale_noise_law(double prev) { return TwoPoint(prev >= 0.0 ? 0.25 : 0.75); }

struct SeriesSimOptions {
  bool zero_noise = false;  // testing hook
};

inline SeriesRecord simulate_series(const ModelSpec& model, const SeriesConfig& cfg, std::uint64_t seed,
                                    const SeriesSimOptions& opt = {}) {
  if (cfg.q < 1 || cfg.q != model.q)
    throw Error(ErrorKind::InvalidArgument, "simulate_series: lag order must match the model");
  if (cfg.n < 1) throw Error(ErrorKind::InvalidArgument, "simulate_series: n must be >= 1");
  if (cfg.burn_in < 0) throw Error(ErrorKind::InvalidArgument, "simulate_series: burn_in must be >= 0");
  if (!cfg.initial.empty() && static_cast<int>(cfg.initial.size()) != cfg.q)
    throw Error(ErrorKind::InvalidArgument, "simulate_series: initial must have q entries");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int q = cfg.q;
  const double c = model.diffusion.c_lower;

  // Working buffer, oldest first: X_{1-q} .. X_0 given as (X_0, ..., X_{1-q}).
  std::vector<double> buf(q, 0.0);
  if (!cfg.initial.empty())
    for (int k = 0; k < q; ++k) buf[q - 1 - k] = cfg.initial[k];

  std::vector<double> lag(q);
  auto step = [&](std::vector<double>& series, double& w_out) {
    const std::size_t len = series.size();
    for (int k = 0; k < q; ++k) lag[k] = series[len - 1 - k];
    const State s(lag);
    double w = 0.0;
    if (!opt.zero_noise) {
      if (cfg.noise == NoiseKind::Gauss) {
        w = normal(rng);
      } else {
        const TwoPoint law = martingale_noise_law(lag[0]);
        w = unif(rng) < law.p ? law.a : -law.b;
      }
    }
    const double s2 = model.diffusion.sigma2(s, model.h0());
    if (s2 < c) throw Error(ErrorKind::Ellipticity, "simulate_series: sigma^2 below the ellipticity floor");
    const double nx = model.drift.s(s, model.theta0()) + std::sqrt(s2) * w;
    if (!std::isfinite(nx)) throw Error(ErrorKind::Explosion, "simulate_series: state became non-finite");
    series.push_back(nx);
    w_out = w;
  };

  double w;
  for (int i = 0; i < cfg.burn_in; ++i) {
    step(buf, w);
    buf.erase(buf.begin());
  }

  SeriesRecord rec;
  rec.q = q;
  rec.values = buf;
  rec.values.reserve(q + cfg.n);
  rec.noise.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i) step(rec.values, rec.noise[i]);
  return rec;
}

inline void write_series_csv(std::ostream& os, const SeriesRecord& s) {
  csv::write_row(os, {"index", "value"});
  for (int i = 1 - s.q; i <= s.n(); ++i) csv::write_row(os, {std::to_string(i), csv::num(s.x(i))});
}

}  // namespace zest
