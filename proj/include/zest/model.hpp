#pragma once

// Parametric drift families, sieve-indexed variance families, parameter boxes,
// the built-in model registry and randomized regularity spot-checks.

#include "zest/function_class.hpp"
#include "zest/types.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace zest {

struct ParamSpace {
  Vec lower;
  Vec upper;
  Vec theta0;

  int dim() const { return static_cast<int>(lower.size()); }

  void validate() const {
    if (lower.size() == 0 || upper.size() != lower.size() || theta0.size() != lower.size())
      throw Error(ErrorKind::InvalidArgument, "ParamSpace: inconsistent dimensions");
    for (int i = 0; i < dim(); ++i) {
      if (!(lower[i] < upper[i]))
        throw Error(ErrorKind::InvalidArgument, "ParamSpace: lower must be < upper");
      if (!(theta0[i] > lower[i] && theta0[i] < upper[i]))
        throw Error(ErrorKind::InvalidArgument, "ParamSpace: theta0 must be strictly inside the box");
    }
  }

  bool contains(const Vec& th) const {
    for (int i = 0; i < dim(); ++i)
      if (th[i] < lower[i] || th[i] > upper[i]) return false;
    return true;
  }

  Vec clamp(const Vec& th) const { return th.cwiseMax(lower).cwiseMin(upper); }
  Vec width() const { return upper - lower; }
};

struct DriftFamily {
  std::function<double(State, const Vec&)> s;
  /// Writes the d-vector of partial derivatives in theta into `out`.
  std::function<void(State, const Vec&, Eigen::Ref<Vec>)> s_dot;
  /// Dominating function Lambda(x).
  std::function<double(State)> envelope;
  /// State-Lipschitz constant K.
  double lip_x = 1.0;
};

struct DiffusionFamily {
  std::function<double(State, const SieveFunction&)> sigma2;
  double c_lower = 0.0;
  SieveFunction h0;
};

enum class ModelKind { Diffusion, Series };

struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::Diffusion;
  int q = 1;  // lag order (series); 1 for diffusions
  ParamSpace space;
  DriftFamily drift;
  DiffusionFamily diffusion;

  int dim() const { return space.dim(); }
  const Vec& theta0() const { return space.theta0; }
  const SieveFunction& h0() const { return diffusion.h0; }
  const SieveDescriptor& sieve() const { return diffusion.h0.descriptor(); }

  double s(double x, const Vec& th) const { return drift.s(State(&x, 1), th); }
  void s_dot(double x, const Vec& th, Eigen::Ref<Vec> out) const {
    drift.s_dot(State(&x, 1), th, out);
  }
  Vec s_dot(double x, const Vec& th) const {
    Vec out(dim());
    drift.s_dot(State(&x, 1), th, out);
    return out;
  }
  double sigma2(double x, const SieveFunction& h) const {
    return diffusion.sigma2(State(&x, 1), h);
  }
  double envelope(double x) const { return drift.envelope(State(&x, 1)); }
};

/// sigma^2(x; h) = h(x_1): the sieve is evaluated at the first lag.
inline double identity_sigma2(State x, const SieveFunction& h) { return h(x[0]); }

// ---------------------------------------------------------------------------
// Built-in models

namespace models {

inline SieveDescriptor diffusion_sieve() { return {-4.0, 4.0, 16, 0.25, 4.0, 1.0}; }
inline SieveDescriptor ar1_sieve() { return {-5.0, 5.0, 16, 0.25, 4.0, 1.0}; }
inline SieveDescriptor nl_ar_sieve() { return {-6.0, 6.0, 16, 0.25, 4.0, 1.0}; }

/// sigma_0^2(x) = 1 + 0.5 tanh(x), sampled at the knots of the sieve.
inline SieveFunction tanh_h0(const SieveDescriptor& d) {
  return SieveFunction::from_function(d, [](double x) { return 1.0 + 0.5 * std::tanh(x); });
}

/// sigma_0^2(x) = 1 + 0.5 x^2 / (1 + x^2), sampled at the knots.
inline SieveFunction rational_h0(const SieveDescriptor& d) {
  return SieveFunction::from_function(d, [](double x) { return 1.0 + 0.5 * x * x / (1.0 + x * x); });
}

inline DiffusionFamily identity_family(SieveFunction h0) {
  const double c = h0.descriptor().v_lo;
  return {identity_sigma2, c, std::move(h0)};
}

/// Ornstein-Uhlenbeck drift S(x; theta) = -theta x on Theta = [0.1, 5].
inline ModelSpec ou(double theta0 = 1.0, std::optional<SieveFunction> h0 = std::nullopt) {
  constexpr double tmax = 5.0;
  ModelSpec m;
  m.name = "ou";
  m.kind = ModelKind::Diffusion;
  m.space = {Vec::Constant(1, 0.1), Vec::Constant(1, tmax), Vec::Constant(1, theta0)};
  m.drift.s = [](State x, const Vec& th) { return -th[0] * x[0]; };
  m.drift.s_dot = [](State x, const Vec&, Eigen::Ref<Vec> out) { out[0] = -x[0]; };
  m.drift.envelope = [](State x) { return tmax * std::abs(x[0]) + tmax; };
  m.drift.lip_x = tmax;
  m.diffusion = identity_family(h0 ? *h0 : tanh_h0(diffusion_sieve()));
  return m;
}

/// Bounded nonlinear drift S(x; theta) = -tanh(theta x) on Theta = [0.5, 3].
inline ModelSpec tanh_drift(double theta0 = 1.0, std::optional<SieveFunction> h0 = std::nullopt) {
  constexpr double tmax = 3.0;
  ModelSpec m;
  m.name = "tanh-drift";
  m.kind = ModelKind::Diffusion;
  m.space = {Vec::Constant(1, 0.5), Vec::Constant(1, tmax), Vec::Constant(1, theta0)};
  m.drift.s = [](State x, const Vec& th) { return -std::tanh(th[0] * x[0]); };
  m.drift.s_dot = [](State x, const Vec& th, Eigen::Ref<Vec> out) {
    const double c = std::cosh(th[0] * x[0]);
    out[0] = -x[0] / (c * c);
  };
  // |d/dtheta Sdot| = 2 x^2 sech^2 |tanh| <= 2 x^2.
  m.drift.envelope = [](State x) { return 1.0 + std::abs(x[0]) + 2.0 * x[0] * x[0]; };
  m.drift.lip_x = tmax;
  m.diffusion = identity_family(h0 ? *h0 : tanh_h0(diffusion_sieve()));
  return m;
}

/// AR(1): X_i = theta X_{i-1} + sigma(X_{i-1}) w_i, Theta = [-0.95, 0.95].
inline ModelSpec ar1(double theta0 = 0.5, std::optional<SieveFunction> h0 = std::nullopt) {
  ModelSpec m;
  m.name = "ar1";
  m.kind = ModelKind::Series;
  m.q = 1;
  m.space = {Vec::Constant(1, -0.95), Vec::Constant(1, 0.95), Vec::Constant(1, theta0)};
  m.drift.s = [](State x, const Vec& th) { return th[0] * x[0]; };
  m.drift.s_dot = [](State x, const Vec&, Eigen::Ref<Vec> out) { out[0] = x[0]; };
  m.drift.envelope = [](State x) { return std::abs(x[0]) + 1.0; };
  m.drift.lip_x = 1.0;
  m.diffusion = identity_family(h0 ? *h0 : SieveFunction::constant(ar1_sieve(), 1.0));
  return m;
}

/// S(x; theta) = theta_1 x + theta_2 x / (1 + x^2) on [-0.9, 0.9] x [-1, 1].
inline ModelSpec nl_ar(Vec theta0 = Vec{{0.5, 0.3}}, std::optional<SieveFunction> h0 = std::nullopt) {
  ModelSpec m;
  m.name = "nl-ar";
  m.kind = ModelKind::Series;
  m.q = 1;
  m.space = {Vec{{-0.9, -1.0}}, Vec{{0.9, 1.0}}, std::move(theta0)};
  m.drift.s = [](State x, const Vec& th) {
    const double v = x[0];
    return th[0] * v + th[1] * v / (1.0 + v * v);
  };
  m.drift.s_dot = [](State x, const Vec&, Eigen::Ref<Vec> out) {
    const double v = x[0];
    out[0] = v;
    out[1] = v / (1.0 + v * v);
  };
  m.drift.envelope = [](State x) { return 2.0 * std::abs(x[0]) + 2.0; };
  m.drift.lip_x = 2.0;
  m.diffusion = identity_family(h0 ? *h0 : rational_h0(nl_ar_sieve()));
  return m;
}

}  // namespace models

inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"ou", "tanh-drift", "ar1", "nl-ar"};
  return names;
}

/// Overrides accepted by the registry; unset fields keep the built-in value.
struct ModelOptions {
  std::optional<Vec> theta0;
  std::optional<double> h0_constant;
};

inline ModelSpec make_model(const std::string& name, const ModelOptions& opt = {}) {
  auto pick_h0 = [&](const SieveDescriptor& d) -> std::optional<SieveFunction> {
    if (opt.h0_constant) return SieveFunction::constant(d, *opt.h0_constant);
    return std::nullopt;
  };
  auto scalar = [&](double def) {
    if (!opt.theta0) return def;
    if (opt.theta0->size() != 1)
      throw Error(ErrorKind::Config, "model '" + name + "' expects a 1-dimensional theta0");
    return (*opt.theta0)[0];
  };
  ModelSpec m;
  if (name == "ou") m = models::ou(scalar(1.0), pick_h0(models::diffusion_sieve()));
  else if (name == "tanh-drift") m = models::tanh_drift(scalar(1.0), pick_h0(models::diffusion_sieve()));
  else if (name == "ar1") m = models::ar1(scalar(0.5), pick_h0(models::ar1_sieve()));
  else if (name == "nl-ar") {
    Vec th = opt.theta0 ? *opt.theta0 : Vec{{0.5, 0.3}};
    if (th.size() != 2) throw Error(ErrorKind::Config, "model 'nl-ar' expects a 2-dimensional theta0");
    m = models::nl_ar(th, pick_h0(models::nl_ar_sieve()));
  } else {
    throw Error(ErrorKind::Config, "unknown model '" + name + "'");
  }
  m.space.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Regularity spot-checks

struct RegularityReport {
  // Max observed ratio of left- to right-hand side for each inequality.
  double s_envelope = 0.0;              // |S(x;th)| <= Lambda(x)
  double sdot_envelope = 0.0;           // |Sdot(x;th)| <= Lambda(x)
  double sdot_theta_lipschitz = 0.0;    // |Sdot(x;th)-Sdot(x;th')| <= Lambda(x)|th-th'|
  double s_state_lipschitz = 0.0;       // |S(x;th)-S(x';th)| <= K|x-x'|
  double sdot_state_lipschitz = 0.0;    // |Sdot(x;th)-Sdot(x';th)| <= K|x-x'|
  double sigma2_state_lipschitz = 0.0;  // |s2(x;h)-s2(x';h)| <= K|x-x'|
  double sigma2_h_lipschitz = 0.0;      // |s2(x;h)-s2(x;h')| <= Lambda(x) d_H(h,h')
  double min_sigma2 = 0.0;
  /// sup_x |S(x;th)-S(x;th0)-Sdot(x;th0)'(th-th0)| / (Lambda(x)|th-th0|) at
  /// |th-th0| = 1e-1, 1e-2, 1e-3; must shrink towards zero.
  std::vector<double> linearization_remainder;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

namespace detail {

inline SieveFunction random_sieve(const SieveDescriptor& d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(d.v_lo, d.v_hi);
  std::normal_distribution<double> step(0.0, d.max_step());
  std::vector<double> v(d.n_knots);
  v[0] = u(rng);
  for (int j = 1; j < d.n_knots; ++j) v[j] = v[j - 1] + step(rng);
  return project_to_class(v, d);
}

}  // namespace detail

inline RegularityReport check_regularity(const ModelSpec& model, int n_probe, std::uint64_t rng_seed) {
  if (n_probe < 1) throw Error(ErrorKind::InvalidArgument, "check_regularity: n_probe must be >= 1");
  model.space.validate();
  const SieveDescriptor& sd = model.sieve();
  const int d = model.dim();
  const int q = model.q;
  const double K = model.drift.lip_x;
  const double c = model.diffusion.c_lower;
  std::mt19937_64 rng(rng_seed);
  const double span_lo = sd.l0 - 2.0, span_hi = sd.r0 + 2.0;
  std::uniform_real_distribution<double> ux(span_lo, span_hi), unit(-1.0, 1.0), u01(0.0, 1.0);

  auto draw_theta = [&] {
    Vec th(d);
    for (int i = 0; i < d; ++i)
      th[i] = model.space.lower[i] + u01(rng) * (model.space.upper[i] - model.space.lower[i]);
    return th;
  };
  auto ratio = [](double lhs, double rhs) {
    if (rhs > 0.0) return lhs / rhs;
    return lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  };

  RegularityReport r;
  r.min_sigma2 = std::numeric_limits<double>::infinity();
  std::vector<double> x(q), xp(q);
  Vec g1(d), g2(d), g3(d);
  for (int p = 0; p < n_probe; ++p) {
    for (int k = 0; k < q; ++k) {
      x[k] = ux(rng);
      xp[k] = (p % 2 == 0) ? x[k] + unit(rng) : ux(rng);
    }
    const State sx(x), sxp(xp);
    const Vec th = draw_theta(), thp = draw_theta();
    const SieveFunction h = detail::random_sieve(sd, rng);
    const SieveFunction hp = detail::random_sieve(sd, rng);
    const double lam = model.drift.envelope(sx);

    double dx = 0.0;
    for (int k = 0; k < q; ++k) dx += (x[k] - xp[k]) * (x[k] - xp[k]);
    dx = std::sqrt(dx);

    const double s = model.drift.s(sx, th);
    model.drift.s_dot(sx, th, g1);
    model.drift.s_dot(sx, thp, g2);
    model.drift.s_dot(sxp, th, g3);
    r.s_envelope = std::max(r.s_envelope, ratio(std::abs(s), lam));
    r.sdot_envelope = std::max(r.sdot_envelope, ratio(g1.norm(), lam));
    r.sdot_theta_lipschitz = std::max(r.sdot_theta_lipschitz, ratio((g1 - g2).norm(), lam * (th - thp).norm()));
    r.s_state_lipschitz = std::max(r.s_state_lipschitz, ratio(std::abs(s - model.drift.s(sxp, th)), K * dx));
    r.sdot_state_lipschitz = std::max(r.sdot_state_lipschitz, ratio((g1 - g3).norm(), K * dx));

    const double s2 = model.diffusion.sigma2(sx, h);
    const double s2p = model.diffusion.sigma2(sx, hp);
    const double s2x = model.diffusion.sigma2(sxp, h);
    r.min_sigma2 = std::min({r.min_sigma2, s2, s2p, s2x});
    if (s2 < c || s2p < c || s2x < c)
      throw Error(ErrorKind::Ellipticity,
                  "check_regularity: sigma2 = " + std::to_string(std::min({s2, s2p, s2x})) +
                      " below the declared floor c = " + std::to_string(c));
    r.sigma2_state_lipschitz = std::max(r.sigma2_state_lipschitz, ratio(std::abs(s2 - s2x), K * dx));
    r.sigma2_h_lipschitz = std::max(r.sigma2_h_lipschitz, ratio(std::abs(s2 - s2p), lam * sup_metric(h, hp)));
  }

  // Linearization remainder along a fixed random direction.
  Vec dir = draw_theta() - model.theta0();
  if (dir.norm() == 0.0) dir = Vec::Ones(d);
  dir /= dir.norm();
  Vec g0(d);
  for (double t : {1e-1, 1e-2, 1e-3}) {
    const Vec th = model.theta0() + t * dir;
    double worst = 0.0;
    for (int p = 0; p < n_probe; ++p) {
      for (int k = 0; k < q; ++k) x[k] = ux(rng);
      const State sx(x);
      model.drift.s_dot(sx, model.theta0(), g0);
      const double rem = model.drift.s(sx, th) - model.drift.s(sx, model.theta0()) - g0.dot(th - model.theta0());
      worst = std::max(worst, std::abs(rem) / (model.drift.envelope(sx) * t));
    }
    r.linearization_remainder.push_back(worst);
  }

  constexpr double slack = 1.0 + 1e-9;
  auto flag = [&](double v, const char* what) {
    if (v > slack) r.violations.emplace_back(std::string(what) + " ratio " + std::to_string(v));
  };
  flag(r.s_envelope, "|S| <= Lambda");
  flag(r.sdot_envelope, "|Sdot| <= Lambda");
  flag(r.sdot_theta_lipschitz, "Sdot theta-Lipschitz");
  flag(r.s_state_lipschitz, "S state-Lipschitz");
  flag(r.sdot_state_lipschitz, "Sdot state-Lipschitz");
  flag(r.sigma2_state_lipschitz, "sigma2 state-Lipschitz");
  flag(r.sigma2_h_lipschitz, "sigma2 h-Lipschitz");
  const auto& lr = r.linearization_remainder;
  if (lr.back() > 1e-12 && !(lr[2] < lr[1] && lr[1] < lr[0]))
    r.violations.emplace_back("linearization remainder does not vanish");
  return r;
}

}  // namespace zest
