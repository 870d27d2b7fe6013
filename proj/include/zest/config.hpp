#pragma once

// Campaign configuration: one JSON document with a section per module.
// Unknown keys are rejected so a typo never silently falls back to a default.

#include "zest/model.hpp"
#include "zest/series_lab.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace zest {

enum class Estimator { FullNewton, OneStep };
enum class Oracle { None, H0, PsiTilde };

inline const char* to_string(ModelKind k) { return k == ModelKind::Diffusion ? "diffusion" : "series"; }
inline const char* to_string(Estimator e) { return e == Estimator::FullNewton ? "full_newton" : "one_step"; }
inline const char* to_string(Oracle o) {
  switch (o) {
    case Oracle::None: return "none";
    case Oracle::H0: return "h0";
    case Oracle::PsiTilde: return "psitilde";
  }
  return "?";
}
inline const char* to_string(NoiseKind k) { return k == NoiseKind::Gauss ? "gauss" : "martingale"; }

inline ModelKind parse_mode(const std::string& s) {
  if (s == "diffusion") return ModelKind::Diffusion;
  if (s == "series") return ModelKind::Series;
  throw Error(ErrorKind::Config, "mode must be 'diffusion' or 'series', got '" + s + "'");
}
inline Estimator parse_estimator(const std::string& s) {
  if (s == "full_newton") return Estimator::FullNewton;
  if (s == "one_step") return Estimator::OneStep;
  throw Error(ErrorKind::Config, "estimator must be 'full_newton' or 'one_step', got '" + s + "'");
}
inline Oracle parse_oracle(const std::string& s) {
  if (s == "none") return Oracle::None;
  if (s == "h0") return Oracle::H0;
  if (s == "psitilde") return Oracle::PsiTilde;
  throw Error(ErrorKind::Config, "oracle must be 'none', 'h0' or 'psitilde', got '" + s + "'");
}
inline NoiseKind parse_noise(const std::string& s) {
  if (s == "gauss") return NoiseKind::Gauss;
  if (s == "martingale") return NoiseKind::Martingale;
  throw Error(ErrorKind::Config, "noise must be 'gauss' or 'martingale', got '" + s + "'");
}

struct CampaignConfig {
  // [campaign]
  std::string model;
  ModelKind mode = ModelKind::Diffusion;
  std::vector<int> n_schedule;
  int reps = 0;
  std::uint64_t base_seed = 1;
  Estimator estimator = Estimator::FullNewton;
  Oracle oracle = Oracle::None;
  double max_exclusion_fraction = 0.05;
  std::optional<std::vector<double>> theta0;
  // [sde]
  double gamma = 0.4;
  int substeps = 20;
  double burn_in_time = 50.0;
  // [series]
  NoiseKind noise = NoiseKind::Gauss;
  int series_burn_in = 500;
  int oracle_length = 1000000;
  // [sieve]
  int sieve_iters = 500;
  double roughness_coef = 2.0;
  // [solver]
  int max_iter = 50;
  int grid_per_dim = 21;
  // [quadrature]
  double quad_lo = -8.0;
  double quad_hi = 8.0;
  int quad_points = 4001;

  ModelSpec build_model() const {
    ModelOptions opt;
    if (theta0) opt.theta0 = Eigen::Map<const Vec>(theta0->data(), static_cast<Eigen::Index>(theta0->size()));
    return make_model(model, opt);
  }

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
    if (model.empty()) fail("campaign.model must be set");
    const ModelSpec m = build_model();
    if (m.kind != mode)
      fail("campaign.mode '" + std::string(to_string(mode)) + "' does not match model '" + model + "' (a " +
           to_string(m.kind) + " model)");
    if (n_schedule.empty()) fail("campaign.n_schedule must be non-empty");
    for (std::size_t i = 0; i < n_schedule.size(); ++i) {
      if (n_schedule[i] < 2) fail("campaign.n_schedule entries must be >= 2");
      if (i && n_schedule[i] <= n_schedule[i - 1]) fail("campaign.n_schedule must be strictly increasing");
    }
    if (reps < 2) fail("campaign.reps must be >= 2");
    if (!(max_exclusion_fraction >= 0.0 && max_exclusion_fraction < 1.0))
      fail("campaign.max_exclusion_fraction must lie in [0, 1)");
    if (!(gamma > 0.0 && gamma < 0.5)) fail("sde.gamma must lie in (0, 1/2)");
    if (substeps < 1) fail("sde.substeps must be >= 1");
    if (!(burn_in_time >= 0.0)) fail("sde.burn_in must be >= 0");
    if (series_burn_in < 0) fail("series.burn_in must be >= 0");
    if (oracle_length < 1000) fail("series.oracle_length must be >= 1000");
    if (sieve_iters < 1) fail("sieve.iters must be >= 1");
    if (!(roughness_coef >= 0.0)) fail("sieve.roughness_coef must be >= 0");
    if (max_iter < 1) fail("solver.max_iter must be >= 1");
    if (grid_per_dim < 2) fail("solver.grid_per_dim must be >= 2");
    if (!(quad_lo < quad_hi) || quad_points < 3) fail("quadrature grid must satisfy lo < hi and points >= 3");
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::string& section, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw Error(ErrorKind::Config, "section [" + section + "] must be an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw Error(ErrorKind::Config, "unknown key '" + k + "' in [" + section + "]");
}

template <typename T>
void read_opt(const nlohmann::json& obj, const std::string& section, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::Config, "key '" + std::string(key) + "' in [" + section + "] has the wrong type");
  }
}

template <typename T>
void read_req(const nlohmann::json& obj, const std::string& section, const char* key, T& out) {
  if (!obj.contains(key))
    throw Error(ErrorKind::Config, "missing required key '" + std::string(key) + "' in [" + section + "]");
  read_opt(obj, section, key, out);
}

}  // namespace detail

inline CampaignConfig parse_campaign_config(const nlohmann::json& j) {
  using detail::read_opt;
  using detail::read_req;
  detail::check_keys(j, "root", {"campaign", "sde", "series", "sieve", "solver", "quadrature"});
  if (!j.contains("campaign")) throw Error(ErrorKind::Config, "missing required section [campaign]");
  CampaignConfig c;
  const auto& cj = j.at("campaign");
  detail::check_keys(cj, "campaign",
                     {"model", "mode", "n_schedule", "reps", "base_seed", "estimator", "oracle",
                      "max_exclusion_fraction", "theta0"});
  read_req(cj, "campaign", "model", c.model);
  read_req(cj, "campaign", "n_schedule", c.n_schedule);
  read_req(cj, "campaign", "reps", c.reps);
  std::string s;
  if (cj.contains("mode")) {
    read_opt(cj, "campaign", "mode", s);
    c.mode = parse_mode(s);
  } else {
    c.mode = make_model(c.model).kind;
  }
  read_opt(cj, "campaign", "base_seed", c.base_seed);
  if (cj.contains("estimator")) {
    read_opt(cj, "campaign", "estimator", s);
    c.estimator = parse_estimator(s);
  }
  if (cj.contains("oracle")) {
    read_opt(cj, "campaign", "oracle", s);
    c.oracle = parse_oracle(s);
  }
  read_opt(cj, "campaign", "max_exclusion_fraction", c.max_exclusion_fraction);
  if (cj.contains("theta0")) {
    std::vector<double> t;
    read_opt(cj, "campaign", "theta0", t);
    c.theta0 = t;
  }
  if (j.contains("sde")) {
    const auto& sj = j.at("sde");
    detail::check_keys(sj, "sde", {"gamma", "substeps", "burn_in"});
    read_opt(sj, "sde", "gamma", c.gamma);
    read_opt(sj, "sde", "substeps", c.substeps);
    read_opt(sj, "sde", "burn_in", c.burn_in_time);
  }
  if (j.contains("series")) {
    const auto& sj = j.at("series");
    detail::check_keys(sj, "series", {"noise", "burn_in", "oracle_length"});
    if (sj.contains("noise")) {
      read_opt(sj, "series", "noise", s);
      c.noise = parse_noise(s);
    }
    read_opt(sj, "series", "burn_in", c.series_burn_in);
    read_opt(sj, "series", "oracle_length", c.oracle_length);
  }
  if (j.contains("sieve")) {
    const auto& sj = j.at("sieve");
    detail::check_keys(sj, "sieve", {"iters", "roughness_coef"});
    read_opt(sj, "sieve", "iters", c.sieve_iters);
    read_opt(sj, "sieve", "roughness_coef", c.roughness_coef);
  }
  if (j.contains("solver")) {
    const auto& sj = j.at("solver");
    detail::check_keys(sj, "solver", {"max_iter", "grid_per_dim"});
    read_opt(sj, "solver", "max_iter", c.max_iter);
    read_opt(sj, "solver", "grid_per_dim", c.grid_per_dim);
  }
  if (j.contains("quadrature")) {
    const auto& sj = j.at("quadrature");
    detail::check_keys(sj, "quadrature", {"lo", "hi", "points"});
    read_opt(sj, "quadrature", "lo", c.quad_lo);
    read_opt(sj, "quadrature", "hi", c.quad_hi);
    read_opt(sj, "quadrature", "points", c.quad_points);
  }
  c.validate();
  return c;
}

inline CampaignConfig load_campaign_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Config, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Config, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_campaign_config(j);
}

/// The fully resolved configuration, every default filled in.
inline nlohmann::json to_json(const CampaignConfig& c) {
  nlohmann::json j;
  j["campaign"] = {{"model", c.model},
                   {"mode", to_string(c.mode)},
                   {"n_schedule", c.n_schedule},
                   {"reps", c.reps},
                   {"base_seed", c.base_seed},
                   {"estimator", to_string(c.estimator)},
                   {"oracle", to_string(c.oracle)},
                   {"max_exclusion_fraction", c.max_exclusion_fraction}};
  const ModelSpec m = c.build_model();
  j["campaign"]["theta0"] = std::vector<double>(m.theta0().data(), m.theta0().data() + m.dim());
  j["sde"] = {{"gamma", c.gamma}, {"substeps", c.substeps}, {"burn_in", c.burn_in_time}};
  j["series"] = {{"noise", to_string(c.noise)}, {"burn_in", c.series_burn_in}, {"oracle_length", c.oracle_length}};
  j["sieve"] = {{"iters", c.sieve_iters}, {"roughness_coef", c.roughness_coef}};
  j["solver"] = {{"max_iter", c.max_iter}, {"grid_per_dim", c.grid_per_dim}};
  j["quadrature"] = {{"lo", c.quad_lo}, {"hi", c.quad_hi}, {"points", c.quad_points}};
  return j;
}

}  // namespace zest
