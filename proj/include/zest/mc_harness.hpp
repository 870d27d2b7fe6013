#pragma once

// Replication campaigns over an n-schedule: simulate, estimate h then theta,
// collect r_n (theta_hat - theta0) and aggregate normality, covariance and
// consistency diagnostics. Also the uniform LLN decay diagnostic.

#include "zest/config.hpp"
#include "zest/diffusion_fit.hpp"
#include "zest/series_fit.hpp"
#include "zest/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace zest {

// ---------------------------------------------------------------------------
// Normality suite

struct NormalityStats {
  std::vector<double> ks;
  std::vector<double> skewness;
  std::vector<double> excess_kurtosis;
  std::vector<double> coverage;  // fraction of |z| <= 1.959964
  double ks_critical = 0.0;
  bool insufficient = false;  // fewer than 100 draws
  bool degenerate = false;    // some component has zero spread
};

/// Studentizes each column of `draws` by the oracle standard deviation
/// sqrt((I^{-1})_kk) and compares it with N(0, 1).
inline NormalityStats normality_suite(const Mat& draws, const Mat& info_oracle) {
  NormalityStats s;
  const Eigen::Index r = draws.rows(), d = draws.cols();
  s.insufficient = r < 100;
  s.ks_critical = r > 0 ? stats::ks_critical_5pct(static_cast<std::size_t>(r)) : 0.0;
  Eigen::FullPivLU<Mat> lu(info_oracle);
  if (lu.rank() < info_oracle.cols()) throw Error(ErrorKind::SingularMatrix, "normality_suite: singular oracle");
  const Mat inv = lu.inverse();
  const double zcrit = stats::normal_quantile(0.975);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double sd = std::sqrt(inv(k, k));
    std::vector<double> z(static_cast<std::size_t>(r));
    for (Eigen::Index i = 0; i < r; ++i) z[i] = draws(i, k) / sd;
    if (r < 2 || stats::variance(z) <= 1e-20 * (1.0 + stats::mean(z) * stats::mean(z))) s.degenerate = true;
    s.ks.push_back(r ? stats::ks_normal(z) : 1.0);
    s.skewness.push_back(stats::skewness(z));
    s.excess_kurtosis.push_back(stats::excess_kurtosis(z));
    double inside = 0.0;
    for (double v : z) inside += std::abs(v) <= zcrit ? 1.0 : 0.0;
    s.coverage.push_back(r ? inside / static_cast<double>(r) : 0.0);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Campaigns

struct RepRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // "ok" or the failure kind
  std::string message;
  Vec theta_hat;
  Vec scaled;  // r_n (theta_hat - theta0)
  double d_h = 0.0;
  double psi_norm = 0.0;
  Vec psi_truth;   // Psi_n(theta0, h0)
  Vec martingale;  // r_n (Psi_n - Psi_tilde_n)(theta0, h0), psitilde oracle only

  bool ok() const { return status == "ok"; }
};

struct NReport {
  int n = 0;
  double r_n = 0.0;
  int recorded = 0;
  int excluded = 0;
  std::map<std::string, int> exclusion_reasons;
  std::vector<RepRecord> reps;
  Mat draws;  // recorded x d
  Vec mean_bias;
  Mat emp_cov;
  Mat info;
  Mat info_inv;
  double cov_error = 0.0;  // scaled_matrix_error(emp_cov, info_inv)
  NormalityStats normality;
  double median_dh = 0.0;
  double sandwich_median = 0.0;
  bool has_martingale = false;
  Mat martingale_cov;
  double martingale_error = 0.0;  // scaled_matrix_error(martingale_cov, info)
  double runtime_seconds = 0.0;   // not written to files
};

struct MCReport {
  CampaignConfig config;
  std::vector<NReport> per_n;
  bool exclusion_breach = false;
  int dh_inversions = 0;  // increases of median d_H along the schedule

  bool dh_monotone() const { return dh_inversions <= 1; }
};

/// Oracle information: quadrature against the stationary density (diffusion)
/// or an ergodic average over one long series (series).
inline Mat campaign_oracle_info(const CampaignConfig& cfg, const ModelSpec& m) {
  if (cfg.mode == ModelKind::Diffusion) {
    const std::vector<double> grid = linspace(cfg.quad_lo, cfg.quad_hi, cfg.quad_points);
    return fisher_info(m, m.theta0(), m.h0(), grid).info;
  }
  SeriesConfig sc;
  sc.q = m.q;
  sc.n = cfg.oracle_length;
  sc.noise = cfg.noise;
  sc.burn_in = cfg.series_burn_in;
  const SeriesRecord s = simulate_series(m, sc, derive_seed(cfg.base_seed, 0xFFFFFFFFull, 0));
  return fisher_info_ts(m, s, m.theta0(), m.h0()).info;
}

inline double campaign_rate(const CampaignConfig& cfg, int n) {
  if (cfg.mode == ModelKind::Diffusion) return std::sqrt(GridSchedule{n, cfg.gamma}.horizon());
  return std::sqrt(static_cast<double>(n));
}

namespace detail {

inline RepRecord run_replication(const CampaignConfig& cfg, const ModelSpec& m, int n, int rep) {
  RepRecord r;
  r.rep = rep;
  r.seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep));
  const double r_n = campaign_rate(cfg, n);
  try {
    if (cfg.mode == ModelKind::Diffusion) {
      SimOptions so;
      so.keep_fine = cfg.oracle == Oracle::PsiTilde;
      const PathRecord path = simulate_path(m, GridSchedule{n, cfg.gamma}, cfg.substeps, cfg.burn_in_time, r.seed, so);
      const ObservationSet obs = observations(path);
      DiffusionFitOptions fo;
      fo.sieve_iters = cfg.sieve_iters;
      fo.roughness_coef = cfg.roughness_coef;
      fo.max_iter = cfg.max_iter;
      fo.grid_per_dim = cfg.grid_per_dim;
      fo.one_step = cfg.estimator == Estimator::OneStep;
      if (cfg.oracle == Oracle::H0) fo.fixed_h = m.h0();
      const DiffusionEstimate e = estimate_diffusion(m, obs, fo);
      r.theta_hat = e.theta_hat;
      r.d_h = sup_metric(e.h_hat, m.h0());
      r.psi_norm = e.psi_norm;
      r.psi_truth = psi_n(m, m.theta0(), m.h0(), obs);
      if (cfg.oracle == Oracle::PsiTilde)
        r.martingale = r_n * (r.psi_truth - psi_tilde_n(m, m.theta0(), m.h0(), path));
    } else {
      SeriesConfig sc;
      sc.q = m.q;
      sc.n = n;
      sc.noise = cfg.noise;
      sc.burn_in = cfg.series_burn_in;
      const SeriesRecord s = simulate_series(m, sc, r.seed);
      SeriesFitOptions fo;
      fo.ls.grid_per_dim = cfg.grid_per_dim;
      fo.bn.iters = cfg.sieve_iters;
      fo.bn.roughness_coef = cfg.roughness_coef;
      fo.max_iter = cfg.max_iter;
      fo.one_step = cfg.estimator == Estimator::OneStep;
      if (cfg.oracle == Oracle::H0) fo.fixed_h = m.h0();
      const SeriesEstimate e = estimate_series(m, s, fo);
      r.theta_hat = e.theta_hat;
      r.d_h = sup_metric(e.h_hat, m.h0());
      r.psi_norm = e.psi_norm;
      r.psi_truth = psi_n_ts(m, m.theta0(), m.h0(), s);
      if (cfg.oracle == Oracle::PsiTilde)
        r.martingale = r_n * (r.psi_truth - psi_tilde_ts(m, m.theta0(), m.h0(), s));
    }
    r.scaled = r_n * (r.theta_hat - m.theta0());
    if (!r.scaled.allFinite()) throw Error(ErrorKind::NonFinite, "non-finite estimate");
  } catch (const Error& ex) {
    r.status = to_string(ex.kind());
    r.message = ex.what();
  } catch (const std::exception& ex) {
    r.status = "error";
    r.message = ex.what();
  }
  return r;
}

/// Runs job(i) for i in [0, count) on `threads` workers; results are written
/// by index so the outcome never depends on scheduling.
template <typename Job>
void parallel_for(int count, int threads, Job&& job) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::jthread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) job(i);
    });
}

}  // namespace detail

inline MCReport run_campaign(const CampaignConfig& cfg, int threads = 1,
                             const std::function<void(const std::string&)>& progress = {}) {
  cfg.validate();
  const ModelSpec m = cfg.build_model();
  const int d = m.dim();
  const Mat info = campaign_oracle_info(cfg, m);
  const InfoReport ir = info_report(info);
  if (ir.singular) throw Error(ErrorKind::SingularMatrix, "run_campaign: oracle information is singular");
  const Mat info_inv = info.inverse();

  MCReport out;
  out.config = cfg;
  for (int n : cfg.n_schedule) {
    const auto t0 = std::chrono::steady_clock::now();
    NReport nr;
    nr.n = n;
    nr.r_n = campaign_rate(cfg, n);
    nr.reps.resize(cfg.reps);
    detail::parallel_for(cfg.reps, threads, [&](int k) { nr.reps[k] = detail::run_replication(cfg, m, n, k); });

    std::vector<const RepRecord*> good;
    for (const RepRecord& r : nr.reps) {
      if (r.ok()) {
        good.push_back(&r);
      } else {
        ++nr.excluded;
        ++nr.exclusion_reasons[r.status];
      }
    }
    nr.recorded = static_cast<int>(good.size());
    if (nr.excluded > cfg.max_exclusion_fraction * cfg.reps) out.exclusion_breach = true;

    nr.draws = Mat(nr.recorded, d);
    std::vector<double> dh;
    std::vector<SandwichInput> sw;
    for (int i = 0; i < nr.recorded; ++i) {
      nr.draws.row(i) = good[i]->scaled.transpose();
      dh.push_back(good[i]->d_h);
      sw.push_back({good[i]->theta_hat, good[i]->psi_truth});
    }
    nr.mean_bias = nr.recorded ? Vec(nr.draws.colwise().mean().transpose() / nr.r_n) : Vec::Zero(d);
    nr.emp_cov = stats::covariance(nr.draws);
    nr.info = info;
    nr.info_inv = info_inv;
    nr.cov_error = stats::scaled_matrix_error(nr.emp_cov, info_inv);
    if (nr.recorded > 0) nr.normality = normality_suite(nr.draws, info);
    nr.median_dh = stats::median(dh);
    nr.sandwich_median = sandwich_check(sw, m.theta0(), info, nr.r_n).median;
    if (cfg.oracle == Oracle::PsiTilde && nr.recorded > 1) {
      nr.has_martingale = true;
      Mat mg(nr.recorded, d);
      for (int i = 0; i < nr.recorded; ++i) mg.row(i) = good[i]->martingale.transpose();
      nr.martingale_cov = stats::covariance(mg);
      nr.martingale_error = stats::scaled_matrix_error(nr.martingale_cov, info);
    }
    nr.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (progress)
      progress("n = " + std::to_string(n) + ": " + std::to_string(nr.recorded) + " recorded, " +
               std::to_string(nr.excluded) + " excluded");
    out.per_n.push_back(std::move(nr));
  }
  for (std::size_t i = 1; i < out.per_n.size(); ++i)
    if (out.per_n[i].median_dh > out.per_n[i - 1].median_dh) ++out.dh_inversions;
  return out;
}

// ---------------------------------------------------------------------------
// Report files

namespace detail {

inline nlohmann::json mat_json(const Mat& a) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(a.cols()));
    for (Eigen::Index k = 0; k < a.cols(); ++k) row[k] = a(i, k);
    j.push_back(row);
  }
  return j;
}

inline std::vector<double> vec_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace detail

inline nlohmann::json summary_json(const MCReport& r) {
  nlohmann::json j;
  j["config"] = to_json(r.config);
  j["exclusion_breach"] = r.exclusion_breach;
  j["dh_inversions"] = r.dh_inversions;
  j["dh_monotone"] = r.dh_monotone();
  nlohmann::json per = nlohmann::json::array();
  for (const NReport& nr : r.per_n) {
    nlohmann::json e;
    e["n"] = nr.n;
    e["r_n"] = nr.r_n;
    e["recorded"] = nr.recorded;
    e["excluded"] = nr.excluded;
    e["exclusion_reasons"] = nr.exclusion_reasons;
    e["mean_bias"] = detail::vec_std(nr.mean_bias);
    e["empirical_covariance"] = detail::mat_json(nr.emp_cov);
    e["oracle_information"] = detail::mat_json(nr.info);
    e["oracle_inverse_information"] = detail::mat_json(nr.info_inv);
    e["covariance_error"] = nr.cov_error;
    e["normality"] = {{"ks", nr.normality.ks},
                      {"ks_critical_5pct", nr.normality.ks_critical},
                      {"skewness", nr.normality.skewness},
                      {"excess_kurtosis", nr.normality.excess_kurtosis},
                      {"coverage_95", nr.normality.coverage},
                      {"insufficient", nr.normality.insufficient},
                      {"degenerate", nr.normality.degenerate}};
    e["median_dh"] = nr.median_dh;
    e["sandwich_median"] = nr.sandwich_median;
    if (nr.has_martingale) {
      e["martingale_covariance"] = detail::mat_json(nr.martingale_cov);
      e["martingale_error"] = nr.martingale_error;
    }
    per.push_back(e);
  }
  j["per_n"] = per;
  return j;
}

inline void write_draws_csv(std::ostream& os, const NReport& nr, int d) {
  std::vector<std::string> head{"rep", "seed"};
  for (int k = 0; k < d; ++k) head.push_back("theta_hat_" + std::to_string(k + 1));
  for (int k = 0; k < d; ++k) head.push_back("scaled_" + std::to_string(k + 1));
  head.insert(head.end(), {"d_h", "psi_norm", "status"});
  csv::write_row(os, head);
  for (const RepRecord& r : nr.reps) {
    std::vector<std::string> row{std::to_string(r.rep), std::to_string(r.seed)};
    for (int k = 0; k < d; ++k) row.push_back(r.ok() ? csv::num(r.theta_hat[k]) : "");
    for (int k = 0; k < d; ++k) row.push_back(r.ok() ? csv::num(r.scaled[k]) : "");
    row.push_back(r.ok() ? csv::num(r.d_h) : "");
    row.push_back(r.ok() ? csv::num(r.psi_norm) : "");
    row.push_back(r.status);
    csv::write_row(os, row);
  }
}

/// Normal QQ pairs of the studentized draws, one block per component.
inline void write_qq_csv(std::ostream& os, const NReport& nr) {
  csv::write_row(os, {"component", "normal_quantile", "studentized_draw"});
  const Eigen::Index r = nr.draws.rows();
  for (Eigen::Index k = 0; k < nr.draws.cols(); ++k) {
    std::vector<double> z(static_cast<std::size_t>(r));
    const double sd = std::sqrt(nr.info_inv(k, k));
    for (Eigen::Index i = 0; i < r; ++i) z[i] = nr.draws(i, k) / sd;
    std::sort(z.begin(), z.end());
    for (Eigen::Index i = 0; i < r; ++i)
      csv::write_row(os, {std::to_string(k + 1), csv::num(stats::normal_quantile((i + 0.5) / r)), csv::num(z[i])});
  }
}

inline void write_decay_csv(std::ostream& os, const MCReport& r) {
  csv::write_row(os, {"n", "r_n", "median_dh", "sandwich_median", "covariance_error"});
  for (const NReport& nr : r.per_n)
    csv::write_row(os, {std::to_string(nr.n), csv::num(nr.r_n), csv::num(nr.median_dh), csv::num(nr.sandwich_median),
                        csv::num(nr.cov_error)});
}

/// campaign_summary.json, draws_<n>.csv, plotdata_qq_<n>.csv, plotdata_decay.csv.
inline void write_campaign_outputs(const MCReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::InvalidArgument, "cannot write '" + (dir / name).string() + "'");
    return os;
  };
  {
    auto os = open("campaign_summary.json");
    os << summary_json(r).dump(2) << '\n';
  }
  const int d = r.per_n.empty() ? 0 : static_cast<int>(r.per_n.front().info.rows());
  for (const NReport& nr : r.per_n) {
    auto os = open("draws_" + std::to_string(nr.n) + ".csv");
    write_draws_csv(os, nr, d);
    auto qq = open("plotdata_qq_" + std::to_string(nr.n) + ".csv");
    write_qq_csv(qq, nr);
  }
  auto os = open("plotdata_decay.csv");
  write_decay_csv(os, r);
}

// ---------------------------------------------------------------------------
// Uniform LLN diagnostic

/// Matrix-valued integrand f(x; theta) with a named role.
struct UllnIntegrand {
  std::string name;
  std::function<Mat(double, const Vec&)> f;
};

/// Sdot Sdot' / sigma^2(x; h0).
inline UllnIntegrand information_integrand(const ModelSpec& m) {
  return {"information", [m](double x, const Vec& th) {
            const Vec g = m.s_dot(x, th);
            return Mat(g * g.transpose() / m.sigma2(x, m.h0()));
          }};
}

struct UllnConfig {
  std::vector<double> horizons;  // T (diffusion) or n (series), increasing
  int reps = 100;
  std::uint64_t seed = 1;
  int theta_points = 20;
  double spacing = 0.05;  // diffusion sampling interval of the time average
  double dt = 0.005;      // diffusion Euler step
  double burn_in = 50.0;  // time (diffusion) or steps (series)
  int oracle_length = 2000000;
  NoiseKind noise = NoiseKind::Gauss;
};

struct UllnReport {
  std::vector<double> horizons;
  std::vector<double> mean_sup_dev;
  std::vector<double> ratios;  // mean_sup_dev[i+1] / mean_sup_dev[i]
};

/// Points along the diagonal of the box (the whole interval when d = 1).
inline std::vector<Vec> ulln_theta_grid(const ParamSpace& box, int points) {
  std::vector<Vec> out;
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.5 : static_cast<double>(i) / (points - 1);
    out.push_back(box.lower + t * (box.upper - box.lower));
  }
  return out;
}

/// Mean over replications of sup_theta |time average of f - integral of f|,
/// the norm being Frobenius. The long-run value comes from the stationary
/// density (diffusion) or from one long series (series).
inline UllnReport ulln_diagnostic(const ModelSpec& m, const UllnIntegrand& f, const UllnConfig& cfg) {
  if (cfg.horizons.empty() || cfg.reps < 2)
    throw Error(ErrorKind::InvalidArgument, "ulln_diagnostic: need horizons and reps >= 2");
  const std::vector<Vec> grid = ulln_theta_grid(m.space, cfg.theta_points);
  auto average = [&](std::span<const double> xs, const Vec& th) {
    Mat acc = f.f(xs[0], th);
    for (std::size_t i = 1; i < xs.size(); ++i) acc += f.f(xs[i], th);
    return Mat(acc / static_cast<double>(xs.size()));
  };
  std::vector<Mat> truth;
  if (m.kind == ModelKind::Diffusion) {
    const Measure mu = true_stationary_measure(m);
    for (const Vec& th : grid) {
      Mat acc = Mat::Zero(f.f(0.0, th).rows(), f.f(0.0, th).cols());
      for (std::size_t i = 0; i < mu.x.size(); ++i) acc += mu.w[i] * f.f(mu.x[i], th);
      truth.push_back(acc);
    }
  } else {
    SeriesConfig sc;
    sc.q = m.q;
    sc.n = cfg.oracle_length;
    sc.noise = cfg.noise;
    sc.burn_in = static_cast<int>(cfg.burn_in);
    const SeriesRecord s = simulate_series(m, sc, derive_seed(cfg.seed, 0xFFFFFFFFull, 0));
    const std::vector<double> lags(s.values.begin(), s.values.end() - 1);
    for (const Vec& th : grid) truth.push_back(average(lags, th));
  }

  UllnReport rep;
  for (double hz : cfg.horizons) {
    double acc = 0.0;
    for (int k = 0; k < cfg.reps; ++k) {
      const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(std::llround(hz)), k);
      std::vector<double> xs;
      if (m.kind == ModelKind::Diffusion) {
        std::mt19937_64 rng(seed);
        xs = stationary_draws(m, static_cast<int>(std::llround(hz / cfg.spacing)), cfg.spacing, cfg.dt, cfg.burn_in,
                              rng);
      } else {
        SeriesConfig sc;
        sc.q = m.q;
        sc.n = static_cast<int>(std::llround(hz));
        sc.noise = cfg.noise;
        sc.burn_in = static_cast<int>(cfg.burn_in);
        const SeriesRecord s = simulate_series(m, sc, seed);
        xs.assign(s.values.begin(), s.values.end() - 1);
      }
      double sup = 0.0;
      for (std::size_t g = 0; g < grid.size(); ++g) sup = std::max(sup, (average(xs, grid[g]) - truth[g]).norm());
      acc += sup;
    }
    rep.horizons.push_back(hz);
    rep.mean_sup_dev.push_back(acc / cfg.reps);
  }
  for (std::size_t i = 1; i < rep.mean_sup_dev.size(); ++i)
    rep.ratios.push_back(rep.mean_sup_dev[i] / rep.mean_sup_dev[i - 1]);
  return rep;
}

}  // namespace zest
