// zest: campaign runner, single-series fitter, sieve entropy report and
// simulator front end.

#include "zest/zest.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitValidation = 2;
constexpr int kExitExclusions = 3;
constexpr int kExitSolver = 4;

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("ZEST_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring ZEST_THREADS='" << env << "'\n";
  }
  return 1;
}

zest::SieveDescriptor load_sieve(const std::string& path, const zest::SieveDescriptor& fallback) {
  if (path.empty()) return fallback;
  std::ifstream is(path);
  if (!is) throw zest::Error(zest::ErrorKind::Config, "cannot open sieve config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw zest::Error(zest::ErrorKind::Config, "sieve config '" + path + "' is not valid JSON: " + e.what());
  }
  if (j.contains("sieve")) j = j.at("sieve");
  try {
    return j.get<zest::SieveDescriptor>();
  } catch (const nlohmann::json::exception& e) {
    throw zest::Error(zest::ErrorKind::Config, std::string("sieve config: ") + e.what());
  }
}

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// ---------------------------------------------------------------------------

struct CampaignArgs {
  std::string config;
  std::string out;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string oracle;
};

void print_summary(const zest::MCReport& r) {
  std::printf("%8s %8s %6s %12s %10s %10s %10s %10s %10s\n", "n", "r_n", "kept", "mean_bias", "var/I^-1",
              "KS", "KS_crit", "cover95", "med_dH");
  for (const auto& nr : r.per_n) {
    for (Eigen::Index k = 0; k < nr.info.rows(); ++k) {
      const double ratio = nr.emp_cov(k, k) / nr.info_inv(k, k);
      const double ks = k < static_cast<Eigen::Index>(nr.normality.ks.size()) ? nr.normality.ks[k] : 0.0;
      const double cov = k < static_cast<Eigen::Index>(nr.normality.coverage.size()) ? nr.normality.coverage[k] : 0.0;
      std::printf("%8d %8.3g %6d %12.4g %10.4g %10.4g %10.4g %10.4g %10.4g\n", nr.n, nr.r_n, nr.recorded,
                  nr.mean_bias[k], ratio, ks, nr.normality.ks_critical, cov, nr.median_dh);
    }
    std::printf("         runtime %.2fs, sandwich median %s, excluded %d\n", nr.runtime_seconds,
                fmt(nr.sandwich_median).c_str(), nr.excluded);
  }
}

int cmd_campaign(const CampaignArgs& a) {
  zest::CampaignConfig cfg;
  try {
    std::ifstream is(a.config);
    if (!is) throw zest::Error(zest::ErrorKind::Config, "cannot open config '" + a.config + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
      throw zest::Error(zest::ErrorKind::Config, "config '" + a.config + "' is not valid JSON: " + e.what());
    }
    if (j.is_object() && j.contains("campaign") && j["campaign"].is_object()) {
      if (a.seed) j["campaign"]["base_seed"] = *a.seed;
      if (!a.mode.empty()) j["campaign"]["mode"] = a.mode;
      if (!a.oracle.empty()) j["campaign"]["oracle"] = a.oracle;
    }
    cfg = zest::parse_campaign_config(j);
  } catch (const zest::Error& e) {
    std::cerr << "error: invalid configuration: " << e.what() << '\n';
    return kExitValidation;
  }
  const int threads = resolve_threads(a.threads);
  std::cout << "campaign: model " << cfg.model << ", mode " << zest::to_string(cfg.mode) << ", reps " << cfg.reps
            << ", threads " << threads << '\n';
  zest::MCReport rep;
  try {
    rep = zest::run_campaign(cfg, threads, [](const std::string& s) { std::cout << "  " << s << '\n'; });
    zest::write_campaign_outputs(rep, a.out);
  } catch (const zest::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == zest::ErrorKind::Config ? kExitValidation : kExitFail;
  }
  print_summary(rep);
  std::cout << "outputs written to " << a.out << '\n';
  if (rep.exclusion_breach) {
    std::cerr << "error: excluded replications exceed " << cfg.max_exclusion_fraction * 100.0
              << "% of reps for at least one n\n";
    return kExitExclusions;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string series;
  std::string model;
  std::string sieve;
  std::string out = ".";
};

int cmd_fit(const FitArgs& a) {
  zest::ModelSpec m;
  zest::SieveDescriptor desc;
  std::vector<double> values;
  try {
    m = zest::make_model(a.model);
    if (m.kind != zest::ModelKind::Series)
      throw zest::Error(zest::ErrorKind::Config, "fit needs a series model, '" + a.model + "' is a diffusion");
    desc = load_sieve(a.sieve, m.sieve());
    values = zest::csv::read_column(a.series);
  } catch (const zest::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  if (static_cast<int>(values.size()) < m.q + 2) {
    std::cerr << "error: series too short (" << values.size() << " values)\n";
    return kExitValidation;
  }
  m.diffusion.h0 = zest::SieveFunction::constant(desc, std::clamp(1.0, desc.v_lo, desc.v_hi));
  m.diffusion.c_lower = desc.v_lo;
  const zest::SeriesRecord s = zest::series_from_values(values, m.q);
  const double n = s.n();
  std::filesystem::create_directories(a.out);

  if (zest::stats::variance(values) == 0.0) {
    std::cerr << "error: constant series, the information matrix is singular\n";
    return kExitSolver;
  }
  zest::SeriesEstimate e;
  try {
    e = zest::estimate_series(m, s);
  } catch (const zest::NonConvergence& ex) {
    const auto path = std::filesystem::path(a.out) / "fit_trace.csv";
    std::ofstream os(path, std::ios::binary);
    zest::write_trace_csv(os, ex.trace());
    std::cerr << "error: " << ex.what() << " (trace in " << path.string() << ")\n";
    return kExitSolver;
  } catch (const zest::Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return ex.kind() == zest::ErrorKind::SingularMatrix ? kExitSolver : kExitFail;
  }
  const zest::InfoReport info = zest::fisher_info_ts(m, s, e.theta_hat, e.h_hat);
  if (info.singular) {
    std::cerr << "error: plug-in information is singular (condition " << info.condition << ")\n";
    return kExitSolver;
  }
  const zest::Mat inv = info.info.inverse();
  std::vector<double> se(m.dim());
  for (int k = 0; k < m.dim(); ++k) se[k] = std::sqrt(inv(k, k) / n);

  auto vec = [](const zest::Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["config"] = {{"series", a.series}, {"model", a.model}, {"sieve", desc}, {"n", s.n()}, {"q", s.q}};
  j["theta_ls"] = vec(e.ls.theta);
  j["ls_on_boundary"] = e.ls.on_boundary;
  j["theta_hat"] = vec(e.theta_hat);
  j["std_errors"] = se;
  j["h_hat"] = e.h_hat;
  j["b_n"] = e.h_fit ? e.h_fit->objective : 0.0;
  j["psi_norm"] = e.psi_norm;
  j["information"] = zest::detail::mat_json(info.info);
  j["information_condition"] = info.condition;
  const auto path = std::filesystem::path(a.out) / "estimation_result.json";
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << j.dump(2) << '\n';

  if (e.ls.on_boundary) std::cerr << "warning: least-squares minimizer is on the boundary of the parameter box\n";
  for (int k = 0; k < m.dim(); ++k)
    std::printf("theta_%d = %.6f  (se %.6f)\n", k + 1, e.theta_hat[k], se[k]);
  std::cout << "result written to " << path.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_entropy(const std::string& sieve_path) {
  zest::SieveDescriptor d;
  try {
    d = load_sieve(sieve_path, zest::SieveDescriptor{});
  } catch (const zest::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  constexpr int kPoints = 48;
  constexpr double kEpsMin = 1e-3;
  auto geometric = [](int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) g[i] = kEpsMin * std::pow(1.0 / kEpsMin, static_cast<double>(i) / (points - 1));
    return g;
  };
  const std::vector<double> grid = geometric(kPoints);
  std::printf("%12s %22s %14s %s\n", "eps", "N(eps)", "log N", "mode");
  bool finite = true, overflow = false;
  std::vector<double> lx, ly;
  for (double eps : grid) {
    const zest::CoveringCount c = zest::covering_number(d, eps);
    finite = finite && std::isfinite(c.log_count);
    overflow = overflow || c.overflow;
    const std::string count = c.overflow ? "-" : std::to_string(c.count);
    std::printf("%12.6g %22s %14.6g %s\n", eps, count.c_str(), c.log_count, c.overflow ? "log-count" : "exact");
    if (c.log_count > 0.0) {
      lx.push_back(std::log(1.0 / eps));
      ly.push_back(std::log(c.log_count));
    }
  }
  const double integral = zest::entropy_integral(d, grid);
  const double refined = zest::entropy_integral(d, geometric(2 * kPoints - 1));
  const double change = refined > 0.0 ? std::abs(integral - refined) / refined : 0.0;
  std::printf("entropy integral over [%g, 1]: %.6g (refined grid %.6g, change %.3g%%)\n", kEpsMin, integral, refined,
              100.0 * change);
  if (lx.size() >= 2) {
    const auto [slope, icpt] = zest::fit_line(lx, ly);
    (void)icpt;
    std::printf("fitted exponent of log N in 1/eps: %.4f\n", slope);
  }
  if (overflow) std::printf("counts above 2^64 were evaluated in log-count mode\n");
  const bool pass = finite && std::isfinite(integral) && change <= 0.05;
  std::printf("%s\n", pass ? "PASS" : "FAIL");
  return pass ? kExitOk : kExitFail;
}

// ---------------------------------------------------------------------------

struct SimArgs {
  std::string model;
  int n = 1000;
  std::uint64_t seed = 1;
  std::string out;
  std::string noise = "gauss";
  double gamma = 0.4;
  int substeps = 20;
};

int cmd_simulate(const SimArgs& a) {
  try {
    const zest::ModelSpec m = zest::make_model(a.model);
    std::ofstream os(a.out, std::ios::binary | std::ios::trunc);
    if (!os) throw zest::Error(zest::ErrorKind::Config, "cannot write '" + a.out + "'");
    if (m.kind == zest::ModelKind::Series) {
      zest::SeriesConfig sc;
      sc.q = m.q;
      sc.n = a.n;
      sc.noise = zest::parse_noise(a.noise);
      zest::write_series_csv(os, zest::simulate_series(m, sc, a.seed));
    } else {
      zest::SimOptions so;
      so.keep_fine = false;
      const auto p = zest::simulate_path(m, zest::GridSchedule{a.n, a.gamma}, a.substeps, 50.0, a.seed, so);
      zest::write_observations_csv(os, zest::observations(p));
    }
  } catch (const zest::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == zest::ErrorKind::Config || e.kind() == zest::ErrorKind::InvalidArgument ? kExitValidation
                                                                                                 : kExitFail;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiparametric Z-estimation for ergodic diffusions and nonlinear autoregressions"};
  app.require_subcommand(1);

  CampaignArgs ca;
  auto* campaign = app.add_subcommand("campaign", "run a Monte Carlo replication campaign");
  campaign->add_option("--config", ca.config, "campaign config (JSON)")->required();
  campaign->add_option("--out", ca.out, "output directory")->required();
  campaign->add_option("--threads", ca.threads, "worker threads (default: $ZEST_THREADS or 1)");
  campaign->add_option("--seed", ca.seed, "override campaign.base_seed");
  campaign->add_option("--mode", ca.mode, "override campaign.mode")->check(CLI::IsMember({"diffusion", "series"}));
  campaign->add_option("--oracle", ca.oracle, "override campaign.oracle")
      ->check(CLI::IsMember({"none", "h0", "psitilde"}));

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "fit a series model to a CSV column");
  fit->add_option("--series", fa.series, "CSV file, last column numeric, optional header")->required();
  fit->add_option("--model", fa.model, "registered series model")->required();
  fit->add_option("--sieve", fa.sieve, "sieve descriptor (JSON)");
  fit->add_option("--out", fa.out, "output directory");

  std::string sieve_path;
  auto* entropy = app.add_subcommand("entropy", "covering numbers and entropy integral of a sieve");
  entropy->add_option("--sieve", sieve_path, "sieve descriptor (JSON); default sieve when omitted");

  SimArgs sa;
  auto* simulate = app.add_subcommand("simulate", "write one simulated series or observed path as CSV");
  simulate->add_option("--model", sa.model, "registered model")->required();
  simulate->add_option("--n", sa.n, "number of observations");
  simulate->add_option("--seed", sa.seed, "generator seed");
  simulate->add_option("--out", sa.out, "output CSV")->required();
  simulate->add_option("--noise", sa.noise, "series noise")->check(CLI::IsMember({"gauss", "martingale"}));
  simulate->add_option("--gamma", sa.gamma, "diffusion grid exponent");
  simulate->add_option("--substeps", sa.substeps, "Euler steps per observation interval");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  if (*campaign) return cmd_campaign(ca);
  if (*fit) return cmd_fit(fa);
  if (*entropy) return cmd_entropy(sieve_path);
  if (*simulate) return cmd_simulate(sa);
  return kExitValidation;
}
