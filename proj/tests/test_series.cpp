#include "zest/series_fit.hpp"
#include "zest/series_lab.hpp"
#include "zest/stats.hpp"

#include "test_models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace zest;

namespace {

SeriesRecord sim(const ModelSpec& m, int n, std::uint64_t seed, NoiseKind noise = NoiseKind::Gauss) {
  SeriesConfig c;
  c.q = m.q;
  c.n = n;
  c.noise = noise;
  return simulate_series(m, c, seed);
}

}  // namespace

TEST(SeriesLab, Ar1StationaryVariance) {
  const SeriesRecord s = sim(fixtures::ar1_const(0.5, 1.0), 100000, 1);
  EXPECT_EQ(s.n(), 100000);
  EXPECT_NEAR(stats::variance(s.values), 4.0 / 3.0, 0.03);
}

TEST(SeriesLab, ZeroNoiseDecays) {
  SeriesConfig c;
  c.n = 10;
  c.burn_in = 0;
  c.initial = {1.0};
  SeriesSimOptions o;
  o.zero_noise = true;
  const SeriesRecord s = simulate_series(fixtures::ar1_const(0.5, 1.0), c, 1, o);
  for (int i = 0; i <= 10; ++i) EXPECT_DOUBLE_EQ(s.x(i), std::pow(0.5, i));
}

TEST(SeriesLab, MartingaleNoiseMoments) {
  for (double prev : {-1.0, 2.0}) {
    const TwoPoint law = martingale_noise_law(prev);
    EXPECT_NEAR(law.p * law.a - (1 - law.p) * law.b, 0.0, 1e-15);
    EXPECT_NEAR(law.p * law.a * law.a + (1 - law.p) * law.b * law.b, 1.0, 1e-14);
    EXPECT_LE(law.fourth_moment(), kMartingaleL4);
  }
  const SeriesRecord s = sim(fixtures::ar1_const(0.5, 1.0), 200000, 2, NoiseKind::Martingale);
  // Conditional on the sign of the previous state, the noise is centred with unit variance.
  for (int sign : {-1, 1}) {
    std::vector<double> w;
    for (int i = 1; i <= s.n(); ++i)
      if ((s.x(i - 1) >= 0.0) == (sign > 0)) w.push_back(s.noise[i - 1]);
    const double se = std::sqrt(1.0 / w.size());
    EXPECT_NEAR(stats::mean(w), 0.0, 4.0 * se);
    EXPECT_NEAR(stats::variance(w), 1.0, 0.03);
    double m3 = 0.0;
    for (double v : w) m3 += v * v * v;
    EXPECT_NE(std::signbit(m3), sign > 0);  // skewed, so not Gaussian
  }
}

TEST(SeriesLab, DeterministicAndCsv) {
  const ModelSpec m = models::nl_ar();
  const SeriesRecord a = sim(m, 500, 9), b = sim(m, 500, 9);
  EXPECT_EQ(a.values, b.values);
  std::ostringstream os;
  write_series_csv(os, a);
  EXPECT_EQ(os.str().substr(0, 12), "index,value\n");
  EXPECT_THROW(series_from_values({1.0}), Error);
}

TEST(PsiTs, SingleTermArithmetic) {
  const ModelSpec m = fixtures::ar1_const(0.5, 1.0);
  const SeriesRecord s = series_from_values({1.0, 0.75});
  EXPECT_NEAR(psi_n_ts(m, Vec::Constant(1, 0.5), m.h0(), s)[0], 0.25, 1e-15);
}

TEST(PsiTs, CompensatorVanishesAtTruth) {
  const ModelSpec m = models::nl_ar();
  const SeriesRecord s = sim(m, 1000, 4);
  EXPECT_EQ(psi_tilde_ts(m, m.theta0(), m.h0(), s).norm(), 0.0);
  EXPECT_GT(psi_tilde_ts(m, Vec{{0.1, -0.2}}, m.h0(), s).norm(), 0.0);
}

TEST(PsiTs, LinearDriftMartingalePartIndependentOfTheta) {
  const ModelSpec m = models::ar1();
  const SeriesRecord s = sim(m, 2000, 5);
  const SieveFunction h = SieveFunction::constant(m.sieve(), 1.7);
  const Vec a = psi_n_ts(m, Vec::Constant(1, -0.4), h, s) - psi_tilde_ts(m, Vec::Constant(1, -0.4), h, s);
  const Vec b = psi_n_ts(m, Vec::Constant(1, 0.8), h, s) - psi_tilde_ts(m, Vec::Constant(1, 0.8), h, s);
  EXPECT_NEAR(a[0], b[0], 1e-12);
}

TEST(PsiTs, MeanZeroAtTruthUnderBothNoises) {
  const ModelSpec m = models::nl_ar();
  for (NoiseKind k : {NoiseKind::Gauss, NoiseKind::Martingale}) {
    std::vector<double> z0, z1;
    for (int r = 0; r < 200; ++r) {
      const Vec p = std::sqrt(1000.0) * psi_n_ts(m, m.theta0(), m.h0(), sim(m, 1000, 100 + r, k));
      z0.push_back(p[0]);
      z1.push_back(p[1]);
    }
    EXPECT_LT(std::abs(stats::mean(z0)), 3.0 * std::sqrt(stats::variance(z0) / 200));
    EXPECT_LT(std::abs(stats::mean(z1)), 3.0 * std::sqrt(stats::variance(z1) / 200));
  }
}

TEST(LsTheta, Ar1ClosedForm) {
  const ModelSpec m = models::ar1();
  const SeriesRecord s = sim(m, 5000, 6);
  double num = 0.0, den = 0.0;
  for (int i = 1; i <= s.n(); ++i) {
    num += s.x(i) * s.x(i - 1);
    den += s.x(i - 1) * s.x(i - 1);
  }
  const LsResult r = ls_theta(m, s);
  EXPECT_NEAR(r.theta[0], num / den, 1e-8);
  EXPECT_FALSE(r.on_boundary);
  EXPECT_LE(r.criterion, r.grid_min);
}

TEST(LsTheta, BoundaryWarning) {
  const ModelSpec m = models::ar1();
  // A unit-root-like path pushes the LS slope past the box edge at 0.95.
  std::vector<double> v{1.0};
  for (int i = 0; i < 200; ++i) v.push_back(v.back() * 1.01);
  const LsResult r = ls_theta(m, series_from_values(v));
  EXPECT_TRUE(r.on_boundary);
  EXPECT_NEAR(r.theta[0], 0.95, 1e-9);
}

TEST(LsTheta, NlArRecoversTruth) {
  const ModelSpec m = models::nl_ar();
  const LsResult r = ls_theta(m, sim(m, 20000, 7));
  EXPECT_LT((r.theta - m.theta0()).norm(), 0.1);
}

TEST(Bn, ConstantFamilyGivesMeanSquaredResidual) {
  const ModelSpec m = fixtures::ar1_const(0.5, 2.0);
  const SeriesRecord s = sim(m, 4000, 8);
  const Vec th = ls_theta(m, s).theta;
  SieveDescriptor flat = m.sieve();
  flat.slope_max = 1e-12;
  BnOptions o;
  o.roughness_coef = 0.0;
  const SieveFitResult f = b_n_minimize(m, s, th, flat, o);
  EXPECT_NEAR(f.h.values()[3], ls_criterion(m, th, s), 1e-6);
  EXPECT_NEAR(f.h.values()[3], 2.0, 0.15);
}

TEST(Bn, ForcedResidualFixedPoint) {
  // A series stuck at a knot: every lag is that knot and every residual is
  // x - 0.5 x, so the fitted variance there is (0.5 x)^2.
  const ModelSpec m = models::ar1();
  const double xk = m.sieve().knot(13);
  const SeriesRecord s = series_from_values(std::vector<double>(60, xk));
  const Vec th = Vec::Constant(1, 0.5);
  for (double coef : {0.0, 2.0}) {
    BnOptions o;
    o.roughness_coef = coef;
    const SieveFitResult f = b_n_minimize(m, s, th, m.sieve(), o);
    EXPECT_NEAR(f.h(xk), 0.25 * xk * xk, 1e-9) << coef;
    EXPECT_NEAR(b_n(m, th, f.h, s), 0.0, 1e-12);
  }
}

TEST(Bn, HeteroscedasticNuisanceIsTracked) {
  const ModelSpec m = models::nl_ar();
  const SeriesRecord s = sim(m, 40000, 10);
  const Vec th = ls_theta(m, s).theta;
  const SieveFitResult f = b_n_minimize(m, s, th, m.sieve());
  EXPECT_TRUE(f.h.feasible());
  EXPECT_LT(sup_metric(f.h, m.h0()), sup_metric(SieveFunction::constant(m.sieve(), 1.0), m.h0()));
}

TEST(FisherInfoTs, Ar1) {
  const ModelSpec m = fixtures::ar1_const(0.5, 1.0);
  const InfoReport r = fisher_info_ts(m, sim(m, 200000, 11), m.theta0(), m.h0());
  EXPECT_NEAR(r.info(0, 0), 4.0 / 3.0, 0.04);
  EXPECT_FALSE(r.singular);
}

TEST(EstimateSeries, Ar1NearTruth) {
  const ModelSpec m = models::ar1();
  const int n = 20000;
  const SeriesEstimate e = estimate_series(m, sim(m, n, 12));
  EXPECT_NEAR(e.theta_hat[0], 0.5, 4.0 * std::sqrt(0.75 / n));
  EXPECT_LE(e.psi_norm, operational_tolerance(std::sqrt(n), n));
  SeriesFitOptions os;
  os.one_step = true;
  const SeriesEstimate o = estimate_series(m, sim(m, n, 12), os);
  EXPECT_NEAR(o.theta_hat[0], e.theta_hat[0], 0.5 * std::sqrt(0.75 / n));
}

TEST(Lan, ZeroDirectionIsZero) {
  const ModelSpec m = models::nl_ar();
  const LanProbe p = lan_values(m, sim(m, 500, 13), Vec::Zero(2));
  EXPECT_EQ(p.delta_nu, 0.0);
  EXPECT_EQ(p.b_nu, 0.0);
  EXPECT_EQ(p.log_lr, 0.0);
}

TEST(Lan, GaussianIdentityAndMoments) {
  const ModelSpec m = models::nl_ar();
  const Mat info = fisher_info_ts(m, sim(m, 400000, 14), m.theta0(), m.h0()).info;
  const Vec u{{1.0, 0.0}};
  const LanReport r = lan_probe(m, u, 2000, 200, 15, info);
  EXPECT_LT(r.max_identity_residual, 1e-8);
  // Var(Delta) ~ u'Iu and E B ~ u'Iu / 2; 200 draws give ~10% variance error.
  EXPECT_NEAR(r.var_delta / r.uiu, 1.0, 0.3);
  EXPECT_NEAR(r.mean_b / (0.5 * r.uiu), 1.0, 0.05);
}
