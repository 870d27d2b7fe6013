#include "zest/diffusion_fit.hpp"
#include "zest/sde_lab.hpp"
#include "zest/stats.hpp"

#include "test_models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace zest;

TEST(GridSchedule, DerivedQuantities) {
  const GridSchedule g{1000, 0.4};
  EXPECT_NEAR(g.delta(), std::pow(1000.0, -0.6), 1e-15);
  EXPECT_NEAR(g.horizon(), std::pow(1000.0, 0.4), 1e-12);
  // Delta_n * t_n = n^(2 gamma - 1) shrinks with n.
  const GridSchedule big{16000, 0.4};
  EXPECT_LT(big.delta() * big.horizon(), g.delta() * g.horizon());
  EXPECT_THROW((GridSchedule{100, 0.5}.validate()), Error);
  EXPECT_THROW((GridSchedule{100, 0.0}.validate()), Error);
}

TEST(SimulatePath, BrownianIncrementVariance) {
  const ModelSpec m = fixtures::brownian();
  const GridSchedule g{100000, 0.4};
  SimOptions so;
  so.keep_fine = false;
  const ObservationSet o = observations(simulate_path(m, g, 2, 0.0, 1, so));
  std::vector<double> inc(o.n());
  for (int i = 1; i <= o.n(); ++i) inc[i - 1] = o.values[i] - o.values[i - 1];
  const double var = stats::variance(inc);
  const double se = g.delta() * std::sqrt(2.0 / o.n());
  EXPECT_NEAR(var, g.delta(), 3.0 * se);
}

TEST(SimulatePath, OuStationaryVariance) {
  const ModelSpec m = fixtures::ou_const(1.0, 1.0);
  std::mt19937_64 rng(8);
  const std::vector<double> xs = stationary_draws(m, 20000, 1.0, 0.002, 20.0, rng);
  EXPECT_NEAR(stats::variance(xs), 0.5, 0.02);
}

TEST(SimulatePath, ZeroNoiseFollowsOde) {
  const ModelSpec m = fixtures::ou_const(1.0, 1.0);
  const GridSchedule g{1000, 0.4};
  SimOptions so;
  so.zero_noise = true;
  so.x0 = 1.0;
  const int substeps = 20;
  const PathRecord p = simulate_path(m, g, substeps, 0.0, 1, so);
  const double fine_dt = g.delta() / substeps;
  std::size_t k = 0;
  while (p.fine_times[k] < 1.0) ++k;
  const double t = p.fine_times[k];
  EXPECT_NEAR(p.fine_states[k], std::exp(-t), 2.0 * fine_dt);
  EXPECT_LT(std::abs(p.fine_states[k] - std::exp(-t)), 0.5 * fine_dt);
}

TEST(SimulatePath, DeterministicAndObservationInstantsExact) {
  const ModelSpec m = models::ou();
  const GridSchedule g{500, 0.4};
  const PathRecord a = simulate_path(m, g, 20, 5.0, 77), b = simulate_path(m, g, 20, 5.0, 77);
  EXPECT_EQ(a.fine_states, b.fine_states);
  EXPECT_EQ(a.fine_times, b.fine_times);
  const PathRecord c = simulate_path(m, g, 20, 5.0, 78);
  EXPECT_NE(a.fine_states, c.fine_states);
  for (int i = 0; i <= g.n; ++i) EXPECT_EQ(a.fine_times[a.obs_indices[i]], g.time(i));
  // The coarse-only path visits the same observation states.
  SimOptions so;
  so.keep_fine = false;
  const ObservationSet o = observations(simulate_path(m, g, 20, 5.0, 77, so));
  EXPECT_EQ(o.values, observations(a).values);
}

TEST(SimulatePath, GuardsAndExport) {
  EXPECT_THROW(simulate_path(models::ou(), GridSchedule{100, 0.4}, 0, 0.0, 1), Error);
  EXPECT_THROW(simulate_path(models::ou(), GridSchedule{100, 0.4}, 1, -1.0, 1), Error);
  ModelSpec bad = models::ou();
  bad.diffusion.c_lower = 10.0;
  try {
    simulate_path(bad, GridSchedule{100, 0.4}, 1, 0.0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Ellipticity);
  }
  const PathRecord p = simulate_path(models::ou(), GridSchedule{10, 0.4}, 2, 0.0, 1);
  std::ostringstream os;
  write_path_csv(os, p);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "time,state");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, static_cast<int>(p.fine_times.size()));
}

TEST(SimulatePath, ErgodicAveragesAgreeAcrossSeeds) {
  const ModelSpec m = models::ou();
  auto run = [&](std::uint64_t seed, double& mean, double& se) {
    std::mt19937_64 rng(seed);
    const std::vector<double> xs = stationary_draws(m, 20000, 0.5, 0.005, 20.0, rng);
    std::vector<double> batches;
    for (int b = 0; b < 20; ++b) {
      double s = 0.0;
      for (int i = 0; i < 1000; ++i) s += std::tanh(xs[b * 1000 + i]) * std::tanh(xs[b * 1000 + i]);
      batches.push_back(s / 1000.0);
    }
    mean = stats::mean(batches);
    se = std::sqrt(stats::variance(batches) / batches.size());
  };
  double m1, s1, m2, s2;
  run(1, m1, s1);
  run(2, m2, s2);
  EXPECT_LT(std::abs(m1 - m2), 3.0 * std::hypot(s1, s2));
}

TEST(MomentScaling, BrownianSecondMomentSlopeOne) {
  const std::vector<double> deltas{0.001, 0.004, 0.016, 0.064};
  const ScalingReport r = moment_scaling_check(fixtures::brownian(), 2, deltas, 2000, 3);
  EXPECT_NEAR(r.slope, 1.0, 0.1);
}

TEST(MomentScaling, OuFourthMomentSlopeTwo) {
  const std::vector<double> deltas{0.001, 0.004, 0.016, 0.064};
  const ScalingReport r = moment_scaling_check(fixtures::ou_const(1.0, 1.0), 4, deltas, 2000, 4);
  EXPECT_NEAR(r.slope, 2.0, 0.15);
}

TEST(MomentScaling, JensenAtFixedDelta) {
  const std::vector<double> deltas{0.01, 0.1};
  const ScalingReport r2 = moment_scaling_check(models::ou(), 2, deltas, 1000, 5);
  const ScalingReport r4 = moment_scaling_check(models::ou(), 4, deltas, 1000, 5);
  for (std::size_t i = 0; i < deltas.size(); ++i) EXPECT_GE(r4.moments[i], r2.moments[i] * r2.moments[i]);
}

TEST(MomentScaling, RejectsBadInput) {
  const std::vector<double> narrow{0.01, 0.05};
  EXPECT_THROW(moment_scaling_check(models::ou(), 2, narrow, 10, 1), Error);
  const std::vector<double> ok{0.001, 0.1};
  EXPECT_THROW(moment_scaling_check(models::ou(), 3, ok, 10, 1), Error);
}

TEST(SimulatePath, SubstepRefinementBelowMonteCarloError) {
  const ModelSpec m = models::ou();
  const int reps = 60;
  auto mean_theta = [&](int substeps, double& se) {
    std::vector<double> th;
    for (int r = 0; r < reps; ++r) {
      SimOptions so;
      so.keep_fine = false;
      const ObservationSet o = observations(simulate_path(m, GridSchedule{2000, 0.4}, substeps, 20.0, 1000 + r, so));
      th.push_back(estimate_diffusion(m, o).theta_hat[0]);
    }
    se = std::sqrt(stats::variance(th) / reps);
    return stats::mean(th);
  };
  double se10, se20;
  const double a = mean_theta(10, se10), b = mean_theta(20, se20);
  EXPECT_LT(std::abs(a - b), 3.0 * std::hypot(se10, se20));
}
