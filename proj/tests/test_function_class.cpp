#include "zest/function_class.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <utility>
#include <vector>

using namespace zest;

namespace {

SieveDescriptor unit_two_knot(double v_lo = 1.0, double v_hi = 2.0, double slope = 1.0) {
  return {0.0, 1.0, 2, v_lo, v_hi, slope};
}

SieveFunction random_feasible(const SieveDescriptor& d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(d.v_lo - 1.0, d.v_hi + 1.0);
  std::vector<double> v(d.n_knots);
  for (double& x : v) x = u(rng);
  return project_to_class(v, d);
}

/// Independent cover count: sample feasible knot vectors on a fine value grid,
/// map every knot to its eps-cell and count distinct cell paths.
long long sampled_cell_paths(const SieveDescriptor& d, double eps, double fine) {
  const CoverLattice lat = cover_lattice(d, eps);
  auto cell = [&](double v) {
    int k = static_cast<int>(std::floor((v - d.v_lo) / lat.width));
    return std::clamp(k, 0, lat.cells - 1);
  };
  std::vector<double> grid;
  for (double v = d.v_lo; v <= d.v_hi + 1e-12; v += fine) grid.push_back(v);
  std::set<std::vector<int>> paths;
  std::vector<int> idx(d.n_knots, 0);
  const double step = d.max_step();
  while (true) {
    bool ok = true;
    for (int j = 1; j < d.n_knots && ok; ++j) ok = std::abs(grid[idx[j]] - grid[idx[j - 1]]) <= step + 1e-12;
    if (ok) {
      std::vector<int> p(d.n_knots);
      for (int j = 0; j < d.n_knots; ++j) p[j] = cell(grid[idx[j]]);
      paths.insert(p);
    }
    int k = 0;
    while (k < d.n_knots && ++idx[k] == static_cast<int>(grid.size())) idx[k++] = 0;
    if (k == d.n_knots) break;
  }
  return static_cast<long long>(paths.size());
}

}  // namespace

TEST(Eval, FlatSieveIsConstant) {
  const SieveFunction h = SieveFunction::constant(SieveDescriptor{}, 1.0);
  EXPECT_DOUBLE_EQ(eval(h, 3.7), 1.0);
}

TEST(Eval, LinearInterpolationAndConstantExtension) {
  const SieveFunction h(unit_two_knot(), {1.0, 2.0});
  EXPECT_DOUBLE_EQ(eval(h, 0.5), 1.5);
  EXPECT_DOUBLE_EQ(eval(h, -5.0), 1.0);
  EXPECT_DOUBLE_EQ(eval(h, 7.0), 2.0);
  EXPECT_DOUBLE_EQ(eval(h, 0.25), 1.25);
}

TEST(Eval, StaysInsideValueBounds) {
  std::mt19937_64 rng(3);
  const SieveDescriptor d{};
  const SieveFunction h = random_feasible(d, rng);
  for (double x = -10.0; x <= 10.0; x += 0.01) {
    EXPECT_GE(h(x), d.v_lo - 1e-12);
    EXPECT_LE(h(x), d.v_hi + 1e-12);
  }
}

TEST(SupMetric, Examples) {
  const SieveFunction h(unit_two_knot(), {1.0, 2.0});
  const SieveFunction g(unit_two_knot(), {1.5, 1.5});
  EXPECT_DOUBLE_EQ(sup_metric(h, h), 0.0);
  EXPECT_DOUBLE_EQ(sup_metric(h, g), 0.5);
  EXPECT_DOUBLE_EQ(sup_metric(g, h), 0.5);
}

TEST(SupMetric, MatchesDenseGridBruteForce) {
  std::mt19937_64 rng(11);
  const SieveDescriptor d{};
  for (int rep = 0; rep < 5; ++rep) {
    const SieveFunction h = random_feasible(d, rng), g = random_feasible(d, rng);
    double brute = 0.0;
    const int points = 100000;
    for (int i = 0; i <= points; ++i) {
      const double x = (d.l0 - 1.0) + (d.r0 - d.l0 + 2.0) * i / points;
      brute = std::max(brute, std::abs(h(x) - g(x)));
    }
    // The dense grid need not hit a knot exactly; add the knots themselves.
    for (int j = 0; j < d.n_knots; ++j) brute = std::max(brute, std::abs(h(d.knot(j)) - g(d.knot(j))));
    EXPECT_NEAR(sup_metric(h, g), brute, 1e-12);
  }
}

TEST(SupMetric, TriangleInequality) {
  std::mt19937_64 rng(5);
  const SieveDescriptor d{};
  for (int rep = 0; rep < 200; ++rep) {
    const SieveFunction a = random_feasible(d, rng), b = random_feasible(d, rng), c = random_feasible(d, rng);
    EXPECT_LE(sup_metric(a, c), sup_metric(a, b) + sup_metric(b, c) + 1e-12);
  }
}

TEST(SupMetric, DescriptorMismatchThrows) {
  const SieveFunction h = SieveFunction::constant(SieveDescriptor{}, 1.0);
  SieveDescriptor other;
  other.n_knots = 8;
  const SieveFunction g = SieveFunction::constant(other, 1.0);
  try {
    (void)sup_metric(h, g);
    FAIL() << "expected a descriptor mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DescriptorMismatch);
  }
}

TEST(CoveringNumber, OneBallWhenEpsCoversRange) {
  const SieveDescriptor d{};
  EXPECT_EQ(covering_number(d, d.v_hi - d.v_lo).count, 1u);
  EXPECT_EQ(covering_number(d, 10.0).count, 1u);
}

TEST(CoveringNumber, TwoKnotsMatchesEnumerationAtHalf) {
  const SieveDescriptor d = unit_two_knot();
  const CoveringCount c = covering_number(d, 0.5);
  EXPECT_FALSE(c.overflow);
  EXPECT_EQ(static_cast<long long>(c.count), sampled_cell_paths(d, 0.5, 1e-3));
  EXPECT_EQ(c.count, 4u);
}

TEST(CoveringNumber, SlopeConstrainedMatchesEnumeration) {
  for (double slope : {0.13, 0.43, 0.62}) {
    for (double eps : {0.5, 0.25, 0.2}) {
      const SieveDescriptor d2 = unit_two_knot(1.0, 2.0, slope);
      EXPECT_EQ(static_cast<long long>(covering_number(d2, eps).count), sampled_cell_paths(d2, eps, 1e-3))
          << "slope " << slope << " eps " << eps;
      const SieveDescriptor d3{0.0, 2.0, 3, 1.0, 2.0, slope};
      EXPECT_EQ(static_cast<long long>(covering_number(d3, eps).count), sampled_cell_paths(d3, eps, 5e-3))
          << "3 knots, slope " << slope << " eps " << eps;
    }
  }
}

TEST(CoveringNumber, CentersFormAnEpsCover) {
  const SieveDescriptor d{0.0, 2.0, 3, 1.0, 2.0, 0.4};
  const double eps = 0.2;
  const CoverLattice lat = cover_lattice(d, eps);
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 2000; ++rep) {
    const SieveFunction h = random_feasible(d, rng);
    std::vector<double> centers(d.n_knots);
    for (int j = 0; j < d.n_knots; ++j) {
      const int k = std::clamp(static_cast<int>(std::floor((h.values()[j] - d.v_lo) / lat.width)), 0, lat.cells - 1);
      centers[j] = d.v_lo + (k + 0.5) * lat.width;
    }
    EXPECT_LE(sup_metric(h, SieveFunction(d, centers)), eps);
  }
}

TEST(CoveringNumber, MonotoneInEps) {
  const SieveDescriptor d{};
  for (double eps : {1.0, 0.5, 0.2, 0.1, 0.05}) {
    EXPECT_GE(covering_number(d, eps / 2).log_count, covering_number(d, eps).log_count);
  }
}

TEST(CoveringNumber, ExponentShapeAtMostOne) {
  const SieveDescriptor d{};
  std::vector<double> lx, ly;
  for (double eps : {0.2, 0.1, 0.05}) {
    lx.push_back(std::log(1.0 / eps));
    ly.push_back(std::log(covering_number(d, eps).log_count));
  }
  const double slope = (ly[2] - ly[0]) / (lx[2] - lx[0]);
  EXPECT_LE(slope, 1.1);
}

TEST(CoveringNumber, OverflowFallsBackToLogCount) {
  // With an unconstrained slope every cell path is admissible: N = K^n exactly.
  const SieveDescriptor d{-4.0, 4.0, 200, 0.25, 4.0, 1e6};
  const CoveringCount c = covering_number(d, 1e-3);
  EXPECT_TRUE(c.overflow);
  const CoverLattice lat = cover_lattice(d, 1e-3);
  EXPECT_NEAR(c.log_count, d.n_knots * std::log(static_cast<double>(lat.cells)), 1e-9 * c.log_count);
}

TEST(CoveringNumber, ProductCoverBound) {
  // Cells of D x E under the max metric are products of cells; count the
  // distinct products reached by sampled feasible pairs.
  const SieveDescriptor D = unit_two_knot(1.0, 2.0, 0.4), E = unit_two_knot(0.5, 1.5, 0.7);
  const double eps = 0.25;
  const long long nd = sampled_cell_paths(D, eps, 2e-3), ne = sampled_cell_paths(E, eps, 2e-3);
  EXPECT_LE(nd * ne, static_cast<long long>(covering_number(D, eps).count * covering_number(E, eps).count));
  EXPECT_EQ(nd * ne, static_cast<long long>(covering_number(D, eps).count * covering_number(E, eps).count));
}

TEST(EntropyIntegral, DegenerateClassIsZero) {
  const SieveDescriptor d{-4.0, 4.0, 16, 1.0, 1.0, 1.0};
  const std::vector<double> grid{0.01, 0.1, 0.5, 1.0};
  EXPECT_DOUBLE_EQ(entropy_integral(d, grid), 0.0);
}

TEST(EntropyIntegral, StableUnderRefinement) {
  auto geometric = [](int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) g[i] = 1e-3 * std::pow(1e3, static_cast<double>(i) / (points - 1));
    return g;
  };
  const SieveDescriptor d{};
  const double coarse = entropy_integral(d, geometric(48));
  const double fine = entropy_integral(d, geometric(95));
  EXPECT_TRUE(std::isfinite(coarse));
  EXPECT_GT(coarse, 0.0);
  EXPECT_LT(std::abs(coarse - fine) / fine, 0.05);
}

TEST(EntropyIntegral, RejectsBadGrid) {
  const SieveDescriptor d{};
  EXPECT_THROW(entropy_integral(d, std::vector<double>{0.5, 0.2}), Error);
  EXPECT_THROW(entropy_integral(d, std::vector<double>{0.0, 0.5}), Error);
  EXPECT_THROW(entropy_integral(d, std::vector<double>{0.5, 1.5}), Error);
}

TEST(EntropyIntegral, LipschitzClassIntegrandShape) {
  // Tie the knot spacing to eps, so the sieve resolves the whole Lipschitz
  // class at that scale: log N should grow like (1/eps)^1.
  std::vector<double> lx, ly;
  for (double eps : {0.1, 0.05, 0.025, 0.0125}) {
    const int knots = static_cast<int>(std::lround(1.0 / eps)) + 1;
    const SieveDescriptor d{0.0, 1.0, knots, 1.0, 2.0, 1.0};
    lx.push_back(std::log(1.0 / eps));
    ly.push_back(std::log(covering_number(d, eps).log_count));
  }
  const double slope = (ly.back() - ly.front()) / (lx.back() - lx.front());
  EXPECT_GT(slope, 0.8);
  EXPECT_LE(slope, 1.1);
}

TEST(Project, FeasibleInputUnchanged) {
  std::mt19937_64 rng(1);
  const SieveDescriptor d{};
  const SieveFunction h = random_feasible(d, rng);
  const SieveFunction p = project_to_class(h.values(), d);
  for (int j = 0; j < d.n_knots; ++j) EXPECT_DOUBLE_EQ(p.values()[j], h.values()[j]);
}

TEST(Project, ClampOnly) {
  const SieveFunction p = project_to_class(std::vector<double>{0.0, 10.0}, unit_two_knot());
  EXPECT_DOUBLE_EQ(p.values()[0], 1.0);
  EXPECT_DOUBLE_EQ(p.values()[1], 2.0);
}

TEST(Project, RandomInfeasibleBecomesFeasibleFixedPoint) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(1.5, 3.0);
  const SieveDescriptor d{};
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> v(d.n_knots);
    for (double& x : v) x = z(rng);
    const SieveFunction p = project_to_class(v, d);
    EXPECT_TRUE(p.feasible());
    const SieveFunction q = project_to_class(p.values(), d);
    for (int j = 0; j < d.n_knots; ++j) EXPECT_DOUBLE_EQ(q.values()[j], p.values()[j]);
  }
}

TEST(Json, RoundTrip) {
  std::mt19937_64 rng(4);
  const SieveFunction h = random_feasible(SieveDescriptor{}, rng);
  const nlohmann::json j = h;
  EXPECT_TRUE(j.contains("l0") && j.contains("r0") && j.contains("values") && j.contains("v_lo") &&
              j.contains("v_hi") && j.contains("slope_max"));
  const SieveFunction back = j.get<SieveFunction>();
  EXPECT_TRUE(back.descriptor() == h.descriptor());
  EXPECT_EQ(back.values(), h.values());
}
