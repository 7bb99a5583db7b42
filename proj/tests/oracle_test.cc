#include "shrinklab/oracle.h"

#include <algorithm>
#include <cmath>
#include <utility>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "shrinklab/diagnostics.h"
#include "shrinklab/init.h"
#include "test_support.h"

namespace shrinklab {
namespace {

TEST(ExhaustiveNearestTest, Basics) {
  EXPECT_EQ(oracle::exhaustive_nearest(RowVector::Zero(2), Matrix::Ones(1, 2)),
            0);
  std::mt19937_64 rng(1);
  const Matrix t = testing::random_matrix(9, 3, rng);
  EXPECT_EQ(oracle::exhaustive_nearest(t.row(6), t), 6);
  EXPECT_THROW(oracle::exhaustive_nearest(RowVector::Zero(2), Matrix(0, 2)),
               InvalidArgument);
}

TEST(LloydMaxTest, TwoPointSamples) {
  std::vector<double> x;
  for (int i = 0; i < 100; ++i) x.push_back(i % 2);
  const oracle::LloydMax1D r = oracle::lloyd_max_1d(x, 2);
  EXPECT_EQ(r.levels, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(r.distortion, 0.0);
  EXPECT_EQ(r.boundaries, std::vector<double>{0.5});
}

TEST(LloydMaxTest, StandardNormalTwoLevels) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  std::vector<double> x(100000);
  for (double& v : x) v = n(rng);
  const oracle::LloydMax1D r = oracle::lloyd_max_1d(x, 2);
  const double expected = 2.0 / std::sqrt(2.0 * std::numbers::pi);
  EXPECT_NEAR(r.levels[0], -expected, 0.02);
  EXPECT_NEAR(r.levels[1], expected, 0.02);
}

// Property: distortion never increases and boundaries are midpoints.
TEST(LloydMaxTest, MonotoneOnRandomInputs) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> g(0.5 + seed % 4, 1.0);
    std::vector<double> x(2000);
    for (double& v : x) v = g(rng);
    const oracle::LloydMax1D r = oracle::lloyd_max_1d(
        x, 2 + seed % 7, 500, 1e-12, oracle::LloydMaxInit::kQuantiles);
    for (size_t i = 1; i < r.distortion_history.size(); ++i) {
      EXPECT_LE(r.distortion_history[i], r.distortion_history[i - 1]);
    }
    for (size_t b = 0; b < r.boundaries.size(); ++b) {
      EXPECT_DOUBLE_EQ(r.boundaries[b], 0.5 * (r.levels[b] + r.levels[b + 1]));
    }
    EXPECT_NEAR(oracle::scalar_quantizer_distortion(x, r.levels), r.distortion,
                1e-9);
  }
}

// The default start is the optimal partition: never worse than the quantile
// start, and already a fixed point of the iterations.
TEST(LloydMaxTest, OptimalStartDominatesQuantileStart) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    std::vector<double> x(3000);
    for (size_t i = 0; i < x.size(); ++i) x[i] = n(rng) + 6.0 * (i % 7);
    const int s = 2 + static_cast<int>(seed);
    const auto best = oracle::lloyd_max_1d(x, s);
    const auto local = oracle::lloyd_max_1d(x, s, 500, 1e-12,
                                            oracle::LloydMaxInit::kQuantiles);
    EXPECT_LE(best.distortion, local.distortion + 1e-12);
    EXPECT_NEAR(best.distortion_history.front(), best.distortion, 1e-12);
  }
}

// Exhaustive check on tiny inputs: every contiguous split of the sorted
// samples is tried.
TEST(LloydMaxTest, MatchesExhaustiveSplits) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(9);
    for (double& v : x) v = u(rng);
    std::sort(x.begin(), x.end());
    double best = 1e300;
    for (size_t a = 1; a < x.size(); ++a) {
      for (size_t b = a + 1; b < x.size(); ++b) {
        std::vector<double> levels;
        for (auto [lo, hi] : {std::pair{size_t{0}, a}, {a, b}, {b, x.size()}}) {
          double m = 0.0;
          for (size_t i = lo; i < hi; ++i) m += x[i];
          levels.push_back(m / static_cast<double>(hi - lo));
        }
        best = std::min(best, oracle::scalar_quantizer_distortion(x, levels));
      }
    }
    EXPECT_NEAR(oracle::lloyd_max_1d(x, 3).distortion, best, 1e-12);
  }
}

TEST(LloydMaxTest, DegenerateSamples) {
  EXPECT_THROW(oracle::lloyd_max_1d({1.0, 1.0, 1.0}, 2), InvalidArgument);
  EXPECT_THROW(oracle::lloyd_max_1d({}, 1), InvalidArgument);
}

// Learned 1-D codebooks (k-means from several seeds) never beat the
// Lloyd-Max optimum on the same samples.
TEST(LloydMaxTest, BoundsLearnedDistortion) {
  GaussianMixtureSpec spec;
  spec.dim = 1;
  spec.means = default_means(10, 1, 5.0);
  spec.seed = 4;
  const LabeledDataset data = generate(spec);
  const std::vector<double> x(data.points.data(),
                              data.points.data() + data.points.size());
  for (int s : {2, 4, 16}) {
    const double optimum = oracle::lloyd_max_1d(x, s).distortion;
    for (uint64_t seed = 0; seed < 3; ++seed) {
      const KMeansResult km = kmeans(data.points, s, {.seed = seed});
      EXPECT_GE(quantization_distortion(km.centers, data.points),
                optimum - 1e-9);
    }
  }
}

TEST(MonteCarloTest, TokensOnMeansAsStdVanishes) {
  GaussianMixtureSpec spec;
  spec.num_components = 3;
  spec.dim = 2;
  spec.means = default_means(3, 2, 5.0);
  spec.std = 1e-6;
  const auto r = oracle::monte_carlo_distortion(spec, spec.means, 1000, 1);
  EXPECT_LT(r.value, 1e-10);
}

TEST(MonteCarloTest, SingleTokenAnalytic) {
  GaussianMixtureSpec spec;
  spec.num_components = 1;
  spec.dim = 3;
  spec.means = Matrix(1, 3);
  spec.means << 1.0, -1.0, 2.0;
  spec.std = 0.7;
  Matrix t(1, 3);
  t << 0.0, 0.5, 2.0;
  const auto r = oracle::monte_carlo_distortion(spec, t, 200000, 2);
  const double expected = (t - spec.means).squaredNorm() + 3 * 0.7 * 0.7;
  EXPECT_NEAR(r.value, expected, 3.0 * r.standard_error);
  EXPECT_THROW(oracle::monte_carlo_distortion(spec, t, 0, 2), InvalidArgument);
}

TEST(MonteCarloTest, AgreesWithDatasetDistortion) {
  GaussianMixtureSpec spec;
  spec.points_per_component = 100000;  // 10^6 points
  spec.dim = 2;
  spec.means = default_means(10, 2, 5.0);
  spec.seed = 5;
  std::mt19937_64 rng(6);
  const Matrix tokens = testing::random_matrix(16, 2, rng, -6.0, 6.0);
  const double empirical = quantization_distortion(tokens, sample_raw(spec));
  const auto mc = oracle::monte_carlo_distortion(spec, tokens, 1000000, 7);
  EXPECT_NEAR(mc.value, empirical, 0.01 * empirical);
}

}  // namespace
}  // namespace shrinklab
