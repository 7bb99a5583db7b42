#include "shrinklab/init.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "shrinklab/quantizer.h"
#include "test_support.h"

namespace shrinklab {
namespace {

using testing::random_matrix;

LabeledDataset small_dataset(int n, int dim, uint64_t seed) {
  GaussianMixtureSpec spec;
  spec.num_components = 4;
  spec.points_per_component = n / 4;
  spec.dim = dim;
  spec.means = default_means(4, dim, 5.0);
  spec.seed = seed;
  return generate(spec);
}

// Plain Lloyd from a random subset of points; reference for the restart
// comparison.
double naive_lloyd(const Matrix& x, int k, std::mt19937_64& rng) {
  std::vector<int> idx(x.rows());
  for (int i = 0; i < x.rows(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  Matrix c(k, x.cols());
  for (int j = 0; j < k; ++j) c.row(j) = x.row(idx[j]);
  double objective = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<int> a(x.rows());
    double obj = 0.0;
    for (int i = 0; i < x.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d = (x.row(i) - c.row(j)).squaredNorm();
        if (d < best) {
          best = d;
          a[i] = j;
        }
      }
      obj += best;
    }
    Matrix sum = Matrix::Zero(k, x.cols());
    std::vector<int> n(k, 0);
    for (int i = 0; i < x.rows(); ++i) {
      sum.row(a[i]) += x.row(i);
      ++n[a[i]];
    }
    for (int j = 0; j < k; ++j) {
      if (n[j] > 0) c.row(j) = sum.row(j) / n[j];
    }
    if (obj >= objective) break;
    objective = obj;
  }
  return objective;
}

// Global optimum of k-means by enumerating every labeling (k^n).
double brute_force_kmeans(const Matrix& x, int k) {
  const int n = static_cast<int>(x.rows());
  std::vector<int> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    Matrix sum = Matrix::Zero(k, x.cols());
    std::vector<int> count(k, 0);
    for (int i = 0; i < n; ++i) {
      sum.row(label[i]) += x.row(i);
      ++count[label[i]];
    }
    double obj = 0.0;
    for (int i = 0; i < n; ++i) {
      obj += (x.row(i) - sum.row(label[i]) / count[label[i]]).squaredNorm();
    }
    if (std::all_of(count.begin(), count.end(), [](int c) { return c > 0; })) {
      best = std::min(best, obj);
    }
    int pos = 0;
    while (pos < n && ++label[pos] == k) label[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

TEST(CollectEmbeddingsTest, PoolsAtLeastRatioTimesS) {
  const LabeledDataset data = small_dataset(2000, 2, 1);
  const Mlp enc(2, 8, 2, 3);
  const EmbeddingPool pool =
      collect_embeddings(enc, data, 10.0, 128, 256, EncoderSource::kUntrained, 5);
  EXPECT_GE(pool.embeddings.rows(), 1280);
  EXPECT_GE(pool.ratio, 10.0);
  EXPECT_EQ(pool.embeddings.cols(), 2);
}

TEST(CollectEmbeddingsTest, RatioOneIsOnePass) {
  const LabeledDataset data = small_dataset(64, 2, 1);
  const Mlp enc(2, 8, 2, 3);
  const EmbeddingPool pool =
      collect_embeddings(enc, data, 1.0, 64, 16, EncoderSource::kUntrained, 5);
  ASSERT_EQ(pool.embeddings.rows(), 64);
  // Every point encoded exactly once: same multiset of rows.
  const Matrix all = enc.apply(data.points);
  std::multiset<std::vector<double>> a, b;
  for (int i = 0; i < 64; ++i) {
    a.insert({all(i, 0), all(i, 1)});
    b.insert({pool.embeddings(i, 0), pool.embeddings(i, 1)});
  }
  EXPECT_EQ(a, b);
}

TEST(CollectEmbeddingsTest, DeterministicAndRejectsSmallData) {
  const LabeledDataset data = small_dataset(400, 2, 1);
  const Mlp enc(2, 8, 2, 3);
  const auto a =
      collect_embeddings(enc, data, 2.0, 100, 32, EncoderSource::kUntrained, 9);
  const auto b =
      collect_embeddings(enc, data, 2.0, 100, 32, EncoderSource::kUntrained, 9);
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_THROW(collect_embeddings(enc, data, 10.0, 100, 32,
                                  EncoderSource::kUntrained, 9),
               InvalidArgument);
}

TEST(KMeansTest, OnePointPerCenter) {
  std::mt19937_64 rng(1);
  const Matrix x = random_matrix(6, 2, rng);
  const KMeansResult r = kmeans(x, 6, {.seed = 3});
  EXPECT_NEAR(r.objective_history.back(), 0.0, 1e-24);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(r.centers.row(r.assignment[i]), x.row(i));
  }
}

TEST(KMeansTest, TwoSeparatedBlobs) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.1);
  Matrix x(200, 1);
  for (int i = 0; i < 200; ++i) x(i, 0) = (i < 100 ? -5.0 : 5.0) + noise(rng);
  const KMeansResult r = kmeans(x, 2, {.tol = 1e-9, .seed = 1});
  const double m0 = x.topRows(100).mean(), m1 = x.bottomRows(100).mean();
  const double lo = std::min(r.centers(0, 0), r.centers(1, 0));
  const double hi = std::max(r.centers(0, 0), r.centers(1, 0));
  EXPECT_NEAR(lo, m0, 1e-9);
  EXPECT_NEAR(hi, m1, 1e-9);
}

TEST(KMeansTest, SmallInstanceAgainstRestartsAndEnumeration) {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const Matrix x = random_matrix(12, 2, rng);
    // Same restart budget as the naive reference.
    const KMeansResult r =
        kmeans(x, 3, {.tol = 1e-12, .restarts = 50, .seed = seed});
    double restarts = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 50; ++i) restarts = std::min(restarts, naive_lloyd(x, 3, rng));
    const double optimum = brute_force_kmeans(x, 3);
    const double final_obj = r.objective_history.back();
    EXPECT_LE(final_obj, restarts + 1e-6) << "seed " << seed;
    EXPECT_GE(final_obj, optimum - 1e-12);
    for (size_t i = 1; i < r.objective_history.size(); ++i) {
      EXPECT_LE(r.objective_history[i], r.objective_history[i - 1]);
    }
  }
}

// Property: objective never increases, across shapes and seeds.
TEST(KMeansTest, ObjectiveMonotone) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Matrix x = random_matrix(300, 3, rng);
    const KMeansResult r = kmeans(x, 16, {.seed = seed});
    for (size_t i = 1; i < r.objective_history.size(); ++i) {
      EXPECT_LE(r.objective_history[i], r.objective_history[i - 1]);
    }
    EXPECT_NEAR(r.objective_history.back(), kmeans_objective(x, r.centers),
                1e-9 * r.objective_history.back());
  }
}

TEST(KMeansTest, SeedingPicksDistinctPoints) {
  std::mt19937_64 rng(3);
  Matrix x = random_matrix(40, 2, rng);
  x.bottomRows(20) = x.topRows(20);  // 20 distinct points, each twice
  const Matrix c = kmeans_plus_plus(x, 20, 4);
  std::set<std::pair<double, double>> seen;
  for (int i = 0; i < 20; ++i) seen.insert({c(i, 0), c(i, 1)});
  EXPECT_EQ(seen.size(), 20u);
  EXPECT_THROW(kmeans_plus_plus(x, 21, 4), InvalidArgument);
}

TEST(InitCodebookTest, DeterministicAndSeededEmaState) {
  const LabeledDataset data = small_dataset(2000, 2, 1);
  const Mlp enc(2, 32, 2, 7);
  InitOptions opt;
  opt.seed = 11;
  const Codebook a = init_codebook(InitMode::kUntrainedEncoder, enc, data, opt);
  const Codebook b = init_codebook(InitMode::kUntrainedEncoder, enc, data, opt);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.size(), 128);
  EXPECT_EQ(a.ema_cluster_size, Vector::Ones(128));
  EXPECT_EQ(a.ema_embed_sum, a.tokens);
  EXPECT_DOUBLE_EQ(mean_pairwise_distance(a.tokens),
                   mean_pairwise_distance(b.tokens));
}

TEST(InitCodebookTest, RandomUniformStaysInBoundingBox) {
  const LabeledDataset data = small_dataset(2000, 2, 1);
  const Mlp enc(2, 32, 2, 7);
  InitOptions opt;
  opt.seed = 3;
  const Codebook cb = init_codebook(InitMode::kRandomUniform, enc, data, opt);
  const Matrix z = enc.apply(data.points);
  for (int c = 0; c < 2; ++c) {
    EXPECT_GE(cb.tokens.col(c).minCoeff(), z.col(c).minCoeff());
    EXPECT_LE(cb.tokens.col(c).maxCoeff(), z.col(c).maxCoeff());
  }
}

TEST(InitModeTest, ParseRoundTrip) {
  for (InitMode m : {InitMode::kUntrainedEncoder, InitMode::kPretrainedEncoder,
                     InitMode::kRandomUniform}) {
    EXPECT_EQ(parse_init_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_init_mode("bogus"), InvalidArgument);
}

}  // namespace
}  // namespace shrinklab
