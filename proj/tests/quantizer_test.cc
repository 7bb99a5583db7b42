#include "shrinklab/quantizer.h"

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gradient_checks.h"
#include "shrinklab/oracle.h"
#include "test_support.h"

namespace shrinklab {
namespace {

using testing::random_matrix;

TEST(AssignTest, ExactTokenMapsToItself) {
  std::mt19937_64 rng(1);
  const Matrix tokens = random_matrix(10, 3, rng);
  EXPECT_EQ(assign(tokens.row(7), tokens), IndexVector{7});
}

TEST(AssignTest, TiesGoToLowestIndex) {
  Matrix tokens(2, 2);
  tokens << 0, 0, 2, 0;
  Matrix z(1, 2);
  z << 1, 0;
  EXPECT_EQ(assign(z, tokens), IndexVector{0});
}

TEST(AssignTest, DuplicateTokensPickFirstCopy) {
  Matrix tokens(3, 1);
  tokens << 5, 1, 1;
  EXPECT_EQ(assign(Matrix::Constant(1, 1, 1.2), tokens), IndexVector{1});
}

TEST(AssignTest, Errors) {
  EXPECT_THROW(assign(Matrix::Zero(1, 2), Matrix(0, 2)), InvalidArgument);
  EXPECT_THROW(assign(Matrix::Zero(1, 2), Matrix::Zero(3, 3)),
               InvalidArgument);
}

TEST(AssignTest, MatchesExhaustiveScan) {
  std::mt19937_64 rng(2);
  const Matrix tokens = random_matrix(128, 32, rng);
  const Matrix z = random_matrix(1000, 32, rng);
  const IndexVector got = assign(z, tokens);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(got[i], oracle::exhaustive_nearest(z.row(i), tokens)) << i;
  }
}

// Property: agreement on mixed instances, including duplicated tokens and
// points planted on tokens or on exact midpoints.
TEST(AssignTest, FuzzAgainstOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> s_dist(1, 256), d_dist(1, 32);
  for (int trial = 0; trial < 300; ++trial) {
    const int s = s_dist(rng), d = d_dist(rng);
    Matrix tokens = random_matrix(s, d, rng);
    if (s > 2 && trial % 3 == 0) tokens.row(s - 1) = tokens.row(0);
    Matrix z = random_matrix(8, d, rng);
    z.row(0) = tokens.row(s / 2);
    if (s >= 2) z.row(1) = 0.5 * (tokens.row(0) + tokens.row(1));
    const IndexVector got = assign(z, tokens);
    for (int i = 0; i < z.rows(); ++i) {
      ASSERT_EQ(got[i], oracle::exhaustive_nearest(z.row(i), tokens));
    }
  }
}

TEST(QuantizeTest, OnTokensHasZeroLosses) {
  std::mt19937_64 rng(4);
  const Codebook cb = Codebook::from_tokens(random_matrix(6, 3, rng), 0.9, 0.25);
  const QuantizeResult r = quantize(cb.tokens, cb);
  EXPECT_EQ(r.commit_loss, 0.0);
  EXPECT_EQ(r.codebook_loss, 0.0);
}

TEST(QuantizeTest, PerElementMeanCommitLoss) {
  Matrix tokens(2, 2);
  tokens << 0, 0, 5, 5;
  const Codebook cb = Codebook::from_tokens(tokens, 0.9, 0.25);
  Matrix z(1, 2);
  z << 1, 0;
  const QuantizeResult r = quantize(z, cb);
  EXPECT_DOUBLE_EQ(r.commit_loss, 0.125);
  EXPECT_DOUBLE_EQ(r.codebook_loss, 0.5);
}

TEST(QuantizeTest, OutputRowsAreBitEqualToTokens) {
  std::mt19937_64 rng(5);
  const Codebook cb =
      Codebook::from_tokens(random_matrix(16, 4, rng), 0.9, 0.25);
  const Matrix z = random_matrix(50, 4, rng);
  const QuantizeResult r = quantize(z, cb);
  for (int i = 0; i < 50; ++i) {
    for (int c = 0; c < 4; ++c) {
      ASSERT_EQ(r.quantized(i, c), cb.tokens(r.indices[i], c));
      ASSERT_EQ(r.straight_through_output(i, c), cb.tokens(r.indices[i], c));
    }
  }
}

TEST(QuantizeTest, StraightThroughGradientCheck) {
  for (uint64_t s = 0; s < 30; ++s) {
    EXPECT_LT(testing::check_straight_through(s), 1e-4) << "seed " << s;
  }
}

TEST(QuantizeTest, CodebookLossGradientCheck) {
  for (uint64_t s = 0; s < 30; ++s) {
    EXPECT_LT(testing::check_codebook_grad(s), 1e-4) << "seed " << s;
  }
}

TEST(EmaTest, HandAlgebra) {
  Matrix tokens(1, 2);
  tokens << 1, 1;
  Codebook cb = Codebook::from_tokens(tokens, 0.9, 0.25, 1.0);
  Matrix z(2, 2);
  z << 2, 2, 2, 2;
  ema_update(cb, z, {0, 0});
  EXPECT_NEAR(cb.ema_cluster_size(0), 1.1, 1e-15);
  EXPECT_NEAR(cb.ema_embed_sum(0, 0), 1.3, 1e-15);
  EXPECT_NEAR(cb.ema_embed_sum(0, 1), 1.3, 1e-15);
  // Single token: the smoothing is exact, token = 1.3 / 1.1.
  EXPECT_NEAR(cb.tokens(0, 0), 1.3 / 1.1, 1e-12);
}

TEST(EmaTest, ZeroStateAndNoAssignmentsKeepsTokens) {
  std::mt19937_64 rng(6);
  Codebook cb = Codebook::from_tokens(random_matrix(4, 2, rng), 0.9, 0.25);
  cb.ema_cluster_size.setZero();
  cb.ema_embed_sum.setZero();
  const Matrix before = cb.tokens;
  ema_update(cb, Matrix(0, 2), {});
  EXPECT_EQ(cb.tokens, before);
}

TEST(EmaTest, ConvergesGeometricallyToRepeatedEmbedding) {
  Codebook cb = Codebook::from_tokens(Matrix::Zero(1, 3), 0.9, 0.25);
  cb.ema_cluster_size.setZero();
  cb.ema_embed_sum.setZero();
  Matrix e(1, 3);
  e << 0.5, -2.0, 3.0;
  for (int i = 0; i < 200; ++i) ema_update(cb, e, {0});
  EXPECT_LT((cb.tokens.row(0) - e.row(0)).norm(), 1e-6);
}

// Property: a token never assigned stays put apart from the smoothing of its
// denominator, which only rescales it by a factor close to 1.
TEST(EmaTest, UnusedTokenOnlyMovesThroughSmoothing) {
  Matrix tokens(3, 2);
  tokens << 0, 0, 4, 4, -3, 1;
  Codebook cb = Codebook::from_tokens(tokens, 0.9, 0.25);
  std::mt19937_64 rng(7);
  for (int step = 0; step < 20; ++step) {
    const Matrix z = random_matrix(16, 2, rng, -0.5, 0.5);
    ema_update(cb, z, IndexVector(16, 0));
    const double ratio = cb.tokens(2, 0) / tokens(2, 0);
    EXPECT_NEAR(cb.tokens(2, 1) / tokens(2, 1), ratio, 1e-12);
    EXPECT_NEAR(ratio, 1.0, 1e-3);
  }
}

TEST(PerplexityTest, Cases) {
  const std::vector<int64_t> uniform(128, 7);
  EXPECT_EQ(perplexity(uniform), 128.0);
  std::vector<int64_t> one(64, 0);
  one[5] = 40;
  EXPECT_EQ(perplexity(one), 1.0);
  std::vector<int64_t> two(10, 0);
  two[0] = two[1] = 1;
  EXPECT_DOUBLE_EQ(perplexity(two), 2.0);
  EXPECT_THROW(perplexity(std::vector<int64_t>(4, 0)), InvalidArgument);
}

TEST(PerplexityTest, BoundedBySupport) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int64_t> count(0, 50);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int64_t> c(32);
    for (auto& v : c) v = count(rng);
    c[0] += 1;
    const double p = perplexity(c);
    EXPECT_GE(p, 1.0);
    EXPECT_LE(p, 32.0);
  }
}

TEST(MeanPairwiseDistanceTest, Cases) {
  EXPECT_EQ(mean_pairwise_distance(Matrix::Constant(5, 3, 2.0)), 0.0);
  Matrix two(2, 2);
  two << 0, 0, 3, 0;
  EXPECT_DOUBLE_EQ(mean_pairwise_distance(two), 3.0);
  EXPECT_THROW(mean_pairwise_distance(Matrix::Zero(1, 2)), InvalidArgument);
}

TEST(MeanPairwiseDistanceTest, MatchesDoubleLoop) {
  std::mt19937_64 rng(9);
  const Matrix t = random_matrix(5, 4, rng);
  double sum = 0.0;
  int pairs = 0;
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) {
      double sq = 0.0;
      for (int c = 0; c < 4; ++c) sq += (t(i, c) - t(j, c)) * (t(i, c) - t(j, c));
      sum += std::sqrt(sq);
      ++pairs;
    }
  }
  EXPECT_NEAR(mean_pairwise_distance(t), sum / pairs, 1e-12);
}

TEST(MeanPairwiseDistanceTest, PermutationAndTranslationInvariant) {
  std::mt19937_64 rng(10);
  const Matrix t = random_matrix(12, 3, rng);
  Matrix shuffled(12, 3);
  std::vector<int> order(12);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int i = 0; i < 12; ++i) shuffled.row(i) = t.row(order[i]);
  RowVector shift(3);
  shift << 10.0, -4.0, 0.5;
  const Matrix moved = t.rowwise() + shift;
  EXPECT_NEAR(mean_pairwise_distance(shuffled), mean_pairwise_distance(t),
              1e-12);
  EXPECT_NEAR(mean_pairwise_distance(moved), mean_pairwise_distance(t), 1e-12);
}

TEST(CodebookCsvTest, RoundTrip) {
  std::mt19937_64 rng(11);
  const Matrix t = random_matrix(4, 3, rng);
  const std::vector<int64_t> usage{3, 0, 9, 1};
  const std::string text = format_codebook_csv(t, usage);
  EXPECT_EQ(text.substr(0, text.find('\n')), "token_id,usage_count,c0,c1,c2");
  const CodebookDump dump = parse_codebook_csv(text);
  ASSERT_TRUE(dump.usage_counts.has_value());
  EXPECT_EQ(*dump.usage_counts, usage);
  EXPECT_LT((dump.tokens - t).cwiseAbs().maxCoeff(), 1e-8);
  // Reformatting the parsed dump is byte-stable.
  EXPECT_EQ(format_codebook_csv(dump.tokens, *dump.usage_counts), text);
}

TEST(CodebookCsvTest, MissingUsageIsAbsent) {
  const CodebookDump a = parse_codebook_csv("token_id,c0\n0,1.5\n1,2\n");
  EXPECT_FALSE(a.usage_counts.has_value());
  EXPECT_EQ(a.tokens.rows(), 2);
  const CodebookDump b =
      parse_codebook_csv("token_id,usage_count,c0\n0,,1.5\n1,,2\n");
  EXPECT_FALSE(b.usage_counts.has_value());
}

TEST(CodebookCsvTest, MalformedRowNamesLine) {
  try {
    parse_codebook_csv("token_id,usage_count,c0\n0,1,0.5\n1,2,abc\n");
    FAIL() << "expected a FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

}  // namespace
}  // namespace shrinklab
