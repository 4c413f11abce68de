#include <cmath>

#include <gtest/gtest.h>

#include "simal/errors.h"
#include "simal/similarity.h"
#include "test_util.h"

namespace simal {
namespace {

// Direct transcriptions of the set/vector definitions over dense 0/1 vectors;
// independent of the popcount kernel.
struct DenseOracle {
  std::vector<int> x, y;

  double inter() const {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] && y[i]) ? 1 : 0;
    return s;
  }
  double uni() const {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] || y[i]) ? 1 : 0;
    return s;
  }
  double norm_x() const { return std::sqrt(dot(x, x)); }
  double norm_y() const { return std::sqrt(dot(y, y)); }
  static double dot(const std::vector<int>& a, const std::vector<int>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  double hamming() const {
    double neq = 0;
    for (std::size_t i = 0; i < x.size(); ++i) neq += x[i] != y[i] ? 1 : 0;
    return 1.0 - neq / static_cast<double>(x.size());
  }
  double euclid(double sigma) const {
    double sq = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - y[i]) * (x[i] - y[i]);
    return std::exp(-sq / (sigma * sigma));
  }
};

const SimilarityMetric kJaccard{MetricKind::kJaccard, 1.0};
const SimilarityMetric kNm1{MetricKind::kNm1, 1.0};
const SimilarityMetric kDice{MetricKind::kDice, 1.0};
const SimilarityMetric kHamming{MetricKind::kHamming, 1.0};
const SimilarityMetric kCosine{MetricKind::kCosine, 1.0};
const SimilarityMetric kEuclid{MetricKind::kEuclidean, 1.0};

TEST(PairCounts, ExampleRows) {
  const BinaryMatrix m = testing::example_matrix();
  const PairCounts c12 = pair_counts(m.row(0), m.row(1));
  EXPECT_EQ(c12.both_ones, 2u);
  EXPECT_EQ(c12.ones_x, 3u);
  EXPECT_EQ(c12.ones_y, 3u);
  EXPECT_EQ(c12.mismatches, 2u);
  EXPECT_EQ(c12.length, 5u);

  const PairCounts c11 = pair_counts(m.row(0), m.row(0));
  EXPECT_EQ(c11.both_ones, 3u);
  EXPECT_EQ(c11.mismatches, 0u);

  const BinaryMatrix z = testing::example_matrix_with_zero_row();
  const PairCounts c1z = pair_counts(z.row(0), z.row(3));
  EXPECT_EQ(c1z.both_ones, 0u);
  EXPECT_EQ(c1z.mismatches, 3u);
}

TEST(PairCounts, LengthMismatch) {
  const BinaryMatrix a(1, 5);
  const BinaryMatrix b(1, 6);
  EXPECT_THROW(pair_counts(a.row(0), b.row(0)), DimensionError);
  EXPECT_THROW(similarity(kJaccard, a.row(0), b.row(0)), DimensionError);
}

TEST(Similarity, WorkedExamples) {
  const BinaryMatrix m = testing::example_matrix();
  const RowView r1 = m.row(0), r2 = m.row(1), r3 = m.row(2);
  EXPECT_NEAR(similarity(kJaccard, r1, r2), 0.5, 1e-12);
  EXPECT_NEAR(similarity(kNm1, r1, r2), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(similarity(kDice, r2, r3), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(similarity(kHamming, r1, r3), 0.6, 1e-12);
  EXPECT_NEAR(similarity(kCosine, r1, r3), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(similarity(kEuclid, r1, r2), std::exp(-2.0), 1e-12);
  for (MetricKind k : kAllMetrics) {
    EXPECT_DOUBLE_EQ(similarity({k, 1.0}, r1, r1), 1.0) << metric_name(k);
  }
}

TEST(Similarity, ZeroVectorConvention) {
  const BinaryMatrix m = testing::example_matrix_with_zero_row();
  const RowView zero = m.row(3);
  for (MetricKind k : kAllMetrics) {
    EXPECT_DOUBLE_EQ(similarity({k, 1.0}, zero, zero), 1.0) << metric_name(k);
  }
  EXPECT_EQ(similarity(kNm1, m.row(0), zero), 0.0);
  EXPECT_EQ(similarity(kCosine, zero, m.row(0)), 0.0);
  EXPECT_EQ(similarity(kJaccard, zero, m.row(1)), 0.0);
  EXPECT_EQ(similarity(kDice, zero, m.row(2)), 0.0);
  EXPECT_NEAR(similarity(kHamming, zero, m.row(0)), 0.4, 1e-15);
}

TEST(Similarity, MatchesDenseDefinitions) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const BinaryMatrix m = testing::random_matrix(2, 3 + seed * 11, 0.2 + 0.03 * seed, seed);
    DenseOracle o{testing::dense_bits(m, 0), testing::dense_bits(m, 1)};
    const RowView x = m.row(0), y = m.row(1);
    EXPECT_NEAR(similarity(kHamming, x, y), o.hamming(), 1e-12);
    EXPECT_NEAR(similarity({MetricKind::kEuclidean, 2.5}, x, y), o.euclid(2.5), 1e-12);
    if (o.uni() > 0) {
      EXPECT_NEAR(similarity(kJaccard, x, y), o.inter() / o.uni(), 1e-12);
    }
    if (o.norm_x() > 0 && o.norm_y() > 0) {
      EXPECT_NEAR(similarity(kCosine, x, y), DenseOracle::dot(o.x, o.y) / (o.norm_x() * o.norm_y()),
                  1e-12);
      EXPECT_NEAR(similarity(kDice, x, y),
                  2 * o.inter() / (DenseOracle::dot(o.x, o.x) + DenseOracle::dot(o.y, o.y)), 1e-12);
      EXPECT_NEAR(similarity(kNm1, x, y),
                  o.inter() / std::max(DenseOracle::dot(o.x, o.x), DenseOracle::dot(o.y, o.y)),
                  1e-12);
    }
  }
}

TEST(Similarity, Nm1DominatesJaccard) {
  const BinaryMatrix m = testing::random_matrix(40, 33, 0.25, 11);
  for (std::size_t a = 0; a < m.rows(); ++a) {
    for (std::size_t b = 0; b < m.rows(); ++b) {
      EXPECT_GE(similarity(kNm1, m.row(a), m.row(b)), similarity(kJaccard, m.row(a), m.row(b)));
    }
  }
}

TEST(Metric, ParsesNamesCaseInsensitively) {
  EXPECT_EQ(parse_metric("NM1"), MetricKind::kNm1);
  EXPECT_EQ(parse_metric("Euclidean"), MetricKind::kEuclidean);
  EXPECT_EQ(parse_metric("hamming"), MetricKind::kHamming);
  EXPECT_THROW(parse_metric("manhattan"), ConfigError);
  for (MetricKind k : kAllMetrics) EXPECT_EQ(parse_metric(metric_name(k)), k);
}

TEST(Metric, SigmaMustBePositive) {
  EXPECT_THROW((SimilarityMetric{MetricKind::kEuclidean, 0.0}.validate()), ConfigError);
  EXPECT_NO_THROW((SimilarityMetric{MetricKind::kJaccard, 0.0}.validate()));
}

TEST(NeighborsAbove, ExampleThresholds) {
  const BinaryMatrix m = testing::example_matrix();
  EXPECT_EQ(neighbors_above(m, {0}, {1, 2}, kJaccard, 0.5), (IdSet{1, 2}));
  EXPECT_TRUE(neighbors_above(m, {0}, {1, 2}, kJaccard, 1.0).empty());
  EXPECT_TRUE(neighbors_above(m, {}, {1, 2}, kJaccard, 0.0).empty());
}

TEST(NeighborsAbove, ExcludesSeedsAndUsesBestSeed) {
  const BinaryMatrix m = testing::example_matrix();
  // Seed row 0 is a candidate too but never returned.
  EXPECT_EQ(neighbors_above(m, {0}, {0, 1, 2}, kJaccard, 0.0), (IdSet{1, 2}));
  // Hamming(r2, r3) = 0.6: below a 0.7 cutoff, at a 0.6 cutoff.
  EXPECT_TRUE(neighbors_above(m, {1}, {2}, kHamming, 0.7).empty());
  EXPECT_EQ(neighbors_above(m, {0, 1}, {2}, kHamming, 0.6), (IdSet{2}));
}

TEST(MaxSimilarityTo, Examples) {
  const BinaryMatrix m = testing::example_matrix();
  EXPECT_NEAR(max_similarity_to(m, {1, 2}, 0, kCosine), 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(max_similarity_to(m, {0}, 0, kCosine), 1.0);
  const BinaryMatrix z = testing::example_matrix_with_zero_row();
  EXPECT_EQ(max_similarity_to(z, {3}, 0, kNm1), 0.0);
  EXPECT_THROW(max_similarity_to(m, {}, 0, kNm1), ContractError);
}

}  // namespace
}  // namespace simal
