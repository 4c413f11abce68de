#pragma once

#include <array>
#include <string>
#include <string_view>

#include "simal/binary_matrix.h"

namespace simal {

enum class MetricKind { kHamming, kJaccard, kCosine, kDice, kEuclidean, kNm1 };

inline constexpr std::array<MetricKind, 6> kAllMetrics = {
    MetricKind::kHamming, MetricKind::kJaccard,   MetricKind::kCosine,
    MetricKind::kDice,    MetricKind::kEuclidean, MetricKind::kNm1};

struct SimilarityMetric {
  MetricKind kind = MetricKind::kNm1;
  // Gaussian kernel width; only read for kEuclidean.
  double sigma = 1.0;

  void validate() const;
};

// Lower-case name: hamming, jaccard, cosine, dice, euclidean, nm1.
std::string_view metric_name(MetricKind kind);
// Case-insensitive inverse of metric_name. Throws ConfigError.
MetricKind parse_metric(std::string_view name);

struct PairCounts {
  std::size_t both_ones = 0;
  std::size_t ones_x = 0;
  std::size_t ones_y = 0;
  std::size_t mismatches = 0;
  std::size_t length = 0;
};

PairCounts pair_counts(RowView x, RowView y);

// Score in [0,1]. A zero denominator (empty rows under the set-based
// measures) yields 1 when both rows are identical and 0 otherwise.
double similarity(const SimilarityMetric& metric, const PairCounts& counts);
double similarity(const SimilarityMetric& metric, RowView x, RowView y);

// Members of `candidates` not in `seeds` whose best similarity to any seed is
// at least `threshold`.
IdSet neighbors_above(const BinaryMatrix& matrix, const IdSet& seeds, const IdSet& candidates,
                      const SimilarityMetric& metric, double threshold);

// Max similarity of `candidate` over `seeds`. Throws ContractError on empty
// seeds.
double max_similarity_to(const BinaryMatrix& matrix, const IdSet& seeds, RowId candidate,
                         const SimilarityMetric& metric);

}  // namespace simal
