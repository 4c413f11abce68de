#include "simal/similarity.h"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>

#include "simal/errors.h"

namespace simal {

void SimilarityMetric::validate() const {
  if (kind == MetricKind::kEuclidean && !(sigma > 0.0 && std::isfinite(sigma))) {
    throw ConfigError("sigma must be a positive finite number for the euclidean kernel", "sigma");
  }
}

std::string_view metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::kHamming: return "hamming";
    case MetricKind::kJaccard: return "jaccard";
    case MetricKind::kCosine: return "cosine";
    case MetricKind::kDice: return "dice";
    case MetricKind::kEuclidean: return "euclidean";
    case MetricKind::kNm1: return "nm1";
  }
  return "?";
}

MetricKind parse_metric(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (MetricKind kind : kAllMetrics) {
    if (metric_name(kind) == lower) return kind;
  }
  throw ConfigError("unknown similarity metric '" + std::string(name) +
                    "' (expected hamming, jaccard, cosine, dice, euclidean or nm1)");
}

PairCounts pair_counts(RowView x, RowView y) {
  if (x.size() != y.size()) {
    throw DimensionError("row lengths differ: " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
  }
  const auto wx = x.words();
  const auto wy = y.words();
  PairCounts c;
  c.length = x.size();
  for (std::size_t i = 0; i < wx.size(); ++i) {
    c.both_ones += static_cast<std::size_t>(std::popcount(wx[i] & wy[i]));
    c.ones_x += static_cast<std::size_t>(std::popcount(wx[i]));
    c.ones_y += static_cast<std::size_t>(std::popcount(wy[i]));
    c.mismatches += static_cast<std::size_t>(std::popcount(wx[i] ^ wy[i]));
  }
  return c;
}

double similarity(const SimilarityMetric& metric, const PairCounts& c) {
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  // Identical rows are exactly the rows with no mismatches.
  const double degenerate = c.mismatches == 0 ? 1.0 : 0.0;
  switch (metric.kind) {
    case MetricKind::kHamming:
      return 1.0 - d(c.mismatches) / d(c.length);
    case MetricKind::kJaccard: {
      const std::size_t union_size = c.ones_x + c.ones_y - c.both_ones;
      return union_size == 0 ? degenerate : d(c.both_ones) / d(union_size);
    }
    case MetricKind::kCosine: {
      const std::size_t prod = c.ones_x * c.ones_y;
      return prod == 0 ? degenerate : d(c.both_ones) / std::sqrt(d(prod));
    }
    case MetricKind::kDice: {
      const std::size_t total = c.ones_x + c.ones_y;
      return total == 0 ? degenerate : 2.0 * d(c.both_ones) / d(total);
    }
    case MetricKind::kEuclidean:
      return std::exp(-d(c.mismatches) / (metric.sigma * metric.sigma));
    case MetricKind::kNm1: {
      const std::size_t denom = std::max(c.ones_x, c.ones_y);
      return denom == 0 ? degenerate : d(c.both_ones) / d(denom);
    }
  }
  return 0.0;
}

double similarity(const SimilarityMetric& metric, RowView x, RowView y) {
  return similarity(metric, pair_counts(x, y));
}

IdSet neighbors_above(const BinaryMatrix& matrix, const IdSet& seeds, const IdSet& candidates,
                      const SimilarityMetric& metric, double threshold) {
  IdSet out;
  if (seeds.empty()) return out;
  std::vector<RowView> seed_rows;
  seed_rows.reserve(seeds.size());
  for (RowId s : seeds) seed_rows.push_back(matrix.row(s));
  for (RowId c : candidates) {
    if (seeds.contains(c)) continue;
    const RowView row = matrix.row(c);
    for (const RowView& s : seed_rows) {
      if (similarity(metric, row, s) >= threshold) {
        out.insert(c);
        break;
      }
    }
  }
  return out;
}

double max_similarity_to(const BinaryMatrix& matrix, const IdSet& seeds, RowId candidate,
                         const SimilarityMetric& metric) {
  if (seeds.empty()) throw ContractError("max_similarity_to needs at least one seed");
  const RowView row = matrix.row(candidate);
  double best = 0.0;
  for (RowId s : seeds) best = std::max(best, similarity(metric, row, matrix.row(s)));
  return best;
}

}  // namespace simal
