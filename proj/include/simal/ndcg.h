#pragma once

#include <cstdint>
#include <span>

#include "simal/binary_matrix.h"

namespace simal {

// Discounted cumulative gain over the first min(k, rel.size()) positions of a
// binary relevance list: sum of (2^r_i - 1) / log2(i + 1), i from 1.
double dcg(std::span<const std::uint8_t> relevance, std::size_t k);

// DCG of an ideal list with all `num_anomalies` relevant items first.
double idcg(std::size_t num_anomalies, std::size_t k);

// DCG/IDCG of `ranking` against the anomaly set, 0 when the ideal gain is 0.
// Throws ContractError on duplicate ids or k == 0.
double ndcg(std::span<const RowId> ranking, const GroundTruth& truth, std::size_t k);

}  // namespace simal
