#include "simal/ndcg.h"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "simal/errors.h"

namespace simal {

namespace {

double discount(std::size_t position) {
  return std::log(static_cast<double>(position) + 1.0) / std::log(2.0);
}

void require_cutoff(std::size_t k) {
  if (k == 0) throw ContractError("nDCG cutoff must be >= 1");
}

}  // namespace

double dcg(std::span<const std::uint8_t> relevance, std::size_t k) {
  require_cutoff(k);
  const std::size_t n = std::min(k, relevance.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (relevance[i] > 1) throw ContractError("relevance labels must be 0 or 1");
    if (relevance[i]) sum += 1.0 / discount(i + 1);
  }
  return sum;
}

double idcg(std::size_t num_anomalies, std::size_t k) {
  require_cutoff(k);
  const std::size_t n = std::min(num_anomalies, k);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += 1.0 / discount(i + 1);
  return sum;
}

double ndcg(std::span<const RowId> ranking, const GroundTruth& truth, std::size_t k) {
  require_cutoff(k);
  std::unordered_set<RowId> seen;
  seen.reserve(ranking.size());
  std::vector<std::uint8_t> rel;
  rel.reserve(ranking.size());
  for (RowId id : ranking) {
    if (!seen.insert(id).second) {
      throw ContractError("ranking contains id " + std::to_string(id) + " twice");
    }
    rel.push_back(truth.is_anomaly(id) ? 1 : 0);
  }
  const double ideal = idcg(truth.anomaly_ids.size(), k);
  if (ideal == 0.0) return 0.0;
  return dcg(rel, k) / ideal;
}

}  // namespace simal
