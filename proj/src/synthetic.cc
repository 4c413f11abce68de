#include <algorithm>
#include <cmath>
#include <numeric>

#include "simal/binary_matrix.h"
#include "simal/errors.h"
#include "simal/rng.h"

namespace simal {

void SynthConfig::validate() const {
  if (n_rows < 1) throw ConfigError("n_rows must be >= 1");
  if (n_cols < 1) throw ConfigError("n_cols must be >= 1");
  if (!(anomaly_fraction > 0.0 && anomaly_fraction < 0.5)) {
    throw ConfigError("anomaly_fraction must lie in (0, 0.5)");
  }
  if (!(normal_density >= 0.0 && normal_density <= 1.0)) {
    throw ConfigError("normal_density must lie in [0, 1]");
  }
  if (anomaly_signature_size > n_cols) {
    throw ConfigError("anomaly_signature_size exceeds n_cols");
  }
  if (!(noise_flip_prob >= 0.0 && noise_flip_prob < 0.5)) {
    throw ConfigError("noise_flip_prob must lie in [0, 0.5)");
  }
}

SyntheticData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  std::vector<std::uint32_t> cols(cfg.n_cols);
  std::iota(cols.begin(), cols.end(), 0u);
  rng.shuffle(std::span(cols));
  std::vector<std::uint32_t> signature(cols.begin(), cols.begin() + cfg.anomaly_signature_size);
  std::sort(signature.begin(), signature.end());

  const auto wanted = static_cast<std::size_t>(
      std::llround(cfg.anomaly_fraction * static_cast<double>(cfg.n_rows)));
  const std::size_t n_anomalies = std::clamp<std::size_t>(wanted, 1, cfg.n_rows);
  std::vector<RowId> rows(cfg.n_rows);
  std::iota(rows.begin(), rows.end(), RowId{0});
  rng.shuffle(std::span(rows));

  GroundTruth truth;
  truth.total = cfg.n_rows;
  truth.anomaly_ids.insert(rows.begin(), rows.begin() + n_anomalies);

  BinaryMatrix matrix(cfg.n_rows, cfg.n_cols);
  for (std::size_t r = 0; r < cfg.n_rows; ++r) {
    const bool anomalous = truth.is_anomaly(static_cast<RowId>(r));
    for (std::size_t c = 0; c < cfg.n_cols; ++c) {
      if (rng.bernoulli(cfg.normal_density)) matrix.set(r, c, true);
    }
    if (!anomalous) continue;
    for (std::uint32_t c : signature) matrix.set(r, c, true);
    if (cfg.noise_flip_prob > 0.0) {
      for (std::size_t c = 0; c < cfg.n_cols; ++c) {
        if (rng.bernoulli(cfg.noise_flip_prob)) matrix.set(r, c, !matrix.get(r, c));
      }
    }
  }

  std::vector<std::string> names;
  names.reserve(cfg.n_cols);
  for (std::size_t c = 0; c < cfg.n_cols; ++c) names.push_back("f" + std::to_string(c));
  matrix.set_feature_names(std::move(names));

  return {std::move(matrix), std::move(truth), std::move(signature)};
}

}  // namespace simal
