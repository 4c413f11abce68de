#pragma once

#include <filesystem>

#include <json.hpp>

#include "simal/active_loop.h"

namespace simal {

// Run configuration keys: T, k_query, strategy, metric, rho, xi,
// lambda_priority, n0, sigma, seed, early_stop_overlap, latent_dim,
// hidden_dim, ndcg_k, train.learning_rate, train.epochs_initial,
// train.epochs_retrain, train.batch_size, train.weight_init_scale.
// Train keys may also be nested under a "train" object. Keys absent from
// `doc` keep their value from `base`; unknown keys are rejected.
LoopConfig loop_config_from_json(const nlohmann::json& doc, LoopConfig base = {});
nlohmann::json loop_config_to_json(const LoopConfig& cfg);
LoopConfig load_loop_config(const std::filesystem::path& path, LoopConfig base = {});

nlohmann::json record_to_json(const IterationRecord& rec);
// Effective config, initial nDCG, per-iteration records and the final head
// of the ranking.
nlohmann::json history_to_json(const LoopResult& result, const LoopConfig& cfg);

// Doubles serialized with full round-trip precision; output is stable for
// identical inputs.
std::string dump_json(const nlohmann::json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace simal
