#include "simal/loop_io.h"

#include <fstream>
#include <set>

#include "simal/errors.h"

namespace simal {

namespace {

using nlohmann::json;

// Flattens {"train": {...}} into dotted keys.
json flatten(const json& doc) {
  if (!doc.is_object()) throw ConfigError("run configuration must be a JSON object");
  json flat = json::object();
  for (const auto& [key, value] : doc.items()) {
    if (key == "train" && value.is_object()) {
      for (const auto& [sub, v] : value.items()) flat["train." + sub] = v;
    } else {
      flat[key] = value;
    }
  }
  return flat;
}

template <typename T>
T get_as(const json& flat, const std::string& key) {
  try {
    return flat.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type", key);
  }
}

std::size_t get_count(const json& flat, const std::string& key) {
  const json& v = flat.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer", key);
  }
  return v.get<std::size_t>();
}

template <typename F>
auto with_field(const std::string& key, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError& e) {
    if (!e.field().empty()) throw;
    throw ConfigError(e.what(), key);
  }
}

}  // namespace

LoopConfig loop_config_from_json(const json& doc, LoopConfig cfg) {
  const json flat = flatten(doc);
  static const std::set<std::string> known = {
      "T", "k_query", "strategy", "metric", "rho", "xi", "lambda_priority", "n0", "sigma", "seed",
      "early_stop_overlap", "latent_dim", "hidden_dim", "ndcg_k", "train.learning_rate",
      "train.epochs_initial", "train.epochs_retrain", "train.batch_size",
      "train.weight_init_scale"};
  for (const auto& [key, value] : flat.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'", key);
  }
  auto has = [&](const char* key) { return flat.contains(key) && !flat.at(key).is_null(); };

  if (has("T")) cfg.iterations = get_count(flat, "T");
  if (has("k_query")) cfg.k_query = get_count(flat, "k_query");
  if (has("strategy")) {
    cfg.strategy = with_field("strategy", [&] { return parse_strategy(get_as<std::string>(flat, "strategy")); });
  }
  if (has("metric")) {
    cfg.metric.kind = with_field("metric", [&] { return parse_metric(get_as<std::string>(flat, "metric")); });
  }
  if (has("sigma")) cfg.metric.sigma = get_as<double>(flat, "sigma");
  if (has("rho")) cfg.rho = get_as<double>(flat, "rho");
  if (has("xi")) cfg.xi = get_as<double>(flat, "xi");
  if (has("lambda_priority")) cfg.lambda_priority = get_as<double>(flat, "lambda_priority");
  if (has("n0")) cfg.n0 = get_count(flat, "n0");
  if (has("seed")) cfg.seed = get_as<std::uint64_t>(flat, "seed");
  if (has("early_stop_overlap")) cfg.early_stop_overlap = get_as<double>(flat, "early_stop_overlap");
  if (has("latent_dim")) cfg.latent_dim = get_count(flat, "latent_dim");
  if (has("hidden_dim")) cfg.hidden_dim = get_count(flat, "hidden_dim");
  if (has("ndcg_k")) cfg.ndcg_k = get_count(flat, "ndcg_k");
  if (has("train.learning_rate")) cfg.learning_rate = get_as<double>(flat, "train.learning_rate");
  if (has("train.epochs_initial")) cfg.epochs_initial = get_count(flat, "train.epochs_initial");
  if (has("train.epochs_retrain")) cfg.epochs_retrain = get_count(flat, "train.epochs_retrain");
  if (has("train.batch_size")) cfg.batch_size = get_count(flat, "train.batch_size");
  if (has("train.weight_init_scale")) {
    cfg.weight_init_scale = get_as<double>(flat, "train.weight_init_scale");
  }
  return cfg;
}

json loop_config_to_json(const LoopConfig& cfg) {
  json j = json::object();
  j["T"] = cfg.iterations;
  j["k_query"] = cfg.k_query;
  j["strategy"] = std::string(strategy_name(cfg.strategy));
  j["metric"] = std::string(metric_name(cfg.metric.kind));
  j["sigma"] = cfg.metric.sigma;
  j["rho"] = cfg.rho;
  j["xi"] = cfg.xi;
  j["lambda_priority"] = cfg.lambda_priority;
  j["n0"] = cfg.n0;
  j["seed"] = cfg.seed;
  j["early_stop_overlap"] = cfg.early_stop_overlap ? json(*cfg.early_stop_overlap) : json(nullptr);
  j["latent_dim"] = cfg.latent_dim;
  j["hidden_dim"] = cfg.hidden_dim;
  j["ndcg_k"] = cfg.ndcg_k;
  j["train.learning_rate"] = cfg.learning_rate;
  j["train.epochs_initial"] = cfg.epochs_initial;
  j["train.epochs_retrain"] = cfg.epochs_retrain;
  j["train.batch_size"] = cfg.batch_size;
  j["train.weight_init_scale"] = cfg.weight_init_scale;
  return j;
}

LoopConfig load_loop_config(const std::filesystem::path& path, LoopConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return loop_config_from_json(doc, std::move(base));
}

json record_to_json(const IterationRecord& rec) {
  json j;
  j["iteration"] = rec.iteration;
  j["queried"] = rec.queried;
  json answers = json::array();
  for (Label l : rec.answers) answers.push_back(std::string(label_name(l)));
  j["labels"] = answers;
  j["contradictions"] = rec.contradictions;
  j["top_ranking"] = rec.top_ranking;
  j["top_scores"] = rec.top_scores;
  j["ndcg"] = rec.ndcg ? json(*rec.ndcg) : json(nullptr);
  j["ranking_overlap"] = rec.ranking_overlap ? json(*rec.ranking_overlap) : json(nullptr);
  j["counts"] = {{"labeled_normal", rec.labeled_normal},
                 {"labeled_anomaly", rec.labeled_anomaly},
                 {"pseudo_normal", rec.pseudo_normal},
                 {"priority", rec.priority},
                 {"unlabeled", rec.unlabeled}};
  j["warnings"] = rec.warnings;
  return j;
}

json history_to_json(const LoopResult& result, const LoopConfig& cfg) {
  json j;
  j["config"] = loop_config_to_json(cfg);
  j["initial_ndcg"] = result.initial_ndcg ? json(*result.initial_ndcg) : json(nullptr);
  j["initial_warnings"] = result.initial_warnings;
  json iterations = json::array();
  for (const IterationRecord& rec : result.history) iterations.push_back(record_to_json(rec));
  j["iterations"] = std::move(iterations);
  j["total_queries"] = result.total_queries;
  j["stopped_early"] = result.stopped_early;
  const std::size_t head = std::min(kHistoryTopN, result.final_ranking.ids.size());
  j["final_top_ranking"] =
      std::vector<RowId>(result.final_ranking.ids.begin(), result.final_ranking.ids.begin() + head);
  return j;
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace simal
