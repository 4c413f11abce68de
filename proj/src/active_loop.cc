#include "simal/active_loop.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "simal/errors.h"
#include "simal/ndcg.h"
#include "simal/rng.h"

namespace simal {

namespace {

// Stream tags for mix_seed; every random choice in a run derives from
// LoopConfig::seed.
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kTrainStream = 1000;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool in_unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

ModelParams initial_model(const BinaryMatrix& matrix, const LoopConfig& cfg) {
  return init_params(cfg.model_dims(matrix.cols()), mix_seed(cfg.seed, kInitStream),
                     cfg.weight_init_scale);
}

ModelParams train_round(const ModelParams& model, const LoopState& state,
                        const BinaryMatrix& matrix, const LoopConfig& cfg, std::size_t round,
                        std::vector<std::string>* warnings) {
  const std::vector<RowId> rows = training_rows(state, matrix.rows(), warnings);
  const std::size_t epochs = round == 0 ? cfg.epochs_initial : cfg.epochs_retrain;
  return train(model, matrix, rows, cfg.train_config(epochs, mix_seed(cfg.seed, kTrainStream + round)));
}

RankedList rank_state(const ModelParams& model, const LoopState& state, const LoopConfig& cfg,
                      const BinaryMatrix& matrix) {
  return rank_candidates(score_all(model, matrix, state.unlabeled), state, cfg, matrix);
}

std::size_t ndcg_cutoff(const LoopConfig& cfg, const GroundTruth& truth) {
  if (cfg.ndcg_k) return cfg.ndcg_k;
  return std::max<std::size_t>(1, truth.anomaly_ids.size());
}

void fill_record_tail(IterationRecord& rec, const LoopState& state, const RankedList& ranked,
                      const LoopConfig& cfg, const GroundTruth* truth) {
  const std::size_t head = std::min(kHistoryTopN, ranked.ids.size());
  rec.top_ranking.assign(ranked.ids.begin(), ranked.ids.begin() + head);
  rec.top_scores.assign(ranked.scores.begin(), ranked.scores.begin() + head);
  if (truth) rec.ndcg = ndcg(evaluation_ranking(state, ranked), *truth, ndcg_cutoff(cfg, *truth));
  rec.labeled_normal = state.labeled_normal.size();
  rec.labeled_anomaly = state.labeled_anomaly.size();
  rec.pseudo_normal = state.pseudo_normal.size();
  rec.priority = state.priority.size();
  rec.unlabeled = state.unlabeled.size();
}

std::vector<std::string> audit_ranking(const LoopState& state, const RankedList& ranked) {
  std::vector<RowId> sorted = ranked.ids;
  std::sort(sorted.begin(), sorted.end());
  if (!std::equal(sorted.begin(), sorted.end(), state.unlabeled.begin(), state.unlabeled.end())) {
    return {"ranking is not a permutation of the unlabeled set"};
  }
  return {};
}

}  // namespace

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kNormalLike: return "s1";
    case StrategyKind::kAnomalyLike: return "s2";
    case StrategyKind::kHybrid: return "hybrid";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  const std::string l = lower(name);
  for (StrategyKind kind : kAllStrategies) {
    if (strategy_name(kind) == l) return kind;
  }
  throw ConfigError("unknown strategy '" + std::string(name) + "' (expected s1, s2 or hybrid)");
}

std::string_view label_name(Label label) {
  return label == Label::kAnomaly ? "anomaly" : "normal";
}

Label parse_label(std::string_view name) {
  const std::string l = lower(name);
  if (l == "anomaly" || l == "1") return Label::kAnomaly;
  if (l == "normal" || l == "0") return Label::kNormal;
  throw ContractError("unknown label '" + std::string(name) + "' (expected normal or anomaly)");
}

void LoopConfig::validate() const {
  if (iterations < 1) throw ConfigError("T must be >= 1", "T");
  if (k_query < 1) throw ConfigError("k_query must be >= 1", "k_query");
  if (n0 < 1) throw ConfigError("n0 must be >= 1", "n0");
  if (!in_unit_interval(rho)) throw ConfigError("rho must lie in [0, 1]", "rho");
  if (!in_unit_interval(xi)) throw ConfigError("xi must lie in [0, 1]", "xi");
  if (!(lambda_priority >= 0.0 && std::isfinite(lambda_priority))) {
    throw ConfigError("lambda_priority must be a non-negative number", "lambda_priority");
  }
  if (early_stop_overlap && !(*early_stop_overlap >= 0.0)) {
    throw ConfigError("early_stop_overlap must be non-negative", "early_stop_overlap");
  }
  if (epochs_initial < 1) throw ConfigError("train.epochs_initial must be >= 1", "train.epochs_initial");
  if (epochs_retrain < 1) throw ConfigError("train.epochs_retrain must be >= 1", "train.epochs_retrain");
  metric.validate();
  try {
    train_config(1, 0).validate();
  } catch (const ConfigError& e) {
    throw ConfigError("train." + std::string(e.what()), "train." + e.field());
  }
}

void LoopConfig::validate(std::size_t n_rows) const {
  validate();
  if (n0 + iterations * k_query > n_rows) {
    throw ConfigError("query budget n0 + T*k_query = " + std::to_string(n0 + iterations * k_query) +
                      " exceeds the " + std::to_string(n_rows) + " rows of the dataset",
                      "n0");
  }
}

ModelDims LoopConfig::model_dims(std::size_t n_cols) const {
  ModelDims dims = ModelDims::for_input(n_cols);
  if (latent_dim) dims.latent = latent_dim;
  dims.hidden = hidden_dim;
  dims.validate();
  return dims;
}

TrainConfig LoopConfig::train_config(std::size_t epochs, std::uint64_t train_seed) const {
  TrainConfig t;
  t.learning_rate = learning_rate;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.seed = train_seed;
  t.weight_init_scale = weight_init_scale;
  return t;
}

LabelMap GroundTruthOracle::label(std::span<const RowId> ids) {
  LabelMap out;
  for (RowId id : ids) {
    if (id >= truth_.total) {
      throw ContractError("oracle asked about row " + std::to_string(id) + " of " +
                          std::to_string(truth_.total));
    }
    out[id] = truth_.is_anomaly(id) ? Label::kAnomaly : Label::kNormal;
  }
  return out;
}

std::unique_ptr<Oracle> ground_truth_oracle(const GroundTruth& truth) {
  return std::make_unique<GroundTruthOracle>(truth);
}

std::vector<RowId> draw_initial_sample(std::size_t n_rows, const LoopConfig& cfg) {
  if (cfg.n0 > n_rows) throw ConfigError("n0 exceeds the number of rows");
  std::vector<RowId> ids(n_rows);
  std::iota(ids.begin(), ids.end(), RowId{0});
  Rng rng(mix_seed(cfg.seed, kSampleStream));
  for (std::size_t i = 0; i < cfg.n0; ++i) {
    std::swap(ids[i], ids[i + rng.below(n_rows - i)]);
  }
  ids.resize(cfg.n0);
  return ids;
}

LoopState initial_state(std::size_t n_rows, const LabelMap& labels) {
  LoopState state;
  for (std::size_t r = 0; r < n_rows; ++r) state.unlabeled.insert(state.unlabeled.end(), static_cast<RowId>(r));
  for (const auto& [id, label] : labels) {
    if (id >= n_rows) throw RangeError("label for row " + std::to_string(id) + " out of range");
    state.unlabeled.erase(id);
    (label == Label::kAnomaly ? state.labeled_anomaly : state.labeled_normal).insert(id);
    state.query_log.push_back(id);
  }
  return state;
}

std::vector<RowId> training_rows(const LoopState& state, std::size_t n_rows,
                                 std::vector<std::string>* warnings) {
  std::vector<RowId> rows;
  rows.reserve(state.labeled_normal.size() + state.pseudo_normal.size());
  std::set_union(state.labeled_normal.begin(), state.labeled_normal.end(),
                 state.pseudo_normal.begin(), state.pseudo_normal.end(), std::back_inserter(rows));
  if (rows.empty()) {
    if (warnings) {
      warnings->push_back("no normal rows labeled yet; training on all " + std::to_string(n_rows) +
                          " rows");
    }
    rows.resize(n_rows);
    std::iota(rows.begin(), rows.end(), RowId{0});
  }
  return rows;
}

LoopStart init_loop(const BinaryMatrix& matrix, Oracle& oracle, const LoopConfig& cfg) {
  cfg.validate(matrix.rows());
  const std::vector<RowId> sample = draw_initial_sample(matrix.rows(), cfg);
  const LabelMap labels = oracle.label(sample);
  LoopStart start{initial_state(matrix.rows(), labels), initial_model(matrix, cfg), {}};
  start.state.query_log = sample;
  start.model = train_round(start.model, start.state, matrix, cfg, 0, &start.warnings);
  return start;
}

RankedList rank_candidates(const std::map<RowId, double>& errors, const LoopState& state,
                           const LoopConfig& cfg, const BinaryMatrix& matrix) {
  if (errors.size() != state.unlabeled.size()) {
    throw ContractError("errors cover " + std::to_string(errors.size()) + " ids but " +
                        std::to_string(state.unlabeled.size()) + " are unlabeled");
  }
  double lo = INFINITY;
  double hi = -INFINITY;
  for (RowId id : state.unlabeled) {
    const auto it = errors.find(id);
    if (it == errors.end()) {
      throw ContractError("missing reconstruction error for unlabeled id " + std::to_string(id));
    }
    lo = std::min(lo, it->second);
    hi = std::max(hi, it->second);
  }
  const double span = hi - lo;
  const bool boost = uses_anomaly_priority(cfg.strategy) && cfg.lambda_priority > 0.0 &&
                     !state.labeled_anomaly.empty();

  std::vector<std::pair<double, RowId>> scored;
  scored.reserve(errors.size());
  for (const auto& [id, error] : errors) {
    double score = span > 0.0 ? (error - lo) / span : 0.0;
    if (boost && state.priority.contains(id)) {
      score += cfg.lambda_priority * max_similarity_to(matrix, state.labeled_anomaly, id, cfg.metric);
    }
    scored.emplace_back(score, id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  RankedList ranked;
  ranked.ids.reserve(scored.size());
  ranked.scores.reserve(scored.size());
  for (const auto& [score, id] : scored) {
    ranked.ids.push_back(id);
    ranked.scores.push_back(score);
  }
  return ranked;
}

std::vector<RowId> select_queries(const RankedList& ranked, const LoopState& state,
                                  std::size_t k_query) {
  std::vector<RowId> out;
  for (RowId id : ranked.ids) {
    if (out.size() == k_query) break;
    if (!state.unlabeled.contains(id)) {
      throw ContractError("ranked id " + std::to_string(id) + " is not unlabeled");
    }
    out.push_back(id);
  }
  return out;
}

LoopState incorporate_labels(LoopState state, const LabelMap& labels,
                             std::vector<RowId>* contradictions) {
  for (const auto& [id, label] : labels) {
    if (!state.unlabeled.contains(id)) {
      throw ContractError("row " + std::to_string(id) + " is not unlabeled");
    }
  }
  for (const auto& [id, label] : labels) {
    state.unlabeled.erase(id);
    state.priority.erase(id);
    if (state.pseudo_normal.erase(id) && label == Label::kAnomaly && contradictions) {
      contradictions->push_back(id);
    }
    (label == Label::kAnomaly ? state.labeled_anomaly : state.labeled_normal).insert(id);
  }
  return state;
}

LoopState apply_strategy1(LoopState state, const BinaryMatrix& matrix, const LoopConfig& cfg) {
  IdSet fresh;
  std::set_difference(state.unlabeled.begin(), state.unlabeled.end(), state.pseudo_normal.begin(),
                      state.pseudo_normal.end(), std::inserter(fresh, fresh.end()));
  const IdSet found = neighbors_above(matrix, state.labeled_normal, fresh, cfg.metric, cfg.rho);
  state.pseudo_normal.insert(found.begin(), found.end());
  return state;
}

LoopState apply_strategy2(LoopState state, const BinaryMatrix& matrix, const LoopConfig& cfg) {
  state.priority = neighbors_above(matrix, state.labeled_anomaly, state.unlabeled, cfg.metric, cfg.xi);
  return state;
}

LoopState apply_strategies(LoopState state, const BinaryMatrix& matrix, const LoopConfig& cfg) {
  if (uses_normal_augmentation(cfg.strategy)) state = apply_strategy1(std::move(state), matrix, cfg);
  if (uses_anomaly_priority(cfg.strategy)) state = apply_strategy2(std::move(state), matrix, cfg);
  return state;
}

ModelParams retrain_model(const ModelParams& model, const LoopState& state,
                          const BinaryMatrix& matrix, const LoopConfig& cfg, std::size_t round,
                          std::vector<std::string>* warnings) {
  return train_round(model, state, matrix, cfg, round, warnings);
}

std::vector<RowId> evaluation_ranking(const LoopState& state, const RankedList& ranked) {
  std::vector<RowId> out;
  out.reserve(state.labeled_anomaly.size() + ranked.ids.size() + state.labeled_normal.size());
  out.insert(out.end(), state.labeled_anomaly.begin(), state.labeled_anomaly.end());
  out.insert(out.end(), ranked.ids.begin(), ranked.ids.end());
  out.insert(out.end(), state.labeled_normal.begin(), state.labeled_normal.end());
  return out;
}

double top_k_overlap(std::span<const RowId> a, std::span<const RowId> b, std::size_t k) {
  IdSet sa(a.begin(), a.begin() + std::min(k, a.size()));
  IdSet sb(b.begin(), b.begin() + std::min(k, b.size()));
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t common = 0;
  for (RowId id : sa) common += sb.contains(id) ? 1 : 0;
  return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

IterationOutcome run_iteration(const LoopState& state, const ModelParams& model,
                               const BinaryMatrix& matrix, Oracle& oracle, const LoopConfig& cfg,
                               const GroundTruth* truth) {
  if (state.iteration >= cfg.iterations) throw ContractError("loop already ran T iterations");
  const RankedList before = rank_state(model, state, cfg, matrix);
  const std::vector<RowId> queries = select_queries(before, state, cfg.k_query);
  if (queries.empty()) throw ContractError("no unlabeled rows left to query");
  const LabelMap labels = oracle.label(queries);

  IterationOutcome out{state, model, {}};
  IterationRecord& rec = out.record;
  rec.iteration = state.iteration + 1;
  rec.queried = queries;
  for (RowId id : queries) {
    const auto it = labels.find(id);
    if (it == labels.end()) throw ContractError("oracle gave no label for row " + std::to_string(id));
    rec.answers.push_back(it->second);
  }
  out.state = incorporate_labels(std::move(out.state), labels, &rec.contradictions);
  out.state.query_log.insert(out.state.query_log.end(), queries.begin(), queries.end());
  out.state = apply_strategies(std::move(out.state), matrix, cfg);
  out.state.iteration = rec.iteration;
  out.model = train_round(model, out.state, matrix, cfg, rec.iteration, &rec.warnings);
  fill_record_tail(rec, out.state, rank_state(out.model, out.state, cfg, matrix), cfg, truth);
  return out;
}

LoopResult run_loop(const BinaryMatrix& matrix, Oracle& oracle, const LoopConfig& cfg,
                    const RunOptions& options) {
  ActiveLearner learner(matrix, cfg, options.truth, options.audit);
  while (!learner.finished()) {
    const std::vector<RowId> queries = learner.pending();
    learner.submit(oracle.label(queries));
    learner.retrain();
    learner.rerank();
  }
  return learner.result();
}

std::vector<std::string> audit_state(const LoopState& state, std::size_t n_rows,
                                     StrategyKind strategy) {
  std::vector<std::string> issues;
  auto disjoint = [](const IdSet& a, const IdSet& b) {
    return std::none_of(a.begin(), a.end(), [&](RowId id) { return b.contains(id); });
  };
  auto subset = [](const IdSet& a, const IdSet& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  };
  if (!disjoint(state.labeled_normal, state.labeled_anomaly)) {
    issues.emplace_back("labeled_normal and labeled_anomaly overlap");
  }
  if (!disjoint(state.labeled_normal, state.unlabeled)) {
    issues.emplace_back("labeled_normal and unlabeled overlap");
  }
  if (!disjoint(state.labeled_anomaly, state.unlabeled)) {
    issues.emplace_back("labeled_anomaly and unlabeled overlap");
  }
  const std::size_t covered =
      state.labeled_normal.size() + state.labeled_anomaly.size() + state.unlabeled.size();
  if (covered != n_rows) {
    issues.emplace_back("partition covers " + std::to_string(covered) + " of " +
                        std::to_string(n_rows) + " rows");
  }
  if (!subset(state.pseudo_normal, state.unlabeled)) issues.emplace_back("pseudo_normal not within unlabeled");
  if (!subset(state.priority, state.unlabeled)) issues.emplace_back("priority not within unlabeled");
  if (strategy == StrategyKind::kNormalLike && !state.priority.empty()) {
    issues.emplace_back("strategy s1 produced a priority set");
  }
  if (strategy == StrategyKind::kAnomalyLike && !state.pseudo_normal.empty()) {
    issues.emplace_back("strategy s2 produced pseudo-normal rows");
  }
  return issues;
}

std::vector<std::string> audit_history(const LoopResult& result, const LoopConfig& cfg) {
  std::vector<std::string> issues;
  const auto& log = result.final_state.query_log;
  IdSet distinct(log.begin(), log.end());
  if (distinct.size() != log.size()) issues.emplace_back("an id was queried more than once");
  if (log.size() != result.total_queries) issues.emplace_back("query count does not match the query log");
  if (result.total_queries > cfg.n0 + cfg.iterations * cfg.k_query) {
    issues.emplace_back("query budget exceeded: " + std::to_string(result.total_queries));
  }
  if (result.history.size() > cfg.iterations) issues.emplace_back("more than T iterations ran");
  std::size_t prev_normal = 0;
  std::size_t prev_anomaly = 0;
  std::size_t queried = cfg.n0;
  for (const IterationRecord& rec : result.history) {
    if (rec.labeled_normal < prev_normal || rec.labeled_anomaly < prev_anomaly) {
      issues.emplace_back("labeled sets shrank at iteration " + std::to_string(rec.iteration));
    }
    prev_normal = rec.labeled_normal;
    prev_anomaly = rec.labeled_anomaly;
    queried += rec.queried.size();
    if (rec.labeled_normal + rec.labeled_anomaly != queried) {
      issues.emplace_back("labeled count disagrees with queries at iteration " +
                          std::to_string(rec.iteration));
    }
    if (cfg.strategy == StrategyKind::kNormalLike && rec.priority != 0) {
      issues.emplace_back("s1 priority set nonempty at iteration " + std::to_string(rec.iteration));
    }
    if (cfg.strategy == StrategyKind::kAnomalyLike && rec.pseudo_normal != 0) {
      issues.emplace_back("s2 pseudo-normal set nonempty at iteration " + std::to_string(rec.iteration));
    }
    for (const std::string& v : rec.audit_violations) {
      issues.push_back("iteration " + std::to_string(rec.iteration) + ": " + v);
    }
  }
  return issues;
}

ActiveLearner::ActiveLearner(const BinaryMatrix& matrix, LoopConfig cfg, const GroundTruth* truth,
                             bool audit)
    : matrix_(&matrix),
      cfg_(std::move(cfg)),
      truth_(truth),
      audit_(audit),
      model_(initial_model(matrix, cfg_)) {
  cfg_.validate(matrix.rows());
  if (truth_ && truth_->total != matrix.rows()) {
    throw DimensionError("ground truth covers " + std::to_string(truth_->total) +
                         " rows, dataset has " + std::to_string(matrix.rows()));
  }
  initial_sample_ = draw_initial_sample(matrix.rows(), cfg_);
}

std::vector<RowId> ActiveLearner::pending() const {
  if (!awaiting_labels()) return {};
  if (!started_) return initial_sample_;
  return select_queries(ranking_, state_, cfg_.k_query);
}

void ActiveLearner::submit(const LabelMap& labels) {
  if (!awaiting_labels()) throw ContractError("not awaiting labels");
  const std::vector<RowId> expected = pending();
  std::vector<RowId> missing;
  for (RowId id : expected) {
    if (!labels.contains(id)) missing.push_back(id);
  }
  std::vector<RowId> extra;
  const IdSet expected_set(expected.begin(), expected.end());
  for (const auto& [id, label] : labels) {
    if (!expected_set.contains(id)) extra.push_back(id);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "labels must cover exactly the pending ids;";
    if (!missing.empty()) {
      msg += " missing";
      for (RowId id : missing) msg += ' ' + std::to_string(id);
      msg += ';';
    }
    if (!extra.empty()) {
      msg += " unexpected";
      for (RowId id : extra) msg += ' ' + std::to_string(id);
    }
    throw ContractError(msg);
  }

  if (!started_) {
    state_ = initial_state(matrix_->rows(), labels);
    state_.query_log = expected;
  } else {
    IterationRecord rec;
    rec.iteration = state_.iteration + 1;
    rec.queried = expected;
    for (RowId id : expected) rec.answers.push_back(labels.at(id));
    state_ = incorporate_labels(std::move(state_), labels, &rec.contradictions);
    state_.query_log.insert(state_.query_log.end(), expected.begin(), expected.end());
    state_ = apply_strategies(std::move(state_), *matrix_, cfg_);
    state_.iteration = rec.iteration;
    open_record_ = std::move(rec);
  }
  submitted_ = true;
  retrained_ = false;
}

void ActiveLearner::retrain() {
  if (!submitted_ || retrained_) throw ContractError("retrain called out of order");
  const std::size_t round = started_ ? state_.iteration : 0;
  std::vector<std::string>* warnings = started_ ? &open_record_->warnings : &initial_warnings_;
  model_ = train_round(model_, state_, *matrix_, cfg_, round, warnings);
  retrained_ = true;
}

void ActiveLearner::rerank() {
  if (!retrained_) throw ContractError("rerank called before retrain");
  RankedList next = rank_state(model_, state_, cfg_, *matrix_);

  if (!started_) {
    if (truth_) initial_ndcg_ = ndcg(evaluation_ranking(state_, next), *truth_, ndcg_cutoff(cfg_, *truth_));
    started_ = true;
  } else {
    IterationRecord rec = std::move(*open_record_);
    open_record_.reset();
    fill_record_tail(rec, state_, next, cfg_, truth_);

    // Previous ranking with this round's queries removed, against the new one.
    std::vector<RowId> carried;
    carried.reserve(ranking_.ids.size());
    for (RowId id : ranking_.ids) {
      if (state_.unlabeled.contains(id)) carried.push_back(id);
    }
    rec.ranking_overlap = top_k_overlap(carried, next.ids, cfg_.k_query);

    if (audit_) {
      rec.audit_violations = audit_state(state_, matrix_->rows(), cfg_.strategy);
      for (std::string& v : audit_ranking(state_, next)) rec.audit_violations.push_back(std::move(v));
    }
    if (cfg_.early_stop_overlap && *rec.ranking_overlap >= *cfg_.early_stop_overlap) {
      stopped_early_ = true;
    }
    history_.push_back(std::move(rec));
  }
  ranking_ = std::move(next);
  submitted_ = false;
  retrained_ = false;
  if (stopped_early_ || state_.iteration >= cfg_.iterations || state_.unlabeled.empty()) {
    finished_ = true;
  }
}

LoopResult ActiveLearner::result() const {
  LoopResult r;
  r.final_ranking = ranking_;
  r.history = history_;
  r.total_queries = state_.query_log.size();
  r.initial_ndcg = initial_ndcg_;
  r.initial_warnings = initial_warnings_;
  r.stopped_early = stopped_early_;
  r.final_state = state_;
  return r;
}

}  // namespace simal
