#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simal/autoencoder.h"
#include "simal/binary_matrix.h"
#include "simal/similarity.h"

namespace simal {

enum class StrategyKind { kNormalLike, kAnomalyLike, kHybrid };

inline constexpr std::array<StrategyKind, 3> kAllStrategies = {
    StrategyKind::kNormalLike, StrategyKind::kAnomalyLike, StrategyKind::kHybrid};

// s1, s2, hybrid.
std::string_view strategy_name(StrategyKind kind);
StrategyKind parse_strategy(std::string_view name);

inline bool uses_normal_augmentation(StrategyKind k) { return k != StrategyKind::kAnomalyLike; }
inline bool uses_anomaly_priority(StrategyKind k) { return k != StrategyKind::kNormalLike; }

struct LoopConfig {
  std::size_t iterations = 20;  // T
  std::size_t k_query = 10;
  StrategyKind strategy = StrategyKind::kHybrid;
  SimilarityMetric metric;
  double rho = 0.9;  // normal-like threshold
  double xi = 0.9;   // anomaly-like threshold
  double lambda_priority = 1.0;
  std::size_t n0 = 10;
  // Stop once consecutive rankings agree on at least this Jaccard overlap of
  // their top k_query ids.
  std::optional<double> early_stop_overlap;
  std::uint64_t seed = 0;

  double learning_rate = 1e-2;
  std::size_t batch_size = 32;
  std::size_t epochs_initial = 50;
  std::size_t epochs_retrain = 20;
  double weight_init_scale = 1.0;
  std::size_t latent_dim = 0;  // 0 picks ModelDims::for_input
  std::size_t hidden_dim = 0;

  // nDCG cutoff; 0 uses the number of ground-truth anomalies.
  std::size_t ndcg_k = 0;

  void validate() const;
  // Also checks n0 + T * k_query <= n_rows.
  void validate(std::size_t n_rows) const;

  ModelDims model_dims(std::size_t n_cols) const;
  TrainConfig train_config(std::size_t epochs, std::uint64_t seed) const;
};

enum class Label { kNormal, kAnomaly };
using LabelMap = std::map<RowId, Label>;

std::string_view label_name(Label label);
Label parse_label(std::string_view name);

class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual LabelMap label(std::span<const RowId> ids) = 0;
};

// Answers from a ground-truth table, immediately.
class GroundTruthOracle final : public Oracle {
 public:
  explicit GroundTruthOracle(GroundTruth truth) : truth_(std::move(truth)) {}
  LabelMap label(std::span<const RowId> ids) override;

 private:
  GroundTruth truth_;
};

std::unique_ptr<Oracle> ground_truth_oracle(const GroundTruth& truth);

struct LoopState {
  IdSet labeled_normal;
  IdSet labeled_anomaly;
  // Unlabeled ids assumed normal for training; still queryable.
  IdSet pseudo_normal;
  // Unlabeled ids similar to a labeled anomaly.
  IdSet priority;
  IdSet unlabeled;
  std::size_t iteration = 0;
  // Every id sent to the oracle, in query order.
  std::vector<RowId> query_log;
};

struct RankedList {
  std::vector<RowId> ids;
  std::vector<double> scores;
};

struct IterationRecord {
  std::size_t iteration = 0;
  std::vector<RowId> queried;
  std::vector<Label> answers;
  // Pseudo-normal ids the oracle labeled anomalous.
  std::vector<RowId> contradictions;
  // Head of the ranking produced after this iteration's update.
  std::vector<RowId> top_ranking;
  std::vector<double> top_scores;
  std::optional<double> ndcg;
  std::optional<double> ranking_overlap;
  std::size_t labeled_normal = 0;
  std::size_t labeled_anomaly = 0;
  std::size_t pseudo_normal = 0;
  std::size_t priority = 0;
  std::size_t unlabeled = 0;
  std::vector<std::string> warnings;
  std::vector<std::string> audit_violations;
};

inline constexpr std::size_t kHistoryTopN = 20;

struct LoopResult {
  RankedList final_ranking;
  std::vector<IterationRecord> history;
  std::size_t total_queries = 0;
  std::optional<double> initial_ndcg;
  std::vector<std::string> initial_warnings;
  bool stopped_early = false;
  LoopState final_state;
};

struct RunOptions {
  const GroundTruth* truth = nullptr;
  // Audit the partition and ranking after every iteration; violations are
  // recorded on the iteration record.
  bool audit = false;
};

// --- individual steps -----------------------------------------------------

// n0 distinct ids drawn uniformly from the seeded stream.
std::vector<RowId> draw_initial_sample(std::size_t n_rows, const LoopConfig& cfg);

// Labeled sets from the answers; every other row is unlabeled.
LoopState initial_state(std::size_t n_rows, const LabelMap& labels);

// labeled_normal and pseudo_normal, ascending. Falls back to every row (with a
// warning appended) when both are empty.
std::vector<RowId> training_rows(const LoopState& state, std::size_t n_rows,
                                 std::vector<std::string>* warnings = nullptr);

struct LoopStart {
  LoopState state;
  ModelParams model;
  std::vector<std::string> warnings;
};

LoopStart init_loop(const BinaryMatrix& matrix, Oracle& oracle, const LoopConfig& cfg);

// Min-max normalized error plus, under S2/Hybrid, lambda times the max
// similarity to a labeled anomaly for priority ids. Sorted by descending
// score, ties by ascending id.
RankedList rank_candidates(const std::map<RowId, double>& errors, const LoopState& state,
                           const LoopConfig& cfg, const BinaryMatrix& matrix);

// The first min(k_query, |unlabeled|) ranked ids. Empty once nothing is left.
std::vector<RowId> select_queries(const RankedList& ranked, const LoopState& state,
                                  std::size_t k_query);

// Moves answered ids out of the unlabeled pool. Pseudo-normal ids answered as
// anomalies are reported through `contradictions`.
LoopState incorporate_labels(LoopState state, const LabelMap& labels,
                             std::vector<RowId>* contradictions = nullptr);

LoopState apply_strategy1(LoopState state, const BinaryMatrix& matrix, const LoopConfig& cfg);
LoopState apply_strategy2(LoopState state, const BinaryMatrix& matrix, const LoopConfig& cfg);
// Dispatches on cfg.strategy.
LoopState apply_strategies(LoopState state, const BinaryMatrix& matrix, const LoopConfig& cfg);

// Warm-started retraining on training_rows(state) for the given round.
ModelParams retrain_model(const ModelParams& model, const LoopState& state,
                          const BinaryMatrix& matrix, const LoopConfig& cfg, std::size_t round,
                          std::vector<std::string>* warnings = nullptr);

// Labeled anomalies, then the unlabeled ranking, then labeled normals: the
// full anomaly list handed to an analyst, used for nDCG.
std::vector<RowId> evaluation_ranking(const LoopState& state, const RankedList& ranked);

// Jaccard overlap of the top-k ids of two rankings.
double top_k_overlap(std::span<const RowId> a, std::span<const RowId> b, std::size_t k);

struct IterationOutcome {
  LoopState state;
  ModelParams model;
  IterationRecord record;
};

// One full round: score, rank, query, label, strategy updates, retrain. The
// inputs are not modified, so an oracle failure leaves the caller's state
// intact.
IterationOutcome run_iteration(const LoopState& state, const ModelParams& model,
                               const BinaryMatrix& matrix, Oracle& oracle, const LoopConfig& cfg,
                               const GroundTruth* truth = nullptr);

LoopResult run_loop(const BinaryMatrix& matrix, Oracle& oracle, const LoopConfig& cfg,
                    const RunOptions& options = {});

// Partition, containment and strategy-purity violations of a state.
std::vector<std::string> audit_state(const LoopState& state, std::size_t n_rows,
                                     StrategyKind strategy);
// Query-budget, no-repeat and monotonicity violations across a finished run.
std::vector<std::string> audit_history(const LoopResult& result, const LoopConfig& cfg);

// --- step-wise driver -----------------------------------------------------

// Runs the loop one phase at a time so the labeling step can wait on a human.
// Phases per round: pending() -> submit() -> retrain() -> rerank().
// The first round labels the initial random sample.
class ActiveLearner {
 public:
  ActiveLearner(const BinaryMatrix& matrix, LoopConfig cfg, const GroundTruth* truth = nullptr,
                bool audit = false);

  const LoopConfig& config() const noexcept { return cfg_; }
  const BinaryMatrix& matrix() const noexcept { return *matrix_; }
  const GroundTruth* truth() const noexcept { return truth_; }

  // True after the initial sample has been labeled.
  bool started() const noexcept { return started_; }
  bool finished() const noexcept { return finished_; }
  bool awaiting_labels() const noexcept { return !finished_ && !submitted_; }

  // Ids the oracle must label next, in rank order.
  std::vector<RowId> pending() const;

  // Throws ContractError when `labels` does not cover exactly pending().
  void submit(const LabelMap& labels);
  void retrain();
  void rerank();

  const LoopState& state() const noexcept { return state_; }
  const ModelParams& model() const noexcept { return model_; }
  const RankedList& ranking() const noexcept { return ranking_; }
  const std::vector<IterationRecord>& history() const noexcept { return history_; }
  std::optional<double> initial_ndcg() const noexcept { return initial_ndcg_; }

  LoopResult result() const;

 private:
  const BinaryMatrix* matrix_;
  LoopConfig cfg_;
  const GroundTruth* truth_;
  bool audit_;

  LoopState state_;
  ModelParams model_;
  RankedList ranking_;
  std::vector<RowId> initial_sample_;
  std::vector<IterationRecord> history_;
  std::optional<IterationRecord> open_record_;
  std::vector<std::string> initial_warnings_;
  std::optional<double> initial_ndcg_;
  bool started_ = false;
  bool submitted_ = false;
  bool retrained_ = false;
  bool finished_ = false;
  bool stopped_early_ = false;
};

}  // namespace simal
