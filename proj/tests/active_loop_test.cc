#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "simal/active_loop.h"
#include "simal/errors.h"
#include "simal/rng.h"
#include "test_util.h"

namespace simal {
namespace {

SyntheticData small_data(std::uint64_t seed = 1, std::size_t rows = 300) {
  SynthConfig s;
  s.n_rows = rows;
  s.n_cols = 24;
  s.anomaly_fraction = 0.03;
  s.normal_density = 0.15;
  s.anomaly_signature_size = 6;
  s.noise_flip_prob = 0.02;
  s.seed = seed;
  return generate_synthetic(s);
}

LoopConfig small_config(StrategyKind strategy = StrategyKind::kHybrid) {
  LoopConfig cfg;
  cfg.iterations = 5;
  cfg.k_query = 5;
  cfg.n0 = 8;
  cfg.strategy = strategy;
  cfg.metric = {MetricKind::kNm1, 1.0};
  cfg.rho = 0.6;
  cfg.xi = 0.5;
  cfg.epochs_initial = 10;
  cfg.epochs_retrain = 4;
  cfg.learning_rate = 0.1;
  cfg.seed = 3;
  return cfg;
}

class FailingOracle : public Oracle {
 public:
  LabelMap label(std::span<const RowId>) override { throw std::runtime_error("analyst went home"); }
};

class CountingOracle : public Oracle {
 public:
  explicit CountingOracle(GroundTruth t) : inner_(std::move(t)) {}
  LabelMap label(std::span<const RowId> ids) override {
    calls.insert(calls.end(), ids.begin(), ids.end());
    return inner_.label(ids);
  }
  std::vector<RowId> calls;

 private:
  GroundTruthOracle inner_;
};

TEST(StrategyNames, RoundTrip) {
  for (StrategyKind k : kAllStrategies) EXPECT_EQ(parse_strategy(strategy_name(k)), k);
  EXPECT_EQ(parse_strategy("HYBRID"), StrategyKind::kHybrid);
  EXPECT_THROW(parse_strategy("s3"), ConfigError);
}

TEST(LoopConfig, Validation) {
  LoopConfig cfg;
  EXPECT_NO_THROW(cfg.validate(1000));
  EXPECT_THROW(cfg.validate(209), ConfigError);
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.rho = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.xi = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.k_query = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.n0 = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(GroundTruthOracle, AnswersFromTable) {
  GroundTruth t;
  t.total = 4;
  t.anomaly_ids = {2};
  GroundTruthOracle oracle(t);
  const std::vector<RowId> ids{2, 3};
  const LabelMap a = oracle.label(ids);
  EXPECT_EQ(a.at(2), Label::kAnomaly);
  EXPECT_EQ(a.at(3), Label::kNormal);
  EXPECT_EQ(oracle.label(ids), a);
  const std::vector<RowId> bad{4};
  EXPECT_THROW(oracle.label(bad), ContractError);
}

TEST(InitLoop, PartitionsAndTrains) {
  const SyntheticData data = small_data(1, 100);
  LoopConfig cfg = small_config();
  cfg.n0 = 5;
  cfg.iterations = 2;
  CountingOracle oracle(data.truth);
  const LoopStart a = init_loop(data.matrix, oracle, cfg);
  EXPECT_EQ(a.state.labeled_normal.size() + a.state.labeled_anomaly.size(), 5u);
  EXPECT_EQ(a.state.unlabeled.size(), 95u);
  EXPECT_EQ(oracle.calls.size(), 5u);
  for (RowId id : a.state.labeled_anomaly) EXPECT_TRUE(data.truth.is_anomaly(id));
  for (RowId id : a.state.labeled_normal) EXPECT_FALSE(data.truth.is_anomaly(id));
  EXPECT_EQ(a.model.lineage().size(), 2u);

  GroundTruthOracle again(data.truth);
  const LoopStart b = init_loop(data.matrix, again, cfg);
  EXPECT_EQ(a.state.labeled_normal, b.state.labeled_normal);
  EXPECT_EQ(a.state.unlabeled, b.state.unlabeled);
  EXPECT_EQ(a.model, b.model);
}

TEST(InitLoop, BudgetLargerThanDataset) {
  const SyntheticData data = small_data(1, 100);
  LoopConfig cfg = small_config();
  cfg.iterations = 20;
  cfg.k_query = 10;
  GroundTruthOracle oracle(data.truth);
  EXPECT_THROW(init_loop(data.matrix, oracle, cfg), ConfigError);
}

TEST(InitLoop, AllAnomalousSampleFallsBackToAllRows) {
  const BinaryMatrix m = testing::random_matrix(20, 6, 0.3, 1);
  GroundTruth all;
  all.total = 20;
  for (RowId r = 0; r < 20; ++r) all.anomaly_ids.insert(r);
  LoopConfig cfg = small_config();
  cfg.iterations = 1;
  cfg.k_query = 2;
  cfg.n0 = 3;
  GroundTruthOracle oracle(all);
  const LoopStart s = init_loop(m, oracle, cfg);
  EXPECT_EQ(s.state.labeled_anomaly.size(), 3u);
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find("all 20 rows"), std::string::npos);
}

LoopState state_with_unlabeled(std::size_t n) {
  LoopState s;
  for (RowId r = 0; r < n; ++r) s.unlabeled.insert(r);
  return s;
}

TEST(RankCandidates, S1FollowsRawErrorOrder) {
  const BinaryMatrix m = testing::random_matrix(6, 4, 0.5, 1);
  const LoopState s = state_with_unlabeled(6);
  const std::map<RowId, double> errors{{0, 0.3}, {1, 2.0}, {2, 0.1}, {3, 1.5}, {4, 0.7}, {5, 0.2}};
  const RankedList r = rank_candidates(errors, s, small_config(StrategyKind::kNormalLike), m);
  EXPECT_EQ(r.ids, (std::vector<RowId>{1, 3, 4, 0, 5, 2}));
  EXPECT_DOUBLE_EQ(r.scores.front(), 1.0);
  EXPECT_DOUBLE_EQ(r.scores.back(), 0.0);
}

TEST(RankCandidates, TiesBreakByAscendingId) {
  const BinaryMatrix m = testing::random_matrix(4, 4, 0.5, 1);
  const LoopState s = state_with_unlabeled(4);
  const std::map<RowId, double> errors{{0, 1.0}, {1, 2.0}, {2, 2.0}, {3, 1.0}};
  EXPECT_EQ(rank_candidates(errors, s, small_config(), m).ids, (std::vector<RowId>{1, 2, 0, 3}));
  const std::map<RowId, double> flat{{0, 1.0}, {1, 1.0}, {2, 1.0}, {3, 1.0}};
  EXPECT_EQ(rank_candidates(flat, s, small_config(), m).ids, (std::vector<RowId>{0, 1, 2, 3}));
}

TEST(RankCandidates, PriorityBonusDominatesWithLargeLambda) {
  const BinaryMatrix m = testing::example_matrix_with_zero_row();
  LoopState s;
  s.labeled_anomaly = {0};
  s.unlabeled = {1, 2, 3};
  s.priority = {3};
  LoopConfig cfg = small_config(StrategyKind::kAnomalyLike);
  cfg.lambda_priority = 10.0;
  cfg.metric = {MetricKind::kHamming, 1.0};
  const std::map<RowId, double> errors{{1, 5.0}, {2, 4.0}, {3, 0.0}};
  const RankedList r = rank_candidates(errors, s, cfg, m);
  EXPECT_EQ(r.ids.front(), 3u);
  // Hamming(r1, zero row) = 0.4.
  EXPECT_NEAR(r.scores.front(), 10.0 * 0.4, 1e-12);
  cfg.strategy = StrategyKind::kNormalLike;
  EXPECT_EQ(rank_candidates(errors, s, cfg, m).ids.front(), 1u);
}

TEST(RankCandidates, ErrorsMustCoverUnlabeled) {
  const BinaryMatrix m = testing::random_matrix(3, 4, 0.5, 1);
  const LoopState s = state_with_unlabeled(3);
  EXPECT_THROW(rank_candidates({{0, 1.0}, {1, 1.0}}, s, small_config(), m), ContractError);
  EXPECT_THROW(rank_candidates({{0, 1.0}, {1, 1.0}, {7, 1.0}}, s, small_config(), m), ContractError);
}

TEST(SelectQueries, TruncatesAndIsStable) {
  LoopState s = state_with_unlabeled(3);
  s.labeled_normal = {};
  RankedList r{{2, 0, 1}, {1.0, 0.5, 0.0}};
  EXPECT_EQ(select_queries(r, s, 10), (std::vector<RowId>{2, 0, 1}));
  EXPECT_EQ(select_queries(r, s, 2), (std::vector<RowId>{2, 0}));
  EXPECT_EQ(select_queries(r, s, 2), select_queries(r, s, 2));
  EXPECT_TRUE(select_queries(RankedList{}, LoopState{}, 5).empty());
  LoopState labeled = s;
  labeled.unlabeled.erase(2);
  labeled.labeled_normal.insert(2);
  EXPECT_THROW(select_queries(r, labeled, 2), ContractError);
}

TEST(Strategy1, ThresholdExtremes) {
  const BinaryMatrix m = testing::random_matrix(30, 16, 0.3, 4);
  LoopState s = state_with_unlabeled(30);
  s.unlabeled.erase(0);
  s.labeled_normal = {0};
  LoopConfig cfg = small_config(StrategyKind::kNormalLike);
  cfg.metric = {MetricKind::kJaccard, 1.0};
  cfg.rho = 1.0;
  EXPECT_TRUE(apply_strategy1(s, m, cfg).pseudo_normal.empty());
  cfg.rho = 0.0;
  EXPECT_EQ(apply_strategy1(s, m, cfg).pseudo_normal, s.unlabeled);
  LoopState no_seeds = state_with_unlabeled(30);
  EXPECT_TRUE(apply_strategy1(no_seeds, m, cfg).pseudo_normal.empty());
}

TEST(Strategy1, ExampleMatrix) {
  const BinaryMatrix m = testing::example_matrix();
  LoopState s;
  s.labeled_normal = {0};
  s.unlabeled = {1, 2};
  LoopConfig cfg = small_config(StrategyKind::kNormalLike);
  cfg.metric = {MetricKind::kJaccard, 1.0};
  cfg.rho = 0.5;
  EXPECT_EQ(apply_strategy1(s, m, cfg).pseudo_normal, (IdSet{1, 2}));
}

TEST(Strategy2, Basics) {
  BinaryMatrix m = testing::random_matrix(10, 8, 0.4, 2);
  // Row 5 duplicates row 1.
  for (std::size_t c = 0; c < 8; ++c) m.set(5, c, m.get(1, c));
  LoopState s = state_with_unlabeled(10);
  LoopConfig cfg = small_config(StrategyKind::kAnomalyLike);
  EXPECT_TRUE(apply_strategy2(s, m, cfg).priority.empty());
  s.unlabeled.erase(1);
  s.labeled_anomaly = {1};
  cfg.xi = 1.0;
  EXPECT_EQ(apply_strategy2(s, m, cfg).priority, (IdSet{5}));
  cfg.xi = 0.0;
  const LoopState all = apply_strategy2(s, m, cfg);
  EXPECT_TRUE(std::includes(s.unlabeled.begin(), s.unlabeled.end(), all.priority.begin(),
                            all.priority.end()));
  EXPECT_EQ(all.priority.size(), 9u);
}

TEST(IncorporateLabels, MovesIdsAndReportsContradictions) {
  LoopState s = state_with_unlabeled(6);
  s.pseudo_normal = {1, 2};
  s.priority = {3};
  std::vector<RowId> contradictions;
  const LoopState t = incorporate_labels(
      s, {{1, Label::kAnomaly}, {2, Label::kNormal}, {3, Label::kAnomaly}}, &contradictions);
  EXPECT_EQ(t.labeled_anomaly, (IdSet{1, 3}));
  EXPECT_EQ(t.labeled_normal, (IdSet{2}));
  EXPECT_TRUE(t.pseudo_normal.empty());
  EXPECT_TRUE(t.priority.empty());
  EXPECT_EQ(t.unlabeled, (IdSet{0, 4, 5}));
  EXPECT_EQ(contradictions, (std::vector<RowId>{1}));
  EXPECT_THROW(incorporate_labels(t, {{1, Label::kNormal}}), ContractError);
}

TEST(RunIteration, GrowsLabelsByKAndRemovesQueried) {
  const SyntheticData data = small_data();
  const LoopConfig cfg = small_config();
  GroundTruthOracle oracle(data.truth);
  LoopStart start = init_loop(data.matrix, oracle, cfg);
  LoopState state = start.state;
  ModelParams model = start.model;
  IdSet queried_so_far(state.query_log.begin(), state.query_log.end());
  for (std::size_t t = 0; t < 3; ++t) {
    const std::size_t before = state.labeled_normal.size() + state.labeled_anomaly.size();
    IterationOutcome out = run_iteration(state, model, data.matrix, oracle, cfg, &data.truth);
    EXPECT_EQ(out.state.labeled_normal.size() + out.state.labeled_anomaly.size(), before + 5);
    EXPECT_EQ(out.record.iteration, t + 1);
    for (RowId id : out.record.queried) EXPECT_TRUE(queried_so_far.insert(id).second);
    EXPECT_TRUE(out.record.ndcg.has_value());
    EXPECT_TRUE(audit_state(out.state, data.matrix.rows(), cfg.strategy).empty());
    state = std::move(out.state);
    model = std::move(out.model);
  }
}

TEST(RunIteration, OracleFailureLeavesStateUntouched) {
  const SyntheticData data = small_data();
  const LoopConfig cfg = small_config();
  GroundTruthOracle oracle(data.truth);
  const LoopStart start = init_loop(data.matrix, oracle, cfg);
  const LoopState copy = start.state;
  FailingOracle failing;
  EXPECT_THROW(run_iteration(start.state, start.model, data.matrix, failing, cfg), std::runtime_error);
  EXPECT_EQ(start.state.unlabeled, copy.unlabeled);
  EXPECT_EQ(start.state.query_log, copy.query_log);
}

TEST(RunIteration, StrategyDispatch) {
  const SyntheticData data = small_data();
  for (StrategyKind k : kAllStrategies) {
    LoopConfig cfg = small_config(k);
    cfg.rho = 0.0;
    cfg.xi = 0.0;
    GroundTruthOracle oracle(data.truth);
    const LoopStart start = init_loop(data.matrix, oracle, cfg);
    const IterationOutcome out = run_iteration(start.state, start.model, data.matrix, oracle, cfg);
    EXPECT_EQ(out.state.pseudo_normal.empty(), k == StrategyKind::kAnomalyLike) << strategy_name(k);
    const bool has_anomaly = !out.state.labeled_anomaly.empty();
    EXPECT_EQ(!out.state.priority.empty(), k != StrategyKind::kNormalLike && has_anomaly)
        << strategy_name(k);
  }
}

TEST(RunLoop, BudgetAndIterationCount) {
  const SyntheticData data = small_data();
  LoopConfig cfg = small_config();
  cfg.early_stop_overlap = 1.01;
  CountingOracle oracle(data.truth);
  const LoopResult r = run_loop(data.matrix, oracle, cfg, {&data.truth, true});
  EXPECT_EQ(r.history.size(), cfg.iterations);
  EXPECT_EQ(r.total_queries, cfg.n0 + cfg.iterations * cfg.k_query);
  EXPECT_EQ(oracle.calls.size(), r.total_queries);
  EXPECT_FALSE(r.stopped_early);
  EXPECT_TRUE(audit_history(r, cfg).empty());
  EXPECT_EQ(r.final_ranking.ids.size(), r.final_state.unlabeled.size());
  EXPECT_TRUE(r.initial_ndcg.has_value());
}

TEST(RunLoop, EarlyStopWhenOverlapReached) {
  const SyntheticData data = small_data();
  LoopConfig cfg = small_config();
  cfg.early_stop_overlap = 0.0;
  GroundTruthOracle oracle(data.truth);
  const LoopResult r = run_loop(data.matrix, oracle, cfg);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_TRUE(r.stopped_early);
}

TEST(RunLoop, StopsWhenUnlabeledExhausted) {
  const BinaryMatrix m = testing::random_matrix(12, 6, 0.4, 9);
  GroundTruth t;
  t.total = 12;
  t.anomaly_ids = {4};
  LoopConfig cfg = small_config();
  cfg.n0 = 2;
  cfg.k_query = 5;
  cfg.iterations = 2;
  GroundTruthOracle oracle(t);
  const LoopResult r = run_loop(m, oracle, cfg, {&t, true});
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_TRUE(r.final_ranking.ids.empty());
  EXPECT_TRUE(audit_history(r, cfg).empty());
  EXPECT_DOUBLE_EQ(*r.history.back().ndcg, 1.0);
}

TEST(RunLoop, DeterministicForSeed) {
  const SyntheticData data = small_data();
  const LoopConfig cfg = small_config();
  GroundTruthOracle o1(data.truth), o2(data.truth);
  const LoopResult a = run_loop(data.matrix, o1, cfg, {&data.truth});
  const LoopResult b = run_loop(data.matrix, o2, cfg, {&data.truth});
  EXPECT_EQ(a.final_ranking.ids, b.final_ranking.ids);
  EXPECT_EQ(a.final_ranking.scores, b.final_ranking.scores);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].queried, b.history[i].queried);
    EXPECT_EQ(a.history[i].ndcg, b.history[i].ndcg);
  }
}

TEST(RunLoop, StepDriverMatchesRunIteration) {
  const SyntheticData data = small_data(4);
  const LoopConfig cfg = small_config();
  GroundTruthOracle oracle(data.truth);
  const LoopResult looped = run_loop(data.matrix, oracle, cfg, {&data.truth});
  LoopStart start = init_loop(data.matrix, oracle, cfg);
  LoopState state = start.state;
  ModelParams model = start.model;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    IterationOutcome out = run_iteration(state, model, data.matrix, oracle, cfg, &data.truth);
    EXPECT_EQ(out.record.queried, looped.history[t].queried);
    EXPECT_EQ(out.record.top_ranking, looped.history[t].top_ranking);
    EXPECT_EQ(out.record.ndcg, looped.history[t].ndcg);
    state = std::move(out.state);
    model = std::move(out.model);
  }
}

// Plain reconstruction-error querying with no similarity guidance, written
// against the autoencoder API only.
std::vector<std::vector<RowId>> reference_queries(const BinaryMatrix& m, const GroundTruth& truth,
                                                  const LoopConfig& cfg) {
  const std::vector<RowId> sample = draw_initial_sample(m.rows(), cfg);
  IdSet unlabeled;
  for (RowId r = 0; r < m.rows(); ++r) unlabeled.insert(r);
  IdSet normals;
  for (RowId id : sample) {
    unlabeled.erase(id);
    if (!truth.is_anomaly(id)) normals.insert(id);
  }
  ModelParams model = init_params(cfg.model_dims(m.cols()), mix_seed(cfg.seed, 2), cfg.weight_init_scale);
  auto fit = [&](std::size_t round) {
    const std::vector<RowId> rows(normals.begin(), normals.end());
    model = train(model, m, rows,
                  cfg.train_config(round == 0 ? cfg.epochs_initial : cfg.epochs_retrain,
                                   mix_seed(cfg.seed, 1000 + round)));
  };
  fit(0);
  std::vector<std::vector<RowId>> out;
  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    std::vector<std::pair<double, RowId>> scored;
    for (RowId id : unlabeled) scored.emplace_back(-reconstruction_error(model, m.row(id)), id);
    std::sort(scored.begin(), scored.end());
    std::vector<RowId> q;
    for (std::size_t i = 0; i < cfg.k_query && i < scored.size(); ++i) q.push_back(scored[i].second);
    for (RowId id : q) {
      unlabeled.erase(id);
      if (!truth.is_anomaly(id)) normals.insert(id);
    }
    out.push_back(q);
    fit(t);
  }
  return out;
}

TEST(RunLoop, DisabledStrategiesReduceToErrorRanking) {
  SynthConfig s;
  s.n_rows = 200;
  s.n_cols = 32;
  s.normal_density = 0.3;
  s.anomaly_fraction = 0.05;
  s.seed = 12;
  const SyntheticData data = generate_synthetic(s);
  for (std::size_t a = 0; a < data.matrix.rows(); ++a) {
    for (std::size_t b = a + 1; b < data.matrix.rows(); ++b) {
      ASSERT_GT(pair_counts(data.matrix.row(a), data.matrix.row(b)).mismatches, 0u);
    }
  }
  for (StrategyKind k : kAllStrategies) {
    LoopConfig cfg = small_config(k);
    cfg.lambda_priority = 0.0;
    cfg.rho = 1.0;
    cfg.xi = 1.0;
    GroundTruthOracle oracle(data.truth);
    const LoopResult r = run_loop(data.matrix, oracle, cfg, {&data.truth});
    const auto expected = reference_queries(data.matrix, data.truth, cfg);
    ASSERT_EQ(r.history.size(), expected.size());
    for (std::size_t t = 0; t < expected.size(); ++t) {
      EXPECT_EQ(r.history[t].queried, expected[t]) << strategy_name(k) << " iteration " << t + 1;
    }
  }
}

TEST(ActiveLearner, RejectsIncompleteOrExtraLabels) {
  const SyntheticData data = small_data();
  ActiveLearner learner(data.matrix, small_config(), &data.truth);
  const auto pending = learner.pending();
  ASSERT_EQ(pending.size(), 8u);
  LabelMap partial;
  for (std::size_t i = 1; i < pending.size(); ++i) partial[pending[i]] = Label::kNormal;
  try {
    learner.submit(partial);
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("missing " + std::to_string(pending[0])), std::string::npos);
  }
  LabelMap extra = partial;
  extra[pending[0]] = Label::kNormal;
  RowId outsider = 0;
  while (std::find(pending.begin(), pending.end(), outsider) != pending.end()) ++outsider;
  extra[outsider] = Label::kNormal;
  EXPECT_THROW(learner.submit(extra), ContractError);
  extra.erase(outsider);
  learner.submit(extra);
  EXPECT_FALSE(learner.awaiting_labels());
  EXPECT_THROW(learner.submit(extra), ContractError);
  EXPECT_THROW(learner.rerank(), ContractError);
  learner.retrain();
  learner.rerank();
  EXPECT_TRUE(learner.started());
  EXPECT_EQ(learner.pending().size(), 5u);
}

TEST(ActiveLearner, LogsContradictedPseudoNormals) {
  // rho = 0 marks every unlabeled row pseudo-normal, so any anomaly queried
  // afterwards contradicts the assumption.
  const SyntheticData data = small_data(2);
  LoopConfig cfg = small_config(StrategyKind::kNormalLike);
  cfg.rho = 0.0;
  GroundTruthOracle oracle(data.truth);
  const LoopResult r = run_loop(data.matrix, oracle, cfg, {&data.truth, true});
  std::size_t anomalies_after_first = 0;
  std::size_t contradictions = 0;
  for (std::size_t t = 1; t < r.history.size(); ++t) {
    for (std::size_t i = 0; i < r.history[t].queried.size(); ++i) {
      anomalies_after_first += r.history[t].answers[i] == Label::kAnomaly;
    }
    contradictions += r.history[t].contradictions.size();
  }
  EXPECT_EQ(contradictions, anomalies_after_first);
  EXPECT_TRUE(audit_history(r, cfg).empty());
}

TEST(Audit, DetectsBrokenState) {
  LoopState s = state_with_unlabeled(4);
  s.labeled_normal = {1};
  EXPECT_FALSE(audit_state(s, 4, StrategyKind::kHybrid).empty());
  s.unlabeled.erase(1);
  EXPECT_TRUE(audit_state(s, 4, StrategyKind::kHybrid).empty());
  s.priority = {2};
  EXPECT_FALSE(audit_state(s, 4, StrategyKind::kNormalLike).empty());
  s.priority.clear();
  s.pseudo_normal = {1};
  EXPECT_FALSE(audit_state(s, 4, StrategyKind::kHybrid).empty());
}

TEST(EvaluationRanking, KnownAnomaliesFirstNormalsLast) {
  LoopState s;
  s.labeled_anomaly = {7};
  s.labeled_normal = {1, 2};
  s.unlabeled = {0, 3};
  const RankedList r{{3, 0}, {1.0, 0.0}};
  EXPECT_EQ(evaluation_ranking(s, r), (std::vector<RowId>{7, 3, 0, 1, 2}));
}

TEST(TopKOverlap, Jaccard) {
  const std::vector<RowId> a{1, 2, 3, 4};
  const std::vector<RowId> b{2, 1, 5, 6};
  EXPECT_DOUBLE_EQ(top_k_overlap(a, b, 2), 1.0);
  EXPECT_DOUBLE_EQ(top_k_overlap(a, b, 3), 2.0 / 4.0);
  EXPECT_DOUBLE_EQ(top_k_overlap({}, {}, 3), 1.0);
}

}  // namespace
}  // namespace simal
