#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "simal/active_loop.h"

namespace simal {

struct GridDataset {
  std::string name;
  BinaryMatrix matrix;
  std::optional<GroundTruth> truth;
};

struct GridSpec {
  std::vector<GridDataset> datasets;
  std::vector<MetricKind> metrics{kAllMetrics.begin(), kAllMetrics.end()};
  std::vector<StrategyKind> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  // Repeat r runs with seed base.seed + r.
  std::size_t repeats = 1;
  LoopConfig base;

  void validate() const;
};

// One seeded loop run of one cell.
struct GridRun {
  std::size_t dataset = 0;
  MetricKind metric = MetricKind::kNm1;
  StrategyKind strategy = StrategyKind::kHybrid;
  std::uint64_t seed = 0;
  std::size_t ndcg_k = 0;
  double initial_ndcg = 0.0;
  std::vector<double> ndcg;  // iterations 1..T
};

struct GridResult {
  std::vector<std::string> dataset_names;
  std::vector<MetricKind> metrics;
  std::vector<StrategyKind> strategies;
  std::size_t repeats = 0;
  // Ordered by dataset, metric, strategy, seed.
  std::vector<GridRun> runs;

  const GridRun& run(std::size_t dataset, std::size_t metric, std::size_t strategy,
                     std::size_t repeat) const;
  // Mean over seeds of each run's mean per-iteration nDCG.
  double cell_mean(std::size_t dataset, std::size_t metric, std::size_t strategy) const;
};

std::string cell_name(MetricKind metric, StrategyKind strategy);

// Cells are independent; `jobs` worker threads share them. Output does not
// depend on `jobs`.
GridResult run_grid(const GridSpec& spec, std::size_t jobs = 1);

std::string trajectories_csv(const GridResult& result);
std::string heatmap_csv(const GridResult& result);
nlohmann::json boxplot_json(const GridResult& result);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace simal
