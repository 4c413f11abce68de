#include "simal/grid.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <numeric>
#include <thread>

#include "simal/errors.h"

namespace simal {

void GridSpec::validate() const {
  if (datasets.empty()) throw ConfigError("grid needs at least one dataset");
  if (metrics.empty()) throw ConfigError("grid needs at least one metric");
  if (strategies.empty()) throw ConfigError("grid needs at least one strategy");
  if (repeats == 0) throw ConfigError("grid repeats must be at least 1");
  base.validate();
  for (const GridDataset& d : datasets) {
    if (!d.truth) throw ConfigError("dataset '" + d.name + "' has no ground truth labels");
    if (d.truth->total != d.matrix.rows()) {
      throw ConfigError("dataset '" + d.name + "': labels cover " + std::to_string(d.truth->total) +
                        " rows, matrix has " + std::to_string(d.matrix.rows()));
    }
    base.validate(d.matrix.rows());
  }
}

const GridRun& GridResult::run(std::size_t dataset, std::size_t metric, std::size_t strategy,
                               std::size_t repeat) const {
  const std::size_t idx =
      ((dataset * metrics.size() + metric) * strategies.size() + strategy) * repeats + repeat;
  return runs.at(idx);
}

double GridResult::cell_mean(std::size_t dataset, std::size_t metric, std::size_t strategy) const {
  double total = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    const GridRun& g = run(dataset, metric, strategy, r);
    if (!g.ndcg.empty()) {
      total += std::accumulate(g.ndcg.begin(), g.ndcg.end(), 0.0) / static_cast<double>(g.ndcg.size());
    }
  }
  return total / static_cast<double>(repeats);
}

std::string cell_name(MetricKind metric, StrategyKind strategy) {
  return std::string(metric_name(metric)) + "_" + std::string(strategy_name(strategy));
}

GridResult run_grid(const GridSpec& spec, std::size_t jobs) {
  spec.validate();
  GridResult out;
  for (const GridDataset& d : spec.datasets) out.dataset_names.push_back(d.name);
  out.metrics = spec.metrics;
  out.strategies = spec.strategies;
  out.repeats = spec.repeats;

  for (std::size_t d = 0; d < spec.datasets.size(); ++d) {
    for (MetricKind m : spec.metrics) {
      for (StrategyKind s : spec.strategies) {
        for (std::size_t r = 0; r < spec.repeats; ++r) {
          GridRun g;
          g.dataset = d;
          g.metric = m;
          g.strategy = s;
          g.seed = spec.base.seed + r;
          out.runs.push_back(std::move(g));
        }
      }
    }
  }

  std::vector<std::exception_ptr> errors(out.runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < out.runs.size(); i = next++) {
      GridRun& g = out.runs[i];
      try {
        const GridDataset& data = spec.datasets[g.dataset];
        LoopConfig cfg = spec.base;
        cfg.metric.kind = g.metric;
        cfg.strategy = g.strategy;
        cfg.seed = g.seed;
        GroundTruthOracle oracle(*data.truth);
        const LoopResult r = run_loop(data.matrix, oracle, cfg, {&*data.truth, false});
        g.ndcg_k = cfg.ndcg_k ? cfg.ndcg_k : data.truth->anomaly_ids.size();
        g.initial_ndcg = r.initial_ndcg.value_or(0.0);
        for (const IterationRecord& rec : r.history) g.ndcg.push_back(rec.ndcg.value_or(0.0));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, out.runs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trajectories_csv(const GridResult& result) {
  std::string out = "dataset,metric,strategy,seed,iteration,ndcg\n";
  for (const GridRun& g : result.runs) {
    const std::string prefix = result.dataset_names[g.dataset] + "," +
                               std::string(metric_name(g.metric)) + "," +
                               std::string(strategy_name(g.strategy)) + "," + std::to_string(g.seed) + ",";
    for (std::size_t t = 0; t < g.ndcg.size(); ++t) {
      out += prefix + std::to_string(t + 1) + "," + format_double(g.ndcg[t]) + "\n";
    }
  }
  return out;
}

std::string heatmap_csv(const GridResult& result) {
  std::string out = "dataset";
  for (MetricKind m : result.metrics) {
    for (StrategyKind s : result.strategies) out += "," + cell_name(m, s);
  }
  out += "\n";
  for (std::size_t d = 0; d < result.dataset_names.size(); ++d) {
    out += result.dataset_names[d];
    for (std::size_t m = 0; m < result.metrics.size(); ++m) {
      for (std::size_t s = 0; s < result.strategies.size(); ++s) {
        out += "," + format_double(result.cell_mean(d, m, s));
      }
    }
    out += "\n";
  }
  return out;
}

nlohmann::json boxplot_json(const GridResult& result) {
  using nlohmann::json;
  json datasets = json::array();
  for (std::size_t d = 0; d < result.dataset_names.size(); ++d) {
    json cells = json::array();
    for (std::size_t m = 0; m < result.metrics.size(); ++m) {
      for (std::size_t s = 0; s < result.strategies.size(); ++s) {
        json scores = json::array();
        json per_seed = json::array();
        for (std::size_t r = 0; r < result.repeats; ++r) {
          const GridRun& g = result.run(d, m, s, r);
          for (double v : g.ndcg) scores.push_back(v);
          per_seed.push_back({{"seed", g.seed}, {"initial_ndcg", g.initial_ndcg}, {"ndcg", g.ndcg}});
        }
        cells.push_back({{"cell", cell_name(result.metrics[m], result.strategies[s])},
                         {"metric", std::string(metric_name(result.metrics[m]))},
                         {"strategy", std::string(strategy_name(result.strategies[s]))},
                         {"mean", result.cell_mean(d, m, s)},
                         {"scores", std::move(scores)},
                         {"runs", std::move(per_seed)}});
      }
    }
    const std::size_t k = result.runs.empty() ? 0 : result.run(d, 0, 0, 0).ndcg_k;
    datasets.push_back({{"dataset", result.dataset_names[d]}, {"ndcg_k", k}, {"cells", std::move(cells)}});
  }
  return {{"repeats", result.repeats}, {"datasets", std::move(datasets)}};
}

}  // namespace simal
