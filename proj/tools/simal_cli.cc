#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "simal/errors.h"
#include "simal/grid.h"
#include "simal/loop_io.h"
#include "simal/ndcg.h"
#include "simal/oracle_service.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simal;

namespace {

// Loop flags shared by run, grid and serve. Only flags given on the command
// line override the config file.
struct LoopFlags {
  std::string config_path;
  std::map<std::string, CLI::Option*> options;
  json values = json::object();

  std::size_t T = 0, k_query = 0, n0 = 0, latent_dim = 0, hidden_dim = 0, ndcg_k = 0;
  std::size_t epochs_initial = 0, epochs_retrain = 0, batch_size = 0;
  std::uint64_t seed = 0;
  double rho = 0, xi = 0, lambda = 0, sigma = 0, lr = 0, init_scale = 0, early_stop = 0;
  std::string metric, strategy;

  void add(CLI::App& app, bool with_axes) {
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    options["T"] = app.add_option("-T,--iterations", T, "loop iterations");
    options["k_query"] = app.add_option("--k-query", k_query, "queries per iteration");
    options["n0"] = app.add_option("--n0", n0, "initial labeled sample size");
    options["seed"] = app.add_option("--seed", seed, "seed for all randomness");
    options["rho"] = app.add_option("--rho", rho, "normal-augmentation similarity threshold");
    options["xi"] = app.add_option("--xi", xi, "anomaly-priority similarity threshold");
    options["lambda_priority"] = app.add_option("--lambda", lambda, "weight of the priority bonus");
    options["sigma"] = app.add_option("--sigma", sigma, "euclidean kernel width");
    options["early_stop_overlap"] =
        app.add_option("--early-stop", early_stop, "stop when top-k overlap reaches this value");
    options["latent_dim"] = app.add_option("--latent-dim", latent_dim, "latent size k");
    options["hidden_dim"] = app.add_option("--hidden-dim", hidden_dim, "hidden layer width (0: none)");
    options["ndcg_k"] = app.add_option("--ndcg-k", ndcg_k, "nDCG cutoff (0: number of anomalies)");
    options["train.learning_rate"] = app.add_option("--lr", lr, "learning rate");
    options["train.epochs_initial"] = app.add_option("--epochs-initial", epochs_initial, "initial epochs");
    options["train.epochs_retrain"] = app.add_option("--epochs-retrain", epochs_retrain, "epochs per retrain");
    options["train.batch_size"] = app.add_option("--batch-size", batch_size, "mini-batch size");
    options["train.weight_init_scale"] = app.add_option("--init-scale", init_scale, "weight init scale");
    if (with_axes) {
      options["metric"] = app.add_option("--metric", metric, "similarity metric");
      options["strategy"] = app.add_option("--strategy", strategy, "s1, s2 or hybrid");
    }
  }

  LoopConfig resolve() const {
    LoopConfig cfg = config_path.empty() ? LoopConfig{} : load_loop_config(config_path);
    json overrides = json::object();
    auto put = [&](const std::string& key, const json& v) {
      const auto it = options.find(key);
      if (it != options.end() && it->second->count() > 0) overrides[key] = v;
    };
    put("T", T);
    put("k_query", k_query);
    put("n0", n0);
    put("seed", seed);
    put("rho", rho);
    put("xi", xi);
    put("lambda_priority", lambda);
    put("sigma", sigma);
    put("early_stop_overlap", early_stop);
    put("latent_dim", latent_dim);
    put("hidden_dim", hidden_dim);
    put("ndcg_k", ndcg_k);
    put("train.learning_rate", lr);
    put("train.epochs_initial", epochs_initial);
    put("train.epochs_retrain", epochs_retrain);
    put("train.batch_size", batch_size);
    put("train.weight_init_scale", init_scale);
    put("metric", metric);
    put("strategy", strategy);
    cfg = loop_config_from_json(overrides, cfg);
    cfg.validate();
    return cfg;
  }
};

std::string fixed_number(double v) {
  std::string s = format_double(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void log(const std::string& msg) { std::cerr << msg << '\n'; }

int gen_synth(const SynthConfig& s, const fs::path& out) {
  const SyntheticData d = generate_synthetic(s);
  fs::create_directories(out);
  save_csv(d.matrix, out / "data.csv");
  save_labels(d.truth, out / "labels.txt");
  log("wrote " + (out / "data.csv").string() + " (" + std::to_string(d.matrix.rows()) + "x" +
      std::to_string(d.matrix.cols()) + ") and " + (out / "labels.txt").string() + " (" +
      std::to_string(d.truth.anomaly_ids.size()) + " anomalies)");
  return 0;
}

int run_cmd(const LoopFlags& flags, const fs::path& data, const fs::path& labels, bool no_header,
            const fs::path& out) {
  const LoopConfig cfg = flags.resolve();
  const BinaryMatrix m = load_csv(data, !no_header);
  const GroundTruth truth = load_labels(labels, m.rows());
  cfg.validate(m.rows());
  log("running " + std::string(metric_name(cfg.metric.kind)) + "/" + std::string(strategy_name(cfg.strategy)) +
      " on " + data.string() + " (" + std::to_string(m.rows()) + " rows, " +
      std::to_string(truth.anomaly_ids.size()) + " anomalies)");
  GroundTruthOracle oracle(truth);
  const LoopResult r = run_loop(m, oracle, cfg, {&truth, true});
  json history = history_to_json(r, cfg);
  history["data"] = data.string();
  history["labels"] = labels.string();
  history["ndcg_k"] = cfg.ndcg_k ? cfg.ndcg_k : truth.anomaly_ids.size();
  write_text(out / "history.json", dump_json(history));
  std::string ranking;
  for (RowId id : evaluation_ranking(r.final_state, r.final_ranking)) ranking += std::to_string(id) + "\n";
  write_text(out / "ranking.txt", ranking);
  for (const IterationRecord& rec : r.history) {
    for (const std::string& v : rec.audit_violations) log("audit: iteration " + std::to_string(rec.iteration) + ": " + v);
  }
  const double final_ndcg = r.history.empty() ? r.initial_ndcg.value_or(0.0) : r.history.back().ndcg.value_or(0.0);
  log("iterations " + std::to_string(r.history.size()) + ", queries " + std::to_string(r.total_queries) +
      ", final nDCG " + fixed_number(final_ndcg));
  return 0;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int grid_cmd(const LoopFlags& flags, const std::vector<std::string>& data, const std::vector<std::string>& labels,
             bool no_header, const std::string& metrics, const std::string& strategies, std::size_t repeats,
             std::size_t jobs, const fs::path& out) {
  if (data.size() != labels.size()) throw ConfigError("grid needs one --labels per --data");
  GridSpec spec;
  spec.base = flags.resolve();
  spec.repeats = repeats;
  if (!metrics.empty()) {
    spec.metrics.clear();
    for (const std::string& m : split_list(metrics)) spec.metrics.push_back(parse_metric(m));
  }
  if (!strategies.empty()) {
    spec.strategies.clear();
    for (const std::string& s : split_list(strategies)) spec.strategies.push_back(parse_strategy(s));
  }
  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::string name = fs::path(data[i]).stem().string();
    if (seen[name]++ > 0) name += "_" + std::to_string(i);
    BinaryMatrix m = load_csv(data[i], !no_header);
    GroundTruth t = load_labels(labels[i], m.rows());
    spec.datasets.push_back({name, std::move(m), std::move(t)});
  }
  log("grid: " + std::to_string(spec.datasets.size()) + " dataset(s) x " + std::to_string(spec.metrics.size()) +
      " metrics x " + std::to_string(spec.strategies.size()) + " strategies x " + std::to_string(repeats) +
      " seed(s), " + std::to_string(jobs) + " job(s)");
  const GridResult r = run_grid(spec, jobs);
  write_text(out / "trajectories.csv", trajectories_csv(r));
  write_text(out / "heatmap.csv", heatmap_csv(r));
  write_text(out / "boxplot.json", dump_json(boxplot_json(r)));
  json cfg = {{"loop", loop_config_to_json(spec.base)}, {"repeats", repeats}, {"datasets", json::array()}};
  for (std::size_t i = 0; i < data.size(); ++i) {
    cfg["datasets"].push_back({{"name", spec.datasets[i].name}, {"data", data[i]}, {"labels", labels[i]}});
  }
  write_text(out / "config.json", dump_json(cfg));
  log("wrote " + (out / "heatmap.csv").string());
  return 0;
}

int serve_cmd(const LoopFlags& flags, const std::string& host, int port, const std::string& data,
              const std::string& labels, bool no_header, const std::string& journal, const std::string& port_file) {
  ServiceOptions opts;
  opts.base_config = flags.resolve();
  if (!data.empty()) {
    Dataset d;
    d.matrix = std::make_shared<const BinaryMatrix>(load_csv(data, !no_header));
    if (!labels.empty()) d.truth = std::make_shared<const GroundTruth>(load_labels(labels, d.matrix->rows()));
    opts.default_dataset = std::move(d);
  } else if (!labels.empty()) {
    throw ConfigError("--labels needs --data");
  }

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::optional<fs::path> journal_path;
  if (!journal.empty()) journal_path = journal;
  opts.journal = journal_path;
  OracleService service(std::move(opts));
  if (journal_path) {
    const std::size_t n = service.replay_journal(*journal_path);
    if (n > 0) log("replayed " + std::to_string(n) + " journal entries");
  }

  HttpFrontend http(service);
  const int bound = http.bind(host, port);
  if (!port_file.empty()) write_text(port_file, std::to_string(bound) + "\n");
  log("listening on http://" + host + ":" + std::to_string(bound));

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    http.stop();
  });
  const bool ok = http.listen();
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  log("stopped");
  return ok ? 0 : 1;
}

int eval_cmd(const fs::path& ranking_path, const fs::path& labels, std::size_t k, std::size_t rows) {
  std::ifstream in(ranking_path);
  if (!in) throw std::runtime_error("cannot open " + ranking_path.string());
  std::vector<RowId> ranking;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::stringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || token[0] == '-') throw ParseError("ranking entry is not a row id", line_no, 1);
    ranking.push_back(static_cast<RowId>(v));
  }
  if (rows == 0) {
    for (RowId id : ranking) rows = std::max<std::size_t>(rows, id + 1);
  }
  const GroundTruth truth = load_labels(labels, rows);
  if (k == 0) k = std::max<std::size_t>(truth.anomaly_ids.size(), 1);
  std::cout << fixed_number(ndcg(ranking, truth, k)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty() && args[0] == "--serve") args[0] = "serve";

  CLI::App app{"Similarity-guided active learning for anomaly ranking on binary data"};
  app.require_subcommand(1);

  SynthConfig synth;
  std::string synth_out = ".";
  auto* gen = app.add_subcommand("gen-synth", "write a synthetic planted-anomaly dataset");
  gen->add_option("--rows", synth.n_rows, "rows")->capture_default_str();
  gen->add_option("--cols", synth.n_cols, "columns")->capture_default_str();
  gen->add_option("--anomaly-frac", synth.anomaly_fraction, "anomaly fraction")->capture_default_str();
  gen->add_option("--density", synth.normal_density, "bit density of normal rows")->capture_default_str();
  gen->add_option("--signature", synth.anomaly_signature_size, "anomaly signature size")->capture_default_str();
  gen->add_option("--noise", synth.noise_flip_prob, "bit flip probability on anomalies")->capture_default_str();
  gen->add_option("--seed", synth.seed, "seed")->capture_default_str();
  gen->add_option("-o,--out", synth_out, "output directory")->capture_default_str();

  LoopFlags run_flags;
  std::string run_data, run_labels, run_out = ".";
  bool run_no_header = false;
  auto* run = app.add_subcommand("run", "run the active learning loop with a ground-truth oracle");
  run->add_option("--data", run_data, "binary matrix CSV")->required()->check(CLI::ExistingFile);
  run->add_option("--labels", run_labels, "anomaly labels")->required()->check(CLI::ExistingFile);
  run->add_flag("--no-header", run_no_header, "CSV has no header row");
  run->add_option("-o,--out", run_out, "output directory")->capture_default_str();
  run_flags.add(*run, true);

  LoopFlags grid_flags;
  std::vector<std::string> grid_data, grid_labels;
  std::string grid_out = ".", grid_metrics, grid_strategies;
  std::size_t repeats = 1, jobs = 1;
  bool grid_no_header = false;
  auto* grid = app.add_subcommand("grid", "run every metric x strategy combination");
  grid->add_option("--data", grid_data, "binary matrix CSV (repeatable)")->required()->check(CLI::ExistingFile);
  grid->add_option("--labels", grid_labels, "labels, one per --data")->required()->check(CLI::ExistingFile);
  grid->add_flag("--no-header", grid_no_header, "CSVs have no header row");
  grid->add_option("--metrics", grid_metrics, "comma-separated subset of metrics");
  grid->add_option("--strategies", grid_strategies, "comma-separated subset of strategies");
  grid->add_option("--repeats", repeats, "seeds per cell")->capture_default_str()->check(CLI::PositiveNumber);
  grid->add_option("--jobs", jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  grid->add_option("-o,--out", grid_out, "output directory")->capture_default_str();
  grid_flags.add(*grid, false);

  LoopFlags serve_flags;
  std::string host = "127.0.0.1", serve_data, serve_labels, journal, port_file;
  int port = 8080;
  bool serve_no_header = false;
  auto* serve = app.add_subcommand("serve", "start the HTTP oracle service");
  serve->add_option("--host", host, "bind address")->capture_default_str();
  serve->add_option("--port", port, "port (0 picks a free one)")->capture_default_str();
  serve->add_option("--data", serve_data, "default dataset CSV")->check(CLI::ExistingFile);
  serve->add_option("--labels", serve_labels, "labels for the default dataset")->check(CLI::ExistingFile);
  serve->add_flag("--no-header", serve_no_header, "CSV has no header row");
  serve->add_option("--journal", journal, "JSON-lines session journal, replayed at startup");
  serve->add_option("--port-file", port_file, "write the bound port here");
  serve_flags.add(*serve, true);

  std::string eval_ranking, eval_labels;
  std::size_t eval_k = 0, eval_rows = 0;
  auto* eval = app.add_subcommand("eval", "nDCG of a ranking file against labels");
  eval->add_option("--ranking", eval_ranking, "one row id per line, best first")->required()->check(CLI::ExistingFile);
  eval->add_option("--labels", eval_labels, "anomaly labels")->required()->check(CLI::ExistingFile);
  eval->add_option("--k", eval_k, "cutoff (default: number of anomalies)");
  eval->add_option("--rows", eval_rows, "dataset rows (default: largest ranked id + 1)");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return gen_synth(synth, synth_out);
    if (*run) return run_cmd(run_flags, run_data, run_labels, run_no_header, run_out);
    if (*grid) {
      return grid_cmd(grid_flags, grid_data, grid_labels, grid_no_header, grid_metrics, grid_strategies, repeats,
                      jobs, grid_out);
    }
    if (*serve) {
      return serve_cmd(serve_flags, host, port, serve_data, serve_labels, serve_no_header, journal, port_file);
    }
    if (*eval) return eval_cmd(eval_ranking, eval_labels, eval_k, eval_rows);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what();
    if (e.line()) std::cerr << " (line " << e.line() << ", column " << e.column() << ")";
    std::cerr << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
