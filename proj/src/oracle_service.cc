#include "simal/oracle_service.h"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <ctime>
#include <random>
#include <thread>

#include <httplib.h>

#include "simal/errors.h"
#include "simal/loop_io.h"

namespace simal {

using nlohmann::json;

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::kAwaitingLabels: return "awaiting_labels";
    case Phase::kTraining: return "training";
    case Phase::kRanking: return "ranking";
    case Phase::kFinished: return "finished";
  }
  return "unknown";
}

json ApiError::body() const { return {{"code", code_}, {"message", what()}, {"details", details_}}; }

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_token() {
  static std::mutex mu;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
  return buf;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

ApiError validation(const std::string& message, json details = json::object()) {
  return ApiError(422, "validation_error", message, std::move(details));
}

ApiError conflict(const std::string& message, json details = json::object()) {
  return ApiError(409, "conflict", message, std::move(details));
}

RowId parse_row_id(const std::string& text) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text[0] == '-' || v > 0xffffffffULL) {
    throw validation("label key '" + text + "' is not a sample id", {{"invalid", {text}}});
  }
  return static_cast<RowId>(v);
}

Label parse_label_value(const json& v, RowId id) {
  try {
    if (v.is_string()) return parse_label(v.get<std::string>());
    if (v.is_number_integer()) return parse_label(std::to_string(v.get<long long>()));
  } catch (const ContractError&) {
  }
  throw validation("label for sample " + std::to_string(id) + " must be 'normal' or 'anomaly'",
                   {{"invalid", {id}}});
}

LabelMap parse_labels_body(const json& body) {
  if (!body.is_object() || !body.contains("labels")) {
    throw validation("request body must contain a 'labels' object");
  }
  const json& labels = body.at("labels");
  LabelMap out;
  if (labels.is_object()) {
    for (const auto& [key, value] : labels.items()) {
      const RowId id = parse_row_id(key);
      out[id] = parse_label_value(value, id);
    }
  } else if (labels.is_array()) {
    for (const json& entry : labels) {
      if (!entry.is_object() || !entry.contains("id") || !entry.contains("label") ||
          !entry.at("id").is_number_unsigned()) {
        throw validation("label entries must look like {\"id\": <int>, \"label\": <string>}");
      }
      const RowId id = entry.at("id").get<RowId>();
      if (out.contains(id)) throw validation("sample " + std::to_string(id) + " labeled twice");
      out[id] = parse_label_value(entry.at("label"), id);
    }
  } else {
    throw validation("'labels' must be an object or an array");
  }
  return out;
}

}  // namespace

// Read-only view published after every state change.
struct Snapshot {
  Phase phase = Phase::kAwaitingLabels;
  std::size_t iteration = 0;
  std::size_t rounds_submitted = 0;
  std::vector<RowId> pending;
  json queries = json::array();
  RankedList ranking;
  json counts;
  json history = json::array();
  std::optional<double> initial_ndcg;
  std::optional<double> ndcg;
  std::string error;
  std::string updated_at;
};

class Session {
 public:
  Session(std::string id, Dataset data, LoopConfig cfg, bool autopilot, std::size_t max_features)
      : id_(std::move(id)),
        data_(std::move(data)),
        autopilot_(autopilot),
        max_features_(max_features),
        created_at_(utc_now()),
        learner_(*data_.matrix, std::move(cfg), data_.truth.get()) {
    publish(Phase::kAwaitingLabels);
  }

  ~Session() {
    stop_ = true;
    std::lock_guard lock(worker_mutex_);
    if (worker_.joinable()) worker_.join();
  }

  const std::string& id() const { return id_; }
  bool autopilot() const { return autopilot_; }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_;
  }

  void wait_idle() const {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] {
      return snapshot_->phase == Phase::kFinished ||
             (snapshot_->phase == Phase::kAwaitingLabels && !autopilot_);
    });
  }

  // Moves AwaitingLabels -> Training. The caller then owns the learner until
  // the worker publishes the next AwaitingLabels or Finished snapshot.
  std::shared_ptr<const Snapshot> claim(const LabelMap& labels) {
    std::lock_guard lock(mutex_);
    if (autopilot_) throw conflict("session " + id_ + " runs on autopilot and takes no labels");
    if (snapshot_->phase != Phase::kAwaitingLabels) {
      throw conflict("session " + id_ + " is " + std::string(phase_name(snapshot_->phase)) +
                         ", labels are accepted only while awaiting_labels",
                     {{"phase", phase_name(snapshot_->phase)}});
    }
    std::vector<RowId> missing;
    std::vector<RowId> unexpected;
    for (RowId id : snapshot_->pending) {
      if (!labels.contains(id)) missing.push_back(id);
    }
    for (const auto& [id, label] : labels) {
      if (std::find(snapshot_->pending.begin(), snapshot_->pending.end(), id) == snapshot_->pending.end()) {
        unexpected.push_back(id);
      }
    }
    if (!missing.empty() || !unexpected.empty()) {
      std::string msg = "labels must cover exactly the pending queries";
      if (!missing.empty()) msg += "; missing " + json(missing).dump();
      if (!unexpected.empty()) msg += "; unexpected " + json(unexpected).dump();
      throw validation(msg, {{"missing", missing}, {"unexpected", unexpected}});
    }
    auto next = std::make_shared<Snapshot>(*snapshot_);
    next->phase = Phase::kTraining;
    next->updated_at = utc_now();
    snapshot_ = next;
    cv_.notify_all();
    return snapshot_;
  }

  void start_round(LabelMap labels) {
    launch([this, labels = std::move(labels)] { advance(labels); });
  }

  void start_autopilot() {
    launch([this] {
      GroundTruthOracle oracle(*data_.truth);
      while (!stop_ && !learner_.finished()) {
        const std::vector<RowId> ids = learner_.pending();
        if (!advance(oracle.label(ids))) break;
      }
    });
  }

  void join_worker() {
    std::lock_guard lock(worker_mutex_);
    if (worker_.joinable()) worker_.join();
  }

 private:
  template <typename F>
  void launch(F&& body) {
    std::lock_guard lock(worker_mutex_);
    if (worker_.joinable()) worker_.join();
    worker_ = std::thread(std::forward<F>(body));
  }

  // One label round on the worker thread. Returns false after a failure.
  bool advance(const LabelMap& labels) {
    try {
      learner_.submit(labels);
      ++rounds_;
      publish(Phase::kTraining);
      learner_.retrain();
      publish(Phase::kRanking);
      learner_.rerank();
      publish(learner_.finished() ? Phase::kFinished : Phase::kAwaitingLabels);
      return true;
    } catch (const std::exception& e) {
      error_ = e.what();
      publish(Phase::kFinished);
      return false;
    }
  }

  json query_context() const {
    json out = json::array();
    if (learner_.finished()) return out;
    const BinaryMatrix& m = *data_.matrix;
    const LoopState& state = learner_.state();
    const std::vector<RowId> pending = learner_.pending();
    const RankedList& ranking = learner_.ranking();
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const RowId id = pending[i];
      json q;
      q["id"] = id;
      q["rank"] = i + 1;
      const bool trained = learner_.started();
      q["score"] = trained && i < ranking.scores.size() ? json(ranking.scores[i]) : json(nullptr);
      q["reconstruction_error"] =
          trained ? json(reconstruction_error(learner_.model(), m.row(id))) : json(nullptr);
      q["max_anomaly_similarity"] =
          state.labeled_anomaly.empty()
              ? json(nullptr)
              : json(max_similarity_to(m, state.labeled_anomaly, id, learner_.config().metric));
      json features = json::array();
      for (const auto& [f, w] : top_attention_features(learner_.model(), m.row(id), max_features_)) {
        const std::string name = f < m.feature_names().size() ? m.feature_names()[f] : "f" + std::to_string(f);
        features.push_back({{"index", f}, {"name", name}, {"weight", w}});
      }
      q["features"] = std::move(features);
      out.push_back(std::move(q));
    }
    return out;
  }

  void publish(Phase phase) {
    auto s = std::make_shared<Snapshot>();
    s->phase = phase;
    const LoopState& st = learner_.state();
    s->iteration = st.iteration;
    s->rounds_submitted = rounds_;
    if (phase == Phase::kAwaitingLabels) {
      s->pending = learner_.pending();
      s->queries = query_context();
    }
    s->ranking = learner_.ranking();
    s->counts = {{"labeled_normal", st.labeled_normal.size()},
                 {"labeled_anomaly", st.labeled_anomaly.size()},
                 {"pseudo_normal", st.pseudo_normal.size()},
                 {"priority", st.priority.size()},
                 {"unlabeled", st.unlabeled.size()},
                 {"queried_total", st.query_log.size()}};
    for (const IterationRecord& rec : learner_.history()) s->history.push_back(record_to_json(rec));
    s->initial_ndcg = learner_.initial_ndcg();
    s->ndcg = learner_.history().empty() ? s->initial_ndcg : learner_.history().back().ndcg;
    s->error = error_;
    s->updated_at = utc_now();
    {
      std::lock_guard lock(mutex_);
      snapshot_ = std::move(s);
    }
    cv_.notify_all();
  }

 public:
  json state_json(std::size_t top_n) const {
    const auto s = snapshot();
    json top = json::array();
    for (std::size_t i = 0; i < std::min(top_n, s->ranking.ids.size()); ++i) {
      top.push_back({{"id", s->ranking.ids[i]}, {"rank", i + 1}, {"score", s->ranking.scores[i]}});
    }
    return {{"session_id", id_},
            {"phase", phase_name(s->phase)},
            {"iteration", s->iteration},
            {"rounds_submitted", s->rounds_submitted},
            {"autopilot", autopilot_},
            {"ground_truth", data_.truth != nullptr},
            {"config", loop_config_to_json(learner_.config())},
            {"created_at", created_at_},
            {"updated_at", s->updated_at},
            {"error", s->error.empty() ? json(nullptr) : json(s->error)},
            {"initial_ndcg", optional_number(s->initial_ndcg)},
            {"ndcg", optional_number(s->ndcg)},
            {"counts", s->counts},
            {"pending", s->pending},
            {"top_ranking", std::move(top)},
            {"history", s->history}};
  }

 private:
  const std::string id_;
  const Dataset data_;
  const bool autopilot_;
  const std::size_t max_features_;
  const std::string created_at_;

  // Owned by whichever thread moved the phase away from AwaitingLabels.
  ActiveLearner learner_;
  std::size_t rounds_ = 0;
  std::string error_;

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::shared_ptr<const Snapshot> snapshot_;

  std::mutex worker_mutex_;
  std::thread worker_;
  std::atomic<bool> stop_{false};
};

OracleService::OracleService(ServiceOptions options) : options_(std::move(options)) {
  if (options_.journal) {
    if (options_.journal->has_parent_path()) std::filesystem::create_directories(options_.journal->parent_path());
    journal_out_.open(*options_.journal, std::ios::app);
    if (!journal_out_) throw std::runtime_error("cannot open journal " + options_.journal->string());
  }
}

OracleService::~OracleService() {
  std::lock_guard lock(mutex_);
  sessions_.clear();
}

std::shared_ptr<Session> OracleService::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw ApiError(404, "not_found", "no session with id '" + id + "'", {{"session_id", id}});
  }
  return it->second;
}

Dataset OracleService::resolve_dataset(const json& body) const {
  if (!body.contains("data")) {
    if (body.contains("labels")) throw validation("'labels' given without 'data'", {{"field", "labels"}});
    if (!options_.default_dataset) {
      throw validation("request names no 'data' file and the service has no default dataset",
                       {{"field", "data"}});
    }
    return *options_.default_dataset;
  }
  Dataset d;
  try {
    const bool header = body.value("has_header", true);
    d.matrix = std::make_shared<const BinaryMatrix>(load_csv(body.at("data").get<std::string>(), header));
    if (body.contains("labels")) {
      d.truth = std::make_shared<const GroundTruth>(
          load_labels(body.at("labels").get<std::string>(), d.matrix->rows()));
    }
  } catch (const json::exception& e) {
    throw validation(std::string("bad dataset reference: ") + e.what());
  } catch (const ParseError& e) {
    throw validation(e.what(), {{"line", e.line()}, {"column", e.column()}});
  } catch (const std::exception& e) {
    throw validation(e.what());
  }
  return d;
}

json OracleService::create_session(const json& body, bool wait) {
  return create_with_id(new_token(), body, wait);
}

json OracleService::create_with_id(const std::string& id, const json& body, bool wait) {
  if (!body.is_object()) throw validation("request body must be a JSON object");
  for (const auto& [key, value] : body.items()) {
    static const std::set<std::string> known{"config", "data", "labels", "has_header", "autopilot"};
    if (!known.contains(key)) throw validation("unknown field '" + key + "'", {{"field", key}});
  }
  const bool autopilot = body.value("autopilot", false);
  Dataset data = resolve_dataset(body);
  LoopConfig cfg;
  try {
    cfg = loop_config_from_json(body.value("config", json::object()), options_.base_config);
    cfg.validate(data.matrix->rows());
    cfg.model_dims(data.matrix->cols()).validate();
  } catch (const ConfigError& e) {
    throw validation(e.what(), {{"field", e.field().empty() ? json(nullptr) : json(e.field())}});
  }
  if (autopilot && !data.truth) {
    throw validation("autopilot needs ground-truth labels", {{"field", "autopilot"}});
  }

  auto session = std::make_shared<Session>(id, std::move(data), std::move(cfg), autopilot,
                                           options_.max_context_features);
  {
    std::lock_guard lock(mutex_);
    if (sessions_.contains(id)) throw conflict("session id '" + id + "' already exists");
    sessions_[id] = session;
  }
  journal({{"op", "create"}, {"session_id", id}, {"body", body}});
  if (autopilot) session->start_autopilot();
  if (wait) session->wait_idle();
  json out = session->state_json(0);
  return {{"session_id", id},
          {"phase", out["phase"]},
          {"iteration", out["iteration"]},
          {"autopilot", autopilot},
          {"pending", out["pending"].size()}};
}

json OracleService::queries(const std::string& id) const {
  const auto session = find(id);
  const auto s = session->snapshot();
  if (s->phase != Phase::kAwaitingLabels) {
    throw conflict("session " + id + " is " + std::string(phase_name(s->phase)) + ", no queries pending",
                   {{"phase", phase_name(s->phase)}});
  }
  return {{"session_id", id}, {"iteration", s->iteration}, {"phase", phase_name(s->phase)},
          {"queries", s->queries}};
}

json OracleService::submit_labels(const std::string& id, const json& body, bool wait) {
  const auto session = find(id);
  const LabelMap labels = parse_labels_body(body);
  const auto claimed = session->claim(labels);
  journal({{"op", "labels"}, {"session_id", id}, {"body", body}});
  session->start_round(labels);
  if (wait) session->wait_idle();
  const auto s = wait ? session->snapshot() : claimed;
  return {{"session_id", id},
          {"accepted", labels.size()},
          {"phase", phase_name(s->phase)},
          {"iteration", s->iteration},
          {"counts", s->counts},
          {"ndcg", optional_number(s->ndcg)}};
}

json OracleService::state(const std::string& id, std::size_t top_n) const {
  return find(id)->state_json(top_n);
}

json OracleService::health() const {
  std::lock_guard lock(mutex_);
  return {{"status", "ok"}, {"sessions", sessions_.size()}};
}

void OracleService::wait_idle(const std::string& id) const { find(id)->wait_idle(); }

void OracleService::journal(const json& entry) {
  if (replaying_ || !journal_out_.is_open()) return;
  std::lock_guard lock(journal_mutex_);
  journal_out_ << entry.dump() << '\n';
  journal_out_.flush();
}

std::size_t OracleService::replay_journal(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return 0;
  replaying_ = true;
  std::size_t applied = 0;
  std::string line;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json entry = json::parse(line);
      const std::string op = entry.at("op");
      const std::string id = entry.at("session_id");
      if (op == "create") {
        create_with_id(id, entry.at("body"), true);
      } else if (op == "labels") {
        submit_labels(id, entry.at("body"), true);
      } else {
        throw ParseError("unknown journal op '" + op + "'", line_no);
      }
      ++applied;
    }
  } catch (const json::exception& e) {
    replaying_ = false;
    throw ParseError(path.string() + ": " + e.what(), line_no);
  } catch (...) {
    replaying_ = false;
    throw;
  }
  replaying_ = false;
  return applied;
}

// ---- HTTP ----

struct HttpFrontend::Impl {
  OracleService& service;
  httplib::Server server;
  std::string host;
  int port = 0;
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const ApiError& e) {
    send_json(res, e.status(), e.body());
  } catch (const json::parse_error& e) {
    send_json(res, 400, ApiError(400, "bad_request", std::string("malformed JSON: ") + e.what()).body());
  } catch (const std::exception& e) {
    send_json(res, 500, ApiError(500, "internal", e.what()).body());
  }
}

bool wants_wait(const httplib::Request& req) {
  return req.has_param("wait") && (req.get_param_value("wait") == "true" || req.get_param_value("wait") == "1");
}

json request_body(const httplib::Request& req) {
  return req.body.empty() ? json::object() : json::parse(req.body);
}

}  // namespace

HttpFrontend::HttpFrontend(OracleService& service) : impl_(new Impl{service, {}, {}, 0}) {
  httplib::Server& s = impl_->server;
  OracleService& svc = impl_->service;
  s.Get("/healthz", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc.health()); });
  });
  s.Post("/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, svc.create_session(request_body(req), wants_wait(req))); });
  });
  s.Get(R"(/sessions/([^/]+)/queries)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc.queries(req.matches[1])); });
  });
  s.Post(R"(/sessions/([^/]+)/labels)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const bool wait = wants_wait(req);
      send_json(res, wait ? 200 : 202, svc.submit_labels(req.matches[1], request_body(req), wait));
    });
  });
  s.Get(R"(/sessions/([^/]+)/state)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::size_t top = kHistoryTopN;
      if (req.has_param("top")) {
        try {
          top = std::stoul(req.get_param_value("top"));
        } catch (const std::exception&) {
          throw validation("'top' must be a non-negative integer", {{"field", "top"}});
        }
      }
      send_json(res, 200, svc.state(req.matches[1], top));
    });
  });
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 404 ? "not_found" : "bad_request";
    send_json(res, res.status, ApiError(res.status, code, "no route for " + req.method + " " + req.path).body());
  });
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    impl_->port = port;
  } else {
    impl_->port = -1;
  }
  if (impl_->port < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return impl_->port;
}

bool HttpFrontend::listen() { return impl_->server.listen_after_bind(); }

void HttpFrontend::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void HttpFrontend::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace simal
