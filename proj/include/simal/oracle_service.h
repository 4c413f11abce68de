#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "simal/active_loop.h"

namespace simal {

enum class Phase { kAwaitingLabels, kTraining, kRanking, kFinished };

std::string_view phase_name(Phase phase);

// Failure reported to a client: HTTP status, short machine code, message and
// structured details.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message,
           nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(message), status_(status), code_(std::move(code)), details_(std::move(details)) {}

  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }
  nlohmann::json body() const;

 private:
  int status_;
  std::string code_;
  nlohmann::json details_;
};

struct Dataset {
  std::shared_ptr<const BinaryMatrix> matrix;
  std::shared_ptr<const GroundTruth> truth;  // may be null
};

struct ServiceOptions {
  // Used by sessions whose creation request names no data file.
  std::optional<Dataset> default_dataset;
  LoopConfig base_config;
  // JSON-lines file receiving every mutation; replayed by replay_journal().
  std::optional<std::filesystem::path> journal;
  std::size_t max_context_features = 50;
};

class Session;

// In-memory session registry. Every method is thread-safe. Methods take and
// return the JSON bodies of the HTTP API and throw ApiError on failure.
class OracleService {
 public:
  explicit OracleService(ServiceOptions options);
  ~OracleService();
  OracleService(const OracleService&) = delete;
  OracleService& operator=(const OracleService&) = delete;

  // Body: {"config": {...}, "data": path, "labels": path, "has_header": bool,
  // "autopilot": bool}. All fields optional.
  nlohmann::json create_session(const nlohmann::json& body, bool wait = false);
  nlohmann::json queries(const std::string& id) const;
  // Body: {"labels": {"<id>": "normal" | "anomaly", ...}}. Retraining runs in
  // the background unless `wait` is set.
  nlohmann::json submit_labels(const std::string& id, const nlohmann::json& body, bool wait = false);
  nlohmann::json state(const std::string& id, std::size_t top_n = kHistoryTopN) const;
  nlohmann::json health() const;

  // Blocks until the session leaves the Training and Ranking phases.
  void wait_idle(const std::string& id) const;

  // Re-executes a journal written by an earlier instance, recreating its
  // sessions under their original ids.
  std::size_t replay_journal(const std::filesystem::path& path);

 private:
  std::shared_ptr<Session> find(const std::string& id) const;
  nlohmann::json create_with_id(const std::string& id, const nlohmann::json& body, bool wait);
  Dataset resolve_dataset(const nlohmann::json& body) const;
  void journal(const nlohmann::json& entry);

  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex journal_mutex_;
  std::ofstream journal_out_;
  bool replaying_ = false;
};

// HTTP front end: POST /sessions, GET /sessions/{id}/queries,
// POST /sessions/{id}/labels, GET /sessions/{id}/state, GET /healthz.
// Mutating endpoints accept ?wait=true to block until the session is idle.
class HttpFrontend {
 public:
  explicit HttpFrontend(OracleService& service);
  ~HttpFrontend();

  // Returns the bound port; `port` 0 picks a free one.
  int bind(const std::string& host, int port);
  // Serves until stop() is called.
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace simal
