#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "tracealign/session.hpp"

namespace tracealign {

struct EvaluationStatus {
  std::string state = "idle";  // idle | running | done | failed
  std::size_t done = 0;
  std::size_t total = 0;
  long base_revision = 0;
  std::optional<long> result_revision;
  std::string error;
};

void to_json(nlohmann::json& j, const EvaluationStatus& s);

// Single serialized writer, many snapshot readers.
class SessionService {
 public:
  SessionService(Session session, Engine engine, std::optional<std::string> save_path = std::nullopt);
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  std::shared_ptr<const Session> snapshot() const;
  const Engine& engine() const { return engine_; }

  // Throws ConflictError when base_revision is given and differs from the current one.
  long mutate(const nlohmann::json& mutation, std::optional<long> base_revision = std::nullopt);

  // wait=false computes on a snapshot in the background and commits only if no other
  // mutation landed meanwhile.
  EvaluationStatus evaluate(std::optional<long> base_revision, bool wait);
  EvaluationStatus evaluation_status() const;
  void join_evaluation();

 private:
  void publish(std::shared_ptr<const Session> s);

  Engine engine_;
  std::optional<std::string> save_path_;
  mutable std::mutex snap_mu_;
  std::shared_ptr<const Session> current_;
  std::mutex write_mu_;
  mutable std::mutex status_mu_;
  EvaluationStatus status_;
  std::thread worker_;
};

class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<SessionService> service);
  ~HttpServer();

  // Throws DataError on bind failure. port 0 picks a free port.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void start();   // listen on a background thread
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tracealign
