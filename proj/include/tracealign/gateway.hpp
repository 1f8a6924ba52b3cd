#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace tracealign {

enum class GatewayErrorKind { Network, Auth, Timeout, SchemaInvalid, MissingStubKey, Template, Config };
std::string_view to_string(GatewayErrorKind k) noexcept;

class GatewayError : public std::runtime_error {
 public:
  GatewayError(GatewayErrorKind kind, const std::string& msg, int attempts = 0)
      : std::runtime_error(std::string(to_string(kind)) + ": " + msg +
                           (attempts > 0 ? " (attempts=" + std::to_string(attempts) + ")" : "")),
        kind_(kind),
        attempts_(attempts) {}
  GatewayErrorKind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }

 private:
  GatewayErrorKind kind_;
  int attempts_;
};

// Body placeholders are written {{name}}. String bindings are inserted verbatim,
// everything else as compact JSON.
struct PromptTemplate {
  std::string id;
  int version = 1;
  std::string body;
  nlohmann::json output_schema;

  std::string render(const nlohmann::json& bindings) const;  // GatewayError(Template) if unbound
};

class PromptRegistry {
 public:
  static const PromptRegistry& builtin();
  void add(PromptTemplate t);
  const PromptTemplate& get(std::string_view id) const;  // GatewayError(Template)
  bool contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

namespace templates {
inline constexpr std::string_view kSegmentSummary = "segment_summary";
inline constexpr std::string_view kDependencyInference = "dependency_inference";
inline constexpr std::string_view kNodeJudgment = "node_judgment";
inline constexpr std::string_view kErrorAnalysis = "error_analysis";
inline constexpr std::string_view kClusterLabel = "cluster_label";
}  // namespace templates

enum class ProviderKind { Remote, Stub };
enum class StubMissingPolicy { Error, Default };

struct GatewayConfig {
  ProviderKind provider = ProviderKind::Stub;
  std::string base_url;
  std::string model_id;
  std::string credential_env = "TRACEALIGN_LLM_KEY";
  int timeout_seconds = 60;
  int max_retries = 2;
  static constexpr double temperature = 0.0;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds min_request_interval{0};  // per-provider request-rate ceiling

  std::string stub_fixture_path;
  StubMissingPolicy stub_missing = StubMissingPolicy::Error;
  nlohmann::json stub_default;  // per-template default values when policy is Default
  std::string stub_record_path;  // appends missing keys as JSONL when set

  // Reads TRACEALIGN_LLM_BASE_URL, TRACEALIGN_LLM_MODEL, TRACEALIGN_LLM_KEY_ENV.
  static GatewayConfig from_env(ProviderKind provider);
  void validate() const;  // GatewayError(Config)
};

struct TransportRequest {
  std::string base_url;
  std::string model_id;
  std::string credential;
  double temperature = 0.0;
  int timeout_seconds = 60;
  std::string prompt;
  const nlohmann::json* output_schema = nullptr;
};

// Thrown by transports; kind must be Network, Auth or Timeout.
class TransportFailure : public std::runtime_error {
 public:
  TransportFailure(GatewayErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  GatewayErrorKind kind() const noexcept { return kind_; }

 private:
  GatewayErrorKind kind_;
};

// Returns the raw text the model produced.
using Transport = std::function<std::string(const TransportRequest&)>;

// OpenAI-compatible chat-completions transport over HTTP(S).
Transport http_chat_transport();

struct Completion {
  nlohmann::json value;
  int attempts = 0;
  std::string key;  // stub lookup key, "<template_id>:<hash>"
};

// Single client for every LLM call. Stateless per call and safe for concurrent use.
class Gateway {
 public:
  explicit Gateway(GatewayConfig config, Transport transport = {},
                   const PromptRegistry* registry = &PromptRegistry::builtin());

  // Stub gateway over an in-memory fixture map.
  static std::shared_ptr<Gateway> stub(nlohmann::json fixtures = nlohmann::json::object(),
                                       StubMissingPolicy missing = StubMissingPolicy::Error,
                                       nlohmann::json defaults = nlohmann::json::object());

  Completion complete(std::string_view template_id, const nlohmann::json& bindings) const;

  static std::string stub_key(std::string_view template_id, const nlohmann::json& bindings);

  const GatewayConfig& config() const { return config_; }

 private:
  Completion complete_stub(const PromptTemplate& t, const nlohmann::json& bindings) const;
  Completion complete_remote(const PromptTemplate& t, const nlohmann::json& bindings) const;
  std::string send(const TransportRequest& req, int& attempts) const;

  GatewayConfig config_;
  Transport transport_;
  const PromptRegistry* registry_;
  nlohmann::json fixtures_;
  mutable std::mutex rate_mu_;
  mutable std::chrono::steady_clock::time_point last_request_{};
  mutable std::mutex record_mu_;
};

// Parses model text as JSON, tolerating a surrounding ``` fence.
std::optional<nlohmann::json> parse_model_json(std::string_view raw);

}  // namespace tracealign
