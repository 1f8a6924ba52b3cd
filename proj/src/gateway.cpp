#include "tracealign/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "tracealign/json_schema.hpp"
#include "tracealign/text.hpp"

namespace tracealign {

std::string_view to_string(GatewayErrorKind k) noexcept {
  switch (k) {
    case GatewayErrorKind::Network: return "network";
    case GatewayErrorKind::Auth: return "auth";
    case GatewayErrorKind::Timeout: return "timeout";
    case GatewayErrorKind::SchemaInvalid: return "schema-invalid";
    case GatewayErrorKind::MissingStubKey: return "missing-stub-key";
    case GatewayErrorKind::Template: return "template";
    case GatewayErrorKind::Config: return "config";
  }
  return "unknown";
}

std::string PromptTemplate::render(const nlohmann::json& bindings) const {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto open = body.find("{{", pos);
    if (open == std::string::npos) {
      out.append(body, pos);
      break;
    }
    auto close = body.find("}}", open + 2);
    if (close == std::string::npos) throw GatewayError(GatewayErrorKind::Template, id + ": unterminated placeholder");
    out.append(body, pos, open - pos);
    const std::string name = body.substr(open + 2, close - open - 2);
    if (!bindings.is_object() || !bindings.contains(name))
      throw GatewayError(GatewayErrorKind::Template, id + ": unbound placeholder '" + name + "'");
    const auto& v = bindings.at(name);
    out += v.is_string() ? v.get<std::string>() : v.dump();
    pos = close + 2;
  }
  return out;
}

void PromptRegistry::add(PromptTemplate t) {
  auto id = t.id;
  templates_[std::move(id)] = std::move(t);
}

const PromptTemplate& PromptRegistry::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw GatewayError(GatewayErrorKind::Template, "unknown template '" + std::string(id) + "'");
  return it->second;
}

GatewayConfig GatewayConfig::from_env(ProviderKind provider) {
  GatewayConfig c;
  c.provider = provider;
  if (const char* v = std::getenv("TRACEALIGN_LLM_BASE_URL")) c.base_url = v;
  if (const char* v = std::getenv("TRACEALIGN_LLM_MODEL")) c.model_id = v;
  if (const char* v = std::getenv("TRACEALIGN_LLM_KEY_ENV")) c.credential_env = v;
  return c;
}

void GatewayConfig::validate() const {
  if (provider == ProviderKind::Remote) {
    if (base_url.empty()) throw GatewayError(GatewayErrorKind::Config, "remote provider requires base_url");
    const char* cred = std::getenv(credential_env.c_str());
    if (!cred || !*cred)
      throw GatewayError(GatewayErrorKind::Config, "remote provider requires credential in $" + credential_env);
  } else if (stub_fixture_path.empty()) {
    throw GatewayError(GatewayErrorKind::Config, "stub provider requires a fixture file");
  }
  if (max_retries < 0) throw GatewayError(GatewayErrorKind::Config, "max_retries must be >= 0");
}

std::optional<nlohmann::json> parse_model_json(std::string_view raw) {
  std::string s = text::trim(raw);
  if (s.starts_with("```")) {
    auto nl = s.find('\n');
    auto fence = s.rfind("```");
    if (nl != std::string::npos && fence > nl) s = s.substr(nl + 1, fence - nl - 1);
  }
  auto j = nlohmann::json::parse(s, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

Transport http_chat_transport() {
  return [](const TransportRequest& req) -> std::string {
    httplib::Client client(req.base_url);
    client.set_connection_timeout(req.timeout_seconds);
    client.set_read_timeout(req.timeout_seconds);
    httplib::Headers headers{{"Authorization", "Bearer " + req.credential}};
    nlohmann::json body = {{"model", req.model_id},
                           {"temperature", req.temperature},
                           {"response_format", {{"type", "json_object"}}},
                           {"messages", {{{"role", "user"}, {"content", req.prompt}}}}};
    auto res = client.Post("/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
      auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout)
        throw TransportFailure(GatewayErrorKind::Timeout, httplib::to_string(err));
      throw TransportFailure(GatewayErrorKind::Network, httplib::to_string(err));
    }
    if (res->status == 401 || res->status == 403) throw TransportFailure(GatewayErrorKind::Auth, "HTTP " + std::to_string(res->status));
    if (res->status == 408 || res->status == 504) throw TransportFailure(GatewayErrorKind::Timeout, "HTTP " + std::to_string(res->status));
    if (res->status != 200) throw TransportFailure(GatewayErrorKind::Network, "HTTP " + std::to_string(res->status));
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw TransportFailure(GatewayErrorKind::Network, "malformed chat-completions response");
    }
  };
}

Gateway::Gateway(GatewayConfig config, Transport transport, const PromptRegistry* registry)
    : config_(std::move(config)), transport_(std::move(transport)), registry_(registry) {
  if (config_.provider == ProviderKind::Stub) {
    if (!config_.stub_fixture_path.empty()) {
      std::ifstream in(config_.stub_fixture_path);
      if (!in) throw GatewayError(GatewayErrorKind::Config, "cannot open stub fixtures '" + config_.stub_fixture_path + "'");
      fixtures_ = nlohmann::json::parse(in, nullptr, false);
      if (fixtures_.is_discarded() || !fixtures_.is_object())
        throw GatewayError(GatewayErrorKind::Config, "stub fixtures must be a JSON object");
    } else {
      fixtures_ = nlohmann::json::object();
    }
  } else if (!transport_) {
    transport_ = http_chat_transport();
  }
}

std::shared_ptr<Gateway> Gateway::stub(nlohmann::json fixtures, StubMissingPolicy missing, nlohmann::json defaults) {
  GatewayConfig c;
  c.provider = ProviderKind::Stub;
  c.stub_missing = missing;
  c.stub_default = std::move(defaults);
  auto g = std::make_shared<Gateway>(c);
  g->fixtures_ = std::move(fixtures);
  return g;
}

std::string Gateway::stub_key(std::string_view template_id, const nlohmann::json& bindings) {
  // nlohmann::json objects are key-sorted, so dump() is canonical.
  return std::string(template_id) + ":" + text::hex64(text::fnv1a(bindings.dump()));
}

Completion Gateway::complete(std::string_view template_id, const nlohmann::json& bindings) const {
  const PromptTemplate& t = registry_->get(template_id);
  return config_.provider == ProviderKind::Stub ? complete_stub(t, bindings) : complete_remote(t, bindings);
}

Completion Gateway::complete_stub(const PromptTemplate& t, const nlohmann::json& bindings) const {
  t.render(bindings);  // same unbound-placeholder check as remote
  Completion c;
  c.key = stub_key(t.id, bindings);
  c.attempts = 1;
  if (auto it = fixtures_.find(c.key); it != fixtures_.end()) {
    c.value = *it;
  } else {
    if (!config_.stub_record_path.empty()) {
      std::lock_guard lock(record_mu_);
      std::ofstream out(config_.stub_record_path, std::ios::app);
      out << nlohmann::json{{"key", c.key}, {"template_id", t.id}, {"bindings", bindings}}.dump() << '\n';
    }
    if (config_.stub_missing == StubMissingPolicy::Default && config_.stub_default.contains(t.id)) {
      c.value = config_.stub_default.at(t.id);
    } else {
      throw GatewayError(GatewayErrorKind::MissingStubKey, "no stub fixture for " + c.key, 1);
    }
  }
  if (auto err = schema::validate(t.output_schema, c.value))
    throw GatewayError(GatewayErrorKind::SchemaInvalid, t.id + ": " + *err, 1);
  return c;
}

std::string Gateway::send(const TransportRequest& req, int& attempts) const {
  std::optional<TransportFailure> last;
  for (int i = 0; i <= config_.max_retries; ++i) {
    if (i > 0) std::this_thread::sleep_for(config_.backoff_base * (1LL << (i - 1)));
    if (config_.min_request_interval.count() > 0) {
      std::lock_guard lock(rate_mu_);
      auto next = last_request_ + config_.min_request_interval;
      auto now = std::chrono::steady_clock::now();
      if (now < next) std::this_thread::sleep_for(next - now);
      last_request_ = std::chrono::steady_clock::now();
    }
    ++attempts;
    try {
      return transport_(req);
    } catch (const TransportFailure& f) {
      if (f.kind() == GatewayErrorKind::Auth) throw GatewayError(GatewayErrorKind::Auth, f.what(), attempts);
      last = f;
    }
  }
  throw GatewayError(last ? last->kind() : GatewayErrorKind::Network, last ? last->what() : "no attempts", attempts);
}

Completion Gateway::complete_remote(const PromptTemplate& t, const nlohmann::json& bindings) const {
  TransportRequest req;
  req.base_url = config_.base_url;
  req.model_id = config_.model_id;
  if (const char* cred = std::getenv(config_.credential_env.c_str())) req.credential = cred;
  req.temperature = GatewayConfig::temperature;
  req.timeout_seconds = config_.timeout_seconds;
  req.output_schema = &t.output_schema;
  req.prompt = t.render(bindings) + "\n\nRespond with a single JSON value matching this schema:\n" +
               t.output_schema.dump();

  Completion c;
  c.key = stub_key(t.id, bindings);
  std::string raw = send(req, c.attempts);

  auto problem = [&](const std::string& text) -> std::optional<std::string> {
    auto parsed = parse_model_json(text);
    if (!parsed) return "response is not valid JSON";
    if (auto err = schema::validate(t.output_schema, *parsed)) return *err;
    c.value = std::move(*parsed);
    return std::nullopt;
  };

  auto err = problem(raw);
  if (!err) return c;
  // One repair round: re-prompt with the validation error.
  TransportRequest repair = req;
  repair.prompt += "\n\nYour previous reply was rejected (" + *err +
                   "). Reply again with only JSON that satisfies the schema.";
  raw = send(repair, c.attempts);
  if (auto err2 = problem(raw)) throw GatewayError(GatewayErrorKind::SchemaInvalid, t.id + ": " + *err2, c.attempts);
  return c;
}

}  // namespace tracealign
