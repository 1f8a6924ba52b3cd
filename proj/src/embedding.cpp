#include "tracealign/embedding.hpp"

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tracealign/text.hpp"

namespace tracealign {

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::size_t max_chars)
    : d_(dimension), max_chars_(max_chars) {
  if (d_ == 0) throw ConfigError("embedding dimension must be positive");
}

Embedding HashingEmbedder::embed(std::string_view text) const {
  if (max_chars_ > 0 && text.size() > max_chars_) text = text.substr(0, max_chars_);
  Embedding v = Embedding::Zero(static_cast<Eigen::Index>(d_));
  for (const auto& tok : text::tokenize(text))
    v(static_cast<Eigen::Index>(text::fnv1a(tok) % d_)) += 1.0;
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return v;
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.base_url.empty()) throw ConfigError("remote embedder requires base_url");
}

Embedding RemoteEmbedder::embed(std::string_view text) const {
  httplib::Client client(cfg_.base_url);
  client.set_connection_timeout(cfg_.timeout_seconds);
  client.set_read_timeout(cfg_.timeout_seconds);
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.credential_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  nlohmann::json body = {{"model", cfg_.model_id}, {"input", std::string(text)}};
  auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
  if (!res) throw EmbeddingError(tag(), "request failed: " + httplib::to_string(res.error()));
  if (res->status == 401 || res->status == 403) throw EmbeddingError(tag(), "authentication rejected");
  if (res->status != 200) throw EmbeddingError(tag(), "HTTP " + std::to_string(res->status));

  nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("embedding") || !parsed["embedding"].is_array())
    throw EmbeddingError(tag(), "response lacks an 'embedding' array");
  const auto& arr = parsed["embedding"];
  if (arr.size() != cfg_.dimension)
    throw EmbeddingError(tag(), "expected dimension " + std::to_string(cfg_.dimension) + ", got " +
                                    std::to_string(arr.size()));
  Embedding v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw EmbeddingError(tag(), "non-numeric embedding component");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  if (!v.allFinite()) throw EmbeddingError(tag(), "non-finite embedding component");
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return v;
}

Embedding MemoEmbedder::embed(std::string_view text) const {
  std::string key(text);
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  Embedding v = inner_->embed(text);
  std::lock_guard lock(mu_);
  return cache_.emplace(std::move(key), std::move(v)).first->second;
}

EmbeddingMatrix embed_all(const EmbeddingProvider& provider, const std::vector<std::string>& texts) {
  EmbeddingMatrix m(static_cast<Eigen::Index>(provider.dimension()),
                    static_cast<Eigen::Index>(texts.size()));
  for (std::size_t i = 0; i < texts.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = provider.embed(texts[i]);
  return m;
}

}  // namespace tracealign
