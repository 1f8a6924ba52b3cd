#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "tracealign/errors.hpp"

namespace tracealign {

// Unit-norm (or all-zero for empty text) dense embedding.
template <typename Scalar>
using EmbeddingT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Embedding = EmbeddingT<double>;

// Embeddings stacked as columns, one per item.
template <typename Scalar>
using EmbeddingMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using EmbeddingMatrix = EmbeddingMatrixT<double>;

// Cosine similarity in [-1, 1]; 0 when either side is the zero vector.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size())
    throw DataError("embedding dimension mismatch: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  const Scalar c = a.dot(b.template cast<Scalar>()) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

// sims(i) = cosine(col i, col i+1); empty for fewer than two columns.
template <typename Derived>
EmbeddingT<typename Derived::Scalar> adjacent_similarities(const Eigen::MatrixBase<Derived>& cols) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = cols.cols();
  EmbeddingT<Scalar> sims(std::max<Eigen::Index>(n - 1, 0));
  for (Eigen::Index i = 0; i + 1 < n; ++i) sims(i) = cosine(cols.col(i), cols.col(i + 1));
  return sims;
}

// Mean of the columns renormalized to unit length; zero if the mean is zero.
template <typename Derived>
EmbeddingT<typename Derived::Scalar> normalized_mean(const Eigen::MatrixBase<Derived>& cols) {
  using Scalar = typename Derived::Scalar;
  EmbeddingT<Scalar> m = cols.rowwise().sum();
  if (cols.cols() > 0) m /= Scalar(cols.cols());
  const Scalar n = m.norm();
  if (n > Scalar(0)) m /= n;
  else m.setZero();
  return m;
}

class EmbeddingError : public std::runtime_error {
 public:
  EmbeddingError(std::string provider, const std::string& msg)
      : std::runtime_error(provider + ": " + msg), provider_(std::move(provider)) {}
  const std::string& provider() const noexcept { return provider_; }

 private:
  std::string provider_;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Embedding embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string tag() const = 0;
};

// Hashed bag-of-tokens: FNV-1a bucket counts, L2-normalized. Pure and deterministic.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dimension, std::size_t max_chars = 0);
  Embedding embed(std::string_view text) const override;
  std::size_t dimension() const override { return d_; }
  std::string tag() const override { return "local-hash"; }

 private:
  std::size_t d_;
  std::size_t max_chars_;
};

struct RemoteEmbedderConfig {
  std::string base_url;      // e.g. http://localhost:8080
  std::string path = "/embed";
  std::string model_id;
  std::string credential_env = "TRACEALIGN_EMBED_KEY";
  std::size_t dimension = 256;
  int timeout_seconds = 30;
};

// POSTs {"model", "input"} and expects {"embedding": [floats]} of the configured dimension.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(RemoteEmbedderConfig cfg);
  Embedding embed(std::string_view text) const override;
  std::size_t dimension() const override { return cfg_.dimension; }
  std::string tag() const override { return "remote:" + cfg_.base_url; }

 private:
  RemoteEmbedderConfig cfg_;
};

// In-memory memo per session. Thread-safe.
class MemoEmbedder final : public EmbeddingProvider {
 public:
  explicit MemoEmbedder(std::shared_ptr<const EmbeddingProvider> inner) : inner_(std::move(inner)) {}
  Embedding embed(std::string_view text) const override;
  std::size_t dimension() const override { return inner_->dimension(); }
  std::string tag() const override { return inner_->tag(); }

 private:
  std::shared_ptr<const EmbeddingProvider> inner_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, Embedding> cache_;
};

// Embeds every text as one column.
EmbeddingMatrix embed_all(const EmbeddingProvider& provider, const std::vector<std::string>& texts);

}  // namespace tracealign
