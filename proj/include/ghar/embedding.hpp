#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ghar {

using Vector = std::vector<double>;

/// Text embedding backend. Implementations must be safe to call from
/// several threads at once and must be pure per input text.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  // Output dimensionality; 0 when only known after the first call.
  virtual std::size_t dim() const = 0;
  virtual std::vector<Vector> embed_batch(std::span<const std::string> texts) const = 0;
};

/// Embeds one text and unit-normalizes the result. Throws kRetrieval for
/// non-finite or all-zero provider output.
Vector embed(std::string_view text, const EmbeddingProvider& provider);
std::vector<Vector> embed_all(std::span<const std::string> texts, const EmbeddingProvider& provider);

void normalize_in_place(Vector& v);

/// Deterministic offline embedder: each lowercased whitespace token hashes to
/// a pseudo-random direction, the token multiset is summed in sorted order,
/// and the sum is unit-normalized. Text without tokens maps to e_0.
class MockEmbeddingProvider final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 64;

  explicit MockEmbeddingProvider(std::size_t dim = kDefaultDim, std::uint64_t seed = 0);

  std::string name() const override { return "mock"; }
  std::size_t dim() const override { return dim_; }
  std::vector<Vector> embed_batch(std::span<const std::string> texts) const override;

  Vector embed_one(std::string_view text) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// OpenAI-compatible embeddings endpoint:
///   POST {"input": [..], "model": ".."} -> {"data": [{"index": i, "embedding": [..]}]}
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string url, std::string model, std::size_t dim = 0,
                        std::string api_key = {}, int timeout_seconds = 30);

  std::string name() const override { return "http:" + model_; }
  std::size_t dim() const override { return dim_; }
  std::vector<Vector> embed_batch(std::span<const std::string> texts) const override;

 private:
  std::string url_;
  std::string model_;
  std::size_t dim_;
  std::string api_key_;
  int timeout_seconds_;
};

/// Vectors loaded from JSON Lines {"key": text, "vector": [..]}; embedding a
/// text not present in the file is a retrieval error.
class PrecomputedEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit PrecomputedEmbeddingProvider(const std::string& path);

  std::string name() const override { return "precomputed"; }
  std::size_t dim() const override { return dim_; }
  std::vector<Vector> embed_batch(std::span<const std::string> texts) const override;

 private:
  std::unordered_map<std::string, Vector> table_;
  std::size_t dim_ = 0;
};

}  // namespace ghar
