#include "ghar/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ghar/error.hpp"
#include "http_util.hpp"
#include "strings.hpp"

namespace ghar {

void normalize_in_place(Vector& v) {
  double sq = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kRetrieval, "embedding has a non-finite entry");
    sq += x * x;
  }
  if (sq == 0.0) throw Error(ErrorCode::kRetrieval, "embedding is the zero vector");
  double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

std::vector<Vector> embed_all(std::span<const std::string> texts, const EmbeddingProvider& provider) {
  if (texts.empty()) return {};
  std::vector<Vector> out;
  try {
    out = provider.embed_batch(texts);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kProvider) {
      throw Error(ErrorCode::kRetrieval, std::string("embedding provider: ") + e.what(), e.retryable());
    }
    throw;
  }
  if (out.size() != texts.size()) {
    throw Error(ErrorCode::kRetrieval, "embedding provider returned " + std::to_string(out.size()) +
                                           " vectors for " + std::to_string(texts.size()) + " inputs");
  }
  std::size_t dim = provider.dim() ? provider.dim() : out.front().size();
  for (auto& v : out) {
    if (v.size() != dim) {
      throw Error(ErrorCode::kConfig, "embedding dimension " + std::to_string(v.size()) +
                                          " does not match expected " + std::to_string(dim));
    }
    normalize_in_place(v);
  }
  return out;
}

Vector embed(std::string_view text, const EmbeddingProvider& provider) {
  std::string owned(text);
  return std::move(embed_all(std::span<const std::string>(&owned, 1), provider).front());
}

MockEmbeddingProvider::MockEmbeddingProvider(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw Error(ErrorCode::kConfig, "mock embedding dim must be positive");
}

Vector MockEmbeddingProvider::embed_one(std::string_view text) const {
  auto tokens = detail::whitespace_tokens(text);
  std::sort(tokens.begin(), tokens.end());
  Vector v(dim_, 0.0);
  const std::uint64_t salt = detail::splitmix64(seed_);
  for (const auto& tok : tokens) {
    std::uint64_t h = detail::fnv1a64(tok) ^ salt;
    for (std::size_t j = 0; j < dim_; ++j) {
      std::uint64_t bits = detail::splitmix64(h + j * 0x9e3779b97f4a7c15ULL);
      // 53 high bits -> [0, 1) -> [-1, 1)
      v[j] += static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;
    }
  }
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    v[0] = 1.0;
    return v;
  }
  double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
  return v;
}

std::vector<Vector> MockEmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, std::string model, std::size_t dim,
                                             std::string api_key, int timeout_seconds)
    : url_(std::move(url)),
      model_(std::move(model)),
      dim_(dim),
      api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {
  detail::split_url(url_);
}

std::vector<Vector> HttpEmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  nlohmann::json body = {{"input", std::vector<std::string>(texts.begin(), texts.end())},
                         {"model", model_}};
  auto reply = detail::post_json(url_, body, api_key_, timeout_seconds_);
  std::vector<Vector> out(texts.size());
  try {
    for (const auto& item : reply.at("data")) {
      auto i = item.at("index").get<std::size_t>();
      if (i >= out.size()) throw Error(ErrorCode::kProvider, "embedding index out of range");
      out[i] = item.at("embedding").get<Vector>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProvider, std::string("malformed embeddings reply: ") + e.what());
  }
  for (const auto& v : out) {
    if (v.empty()) throw Error(ErrorCode::kProvider, "embeddings reply is missing an entry");
  }
  return out;
}

PrecomputedEmbeddingProvider::PrecomputedEmbeddingProvider(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open embedding file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto vec = j.at("vector").get<Vector>();
      if (dim_ == 0) dim_ = vec.size();
      if (vec.size() != dim_ || vec.empty()) {
        throw Error(ErrorCode::kConfig, path + ":" + std::to_string(line_no) +
                                            ": inconsistent vector dimension");
      }
      table_.insert_or_assign(j.at("key").get<std::string>(), std::move(vec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
}

std::vector<Vector> PrecomputedEmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto it = table_.find(t);
    if (it == table_.end()) {
      throw Error(ErrorCode::kRetrieval, "no precomputed embedding for '" + t + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

}  // namespace ghar
