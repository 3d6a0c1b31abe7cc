#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "ghar/agent.hpp"
#include "ghar/rewards.hpp"
#include "ghar/rl_math.hpp"

namespace ghar {

enum class ProviderMode { kMock, kHttp };
enum class EmbeddingMode { kMock, kHttp, kPrecomputed };

struct PathsConfig {
  std::string kg;
  std::string indexes;
  std::string trajectories;
  std::string references;
  std::string cohort;
};

struct LlmEndpoint {
  std::string mock_script;  // empty: built-in default script
  std::string url;
  std::string model;
  std::string api_key_env;
  int timeout_seconds = 120;
};

struct ProvidersConfig {
  ProviderMode mode = ProviderMode::kMock;
  LlmEndpoint top;
  std::optional<LlmEndpoint> low;  // unset: Agent-Low shares the top provider
  EmbeddingMode embedding_mode = EmbeddingMode::kMock;
  std::size_t embedding_dim = 64;
  std::string embedding_url;
  std::string embedding_model;
  std::string embedding_path;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_concurrent_episodes = 4;
};

/// Whole-engine configuration. Serialized as one JSON document; see
/// default_config_json() for every key.
struct EngineConfig {
  PathsConfig paths;
  EpisodeConfig episode;  // agent/reward/rl/seed
  ProvidersConfig providers;
  ServiceConfig service;
  std::size_t parallelism = 1;

  EngineConfig() { episode.reward.normalization = Normalization::kRunningZscore; }

  void validate() const;
};

inline constexpr const char* kConfigEnvVar = "GHAR_CONFIG";

nlohmann::ordered_json default_config_json();
nlohmann::ordered_json to_json(const EngineConfig& config);
/// Strict: unknown keys and out-of-range values are config errors.
EngineConfig config_from_json(const nlohmann::json& j);

/// Defaults, then the file (explicit path, else $GHAR_CONFIG when set), then
/// the overrides document, each applied as a JSON merge patch.
EngineConfig load_config(const std::optional<std::string>& path, const nlohmann::json& overrides = nlohmann::json::object());

/// Snapshot embedded in every trajectory: K, N, I, max_meta_paths, L, eta,
/// alpha, normalization, rank mode, gamma, lambda, epsilon, critic target,
/// kappa, seed.
nlohmann::ordered_json snapshot_json(const EpisodeConfig& config);
EpisodeConfig snapshot_from_json(const nlohmann::json& j);

/// Applies per-episode overrides using snapshot keys.
EpisodeConfig apply_overrides(const EpisodeConfig& base, const nlohmann::json& overrides);

}  // namespace ghar
