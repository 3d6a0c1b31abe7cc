#include "ghar/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "ghar/error.hpp"

namespace ghar {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

std::string_view to_string(ProviderMode m) { return m == ProviderMode::kMock ? "mock" : "http"; }

std::string_view to_string(EmbeddingMode m) {
  switch (m) {
    case EmbeddingMode::kMock: return "mock";
    case EmbeddingMode::kHttp: return "http";
    case EmbeddingMode::kPrecomputed: return "precomputed";
  }
  return "mock";
}

ojson endpoint_json(const LlmEndpoint& e) {
  return ojson{{"mock_script", e.mock_script},
               {"url", e.url},
               {"model", e.model},
               {"api_key_env", e.api_key_env},
               {"timeout_seconds", e.timeout_seconds}};
}

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw Error(ErrorCode::kConfig, "config '" + std::string(where) + "' must be an object");
  std::set<std::string_view> ok(allowed);
  for (const auto& [key, _] : obj.items()) {
    if (!ok.contains(key)) {
      throw Error(ErrorCode::kConfig, "unknown config key '" + std::string(where) + "." + key + "'");
    }
  }
}

template <typename T>
T get(const json& obj, const char* key, std::string_view where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kConfig, "config key '" + std::string(where) + "." + key + "' is missing or has the wrong type");
  }
}

LlmEndpoint endpoint_from_json(const json& j, std::string_view where) {
  check_keys(j, where, {"mock_script", "url", "model", "api_key_env", "timeout_seconds"});
  LlmEndpoint e;
  e.mock_script = get<std::string>(j, "mock_script", where);
  e.url = get<std::string>(j, "url", where);
  e.model = get<std::string>(j, "model", where);
  e.api_key_env = get<std::string>(j, "api_key_env", where);
  e.timeout_seconds = get<int>(j, "timeout_seconds", where);
  return e;
}

std::size_t get_count(const json& obj, const char* key, std::string_view where) {
  auto v = get<std::int64_t>(obj, key, where);
  if (v < 0) throw Error(ErrorCode::kConfig, "config key '" + std::string(where) + "." + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

}  // namespace

void EngineConfig::validate() const {
  episode.agent.validate();
  episode.reward.validate();
  episode.rl.validate();
  if (parallelism < 1) throw Error(ErrorCode::kConfig, "parallelism must be >= 1");
  if (service.max_concurrent_episodes < 1) throw Error(ErrorCode::kConfig, "service.max_concurrent_episodes must be >= 1");
  if (service.port < 0 || service.port > 65535) throw Error(ErrorCode::kConfig, "service.port out of range");
  if (providers.embedding_dim < 1) throw Error(ErrorCode::kConfig, "providers.embedding.dim must be >= 1");
  if (providers.mode == ProviderMode::kHttp) {
    if (providers.top.url.empty()) throw Error(ErrorCode::kConfig, "providers.llm.url is required in http mode");
    if (providers.low && providers.low->url.empty()) {
      throw Error(ErrorCode::kConfig, "providers.low_llm.url is required in http mode");
    }
  }
  if (providers.embedding_mode == EmbeddingMode::kHttp && providers.embedding_url.empty()) {
    throw Error(ErrorCode::kConfig, "providers.embedding.url is required for http embeddings");
  }
  if (providers.embedding_mode == EmbeddingMode::kPrecomputed && providers.embedding_path.empty()) {
    throw Error(ErrorCode::kConfig, "providers.embedding.path is required for precomputed embeddings");
  }
}

ojson default_config_json() { return to_json(EngineConfig{}); }

ojson to_json(const EngineConfig& c) {
  const auto& a = c.episode.agent;
  const auto& r = c.episode.reward;
  const auto& rl = c.episode.rl;
  const auto& p = c.providers;
  ojson j;
  j["paths"] = {{"kg", c.paths.kg},
                {"indexes", c.paths.indexes},
                {"trajectories", c.paths.trajectories},
                {"references", c.paths.references},
                {"cohort", c.paths.cohort}};
  j["agent"] = {{"K", a.rewrites}, {"I", a.max_iterations}, {"max_meta_paths", a.max_meta_paths},
                {"N", a.top_n},    {"kappa", a.kappa}};
  j["reward"] = {{"L", r.expected_reason_length},
                 {"eta", r.eta},
                 {"alpha", r.alpha},
                 {"normalization", to_string(r.normalization)},
                 {"rank_mode", to_string(r.rank_mode)}};
  j["rl"] = {{"gamma", rl.gamma},
             {"lambda", rl.lam},
             {"epsilon", rl.epsilon},
             {"critic_target", to_string(rl.critic_target)}};
  j["providers"] = {{"mode", to_string(p.mode)},
                    {"llm", endpoint_json(p.top)},
                    {"low_llm", p.low ? endpoint_json(*p.low) : ojson(nullptr)},
                    {"embedding",
                     {{"mode", to_string(p.embedding_mode)},
                      {"dim", p.embedding_dim},
                      {"url", p.embedding_url},
                      {"model", p.embedding_model},
                      {"path", p.embedding_path}}}};
  j["service"] = {{"host", c.service.host},
                  {"port", c.service.port},
                  {"max_concurrent_episodes", c.service.max_concurrent_episodes}};
  j["seed"] = c.episode.seed;
  j["parallelism"] = c.parallelism;
  return j;
}

EngineConfig config_from_json(const json& j) {
  check_keys(j, "", {"paths", "agent", "reward", "rl", "providers", "service", "seed", "parallelism"});
  EngineConfig c;

  const auto& paths = j.at("paths");
  check_keys(paths, "paths", {"kg", "indexes", "trajectories", "references", "cohort"});
  c.paths.kg = get<std::string>(paths, "kg", "paths");
  c.paths.indexes = get<std::string>(paths, "indexes", "paths");
  c.paths.trajectories = get<std::string>(paths, "trajectories", "paths");
  c.paths.references = get<std::string>(paths, "references", "paths");
  c.paths.cohort = get<std::string>(paths, "cohort", "paths");

  const auto& agent = j.at("agent");
  check_keys(agent, "agent", {"K", "I", "max_meta_paths", "N", "kappa"});
  c.episode.agent.rewrites = get_count(agent, "K", "agent");
  c.episode.agent.max_iterations = get_count(agent, "I", "agent");
  c.episode.agent.max_meta_paths = get_count(agent, "max_meta_paths", "agent");
  c.episode.agent.top_n = get_count(agent, "N", "agent");
  c.episode.agent.kappa = get<double>(agent, "kappa", "agent");

  const auto& reward = j.at("reward");
  check_keys(reward, "reward", {"L", "eta", "alpha", "normalization", "rank_mode"});
  c.episode.reward.expected_reason_length = get<int>(reward, "L", "reward");
  c.episode.reward.eta = get<double>(reward, "eta", "reward");
  c.episode.reward.alpha = get<double>(reward, "alpha", "reward");
  c.episode.reward.normalization = parse_normalization(get<std::string>(reward, "normalization", "reward"));
  c.episode.reward.rank_mode = parse_rank_mode(get<std::string>(reward, "rank_mode", "reward"));

  const auto& rl = j.at("rl");
  check_keys(rl, "rl", {"gamma", "lambda", "epsilon", "critic_target"});
  c.episode.rl.gamma = get<double>(rl, "gamma", "rl");
  c.episode.rl.lam = get<double>(rl, "lambda", "rl");
  c.episode.rl.epsilon = get<double>(rl, "epsilon", "rl");
  c.episode.rl.critic_target = parse_critic_target(get<std::string>(rl, "critic_target", "rl"));

  const auto& prov = j.at("providers");
  check_keys(prov, "providers", {"mode", "llm", "low_llm", "embedding"});
  auto mode = get<std::string>(prov, "mode", "providers");
  if (mode == "mock") {
    c.providers.mode = ProviderMode::kMock;
  } else if (mode == "http") {
    c.providers.mode = ProviderMode::kHttp;
  } else {
    throw Error(ErrorCode::kConfig, "providers.mode must be mock or http");
  }
  c.providers.top = endpoint_from_json(prov.at("llm"), "providers.llm");
  if (prov.contains("low_llm") && !prov.at("low_llm").is_null()) {
    c.providers.low = endpoint_from_json(prov.at("low_llm"), "providers.low_llm");
  }
  const auto& emb = prov.at("embedding");
  check_keys(emb, "providers.embedding", {"mode", "dim", "url", "model", "path"});
  auto emode = get<std::string>(emb, "mode", "providers.embedding");
  if (emode == "mock") {
    c.providers.embedding_mode = EmbeddingMode::kMock;
  } else if (emode == "http") {
    c.providers.embedding_mode = EmbeddingMode::kHttp;
  } else if (emode == "precomputed") {
    c.providers.embedding_mode = EmbeddingMode::kPrecomputed;
  } else {
    throw Error(ErrorCode::kConfig, "providers.embedding.mode must be mock, http or precomputed");
  }
  c.providers.embedding_dim = get_count(emb, "dim", "providers.embedding");
  c.providers.embedding_url = get<std::string>(emb, "url", "providers.embedding");
  c.providers.embedding_model = get<std::string>(emb, "model", "providers.embedding");
  c.providers.embedding_path = get<std::string>(emb, "path", "providers.embedding");

  const auto& svc = j.at("service");
  check_keys(svc, "service", {"host", "port", "max_concurrent_episodes"});
  c.service.host = get<std::string>(svc, "host", "service");
  c.service.port = get<int>(svc, "port", "service");
  c.service.max_concurrent_episodes = get_count(svc, "max_concurrent_episodes", "service");

  c.episode.seed = get<std::uint64_t>(j, "seed", "");
  c.parallelism = get_count(j, "parallelism", "");
  c.validate();
  return c;
}

namespace {

void require_file(const std::string& path, std::string_view key) {
  if (!path.empty() && !std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::kConfig, "config " + std::string(key) + " '" + path + "' does not exist");
  }
}

void require_parent(const std::string& path, std::string_view key) {
  if (path.empty()) return;
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw Error(ErrorCode::kConfig, "config " + std::string(key) + ": directory '" + parent.string() + "' does not exist");
  }
}

}  // namespace

EngineConfig load_config(const std::optional<std::string>& path, const json& overrides) {
  json merged = default_config_json();
  std::optional<std::string> file = path;
  if (!file) {
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) file = env;
  }
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(ErrorCode::kConfig, "cannot open config file '" + *file + "'");
    try {
      merged.merge_patch(json::parse(in));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfig, "config file '" + *file + "': " + e.what());
    }
  }
  if (!overrides.is_null()) merged.merge_patch(overrides);
  // merge_patch deletes keys set to null; restore the optional ones.
  if (!merged["providers"].contains("low_llm")) merged["providers"]["low_llm"] = nullptr;

  EngineConfig c = config_from_json(merged);
  require_file(c.paths.references, "paths.references");
  require_file(c.paths.cohort, "paths.cohort");
  require_file(c.providers.top.mock_script, "providers.llm.mock_script");
  if (c.providers.low) require_file(c.providers.low->mock_script, "providers.low_llm.mock_script");
  require_file(c.providers.embedding_path, "providers.embedding.path");
  require_parent(c.paths.indexes, "paths.indexes");
  require_parent(c.paths.trajectories, "paths.trajectories");
  return c;
}

ojson snapshot_json(const EpisodeConfig& c) {
  return ojson{{"K", c.agent.rewrites},
               {"N", c.agent.top_n},
               {"I", c.agent.max_iterations},
               {"max_meta_paths", c.agent.max_meta_paths},
               {"L", c.reward.expected_reason_length},
               {"eta", c.reward.eta},
               {"alpha", c.reward.alpha},
               {"normalization", to_string(c.reward.normalization)},
               {"rank_mode", to_string(c.reward.rank_mode)},
               {"gamma", c.rl.gamma},
               {"lambda", c.rl.lam},
               {"epsilon", c.rl.epsilon},
               {"critic_target", to_string(c.rl.critic_target)},
               {"kappa", c.agent.kappa},
               {"seed", c.seed}};
}

EpisodeConfig snapshot_from_json(const json& j) {
  return apply_overrides(EpisodeConfig{}, j);
}

EpisodeConfig apply_overrides(const EpisodeConfig& base, const json& o) {
  check_keys(o, "config", {"K", "N", "I", "max_meta_paths", "L", "eta", "alpha", "normalization", "rank_mode",
                           "gamma", "lambda", "epsilon", "critic_target", "kappa", "seed"});
  EpisodeConfig c = base;
  if (o.contains("K")) c.agent.rewrites = get_count(o, "K", "config");
  if (o.contains("N")) c.agent.top_n = get_count(o, "N", "config");
  if (o.contains("I")) c.agent.max_iterations = get_count(o, "I", "config");
  if (o.contains("max_meta_paths")) c.agent.max_meta_paths = get_count(o, "max_meta_paths", "config");
  if (o.contains("L")) c.reward.expected_reason_length = get<int>(o, "L", "config");
  if (o.contains("eta")) c.reward.eta = get<double>(o, "eta", "config");
  if (o.contains("alpha")) c.reward.alpha = get<double>(o, "alpha", "config");
  if (o.contains("normalization")) c.reward.normalization = parse_normalization(get<std::string>(o, "normalization", "config"));
  if (o.contains("rank_mode")) c.reward.rank_mode = parse_rank_mode(get<std::string>(o, "rank_mode", "config"));
  if (o.contains("gamma")) c.rl.gamma = get<double>(o, "gamma", "config");
  if (o.contains("lambda")) c.rl.lam = get<double>(o, "lambda", "config");
  if (o.contains("epsilon")) c.rl.epsilon = get<double>(o, "epsilon", "config");
  if (o.contains("critic_target")) c.rl.critic_target = parse_critic_target(get<std::string>(o, "critic_target", "config"));
  if (o.contains("kappa")) c.agent.kappa = get<double>(o, "kappa", "config");
  if (o.contains("seed")) c.seed = get<std::uint64_t>(o, "seed", "config");
  c.agent.validate();
  c.reward.validate();
  c.rl.validate();
  return c;
}

}  // namespace ghar
