#include "ghar/engine.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

#include "strings.hpp"

namespace ghar {

using json = nlohmann::json;

RequestError::RequestError(std::vector<FieldError> fields)
    : Error(ErrorCode::kInvalidArgument,
            fields.empty() ? std::string("invalid request")
                           : "invalid request: " + fields.front().field + ": " + fields.front().message),
      fields_(std::move(fields)) {}

ojson RequestError::to_json() const {
  ojson errors = ojson::array();
  for (const auto& f : fields_) errors.push_back(ojson{{"field", f.field}, {"message", f.message}});
  return ojson{{"error", to_string(code())}, {"message", what()}, {"fields", std::move(errors)}};
}

namespace {

std::string env_or_empty(const std::string& name) {
  if (name.empty()) return {};
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : std::string();
}

std::unique_ptr<LlmProvider> make_llm(const LlmEndpoint& e, ProviderMode mode) {
  if (mode == ProviderMode::kHttp) {
    return std::make_unique<HttpLlmProvider>(e.url, e.model, env_or_empty(e.api_key_env), e.timeout_seconds);
  }
  if (e.mock_script.empty()) return std::make_unique<MockLlmProvider>(MockLlmProvider::default_script());
  return std::make_unique<MockLlmProvider>(MockLlmProvider::from_file(e.mock_script));
}

std::unique_ptr<EmbeddingProvider> make_embedder(const ProvidersConfig& p) {
  switch (p.embedding_mode) {
    case EmbeddingMode::kMock:
      return std::make_unique<MockEmbeddingProvider>(p.embedding_dim);
    case EmbeddingMode::kHttp:
      return std::make_unique<HttpEmbeddingProvider>(p.embedding_url, p.embedding_model, p.embedding_dim,
                                                     env_or_empty(p.top.api_key_env));
    case EmbeddingMode::kPrecomputed:
      return std::make_unique<PrecomputedEmbeddingProvider>(p.embedding_path);
  }
  throw Error(ErrorCode::kInternal, "unknown embedding mode");
}

// 128-bit digest rendered as 26 Crockford base32 digits.
std::string crockford_id(std::string_view canonical) {
  static constexpr char kAlphabet[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
  std::uint64_t hi = detail::fnv1a64(canonical);
  std::uint64_t lo = detail::fnv1a64(canonical, detail::splitmix64(hi));
  unsigned __int128 v = (static_cast<unsigned __int128>(hi) << 64) | lo;
  std::string out(26, '0');
  for (int i = 25; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kAlphabet[static_cast<unsigned>(v & 31u)];
    v >>= 5;
  }
  return out;
}

}  // namespace

Engine::Engine(EngineConfig config, bool load_index_file) : config_(std::move(config)) {
  config_.validate();
  top_ = make_llm(config_.providers.top, config_.providers.mode);
  if (config_.providers.low) low_ = make_llm(*config_.providers.low, config_.providers.mode);
  embedder_ = make_embedder(config_.providers);

  const auto& paths = config_.paths;
  if (!paths.kg.empty()) {
    if (!std::filesystem::exists(paths.kg)) {
      throw Error(ErrorCode::kConfig, "paths.kg '" + paths.kg + "' does not exist");
    }
    kg_ = ingest_triples_file(paths.kg);
    catalog_ = catalog_meta_paths(kg_);
  }
  if (!paths.references.empty()) references_ = load_references_file(paths.references);
  if (!paths.cohort.empty()) cohort_ = read_cohort(paths.cohort);
  if (!load_index_file) {
    refresh_index_report();
  } else if (!paths.indexes.empty() && std::filesystem::is_regular_file(paths.indexes)) {
    load_indexes(paths.indexes);
  } else if (!kg_.edges().empty()) {
    build_indexes();
  } else {
    refresh_index_report();
  }
}

Engine::~Engine() = default;

bool Engine::local() const {
  return config_.providers.mode == ProviderMode::kMock && config_.providers.embedding_mode != EmbeddingMode::kHttp;
}

void Engine::set_kg(KnowledgeGraph kg) {
  kg_ = std::move(kg);
  catalog_ = catalog_meta_paths(kg_);
  indexes_.clear();
  refresh_index_report();
}

void Engine::build_indexes(const std::vector<std::string>& meta_paths) {
  std::vector<std::size_t> which;
  for (const auto& name : meta_paths) {
    auto idx = catalog_.resolve(name);
    if (!idx) throw Error(ErrorCode::kUnknownMetaPath, "unknown meta-path '" + name + "'");
    which.push_back(*idx);
  }
  indexes_ = ghar::build_indexes(kg_, catalog_, *embedder_, which, config_.parallelism);
  refresh_index_report();
}

void Engine::load_indexes(const std::string& path) {
  IndexSet loaded = ghar::load_indexes(path);
  for (const auto& [idx, index] : loaded) {
    if (idx >= catalog_.count() || !catalog_.at(idx).same_signature(index.meta_path)) {
      throw Error(ErrorCode::kConsistency, "index file '" + path + "' does not match the loaded KG (meta-path " +
                                               index.meta_path.to_string() + ")");
    }
    if (embedder_->dim() != 0 && index.dim != embedder_->dim()) {
      throw Error(ErrorCode::kConfig, "index dimension " + std::to_string(index.dim) +
                                          " differs from the embedding dimension " +
                                          std::to_string(embedder_->dim()));
    }
  }
  indexes_ = std::move(loaded);
  refresh_index_report();
}

void Engine::save_indexes(const std::string& path) const { ghar::save_indexes(indexes_, path); }

void Engine::refresh_index_report() {
  ojson parts = ojson::array();
  for (const auto& [idx, index] : indexes_) {
    parts.push_back(ojson{{"meta_path", idx},
                          {"signature", index.meta_path.to_string()},
                          {"nodes", index.nodes.size()},
                          {"edges", index.edges.size()},
                          {"dim", index.dim},
                          {"checksum", index.checksum()}});
  }
  index_report_ = ojson{{"count", indexes_.size()}, {"partitions", std::move(parts)}};
}

EpisodeRequest Engine::parse_request(const json& body) const {
  std::vector<FieldError> errors;
  if (!body.is_object()) throw RequestError(std::vector<FieldError>{{"body", "must be a JSON object"}});
  for (const auto& [key, _] : body.items()) {
    if (key != "task" && key != "patient" && key != "patient_id" && key != "labels" && key != "config") {
      errors.push_back({key, "unknown field"});
    }
  }

  EpisodeRequest req;
  bool task_ok = false;
  if (!body.contains("task")) {
    errors.push_back({"task", "required"});
  } else if (!body["task"].is_string()) {
    errors.push_back({"task", "must be one of DEC, READ, LOS"});
  } else {
    try {
      req.task = parse_task_kind(body["task"].get<std::string>());
      task_ok = true;
    } catch (const Error&) {
      errors.push_back({"task", "must be one of DEC, READ, LOS"});
    }
  }

  const CohortEntry* entry = nullptr;
  bool has_patient = body.contains("patient"), has_id = body.contains("patient_id");
  if (has_patient == has_id) {
    errors.push_back({"patient", "exactly one of patient or patient_id is required"});
  } else if (has_patient) {
    try {
      req.patient = patient_from_json(body["patient"]);
    } catch (const Error& e) {
      errors.push_back({"patient", e.what()});
    }
  } else if (!body["patient_id"].is_string()) {
    errors.push_back({"patient_id", "must be a string"});
  } else {
    auto id = body["patient_id"].get<std::string>();
    for (const auto& c : cohort_) {
      if (c.patient.patient_id == id) {
        entry = &c;
        break;
      }
    }
    if (entry) {
      req.patient = entry->patient;
    } else {
      errors.push_back({"patient_id", "unknown patient '" + id + "'"});
    }
  }

  if (body.contains("config")) {
    if (!body["config"].is_object()) {
      errors.push_back({"config", "must be an object"});
    } else {
      try {
        apply_overrides(config_.episode, body["config"]);
        req.overrides = body["config"];
      } catch (const Error& e) {
        errors.push_back({"config", e.what()});
      }
    }
  }

  if (task_ok) {
    const double kappa = config_.episode.agent.kappa;
    TaskSpec spec = TaskSpec::make(req.task, kappa);
    std::string task_name(to_string(req.task));
    if (body.contains("labels") && !body["labels"].is_null()) {
      const auto& labels = body["labels"];
      if (!labels.is_object()) {
        errors.push_back({"labels", "must be an object mapping task to label"});
      } else {
        for (const auto& [key, value] : labels.items()) {
          try {
            if (parse_task_kind(key) != req.task) continue;
            req.gold = make_label(spec, value.get<std::string>());
          } catch (const std::exception& e) {
            errors.push_back({"labels." + key, e.what()});
          }
        }
      }
    } else if (entry) {
      if (auto it = entry->labels.find(task_name); it != entry->labels.end()) req.gold = make_label(spec, it->second);
    }
  }

  if (!errors.empty()) throw RequestError(std::move(errors));
  return req;
}

EpisodeRequest Engine::request_for(const CohortEntry& entry, TaskKind task, const json& overrides) const {
  EpisodeRequest req;
  req.task = task;
  req.patient = entry.patient;
  req.overrides = overrides.is_null() ? json::object() : overrides;
  EpisodeConfig cfg = episode_config(req);
  if (auto it = entry.labels.find(std::string(to_string(task))); it != entry.labels.end()) {
    req.gold = make_label(TaskSpec::make(task, cfg.agent.kappa), it->second);
  }
  return req;
}

EpisodeConfig Engine::episode_config(const EpisodeRequest& request) const {
  return apply_overrides(config_.episode, request.overrides);
}

std::string Engine::episode_id(const EpisodeRequest& request) const {
  EpisodeConfig cfg = episode_config(request);
  ojson canonical = ojson::array();
  canonical.push_back(snapshot_json(cfg));
  canonical.push_back(to_string(request.task));
  canonical.push_back(patient_to_json(request.patient));
  canonical.push_back(request.gold ? ojson(request.gold->value) : ojson(nullptr));
  canonical.push_back(top_->name());
  canonical.push_back(low_ ? low_->name() : top_->name());
  canonical.push_back(embedder_->name());
  return crockford_id(canonical.dump());
}

Trajectory Engine::run(const EpisodeRequest& request) const {
  EpisodeConfig cfg = episode_config(request);
  TaskSpec spec = TaskSpec::make(request.task, cfg.agent.kappa);
  PatientRecord view = task_view(request.patient, request.task);
  EpisodeContext ctx{&kg_, &catalog_, &indexes_, &references_};
  Providers providers{top_.get(), low_ ? low_.get() : top_.get(), embedder_.get()};
  return run_episode(episode_id(request), spec, view, request.gold, cfg, ctx, providers);
}

std::vector<Trajectory> Engine::run_all(const std::vector<EpisodeRequest>& requests,
                                        const std::function<void(const Trajectory&)>& on_done) const {
  const std::size_t n = requests.size();
  std::vector<std::optional<Trajectory>> slots(n);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t emitted = 0;
  std::exception_ptr failure;

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      Trajectory tr;
      try {
        tr = run(requests[i]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = n;
        return;
      }
      std::lock_guard lock(mu);
      slots[i] = std::move(tr);
      while (emitted < n && slots[emitted] && !failure) {
        if (on_done) {
          try {
            on_done(*slots[emitted]);
          } catch (...) {
            failure = std::current_exception();
            next = n;
            return;
          }
        }
        ++emitted;
      }
    }
  };

  std::size_t threads = std::min<std::size_t>(config_.parallelism, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<Trajectory> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

ojson Engine::health_json() const {
  ojson providers{{"mode", config_.providers.mode == ProviderMode::kMock ? "mock" : "http"},
                  {"top", top_->name()},
                  {"low", low_ ? low_->name() : top_->name()},
                  {"embedding", embedder_->name()}};
  return ojson{{"status", "ok"},
               {"version", GHAR_VERSION},
               {"build", {{"compiler", __VERSION__}, {"cplusplus", __cplusplus}}},
               {"providers", std::move(providers)},
               {"kg", {{"nodes", kg_.nodes().size()}, {"edges", kg_.edges().size()}, {"meta_paths", catalog_.count()}}},
               {"cohort", cohort_.size()},
               {"indexes", index_report_}};
}

std::vector<ojson> score_trajectories(const std::vector<Trajectory>& trajectories) {
  std::map<Normalization, RewardNormalizer> normalizers;
  std::vector<ojson> out;
  out.reserve(trajectories.size());
  for (const auto& tr : trajectories) {
    if (tr.status == EpisodeStatus::kFailed || !tr.scorable()) {
      out.push_back(ojson{{"episode_id", tr.episode_id},
                          {"scorable", false},
                          {"reason", tr.status == EpisodeStatus::kFailed ? "episode failed"
                                                                         : "missing log-probs or value estimates"}});
      continue;
    }
    auto mode = tr.config.reward.normalization;
    auto& norm = normalizers.try_emplace(mode, mode).first->second;
    std::vector<double> rewards, values, lps, refs;
    for (const auto& s : tr.steps) {
      rewards.push_back(norm(s.reward.r_all));
      values.push_back(*s.value_estimate);
      lps.push_back(*s.action_log_prob);
      refs.push_back(*s.ref_log_prob);
    }
    try {
      out.push_back(scores_to_json(score(tr.episode_id, std::move(rewards), std::move(values), std::move(lps),
                                         std::move(refs), tr.config.rl)));
    } catch (const Error& e) {
      throw Error(e.code(), "episode " + tr.episode_id + ": " + e.what());
    }
  }
  return out;
}

ojson EvalResult::to_json() const {
  ojson j = metrics_to_json(report, task);
  j["skipped_failed"] = skipped_failed;
  j["skipped_unlabeled"] = skipped_unlabeled;
  j["skipped_other_task"] = skipped_other_task;
  return j;
}

EvalResult evaluate(const std::vector<Trajectory>& trajectories, const EvalOptions& options) {
  EvalResult result;
  TaskKind kind = options.task ? *options.task
                               : (trajectories.empty() ? TaskKind::kDec : trajectories.front().task.kind);
  result.task = TaskSpec::make(kind);
  for (const auto& tr : trajectories) {
    if (tr.task.kind == kind) {
      result.task = tr.task;
      break;
    }
  }

  std::map<std::string, std::string> gold_override;
  if (options.gold) {
    for (const auto& e : *options.gold) {
      if (auto it = e.labels.find(std::string(to_string(kind))); it != e.labels.end()) {
        gold_override[e.patient.patient_id] = it->second;
      }
    }
  }

  std::vector<Label> preds, gold;
  for (const auto& tr : trajectories) {
    if (tr.task.kind != kind) {
      ++result.skipped_other_task;
      continue;
    }
    if (options.split && assign_split(tr.patient_id) != *options.split) continue;
    if (tr.status == EpisodeStatus::kFailed) {
      ++result.skipped_failed;
      continue;
    }
    std::optional<Label> g = tr.gold;
    if (options.gold) {
      auto it = gold_override.find(tr.patient_id);
      g = it == gold_override.end() ? std::nullopt : std::optional<Label>(make_label(result.task, it->second));
    }
    if (!g || !tr.final_prediction) {
      ++result.skipped_unlabeled;
      continue;
    }
    preds.push_back(*tr.final_prediction);
    gold.push_back(*g);
  }
  result.report = metrics(preds, gold, result.task);
  return result;
}

}  // namespace ghar
