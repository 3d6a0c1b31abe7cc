#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghar/agent.hpp"
#include "ghar/config.hpp"
#include "ghar/serialize.hpp"

namespace ghar {

struct FieldError {
  std::string field;
  std::string message;
};

/// A request body that failed validation; carries one message per field.
class RequestError : public Error {
 public:
  explicit RequestError(std::vector<FieldError> fields);
  const std::vector<FieldError>& fields() const noexcept { return fields_; }
  ojson to_json() const;

 private:
  std::vector<FieldError> fields_;
};

struct EpisodeRequest {
  TaskKind task = TaskKind::kDec;
  PatientRecord patient;           // full record; the task view is applied at run time
  std::optional<Label> gold;
  nlohmann::json overrides = nlohmann::json::object();  // snapshot keys
};

/// Loaded engine state: KG, catalog, indexes, references, cohort and
/// providers. Everything except the providers' network traffic is immutable
/// after construction, so run() may be called from several threads.
class Engine {
 public:
  /// Loads every configured path. A missing KG path yields an empty store.
  /// Indexes are read from paths.indexes when that file exists and built in
  /// memory otherwise. With load_indexes=false neither happens.
  explicit Engine(EngineConfig config, bool load_indexes = true);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const EngineConfig& config() const { return config_; }
  const KnowledgeGraph& kg() const { return kg_; }
  const MetaPathCatalog& catalog() const { return catalog_; }
  const IndexSet& indexes() const { return indexes_; }
  const std::vector<CohortEntry>& cohort() const { return cohort_; }
  const EmbeddingProvider& embedder() const { return *embedder_; }
  /// True when every episode runs without network calls.
  bool local() const;

  void set_kg(KnowledgeGraph kg);
  void set_references(ReferenceTrajectories refs) { references_ = std::move(refs); }
  void set_cohort(std::vector<CohortEntry> cohort) { cohort_ = std::move(cohort); }

  /// Rebuilds indexes for the named meta-paths (index or "(h, r, t)"; all
  /// when empty). An unknown name is a kUnknownMetaPath error naming it.
  void build_indexes(const std::vector<std::string>& meta_paths = {});
  void load_indexes(const std::string& path);
  void save_indexes(const std::string& path) const;

  /// Body: {"task", "patient" | "patient_id", "labels"?, "config"?}.
  /// Throws RequestError listing every bad field.
  EpisodeRequest parse_request(const nlohmann::json& body) const;
  EpisodeRequest request_for(const CohortEntry& entry, TaskKind task,
                             const nlohmann::json& overrides = nlohmann::json::object()) const;

  EpisodeConfig episode_config(const EpisodeRequest& request) const;
  /// 26-character Crockford base32 digest of the request, the resolved
  /// config and the provider names. Equal inputs give equal ids.
  std::string episode_id(const EpisodeRequest& request) const;

  Trajectory run(const EpisodeRequest& request) const;

  /// Runs requests with at most config().parallelism in flight. Results are
  /// in input order; `on_done` is called in input order as results become
  /// contiguous.
  std::vector<Trajectory> run_all(const std::vector<EpisodeRequest>& requests,
                                  const std::function<void(const Trajectory&)>& on_done = {}) const;

  ojson health_json() const;

 private:
  EngineConfig config_;
  KnowledgeGraph kg_;
  MetaPathCatalog catalog_;
  IndexSet indexes_;
  ReferenceTrajectories references_;
  std::vector<CohortEntry> cohort_;
  std::unique_ptr<LlmProvider> top_;
  std::unique_ptr<LlmProvider> low_;
  std::unique_ptr<EmbeddingProvider> embedder_;
  ojson index_report_;

  void refresh_index_report();
};

/// Score pass over a batch. Rewards are normalized with one normalizer per
/// mode shared across the batch, in file order. Failed and non-scorable
/// trajectories produce {"episode_id", "scorable": false, "reason"}.
std::vector<ojson> score_trajectories(const std::vector<Trajectory>& trajectories);

struct EvalOptions {
  std::optional<TaskKind> task;        // default: the task of the first trajectory
  std::optional<DataSplit> split;      // keep only patients hashed into this split
  const std::vector<CohortEntry>* gold = nullptr;  // overrides trajectory gold labels
};

struct EvalResult {
  TaskSpec task;
  MetricsReport report;
  std::size_t skipped_failed = 0;
  std::size_t skipped_unlabeled = 0;
  std::size_t skipped_other_task = 0;
  ojson to_json() const;
};

EvalResult evaluate(const std::vector<Trajectory>& trajectories, const EvalOptions& options = {});

}  // namespace ghar
