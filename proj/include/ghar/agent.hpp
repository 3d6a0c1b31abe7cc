#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ghar/embedding.hpp"
#include "ghar/error.hpp"
#include "ghar/kg_store.hpp"
#include "ghar/llm.hpp"
#include "ghar/retriever.hpp"
#include "ghar/rewards.hpp"
#include "ghar/rl_math.hpp"
#include "ghar/tasks.hpp"

namespace ghar {

enum class QueryOrigin { kInitial, kRewrite, kDeepening };
enum class Route { kLlm, kRag };
enum class Control { kTerminate, kContinue };

std::string_view to_string(QueryOrigin origin) noexcept;
std::string_view to_string(Route route) noexcept;
std::string_view to_string(Control control) noexcept;
QueryOrigin parse_query_origin(std::string_view text);
Route parse_route(std::string_view text);
Control parse_control(std::string_view text);

struct Query {
  std::string text;
  QueryOrigin origin = QueryOrigin::kInitial;

  bool operator==(const Query&) const = default;
};

/// Strict FIFO of pending sub-queries.
class QueryQueue {
 public:
  void push(Query q) { items_.push_back(std::move(q)); }
  Query pop();  // earliest-enqueued item; throws kInvalidArgument when empty
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  const std::deque<Query>& items() const { return items_; }

 private:
  std::deque<Query> items_;
};

struct HistoryEntry {
  std::string sub_query;
  std::string answer;
  Route route = Route::kLlm;

  bool operator==(const HistoryEntry&) const = default;
};

/// Append-only record of (sub-query, intermediate answer) pairs. Its length
/// is the entry count.
class ReasoningHistory {
 public:
  void append(HistoryEntry entry) { entries_.push_back(std::move(entry)); }
  const std::vector<HistoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  // "" when empty.
  std::string render() const;

 private:
  std::vector<HistoryEntry> entries_;
};

struct TopState {
  Query query;
  ReasoningHistory history;
};

struct LowState {
  Query query;
  ReasoningHistory history;
  MetaPathSelection selection;
  RetrievedCorpus corpus;
};

/// Copies the Agent-Top view into the Agent-Low state for a rag step.
LowState transfer_to_low(const TopState& top, const MetaPathSelection& selection, RetrievedCorpus corpus);

struct TopAction {
  Route route = Route::kLlm;
  Control control = Control::kContinue;
  MetaPathSelection selection;
  bool malformed = false;

  bool operator==(const TopAction&) const = default;
};

/// Parses "ROUTE: <LLM|RAG>; IDS: ...; CONTROL: <TERMINATE|CONTINUE>".
/// A missing or unknown route or control marker sets `malformed`; the route
/// then defaults to llm and the control to continue.
TopAction parse_top_action(std::string_view text, const MetaPathCatalog& catalog, std::size_t max_meta_paths);

struct Prediction {
  Label label;
  bool format_ok = false;
};

/// Total: falls back to the first label with format_ok=false.
Prediction parse_prediction(std::string_view text, const TaskSpec& task);

/// Parsed rewrite lines (numbering and bullets stripped, blanks dropped).
std::vector<std::string> parse_rewrites(std::string_view text);
/// First non-blank line without an optional "SUBQUERY:" prefix.
std::optional<std::string> parse_subquery(std::string_view text);

struct CallRecord {
  std::string tag;
  std::string prompt;
  std::string response;
  std::optional<double> log_prob;
  std::optional<double> ref_log_prob;
  std::optional<double> value;
};

using CallLog = std::vector<CallRecord>;

struct AgentConfig {
  std::size_t rewrites = 3;        // K
  std::size_t max_iterations = 5;  // I
  std::size_t max_meta_paths = 3;
  std::size_t top_n = 1;           // N
  double kappa = kDefaultReadmissionWindowDays;

  void validate() const;
};

struct EpisodeConfig {
  AgentConfig agent;
  RewardConfig reward;
  RLConfig rl;
  std::uint64_t seed = 7;
};

Query build_query(const TaskSpec& task, const PatientRecord& patient, const KnowledgeGraph* kg = nullptr);

QueryQueue rewrite_queries(const Query& q0, std::size_t k, const LlmProvider& llm, std::string_view task,
                           CallLog* log = nullptr);

TopAction top_decide(const TopState& state, const MetaPathCatalog& catalog, std::size_t max_meta_paths,
                     const LlmProvider& llm, int step, std::string_view task, CallLog* log = nullptr);

std::string llm_answer(const TopState& state, const LlmProvider& llm, int step, std::string_view task,
                       CallLog* log = nullptr);

std::string low_summarize(const LowState& state, const LlmProvider& llm, int step, std::string_view task,
                          CallLog* log = nullptr);

std::optional<Query> deepen(const Query& query, const ReasoningHistory& history, const LlmProvider& llm,
                            int step, std::string_view task, CallLog* log = nullptr);

Prediction finalize(const Query& q0, const ReasoningHistory& history, const TaskSpec& task,
                    const LlmProvider& llm, int step, CallLog* log = nullptr);

struct StepRecord {
  int iteration = 0;
  Query query;
  TopAction top_action;
  bool forced_terminate = false;
  std::vector<Provenance> corpus_provenance;
  std::string corpus_text;
  std::string intermediate_answer;
  std::optional<double> action_log_prob;
  std::optional<double> ref_log_prob;
  std::optional<double> value_estimate;
  RewardBreakdown reward;
  CallLog calls;
};

enum class EpisodeStatus { kOk, kFailed };
std::string_view to_string(EpisodeStatus status) noexcept;

struct Trajectory {
  std::string episode_id;
  TaskSpec task;
  std::string patient_id;
  Query initial_query;
  std::vector<Query> rewrites;
  std::vector<StepRecord> steps;
  std::optional<Label> final_prediction;
  bool prediction_format_ok = false;
  std::optional<Label> gold;
  EpisodeConfig config;
  std::map<std::string, std::string> providers;  // role -> provider name
  EpisodeStatus status = EpisodeStatus::kOk;
  ErrorCode error_code = ErrorCode::kOk;
  std::string error;
  CallLog calls;  // episode-level calls (rewrite, final)

  /// True iff every step carries action/ref log-probs and a value estimate.
  bool scorable() const;
};

/// Shared, read-only inputs of an episode.
struct EpisodeContext {
  const KnowledgeGraph* kg = nullptr;
  const MetaPathCatalog* catalog = nullptr;
  const IndexSet* indexes = nullptr;
  const ReferenceTrajectories* references = nullptr;
};

struct Providers {
  const LlmProvider* top = nullptr;
  const LlmProvider* low = nullptr;
  const EmbeddingProvider* embedder = nullptr;
};

/// Executes one full episode. Provider and retrieval errors do not escape:
/// they end the episode with status kFailed and the steps completed so far.
Trajectory run_episode(std::string episode_id, const TaskSpec& task, const PatientRecord& patient,
                       const std::optional<Label>& gold, const EpisodeConfig& config, const EpisodeContext& ctx,
                       const Providers& providers);

}  // namespace ghar
