#include "ghar/agent.hpp"

#include <cctype>
#include <sstream>

#include "ghar/error.hpp"
#include "ghar/prompts.hpp"
#include "strings.hpp"

namespace ghar {

std::string_view to_string(QueryOrigin origin) noexcept {
  switch (origin) {
    case QueryOrigin::kInitial: return "initial";
    case QueryOrigin::kRewrite: return "rewrite";
    case QueryOrigin::kDeepening: return "deepening";
  }
  return "initial";
}

std::string_view to_string(Route route) noexcept { return route == Route::kLlm ? "llm" : "rag"; }
std::string_view to_string(Control control) noexcept {
  return control == Control::kTerminate ? "terminate" : "continue";
}
std::string_view to_string(EpisodeStatus status) noexcept {
  return status == EpisodeStatus::kOk ? "ok" : "failed";
}

QueryOrigin parse_query_origin(std::string_view text) {
  if (text == "initial") return QueryOrigin::kInitial;
  if (text == "rewrite") return QueryOrigin::kRewrite;
  if (text == "deepening") return QueryOrigin::kDeepening;
  throw Error(ErrorCode::kParse, "unknown query origin '" + std::string(text) + "'");
}

Route parse_route(std::string_view text) {
  if (detail::iequals(text, "llm")) return Route::kLlm;
  if (detail::iequals(text, "rag")) return Route::kRag;
  throw Error(ErrorCode::kParse, "unknown route '" + std::string(text) + "'");
}

Control parse_control(std::string_view text) {
  if (detail::iequals(text, "terminate")) return Control::kTerminate;
  if (detail::iequals(text, "continue")) return Control::kContinue;
  throw Error(ErrorCode::kParse, "unknown control '" + std::string(text) + "'");
}

Query QueryQueue::pop() {
  if (items_.empty()) throw Error(ErrorCode::kInvalidArgument, "pop from an empty query queue");
  Query q = std::move(items_.front());
  items_.pop_front();
  return q;
}

std::string ReasoningHistory::render() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i) os << '\n';
    os << "Step " << (i + 1) << " [" << to_string(entries_[i].route) << "]\n"
       << "Sub-query: " << entries_[i].sub_query << '\n'
       << "Answer: " << entries_[i].answer;
  }
  return os.str();
}

LowState transfer_to_low(const TopState& top, const MetaPathSelection& selection, RetrievedCorpus corpus) {
  return LowState{top.query, top.history, selection, std::move(corpus)};
}

void AgentConfig::validate() const {
  if (rewrites < 1) throw Error(ErrorCode::kConfig, "K (rewrites) must be >= 1");
  if (max_iterations < 1) throw Error(ErrorCode::kConfig, "I (max_iterations) must be >= 1");
  if (max_meta_paths < 1) throw Error(ErrorCode::kConfig, "max_meta_paths must be >= 1");
  if (top_n < 1) throw Error(ErrorCode::kConfig, "N (top_n) must be >= 1");
  if (!(kappa >= 0.0)) throw Error(ErrorCode::kConfig, "kappa must be non-negative");
}

namespace {

// Word following `marker` (case-insensitive), or nullopt when the marker is absent.
std::optional<std::string> marker_word(std::string_view text, std::string_view marker) {
  auto pos = detail::ifind(text, marker);
  if (pos == std::string_view::npos) return std::nullopt;
  pos += marker.size();
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  std::size_t end = pos;
  while (end < text.size() && std::isalpha(static_cast<unsigned char>(text[end]))) ++end;
  return std::string(text.substr(pos, end - pos));
}

std::string_view ids_segment(std::string_view text) {
  auto pos = detail::ifind(text, "IDS:");
  if (pos == std::string_view::npos) return {};
  pos += 4;
  auto end = text.find_first_of(";\n", pos);
  auto control = detail::ifind(text, "CONTROL:", pos);
  if (control != std::string_view::npos && (end == std::string_view::npos || control < end)) end = control;
  return text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
}

std::map<std::string, std::string> base_vars(std::string_view query, std::string_view history) {
  return {{"query", std::string(query)}, {"history", std::string(history)}};
}

LlmResponse call(const LlmProvider& llm, std::string_view tag, int step, std::string_view task,
                 std::string prompt, std::map<std::string, std::string> vars, CallLog* log) {
  LlmRequest req;
  req.template_tag = std::string(tag);
  req.step = step;
  req.task = std::string(task);
  req.messages = {{"system", prompts::system_message()}, {"user", prompt}};
  req.vars = std::move(vars);
  LlmResponse res = llm.complete(req);
  if (log) {
    log->push_back(CallRecord{std::string(tag), std::move(prompt), res.content, res.log_prob,
                              res.ref_log_prob, res.value});
  }
  return res;
}

std::string strip_list_marker(std::string_view line) {
  line = detail::trim(line);
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')' || line[i] == ':')) {
    line = detail::trim(line.substr(i + 1));
  } else if (!line.empty() && (line.front() == '-' || line.front() == '*')) {
    line = detail::trim(line.substr(1));
  }
  return std::string(line);
}

}  // namespace

TopAction parse_top_action(std::string_view text, const MetaPathCatalog& catalog, std::size_t max_meta_paths) {
  TopAction action;
  auto route = marker_word(text, "ROUTE:");
  if (route && detail::iequals(*route, "rag")) {
    action.route = Route::kRag;
  } else if (route && detail::iequals(*route, "llm")) {
    action.route = Route::kLlm;
  } else {
    action.malformed = true;
  }

  auto control = marker_word(text, "CONTROL:");
  if (control && detail::iequals(*control, "terminate")) {
    action.control = Control::kTerminate;
  } else if (control && detail::iequals(*control, "continue")) {
    action.control = Control::kContinue;
  } else {
    action.malformed = true;
  }

  if (action.route == Route::kRag && !catalog.empty()) {
    action.selection = parse_meta_path_ids(ids_segment(text), catalog, max_meta_paths);
  }
  return action;
}

Prediction parse_prediction(std::string_view text, const TaskSpec& task) {
  if (task.label_space.empty()) throw Error(ErrorCode::kInvalidArgument, "task has an empty label space");
  auto open = detail::ifind(text, "<answer>");
  if (open != std::string_view::npos) {
    auto start = open + 8;
    auto close = detail::ifind(text, "</answer>", start);
    if (close != std::string_view::npos) {
      if (auto idx = task.find_label(text.substr(start, close - start))) {
        return Prediction{Label{task.kind, task.label_space[*idx], *idx}, true};
      }
    }
  }
  return Prediction{Label{task.kind, task.label_space.front(), 0}, false};
}

std::vector<std::string> parse_rewrites(std::string_view text) {
  std::vector<std::string> out;
  for (auto line : detail::split_lines(text)) {
    auto cleaned = strip_list_marker(line);
    if (!cleaned.empty()) out.push_back(std::move(cleaned));
  }
  return out;
}

std::optional<std::string> parse_subquery(std::string_view text) {
  for (auto line : detail::split_lines(text)) {
    std::string_view l = detail::trim(line);
    if (l.empty()) continue;
    if (detail::ifind(l, "SUBQUERY:") == 0) l = detail::trim(l.substr(9));
    if (l.empty()) continue;
    return std::string(l);
  }
  return std::nullopt;
}

Query build_query(const TaskSpec& task, const PatientRecord& patient, const KnowledgeGraph* kg) {
  validate(patient);
  return Query{prompts::render_query(task, patient, kg), QueryOrigin::kInitial};
}

QueryQueue rewrite_queries(const Query& q0, std::size_t k, const LlmProvider& llm, std::string_view task,
                           CallLog* log) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "rewrite count K must be >= 1");
  auto vars = base_vars(q0.text, "");
  vars["k"] = std::to_string(k);
  auto res = call(llm, prompts::kGenerate, 0, task, prompts::render_generate(q0.text, k), std::move(vars), log);

  auto lines = parse_rewrites(res.content);
  QueryQueue queue;
  if (lines.empty()) {
    warn("rewrite output unparsable; falling back to the original query");
    queue.push(q0);
    return queue;
  }
  if (lines.size() < k) {
    warn("rewrite produced " + std::to_string(lines.size()) + " of " + std::to_string(k) + " queries");
  }
  for (std::size_t i = 0; i < lines.size() && i < k; ++i) queue.push(Query{lines[i], QueryOrigin::kRewrite});
  return queue;
}

TopAction top_decide(const TopState& state, const MetaPathCatalog& catalog, std::size_t max_meta_paths,
                     const LlmProvider& llm, int step, std::string_view task, CallLog* log) {
  auto history = state.history.render();
  auto res = call(llm, prompts::kDecide, step, task,
                  prompts::render_decide(state.query.text, history, catalog, max_meta_paths),
                  base_vars(state.query.text, history), log);
  return parse_top_action(res.content, catalog, max_meta_paths);
}

std::string llm_answer(const TopState& state, const LlmProvider& llm, int step, std::string_view task,
                       CallLog* log) {
  auto history = state.history.render();
  return call(llm, prompts::kLlm, step, task, prompts::render_llm(state.query.text, history),
              base_vars(state.query.text, history), log)
      .content;
}

std::string low_summarize(const LowState& state, const LlmProvider& llm, int step, std::string_view task,
                          CallLog* log) {
  auto history = state.history.render();
  auto evidence = serialize_corpus(state.corpus);
  auto vars = base_vars(state.query.text, history);
  vars["evidence"] = evidence.empty() ? std::string(prompts::kNoEvidence) : evidence;
  return call(llm, prompts::kRag, step, task, prompts::render_rag(state.query.text, history, evidence),
              std::move(vars), log)
      .content;
}

std::optional<Query> deepen(const Query& query, const ReasoningHistory& history, const LlmProvider& llm,
                            int step, std::string_view task, CallLog* log) {
  auto rendered = history.render();
  auto res = call(llm, prompts::kSub, step, task, prompts::render_sub(query.text, rendered),
                  base_vars(query.text, rendered), log);
  auto sub = parse_subquery(res.content);
  if (!sub) {
    warn("deepening output unparsable at step " + std::to_string(step) + "; nothing enqueued");
    return std::nullopt;
  }
  return Query{*sub, QueryOrigin::kDeepening};
}

Prediction finalize(const Query& q0, const ReasoningHistory& history, const TaskSpec& task,
                    const LlmProvider& llm, int step, CallLog* log) {
  auto rendered = history.render();
  auto vars = base_vars(q0.text, rendered);
  vars["first_label"] = task.label_space.empty() ? "" : task.label_space.front();
  auto res = call(llm, prompts::kFinal, step, to_string(task.kind), prompts::render_final(q0.text, rendered, task),
                  std::move(vars), log);
  return parse_prediction(res.content, task);
}

bool Trajectory::scorable() const {
  if (steps.empty()) return false;
  for (const auto& s : steps) {
    if (!s.action_log_prob || !s.ref_log_prob || !s.value_estimate) return false;
  }
  return true;
}

namespace {

// Sum of log-probs over the step's action calls (decision + answer).
void attach_action_scores(StepRecord& step) {
  double lp = 0.0, ref = 0.0;
  bool have_lp = true, have_ref = true;
  for (const auto& c : step.calls) {
    if (c.tag != prompts::kDecide && c.tag != prompts::kLlm && c.tag != prompts::kRag) continue;
    if (c.log_prob) lp += *c.log_prob; else have_lp = false;
    if (c.ref_log_prob) ref += *c.ref_log_prob; else have_ref = false;
  }
  if (have_lp) step.action_log_prob = lp;
  if (have_ref) step.ref_log_prob = ref;
  for (const auto& c : step.calls) {
    if (c.tag == prompts::kDecide) {
      step.value_estimate = c.value;
      break;
    }
  }
}

}  // namespace

Trajectory run_episode(std::string episode_id, const TaskSpec& task, const PatientRecord& patient,
                       const std::optional<Label>& gold, const EpisodeConfig& config, const EpisodeContext& ctx,
                       const Providers& providers) {
  Trajectory tr;
  tr.episode_id = std::move(episode_id);
  tr.task = task;
  tr.patient_id = patient.patient_id;
  tr.gold = gold;
  tr.config = config;
  if (providers.top) tr.providers["top"] = providers.top->name();
  if (providers.low) tr.providers["low"] = providers.low->name();
  if (providers.embedder) tr.providers["embedding"] = providers.embedder->name();

  const std::string task_name(to_string(task.kind));
  try {
    if (!providers.top || !providers.low || !providers.embedder || !ctx.catalog || !ctx.indexes) {
      throw Error(ErrorCode::kConfig, "episode requires providers, a catalog and indexes");
    }
    config.agent.validate();
    config.reward.validate();
    const auto& agent = config.agent;

    tr.initial_query = build_query(task, patient, ctx.kg);
    QueryQueue queue = rewrite_queries(tr.initial_query, agent.rewrites, *providers.top, task_name, &tr.calls);
    tr.rewrites.assign(queue.items().begin(), queue.items().end());

    ReasoningHistory history;
    int t = 0;
    while (!queue.empty() && static_cast<std::size_t>(t) < agent.max_iterations) {
      ++t;
      StepRecord step;
      step.iteration = t;
      step.query = queue.pop();
      TopState top{step.query, history};
      step.top_action = top_decide(top, *ctx.catalog, agent.max_meta_paths, *providers.top, t, task_name, &step.calls);

      if (step.top_action.route == Route::kRag) {
        const auto& sel = step.top_action.selection;
        auto corpus = retrieve_subgraph(step.query.text, sel, *ctx.indexes, agent.top_n, *providers.embedder);
        step.corpus_provenance = corpus.provenance;
        step.corpus_text = serialize_corpus(corpus);
        LowState low = transfer_to_low(top, sel, std::move(corpus));
        step.intermediate_answer = low_summarize(low, *providers.low, t, task_name, &step.calls);
        step.reward.r_path = reward_path(sel);
        step.reward.r_rel = reward_rel(step.intermediate_answer, step.query.text, step.corpus_text);
      } else {
        step.intermediate_answer = llm_answer(top, *providers.top, t, task_name, &step.calls);
      }
      history.append(HistoryEntry{step.query.text, step.intermediate_answer, step.top_action.route});
      attach_action_scores(step);

      bool at_limit = static_cast<std::size_t>(t) >= agent.max_iterations;
      if (at_limit && step.top_action.control == Control::kContinue) {
        step.top_action.control = Control::kTerminate;
        step.forced_terminate = true;
      }
      bool stop = step.top_action.control == Control::kTerminate;
      tr.steps.push_back(std::move(step));
      if (stop) break;

      StepRecord& current = tr.steps.back();
      if (auto next = deepen(current.query, history, *providers.top, t, task_name, &current.calls)) {
        queue.push(std::move(*next));
      }
    }
    if (tr.steps.empty()) throw Error(ErrorCode::kInternal, "episode produced no steps");
    StepRecord& last = tr.steps.back();
    if (last.top_action.control != Control::kTerminate) {
      last.top_action.control = Control::kTerminate;
      last.forced_terminate = true;
    }

    Prediction pred = finalize(tr.initial_query, history, task, *providers.top, t, &tr.calls);
    tr.final_prediction = pred.label;
    tr.prediction_format_ok = pred.format_ok;

    bool steps_ok = true;
    for (const auto& s : tr.steps) steps_ok = steps_ok && !s.top_action.malformed;
    RewardIndicators ind;
    ind.answer_correct = gold && gold->index == pred.label.index ? 1 : 0;
    ind.answer_format = pred.format_ok ? 1 : 0;
    ind.action_format = steps_ok ? 1 : 0;
    last.reward.indicators = ind;
    last.reward.r_reason = reward_reason(history.size(), config.reward.expected_reason_length);
    last.reward.r_orm = reward_orm(ind.answer_correct, ind.answer_format, ind.action_format);
    static const ReferenceTrajectories kNoReferences;
    last.reward.r_rank = reward_rank(history.render(), ctx.references ? *ctx.references : kNoReferences,
                                     config.reward.alpha, config.reward.rank_mode);
  } catch (const Error& e) {
    tr.status = EpisodeStatus::kFailed;
    tr.error_code = e.code();
    tr.error = e.what();
  }
  for (auto& s : tr.steps) compose(s.reward, config.reward.eta);
  return tr;
}

}  // namespace ghar
