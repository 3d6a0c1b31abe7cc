#include "ghar/serialize.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "ghar/config.hpp"
#include "strings.hpp"

namespace ghar {

using json = nlohmann::json;

namespace {

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<double> opt_double(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

ErrorCode parse_error_code(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kInternal); ++i) {
    if (to_string(static_cast<ErrorCode>(i)) == name) return static_cast<ErrorCode>(i);
  }
  throw Error(ErrorCode::kParse, "unknown error code '" + std::string(name) + "'");
}

ojson query_json(const Query& q) { return ojson{{"text", q.text}, {"origin", to_string(q.origin)}}; }

Query query_from(const json& j) {
  return Query{j.at("text").get<std::string>(), parse_query_origin(j.at("origin").get<std::string>())};
}

ojson label_json(const std::optional<Label>& l) {
  if (!l) return nullptr;
  return ojson{{"value", l->value}, {"index", l->index}};
}

std::optional<Label> label_from(const json& j, TaskKind kind) {
  if (j.is_null()) return std::nullopt;
  return Label{kind, j.at("value").get<std::string>(), j.at("index").get<std::size_t>()};
}

ojson calls_json(const CallLog& calls) {
  ojson arr = ojson::array();
  for (const auto& c : calls) {
    arr.push_back(ojson{{"tag", c.tag},
                        {"prompt", c.prompt},
                        {"response", c.response},
                        {"log_prob", opt(c.log_prob)},
                        {"ref_log_prob", opt(c.ref_log_prob)},
                        {"value", opt(c.value)}});
  }
  return arr;
}

CallLog calls_from(const json& j) {
  CallLog out;
  for (const auto& c : j) {
    out.push_back(CallRecord{c.at("tag").get<std::string>(), c.at("prompt").get<std::string>(),
                             c.at("response").get<std::string>(), opt_double(c, "log_prob"),
                             opt_double(c, "ref_log_prob"), opt_double(c, "value")});
  }
  return out;
}

ojson selection_json(const MetaPathSelection& s) {
  return ojson{{"correct", s.correct}, {"erroneous", s.erroneous}, {"repeated", s.repeated}, {"overflow", s.overflow}};
}

MetaPathSelection selection_from(const json& j) {
  MetaPathSelection s;
  s.correct = j.at("correct").get<std::vector<std::size_t>>();
  s.erroneous = j.at("erroneous").get<std::vector<std::string>>();
  s.repeated = j.at("repeated").get<std::vector<std::size_t>>();
  s.overflow = j.at("overflow").get<std::vector<std::size_t>>();
  return s;
}

ojson reward_json(const RewardBreakdown& r) {
  return ojson{{"r_reason", r.r_reason},
               {"r_path", r.r_path},
               {"r_rel", r.r_rel},
               {"r_cost", r.r_cost},
               {"r_orm", r.r_orm},
               {"r_rank", r.r_rank},
               {"r_all", r.r_all},
               {"indicators",
                {{"answer_correct", r.indicators.answer_correct},
                 {"answer_format", r.indicators.answer_format},
                 {"action_format", r.indicators.action_format}}}};
}

RewardBreakdown reward_from(const json& j) {
  RewardBreakdown r;
  r.r_reason = j.at("r_reason").get<double>();
  r.r_path = j.at("r_path").get<double>();
  r.r_rel = j.at("r_rel").get<double>();
  r.r_cost = j.at("r_cost").get<double>();
  r.r_orm = j.at("r_orm").get<double>();
  r.r_rank = j.at("r_rank").get<double>();
  r.r_all = j.at("r_all").get<double>();
  const auto& ind = j.at("indicators");
  r.indicators.answer_correct = ind.at("answer_correct").get<int>();
  r.indicators.answer_format = ind.at("answer_format").get<int>();
  r.indicators.action_format = ind.at("action_format").get<int>();
  return r;
}

ojson step_json(const StepRecord& s) {
  ojson prov = ojson::array();
  for (const auto& p : s.corpus_provenance) {
    prov.push_back(ojson{{"meta_path", p.meta_path},
                         {"kind", p.kind == ItemKind::kNode ? "node" : "edge"},
                         {"key", p.key},
                         {"score", p.score}});
  }
  return ojson{{"iteration", s.iteration},
               {"query", query_json(s.query)},
               {"top_action",
                {{"route", to_string(s.top_action.route)},
                 {"control", to_string(s.top_action.control)},
                 {"malformed", s.top_action.malformed},
                 {"selection", selection_json(s.top_action.selection)}}},
               {"forced_terminate", s.forced_terminate},
               {"corpus_provenance", std::move(prov)},
               {"corpus_text", s.corpus_text},
               {"intermediate_answer", s.intermediate_answer},
               {"action_log_prob", opt(s.action_log_prob)},
               {"ref_log_prob", opt(s.ref_log_prob)},
               {"value_estimate", opt(s.value_estimate)},
               {"reward", reward_json(s.reward)},
               {"calls", calls_json(s.calls)}};
}

StepRecord step_from(const json& j) {
  StepRecord s;
  s.iteration = j.at("iteration").get<int>();
  s.query = query_from(j.at("query"));
  const auto& a = j.at("top_action");
  s.top_action.route = parse_route(a.at("route").get<std::string>());
  s.top_action.control = parse_control(a.at("control").get<std::string>());
  s.top_action.malformed = a.at("malformed").get<bool>();
  s.top_action.selection = selection_from(a.at("selection"));
  s.forced_terminate = j.at("forced_terminate").get<bool>();
  for (const auto& p : j.at("corpus_provenance")) {
    auto kind = p.at("kind").get<std::string>();
    if (kind != "node" && kind != "edge") throw Error(ErrorCode::kParse, "provenance kind must be node or edge");
    s.corpus_provenance.push_back(Provenance{p.at("meta_path").get<std::size_t>(),
                                             kind == "node" ? ItemKind::kNode : ItemKind::kEdge,
                                             p.at("key").get<std::string>(), p.at("score").get<double>()});
  }
  s.corpus_text = j.at("corpus_text").get<std::string>();
  s.intermediate_answer = j.at("intermediate_answer").get<std::string>();
  s.action_log_prob = opt_double(j, "action_log_prob");
  s.ref_log_prob = opt_double(j, "ref_log_prob");
  s.value_estimate = opt_double(j, "value_estimate");
  s.reward = reward_from(j.at("reward"));
  s.calls = calls_from(j.at("calls"));
  return s;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string opt_text(const std::optional<double>& v) { return v ? fixed(*v) : std::string("-"); }

void indent(std::ostringstream& os, std::string_view text, std::string_view pad) {
  for (auto line : detail::split_lines(text)) os << pad << line << '\n';
}

}  // namespace

ojson trajectory_to_json(const Trajectory& tr) {
  ojson steps = ojson::array();
  for (const auto& s : tr.steps) steps.push_back(step_json(s));
  ojson rewrites = ojson::array();
  for (const auto& q : tr.rewrites) rewrites.push_back(query_json(q));
  ojson providers = ojson::object();
  for (const auto& [role, name] : tr.providers) providers[role] = name;
  return ojson{{"episode_id", tr.episode_id},
               {"status", to_string(tr.status)},
               {"error_code", tr.error_code == ErrorCode::kOk ? ojson(nullptr) : ojson(to_string(tr.error_code))},
               {"error", tr.error},
               {"task", to_string(tr.task.kind)},
               {"label_space", tr.task.label_space},
               {"patient_id", tr.patient_id},
               {"config", snapshot_json(tr.config)},
               {"providers", std::move(providers)},
               {"initial_query", query_json(tr.initial_query)},
               {"rewrites", std::move(rewrites)},
               {"steps", std::move(steps)},
               {"final_prediction", label_json(tr.final_prediction)},
               {"prediction_format_ok", tr.prediction_format_ok},
               {"gold", label_json(tr.gold)},
               {"calls", calls_json(tr.calls)}};
}

Trajectory trajectory_from_json(const json& j) {
  try {
    Trajectory tr;
    tr.episode_id = j.at("episode_id").get<std::string>();
    auto status = j.at("status").get<std::string>();
    if (status != "ok" && status != "failed") throw Error(ErrorCode::kParse, "status must be ok or failed");
    tr.status = status == "ok" ? EpisodeStatus::kOk : EpisodeStatus::kFailed;
    const auto& code = j.at("error_code");
    tr.error_code = code.is_null() ? ErrorCode::kOk : parse_error_code(code.get<std::string>());
    tr.error = j.at("error").get<std::string>();
    tr.config = snapshot_from_json(j.at("config"));
    tr.task = TaskSpec::make(parse_task_kind(j.at("task").get<std::string>()), tr.config.agent.kappa);
    tr.task.label_space = j.at("label_space").get<std::vector<std::string>>();
    tr.patient_id = j.at("patient_id").get<std::string>();
    for (const auto& [role, name] : j.at("providers").items()) tr.providers[role] = name.get<std::string>();
    tr.initial_query = query_from(j.at("initial_query"));
    for (const auto& q : j.at("rewrites")) tr.rewrites.push_back(query_from(q));
    for (const auto& s : j.at("steps")) tr.steps.push_back(step_from(s));
    tr.final_prediction = label_from(j.at("final_prediction"), tr.task.kind);
    tr.prediction_format_ok = j.at("prediction_format_ok").get<bool>();
    tr.gold = label_from(j.at("gold"), tr.task.kind);
    tr.calls = calls_from(j.at("calls"));
    return tr;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed trajectory: ") + e.what());
  }
}

std::string serialize_trajectory(const Trajectory& tr) { return trajectory_to_json(tr).dump(); }

Trajectory parse_trajectory(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kParse, "trajectory line is not valid JSON");
  return trajectory_from_json(j);
}

std::vector<Trajectory> parse_trajectories(std::string_view text) {
  std::vector<Trajectory> out;
  auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    try {
      out.push_back(parse_trajectory(lines[i]));
    } catch (const Error& e) {
      throw ParseError("trajectory line " + std::to_string(i + 1) + ": " + e.what(), i + 1);
    }
  }
  return out;
}

std::vector<Trajectory> read_trajectories(const std::string& path) { return parse_trajectories(read_file(path)); }

ojson episode_result_json(const Trajectory& tr) {
  RewardBreakdown total;
  for (const auto& s : tr.steps) {
    total.r_reason += s.reward.r_reason;
    total.r_path += s.reward.r_path;
    total.r_rel += s.reward.r_rel;
    total.r_cost += s.reward.r_cost;
    total.r_orm += s.reward.r_orm;
    total.r_rank += s.reward.r_rank;
    total.r_all += s.reward.r_all;
  }
  if (!tr.steps.empty()) total.indicators = tr.steps.back().reward.indicators;
  return ojson{{"episode_id", tr.episode_id},
               {"status", to_string(tr.status)},
               {"error_code", tr.error_code == ErrorCode::kOk ? ojson(nullptr) : ojson(to_string(tr.error_code))},
               {"error", tr.error},
               {"task", to_string(tr.task.kind)},
               {"patient_id", tr.patient_id},
               {"final_prediction", label_json(tr.final_prediction)},
               {"gold", label_json(tr.gold)},
               {"reward", reward_json(total)},
               {"step_count", tr.steps.size()}};
}

ojson patient_to_json(const PatientRecord& p) {
  ojson visits = ojson::array();
  for (const auto& v : p.visits) {
    visits.push_back(ojson{{"encounter_time", v.encounter_time},
                           {"discharge_time", v.discharge_time},
                           {"diagnoses", v.diagnoses},
                           {"procedures", v.procedures},
                           {"medications", v.medications},
                           {"decompensation", v.decompensation}});
  }
  return ojson{{"patient_id", p.patient_id}, {"visits", std::move(visits)}};
}

PatientRecord patient_from_json(const json& j) {
  PatientRecord p;
  try {
    p.patient_id = j.at("patient_id").get<std::string>();
    for (const auto& v : j.at("visits")) {
      Visit visit;
      visit.encounter_time = v.at("encounter_time").get<double>();
      visit.discharge_time = v.at("discharge_time").get<double>();
      visit.diagnoses = v.value("diagnoses", std::vector<std::string>{});
      visit.procedures = v.value("procedures", std::vector<std::string>{});
      visit.medications = v.value("medications", std::vector<std::string>{});
      visit.decompensation = v.value("decompensation", false);
      p.visits.push_back(std::move(visit));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed patient record: ") + e.what());
  }
  validate(p);
  return p;
}

ojson cohort_entry_to_json(const CohortEntry& e) {
  ojson j = patient_to_json(e.patient);
  ojson labels = ojson::object();
  for (const auto& [task, value] : e.labels) labels[task] = value;
  j["labels"] = std::move(labels);
  return j;
}

CohortEntry cohort_entry_from_json(const json& j) {
  CohortEntry e;
  e.patient = patient_from_json(j);
  if (j.contains("labels")) {
    try {
      for (const auto& [task, value] : j.at("labels").items()) {
        std::string kind(to_string(parse_task_kind(task)));
        make_label(TaskSpec::make(parse_task_kind(task)), value.get<std::string>());
        e.labels[kind] = value.get<std::string>();
      }
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kParse, std::string("malformed labels: ") + ex.what());
    }
  }
  return e;
}

std::string serialize_cohort(const std::vector<CohortEntry>& cohort) {
  std::string out;
  for (const auto& e : cohort) {
    out += cohort_entry_to_json(e).dump();
    out += '\n';
  }
  return out;
}

std::vector<CohortEntry> parse_cohort(std::string_view text) {
  std::vector<CohortEntry> out;
  auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    json j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) throw ParseError("cohort line " + std::to_string(i + 1) + ": invalid JSON", i + 1);
    try {
      out.push_back(cohort_entry_from_json(j));
    } catch (const Error& e) {
      throw ParseError("cohort line " + std::to_string(i + 1) + ": " + e.what(), i + 1);
    }
  }
  return out;
}

std::vector<CohortEntry> read_cohort(const std::string& path) { return parse_cohort(read_file(path)); }

ojson scores_to_json(const TrajectoryScores& s) {
  return ojson{{"episode_id", s.episode_id},
               {"scorable", true},
               {"rewards", s.rewards},
               {"values", s.values},
               {"action_log_probs", s.action_log_probs},
               {"ref_log_probs", s.ref_log_probs},
               {"advantages", s.advantages},
               {"returns", s.returns},
               {"actor_objective", s.actor_objective},
               {"critic_loss", s.critic_loss},
               {"total_loss", s.total_loss}};
}

ojson metrics_to_json(const MetricsReport& m, const TaskSpec& task) {
  return ojson{{"task", to_string(task.kind)},
               {"n", m.n},
               {"accuracy", m.accuracy},
               {"balanced_accuracy", m.balanced_accuracy},
               {"macro_f1", m.macro_f1},
               {"labels", task.label_space},
               {"confusion", m.confusion}};
}

std::string render_replay(const Trajectory& tr) {
  std::ostringstream os;
  os << "episode " << tr.episode_id << "  task " << to_string(tr.task.kind) << "  patient " << tr.patient_id
     << "  status " << to_string(tr.status) << '\n';
  if (tr.status == EpisodeStatus::kFailed) os << "error (" << to_string(tr.error_code) << "): " << tr.error << '\n';
  os << "config " << snapshot_json(tr.config).dump() << '\n';
  os << "initial query:\n";
  indent(os, tr.initial_query.text, "  ");
  os << "rewrites:\n";
  for (std::size_t i = 0; i < tr.rewrites.size(); ++i) os << "  [" << i + 1 << "] " << tr.rewrites[i].text << '\n';
  for (const auto& s : tr.steps) {
    os << "\n== step " << s.iteration << " (" << to_string(s.query.origin) << ")\n";
    os << "sub-query: " << s.query.text << '\n';
    os << "action: route=" << to_string(s.top_action.route) << " control=" << to_string(s.top_action.control);
    if (s.forced_terminate) os << " (forced)";
    if (s.top_action.malformed) os << " (malformed)";
    os << '\n';
    if (s.top_action.route == Route::kRag) {
      os << "meta-paths: " << selection_json(s.top_action.selection).dump() << '\n';
      os << "provenance:\n";
      if (s.corpus_provenance.empty()) os << "  (none)\n";
      for (const auto& p : s.corpus_provenance) {
        os << "  mp " << p.meta_path << ' ' << (p.kind == ItemKind::kNode ? "node" : "edge") << ' ' << p.key
           << "  score " << fixed(p.score) << '\n';
      }
    }
    os << "answer:\n";
    indent(os, s.intermediate_answer, "  ");
    os << "log_prob " << opt_text(s.action_log_prob) << "  ref_log_prob " << opt_text(s.ref_log_prob)
       << "  value " << opt_text(s.value_estimate) << '\n';
    const auto& r = s.reward;
    os << "reward: reason " << fixed(r.r_reason) << "  path " << fixed(r.r_path) << "  rel " << fixed(r.r_rel)
       << "  cost " << fixed(r.r_cost) << "  orm " << fixed(r.r_orm) << "  rank " << fixed(r.r_rank) << "  all "
       << fixed(r.r_all) << '\n';
    for (const auto& c : s.calls) {
      os << "-- " << c.tag << " prompt:\n";
      indent(os, c.prompt, "   | ");
      os << "-- " << c.tag << " response:\n";
      indent(os, c.response, "   | ");
    }
  }
  os << "\nfinal prediction: " << (tr.final_prediction ? tr.final_prediction->value : std::string("-"))
     << (tr.prediction_format_ok ? "" : " (format fallback)") << "  gold: " << (tr.gold ? tr.gold->value : "-")
     << '\n';
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

}  // namespace ghar
