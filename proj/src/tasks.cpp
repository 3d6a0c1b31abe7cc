#include "ghar/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "ghar/error.hpp"
#include "strings.hpp"

namespace ghar {

std::string_view to_string(TaskKind kind) noexcept {
  switch (kind) {
    case TaskKind::kDec: return "DEC";
    case TaskKind::kRead: return "READ";
    case TaskKind::kLos: return "LOS";
  }
  return "DEC";
}

TaskKind parse_task_kind(std::string_view text) {
  if (detail::iequals(text, "DEC")) return TaskKind::kDec;
  if (detail::iequals(text, "READ")) return TaskKind::kRead;
  if (detail::iequals(text, "LOS")) return TaskKind::kLos;
  throw Error(ErrorCode::kInvalidArgument, "unknown task '" + std::string(text) + "' (expected DEC, READ or LOS)");
}

namespace {

std::string format_days(double d) {
  std::ostringstream os;
  os << d;
  return os.str();
}

}  // namespace

TaskSpec TaskSpec::make(TaskKind kind, double kappa) {
  TaskSpec t;
  t.kind = kind;
  switch (kind) {
    case TaskKind::kDec:
      t.label_space = {"no", "yes"};
      t.description =
          "Decompensation prediction: given the patient's visits, predict whether the patient "
          "will suffer acute physiological decompensation within the next 24 hours.";
      break;
    case TaskKind::kRead:
      t.label_space = {"no", "yes"};
      t.description =
          "Readmission prediction: given the patient's visits, predict whether the patient will "
          "be readmitted within " + format_days(kappa) + " days of the most recent visit.";
      break;
    case TaskKind::kLos:
      t.label_space = {"<1 day", "1 day",  "2 days", "3 days",    "4 days",
                       "5 days", "6 days", "7 days", "8-14 days", ">14 days"};
      t.description =
          "Length-of-stay prediction: given the patient's visits, predict the length of stay of "
          "the most recent visit.";
      break;
  }
  return t;
}

std::optional<std::size_t> TaskSpec::find_label(std::string_view value) const {
  value = detail::trim(value);
  for (std::size_t i = 0; i < label_space.size(); ++i) {
    if (detail::iequals(label_space[i], value)) return i;
  }
  return std::nullopt;
}

Label make_label(const TaskSpec& task, std::string_view value) {
  auto idx = task.find_label(value);
  if (!idx) {
    throw Error(ErrorCode::kInvalidArgument, "'" + std::string(value) + "' is not a " +
                                                 std::string(to_string(task.kind)) + " label");
  }
  return Label{task.kind, task.label_space[*idx], *idx};
}

void validate(const PatientRecord& patient) {
  if (patient.patient_id.empty()) throw Error(ErrorCode::kInvalidArgument, "patient_id is empty");
  if (patient.visits.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "patient '" + patient.patient_id + "' has no visits");
  }
  for (std::size_t i = 0; i < patient.visits.size(); ++i) {
    const Visit& v = patient.visits[i];
    if (!std::isfinite(v.encounter_time) || !std::isfinite(v.discharge_time) ||
        v.discharge_time < v.encounter_time) {
      throw Error(ErrorCode::kInvalidArgument,
                  "patient '" + patient.patient_id + "' visit " + std::to_string(i) + ": discharge precedes encounter");
    }
    if (i > 0 && v.encounter_time < patient.visits[i - 1].encounter_time) {
      throw Error(ErrorCode::kInvalidArgument,
                  "patient '" + patient.patient_id + "' visits are not chronological");
    }
  }
}

Label label_read(const PatientRecord& patient, std::size_t j, double kappa) {
  if (j + 1 >= patient.visits.size()) {
    throw Error(ErrorCode::kNotLabelable, "patient '" + patient.patient_id + "' has no visit after index " +
                                              std::to_string(j));
  }
  double gap = patient.visits[j + 1].encounter_time - patient.visits[j].encounter_time;
  return make_label(TaskSpec::make(TaskKind::kRead), gap <= kappa ? "yes" : "no");
}

std::size_t los_bin(double stay_days) {
  if (!(stay_days >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "length of stay must be non-negative");
  }
  double whole = std::floor(stay_days);
  if (whole < 1.0) return 0;
  if (whole <= 7.0) return static_cast<std::size_t>(whole);
  if (whole <= 14.0) return 8;
  return 9;
}

Label label_los(const Visit& visit) {
  auto bin = los_bin(visit.discharge_time - visit.encounter_time);
  auto task = TaskSpec::make(TaskKind::kLos);
  return Label{TaskKind::kLos, task.label_space[bin], bin};
}

Label label_dec(const Visit& visit) {
  return make_label(TaskSpec::make(TaskKind::kDec), visit.decompensation ? "yes" : "no");
}

PatientRecord task_view(const PatientRecord& patient, TaskKind kind) {
  PatientRecord view = patient;
  if (kind == TaskKind::kRead && view.visits.size() > 1) view.visits.pop_back();
  return view;
}

void validate(const CohortSpec& spec) {
  if (spec.n_diagnoses < 3 || spec.n_procedures < 1 || spec.n_medications < 1) {
    throw Error(ErrorCode::kInvalidArgument, "cohort code vocabularies must be non-empty (>= 3 diagnoses)");
  }
  if (spec.min_visits < 2 || spec.max_visits < spec.min_visits) {
    throw Error(ErrorCode::kInvalidArgument, "cohort visit counts must satisfy 2 <= min_visits <= max_visits");
  }
  if (!(spec.mean_stay_days > 0.0)) throw Error(ErrorCode::kInvalidArgument, "mean_stay_days must be positive");
  for (double p : {spec.dec_prevalence, spec.high_risk_rate}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "probabilities must lie in [0, 1]");
  }
}

namespace {

// Portable RNG: std distributions are implementation-defined, so draws are
// made directly from the engine's bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  bool bernoulli(double p) { return uniform() < p; }
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

 private:
  std::mt19937_64 engine_;
};

std::string code(char prefix, std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

std::vector<std::string> draw_codes(Rng& rng, char prefix, std::size_t vocab, std::size_t lo,
                                    std::size_t hi, std::size_t offset = 0) {
  std::set<std::string> picked;
  std::size_t count = rng.between(lo, hi);
  for (std::size_t i = 0; i < count; ++i) picked.insert(code(prefix, offset + rng.below(vocab - offset)));
  return {picked.begin(), picked.end()};
}

void add_code(std::vector<std::string>& codes, std::string c) {
  if (std::find(codes.begin(), codes.end(), c) == codes.end()) {
    codes.push_back(std::move(c));
    std::sort(codes.begin(), codes.end());
  }
}

}  // namespace

std::vector<CohortEntry> gen_synthetic_cohort(const CohortSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  std::vector<CohortEntry> cohort;
  cohort.reserve(spec.n_patients);
  for (std::size_t p = 0; p < spec.n_patients; ++p) {
    CohortEntry entry;
    entry.patient.patient_id = "P" + std::to_string(100000 + p);
    bool high_risk = rng.bernoulli(spec.high_risk_rate);
    std::size_t n_visits = rng.between(spec.min_visits, spec.max_visits);
    double t = static_cast<double>(rng.below(365));
    for (std::size_t v = 0; v < n_visits; ++v) {
      Visit visit;
      visit.encounter_time = t;
      double stay = rng.exponential(spec.mean_stay_days * (high_risk ? 1.5 : 1.0));
      visit.discharge_time = t + std::round(stay * 4.0) / 4.0;
      // D000/D001 are reserved signal codes.
      visit.diagnoses = draw_codes(rng, 'D', spec.n_diagnoses, 1, 4, 2);
      visit.procedures = draw_codes(rng, 'P', spec.n_procedures, 0, 2);
      visit.medications = draw_codes(rng, 'M', spec.n_medications, 1, 3, spec.n_medications > 1 ? 1 : 0);
      visit.decompensation = rng.bernoulli(spec.dec_prevalence);
      if (rng.bernoulli(visit.decompensation ? 0.8 : 0.05)) add_code(visit.diagnoses, code('D', 0));
      if (high_risk) add_code(visit.diagnoses, code('D', 1));
      if (visit.discharge_time - visit.encounter_time > 7.0) add_code(visit.medications, code('M', 0));
      entry.patient.visits.push_back(std::move(visit));

      double min_gap = std::ceil(entry.patient.visits.back().discharge_time - t);
      double gap = static_cast<double>(high_risk ? rng.between(1, 20) : rng.between(10, 90));
      t += std::max(gap, min_gap);
    }
    const auto& visits = entry.patient.visits;
    entry.labels["DEC"] = label_dec(visits.back()).value;
    entry.labels["READ"] = label_read(entry.patient, visits.size() - 2, spec.kappa).value;
    entry.labels["LOS"] = label_los(visits.back()).value;
    cohort.push_back(std::move(entry));
  }
  return cohort;
}

namespace {

constexpr const char* kDiseaseNames[] = {
    "sepsis", "chronic heart failure", "acute kidney injury", "pneumonia", "type 2 diabetes",
    "hypertension", "atrial fibrillation", "COPD", "acute respiratory failure", "anemia",
    "influenza", "urinary tract infection", "hypothyroidism", "asthma", "stroke"};
constexpr const char* kDrugNames[] = {
    "furosemide", "metoprolol", "insulin glargine", "vancomycin", "heparin", "oseltamivir",
    "lisinopril", "warfarin", "albuterol", "ceftriaxone", "levothyroxine", "atorvastatin"};
constexpr const char* kProcedureNames[] = {
    "mechanical ventilation", "hemodialysis", "central venous catheter", "blood transfusion",
    "echocardiography", "bronchoscopy", "cardiac catheterization", "lumbar puncture"};

std::string named(const char* const* names, std::size_t count, std::size_t i, const char* fallback) {
  if (i < count) return names[i];
  return std::string(fallback) + " " + std::to_string(i);
}

}  // namespace

KnowledgeGraph gen_synthetic_kg(std::uint64_t seed, std::size_t n_nodes, const CohortSpec& vocab) {
  Rng rng(seed ^ 0x6b6eULL);
  KnowledgeGraph kg;
  std::vector<std::string> diseases, drugs, procedures, genes, effects;
  auto add = [&](std::vector<std::string>& bucket, std::string id, const std::string& type, std::string name) {
    if (kg.nodes().size() >= n_nodes) return;
    kg.add_node(Node{id, type, std::move(name)});
    bucket.push_back(std::move(id));
  };
  for (std::size_t i = 0; i < vocab.n_diagnoses; ++i) {
    add(diseases, code('D', i), "disease", named(kDiseaseNames, std::size(kDiseaseNames), i, "disease"));
  }
  for (std::size_t i = 0; i < vocab.n_procedures; ++i) {
    add(procedures, code('P', i), "procedure",
        named(kProcedureNames, std::size(kProcedureNames), i, "procedure"));
  }
  for (std::size_t i = 0; i < vocab.n_medications; ++i) {
    add(drugs, code('M', i), "drug", named(kDrugNames, std::size(kDrugNames), i, "drug"));
  }
  std::size_t rest = n_nodes > kg.nodes().size() ? n_nodes - kg.nodes().size() : 0;
  std::size_t n_genes = rest - rest * 2 / 5;
  for (std::size_t i = 0; i < n_genes; ++i) add(genes, "G" + std::to_string(i), "gene/protein", "GENE" + std::to_string(i));
  for (std::size_t i = 0; kg.nodes().size() < n_nodes; ++i) {
    add(effects, "E" + std::to_string(i), "effect/phenotype", "phenotype " + std::to_string(i));
  }

  auto link = [&](const std::vector<std::string>& from, const std::string& relation,
                  const std::vector<std::string>& to, std::size_t per_node) {
    if (to.empty()) return;
    for (const auto& f : from) {
      for (std::size_t k = 0; k < per_node; ++k) {
        const auto& t = to[rng.below(to.size())];
        if (t != f) kg.add_edge(Edge{f, relation, t});
      }
    }
  };
  link(diseases, "treated_by", drugs, 2);
  link(diseases, "associated_with", genes, 2);
  link(diseases, "disease_disease", diseases, 1);
  link(drugs, "drug_protein", genes, 2);
  link(drugs, "side_effect", effects, 1);
  link(procedures, "indicated_for", diseases, 1);
  link(genes, "protein_protein", genes, 1);
  link(effects, "phenotype_protein", genes, 1);
  return kg;
}

std::string to_tsv(const KnowledgeGraph& kg) {
  std::string out = "# head_id\thead_type\thead_name\trelation\ttail_id\ttail_type\ttail_name\n";
  for (const auto& e : kg.edges()) {
    const Node& h = kg.node(e.head);
    const Node& t = kg.node(e.tail);
    out += h.id + '\t' + h.type + '\t' + h.name + '\t' + e.relation + '\t' + t.id + '\t' + t.type + '\t' +
           t.name + '\n';
  }
  return out;
}

MetricsReport metrics(std::span<const Label> predictions, std::span<const Label> gold, const TaskSpec& task) {
  if (predictions.size() != gold.size()) {
    throw Error(ErrorCode::kShape, "metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                                       std::to_string(gold.size()) + " gold labels");
  }
  const std::size_t k = task.label_space.size();
  MetricsReport r;
  r.n = gold.size();
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].kind != task.kind || predictions[i].kind != task.kind) {
      throw Error(ErrorCode::kInvalidArgument, "metrics: label belongs to a different task");
    }
    if (gold[i].index >= k || predictions[i].index >= k) {
      throw Error(ErrorCode::kInvalidArgument, "metrics: label index out of range");
    }
    ++r.confusion[gold[i].index][predictions[i].index];
    if (gold[i].index == predictions[i].index) ++correct;
  }
  if (r.n == 0) return r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);

  double recall_sum = 0.0, f1_sum = 0.0;
  std::size_t recall_classes = 0, f1_classes = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = r.confusion[c][c];
    std::size_t gold_c = 0, pred_c = 0;
    for (std::size_t j = 0; j < k; ++j) {
      gold_c += r.confusion[c][j];
      pred_c += r.confusion[j][c];
    }
    if (gold_c > 0) {
      recall_sum += static_cast<double>(tp) / static_cast<double>(gold_c);
      ++recall_classes;
    }
    if (gold_c > 0 || pred_c > 0) {
      double precision = pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
      double recall = gold_c ? static_cast<double>(tp) / static_cast<double>(gold_c) : 0.0;
      f1_sum += precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
      ++f1_classes;
    }
  }
  r.balanced_accuracy = recall_sum / static_cast<double>(recall_classes);
  r.macro_f1 = f1_sum / static_cast<double>(f1_classes);
  return r;
}

std::string_view to_string(DataSplit split) noexcept {
  switch (split) {
    case DataSplit::kTrain: return "train";
    case DataSplit::kValidation: return "validation";
    case DataSplit::kTest: return "test";
  }
  return "train";
}

DataSplit parse_data_split(std::string_view text) {
  if (detail::iequals(text, "train")) return DataSplit::kTrain;
  if (detail::iequals(text, "validation") || detail::iequals(text, "val")) return DataSplit::kValidation;
  if (detail::iequals(text, "test")) return DataSplit::kTest;
  throw Error(ErrorCode::kInvalidArgument, "unknown split '" + std::string(text) + "'");
}

DataSplit assign_split(std::string_view patient_id, SplitRatio ratio) {
  unsigned total = ratio.train + ratio.validation + ratio.test;
  if (total == 0) throw Error(ErrorCode::kInvalidArgument, "split ratio must be positive");
  auto bucket = detail::splitmix64(detail::fnv1a64(patient_id)) % total;
  if (bucket < ratio.train) return DataSplit::kTrain;
  if (bucket < ratio.train + ratio.validation) return DataSplit::kValidation;
  return DataSplit::kTest;
}

}  // namespace ghar
