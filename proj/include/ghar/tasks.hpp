#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ghar/kg_store.hpp"

namespace ghar {

enum class TaskKind { kDec, kRead, kLos };

std::string_view to_string(TaskKind kind) noexcept;  // "DEC" | "READ" | "LOS"
TaskKind parse_task_kind(std::string_view text);     // case-insensitive; throws kInvalidArgument

inline constexpr double kDefaultReadmissionWindowDays = 15.0;

struct TaskSpec {
  TaskKind kind = TaskKind::kDec;
  std::vector<std::string> label_space;
  std::string description;

  /// Standard label space and description for a task. kappa only affects the
  /// READ description.
  static TaskSpec make(TaskKind kind, double kappa = kDefaultReadmissionWindowDays);

  std::optional<std::size_t> find_label(std::string_view value) const;  // case-insensitive
};

struct Label {
  TaskKind kind = TaskKind::kDec;
  std::string value;
  std::size_t index = 0;

  bool operator==(const Label&) const = default;
};

Label make_label(const TaskSpec& task, std::string_view value);  // throws kInvalidArgument

// Times are in days since an arbitrary epoch; fractions are allowed.
struct Visit {
  double encounter_time = 0.0;
  double discharge_time = 0.0;
  std::vector<std::string> diagnoses;
  std::vector<std::string> procedures;
  std::vector<std::string> medications;
  // Synthetic ground truth for DEC; never rendered into prompts.
  bool decompensation = false;

  bool operator==(const Visit&) const = default;
};

struct PatientRecord {
  std::string patient_id;
  std::vector<Visit> visits;

  bool operator==(const PatientRecord&) const = default;
};

/// Throws kInvalidArgument unless visits are nonempty, chronological and
/// each discharge is not before its encounter.
void validate(const PatientRecord& patient);

/// READ: "yes" iff the encounter gap between visit j and j+1 is <= kappa.
Label label_read(const PatientRecord& patient, std::size_t j, double kappa = kDefaultReadmissionWindowDays);
/// LOS: ten bins over whole days of stay.
Label label_los(const Visit& visit);
std::size_t los_bin(double stay_days);
Label label_dec(const Visit& visit);

/// The part of a patient's record an episode may see for a task. READ hides
/// the final visit (its timing is the label).
PatientRecord task_view(const PatientRecord& patient, TaskKind kind);

struct CohortSpec {
  std::uint64_t seed = 7;
  std::size_t n_patients = 100;
  std::size_t n_diagnoses = 40;
  std::size_t n_procedures = 20;
  std::size_t n_medications = 30;
  std::size_t min_visits = 2;
  std::size_t max_visits = 5;
  double mean_stay_days = 4.0;
  double dec_prevalence = 0.1;
  double high_risk_rate = 0.3;
  double kappa = kDefaultReadmissionWindowDays;
};

void validate(const CohortSpec& spec);

struct CohortEntry {
  PatientRecord patient;
  std::map<std::string, std::string> labels;  // "DEC"/"READ"/"LOS" -> label value
};

/// Seeded synthetic cohort. Generative rules:
///  - each patient is high-risk with probability high_risk_rate;
///  - each visit is flagged decompensated with probability dec_prevalence;
///    flagged visits carry diagnosis D000 with probability 0.8, others 0.05;
///  - high-risk patients return after 1-20 days and carry D001, low-risk
///    patients after 10-90 days;
///  - stays are exponential with mean mean_stay_days (x1.5 when high-risk),
///    and medication M000 is given on stays longer than a week;
///  - every patient has at least two visits so READ is always labelable.
std::vector<CohortEntry> gen_synthetic_cohort(const CohortSpec& spec);

/// Seeded heterogeneous graph whose disease/procedure/drug nodes reuse the
/// cohort code vocabulary (so prompts can show code names), padded with
/// gene/protein and effect/phenotype nodes up to n_nodes.
KnowledgeGraph gen_synthetic_kg(std::uint64_t seed, std::size_t n_nodes, const CohortSpec& vocab = {});
std::string to_tsv(const KnowledgeGraph& kg);

struct MetricsReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][pred]
};

/// Balanced accuracy averages recall over classes present in gold; macro F1
/// averages over classes present in gold or predictions, with 0/0 := 0.
MetricsReport metrics(std::span<const Label> predictions, std::span<const Label> gold, const TaskSpec& task);

enum class DataSplit { kTrain, kValidation, kTest };
std::string_view to_string(DataSplit split) noexcept;
DataSplit parse_data_split(std::string_view text);

struct SplitRatio {
  unsigned train = 6, validation = 2, test = 2;
};

/// Deterministic split by FNV-1a hash of the patient id.
DataSplit assign_split(std::string_view patient_id, SplitRatio ratio = {});

}  // namespace ghar
