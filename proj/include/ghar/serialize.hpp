#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ghar/agent.hpp"
#include "ghar/rl_math.hpp"
#include "ghar/tasks.hpp"

namespace ghar {

using ojson = nlohmann::ordered_json;

/// Trajectory JSON with a fixed key order. serialize(parse(line)) == line.
ojson trajectory_to_json(const Trajectory& tr);
Trajectory trajectory_from_json(const nlohmann::json& j);
std::string serialize_trajectory(const Trajectory& tr);  // one line, no newline
Trajectory parse_trajectory(std::string_view line);

/// Reads a JSON Lines trajectory file. Blank lines are skipped; a bad line is
/// a ParseError naming its line number.
std::vector<Trajectory> read_trajectories(const std::string& path);
std::vector<Trajectory> parse_trajectories(std::string_view text);

/// Short summary returned by the service for a finished episode.
ojson episode_result_json(const Trajectory& tr);

ojson patient_to_json(const PatientRecord& p);
PatientRecord patient_from_json(const nlohmann::json& j);

/// Cohort line: the patient record fields plus "labels": {"DEC"|"READ"|"LOS": value}.
ojson cohort_entry_to_json(const CohortEntry& e);
CohortEntry cohort_entry_from_json(const nlohmann::json& j);
std::string serialize_cohort(const std::vector<CohortEntry>& cohort);  // JSON Lines
std::vector<CohortEntry> parse_cohort(std::string_view text);
std::vector<CohortEntry> read_cohort(const std::string& path);

/// Score export line. Non-scorable trajectories carry only episode_id,
/// scorable=false and a reason.
ojson scores_to_json(const TrajectoryScores& s);

ojson metrics_to_json(const MetricsReport& m, const TaskSpec& task);

/// Human-readable dump of every step, prompt, provenance record and reward.
std::string render_replay(const Trajectory& tr);

std::string read_file(const std::string& path);  // throws kIo
void write_file(const std::string& path, std::string_view content);  // throws kIo

}  // namespace ghar
