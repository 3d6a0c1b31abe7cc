// Exercises the C interface through the shared library only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "ghar/ghar.h"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return std::string(GHAR_FIXTURES) + "/" + name; }

struct Scratch {
  fs::path dir = fs::temp_directory_path() / ("ghar_capi_" + std::to_string(::getpid()));
  Scratch() { fs::create_directories(dir); }
  ~Scratch() { fs::remove_all(dir); }
  std::string file(const std::string& n) const { return (dir / n).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string take(char* s) {
  std::string out = s ? s : "";
  ghar_string_free(s);
  return out;
}

json last_error() { return json::parse(ghar_last_error()); }

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("status names and exit codes") {
    CHECK(std::string(ghar_version()).size() > 0);
    CHECK(std::string(ghar_status_name(GHAR_OK)) == "ok");
    CHECK(std::string(ghar_status_name(GHAR_UNKNOWN_META_PATH)) == "unknown_meta_path");
    CHECK(ghar_status_exit_code(GHAR_OK) == 0);
    CHECK(ghar_status_exit_code(GHAR_INVALID_ARGUMENT) == 1);
    CHECK(ghar_status_exit_code(GHAR_CONFIG_ERROR) == 1);
    CHECK(ghar_status_exit_code(GHAR_UNKNOWN_META_PATH) == 1);
    CHECK(ghar_status_exit_code(GHAR_PROVIDER_ERROR) == 2);
    CHECK(ghar_status_exit_code(GHAR_INTERNAL_ERROR) == 2);
  }

  TEST_CASE("engine creation errors are reported as JSON") {
    ghar_engine* e = nullptr;
    CHECK(ghar_engine_create(nullptr, "{not json", 0, &e) == GHAR_PARSE_ERROR);
    CHECK(e == nullptr);
    CHECK(last_error()["error"] == "parse_error");
    CHECK(ghar_engine_create(nullptr, R"({"agent": {"KK": 1}})", 0, &e) == GHAR_CONFIG_ERROR);
    CHECK(last_error()["message"].get<std::string>().find("agent.KK") != std::string::npos);
    CHECK(ghar_engine_create(nullptr, nullptr, 0, nullptr) == GHAR_INVALID_ARGUMENT);
  }

  TEST_CASE("last error is per thread") {
    ghar_engine* e = nullptr;
    ghar_engine_create(nullptr, "{", 0, &e);
    std::string other;
    std::thread([&] { other = ghar_last_error(); }).join();
    CHECK(other.empty());
    CHECK_FALSE(std::string(ghar_last_error()).empty());
  }

  TEST_CASE("ingest writes the catalog") {
    Scratch s;
    char* summary = nullptr;
    REQUIRE(ghar_ingest(fixture("toy_kg.tsv").c_str(), s.file("catalog.json").c_str(), &summary) == GHAR_OK);
    auto j = json::parse(take(summary));
    CHECK(j["edges"] == 6);
    CHECK(j["meta_paths"] == 3);
    auto cat = json::parse(slurp(s.file("catalog.json")));
    CHECK(cat.size() == 3);
    CHECK(cat[1]["relation"] == "treated_by");
    CHECK(ghar_ingest("/nonexistent.tsv", nullptr, &summary) == GHAR_IO_ERROR);
  }

  TEST_CASE("full pipeline through the C interface") {
    Scratch s;
    REQUIRE(ghar_gen_cohort(R"({"seed": 3, "n_patients": 6})", s.file("cohort.jsonl").c_str()) == GHAR_OK);
    json overrides = {{"paths", {{"kg", fixture("toy_kg.tsv")}, {"cohort", s.file("cohort.jsonl")}}}};
    ghar_engine* e = nullptr;
    REQUIRE(ghar_engine_create(nullptr, overrides.dump().c_str(), 0, &e) == GHAR_OK);

    char* out = nullptr;
    REQUIRE(ghar_engine_catalog_json(e, &out) == GHAR_OK);
    CHECK(json::parse(take(out)).size() == 3);
    REQUIRE(ghar_engine_health_json(e, &out) == GHAR_OK);
    CHECK(json::parse(take(out))["indexes"]["count"] == 3);
    REQUIRE(ghar_engine_config_json(e, &out) == GHAR_OK);
    CHECK(json::parse(take(out))["agent"]["K"] == 3);

    const char* bad_names[] = {"1", "(drug, flies, gene/protein)"};
    CHECK(ghar_engine_build_indexes(e, bad_names, 2, s.file("idx.jsonl").c_str()) == GHAR_UNKNOWN_META_PATH);
    CHECK(last_error()["message"].get<std::string>().find("(drug, flies, gene/protein)") != std::string::npos);
    REQUIRE(ghar_engine_build_indexes(e, nullptr, 0, s.file("idx.jsonl").c_str()) == GHAR_OK);
    CHECK(fs::file_size(s.file("idx.jsonl")) > 0);

    CHECK(ghar_engine_run_episode(e, R"({"task": "XYZ"})", &out) == GHAR_INVALID_ARGUMENT);
    CHECK(last_error()["fields"].size() >= 2);

    auto cohort_line = slurp(s.file("cohort.jsonl"));
    auto pid = json::parse(cohort_line.substr(0, cohort_line.find('\n')))["patient_id"].get<std::string>();
    json req = {{"task", "DEC"}, {"patient_id", pid}};
    REQUIRE(ghar_engine_run_episode(e, req.dump().c_str(), &out) == GHAR_OK);
    auto line = take(out);
    auto tr = json::parse(line);
    CHECK(tr["patient_id"] == pid);
    CHECK(tr["status"] == "ok");

    REQUIRE(ghar_engine_run_cohort(e, nullptr, "DEC", 0, s.file("traj.jsonl").c_str()) == GHAR_OK);
    auto lines = slurp(s.file("traj.jsonl"));
    CHECK(std::count(lines.begin(), lines.end(), '\n') == 6);
    CHECK(lines.substr(0, lines.find('\n')) == line);

    REQUIRE(ghar_eval(s.file("traj.jsonl").c_str(), nullptr, nullptr, nullptr, &out) == GHAR_OK);
    auto m = json::parse(take(out));
    CHECK(m["n"] == 6);
    CHECK(m["task"] == "DEC");

    std::size_t scored = 0;
    REQUIRE(ghar_score(s.file("traj.jsonl").c_str(), s.file("scores.jsonl").c_str(), &scored) == GHAR_OK);
    CHECK(scored == 6);

    REQUIRE(ghar_replay(s.file("traj.jsonl").c_str(), nullptr, &out) == GHAR_OK);
    CHECK(take(out).find(tr["episode_id"].get<std::string>()) != std::string::npos);
    CHECK(ghar_replay(s.file("traj.jsonl").c_str(), "NOPE", &out) == GHAR_NOT_FOUND);

    ghar_engine_destroy(e);
  }

  TEST_CASE("synthetic graph generation") {
    Scratch s;
    REQUIRE(ghar_gen_kg(5, 200, s.file("kg.tsv").c_str()) == GHAR_OK);
    char* summary = nullptr;
    REQUIRE(ghar_ingest(s.file("kg.tsv").c_str(), nullptr, &summary) == GHAR_OK);
    CHECK(json::parse(take(summary))["nodes"] == 200);
    CHECK(ghar_gen_cohort(R"({"min_visits": 1})", s.file("c.jsonl").c_str()) == GHAR_INVALID_ARGUMENT);
  }
}
