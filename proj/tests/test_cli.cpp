#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ghar/serialize.hpp"
#include "ghar/tasks.hpp"
#include "support.hpp"

using namespace ghar;
using json = nlohmann::json;

namespace {

const std::string kCli = GHAR_CLI;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI with stderr captured into a file next to the outputs.
struct Cli {
  testing::TempDir tmp;
  std::string err_path = tmp.file("stderr.txt");

  testing::CommandResult operator()(const std::string& args) const {
    return testing::run_command(kCli + " " + args + " 2>" + err_path);
  }
  std::string err() const { return slurp(err_path); }
  json err_json() const { return json::parse(err(), nullptr, false); }
  std::string kg() const { return testing::fixture("toy_kg.tsv"); }
  std::string engine_args() const {
    return "--kg " + kg() + " --cohort " + tmp.file("cohort.jsonl") + " --references " +
           testing::fixture("references.jsonl");
  }
};

Trajectory labelled(const TaskSpec& task, const std::string& id, const std::string& pred, const std::string& gold) {
  Trajectory tr;
  tr.episode_id = id;
  tr.task = task;
  tr.patient_id = "P" + id;
  tr.final_prediction = make_label(task, pred);
  tr.prediction_format_ok = true;
  tr.gold = make_label(task, gold);
  return tr;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("end-to-end pipeline and determinism") {
    Cli cli;
    auto cohort = cli.tmp.file("cohort.jsonl");
    REQUIRE(cli("gen-cohort --out " + cohort + " --patients 10 --seed 3").exit_code == 0);

    auto ingest = cli("ingest --kg " + cli.kg() + " --catalog " + cli.tmp.file("catalog.json"));
    REQUIRE(ingest.exit_code == 0);
    auto summary = json::parse(ingest.out);
    CHECK(summary["nodes"] == 8);
    CHECK(summary["meta_paths"] == 3);
    auto catalog = json::parse(slurp(cli.tmp.file("catalog.json")));
    REQUIRE(catalog.is_array());
    CHECK(catalog.size() == 3);
    for (std::size_t i = 0; i < catalog.size(); ++i) CHECK(catalog[i]["index"] == i);

    auto index = cli("index " + cli.engine_args() + " --out " + cli.tmp.file("idx.json"));
    REQUIRE(index.exit_code == 0);
    CHECK(json::parse(index.out)["count"] == 3);

    std::string run_args = "run " + cli.engine_args() + " --indexes " + cli.tmp.file("idx.json") + " --task DEC";
    REQUIRE(cli(run_args + " --out " + cli.tmp.file("a.jsonl")).exit_code == 0);
    REQUIRE(cli(run_args + " --out " + cli.tmp.file("b.jsonl")).exit_code == 0);
    auto a = slurp(cli.tmp.file("a.jsonl"));
    CHECK(!a.empty());
    CHECK(a == slurp(cli.tmp.file("b.jsonl")));
    CHECK(std::count(a.begin(), a.end(), '\n') == 10);

    auto eval = cli("eval " + cli.tmp.file("a.jsonl") + " --out " + cli.tmp.file("m.json"));
    REQUIRE(eval.exit_code == 0);
    auto m = json::parse(eval.out);
    CHECK(m["n"] == 10);
    CHECK(json::parse(slurp(cli.tmp.file("m.json"))) == m);

    auto score = cli("score " + cli.tmp.file("a.jsonl") + " --out " + cli.tmp.file("s.jsonl"));
    REQUIRE(score.exit_code == 0);
    CHECK(json::parse(score.out)["scored"] == 10);
    auto scores = slurp(cli.tmp.file("s.jsonl"));
    CHECK(std::count(scores.begin(), scores.end(), '\n') == 10);

    auto replay = cli("replay " + cli.tmp.file("a.jsonl"));
    REQUIRE(replay.exit_code == 0);
    CHECK(replay.out.find("episode ") == 0);
    CHECK(replay.out.find("reward: reason") != std::string::npos);

    auto missing = cli("replay " + cli.tmp.file("a.jsonl") + " --episode NOPE");
    CHECK(missing.exit_code == 1);
    CHECK(cli.err_json()["error"] == "not_found");
  }

  TEST_CASE("eval reproduces the worked confusion example") {
    Cli cli;
    auto task = TaskSpec::make(TaskKind::kRead);
    std::string lines;
    const char* gold[] = {"yes", "yes", "no", "no"};
    const char* pred[] = {"yes", "no", "no", "no"};
    for (int i = 0; i < 4; ++i) {
      lines += serialize_trajectory(labelled(task, "E" + std::to_string(i), pred[i], gold[i])) + "\n";
    }
    write_file(cli.tmp.file("t.jsonl"), lines);
    auto r = cli("eval " + cli.tmp.file("t.jsonl") + " --task READ");
    REQUIRE(r.exit_code == 0);
    auto m = json::parse(r.out);
    CHECK(m["n"] == 4);
    CHECK(std::abs(m["accuracy"].get<double>() - 0.75) <= 1e-12);
    CHECK(std::abs(m["balanced_accuracy"].get<double>() - 0.75) <= 1e-12);
    CHECK(std::abs(m["macro_f1"].get<double>() - (2.0 / 3.0 + 4.0 / 5.0) / 2.0) <= 1e-12);
  }

  TEST_CASE("user errors exit 1 with a JSON error on stderr") {
    Cli cli;
    REQUIRE(cli("gen-cohort --out " + cli.tmp.file("cohort.jsonl") + " --patients 2").exit_code == 0);

    auto unknown = cli("index " + cli.engine_args() + " --out " + cli.tmp.file("i.json") +
                       " --meta-path '(Foo, bar, Baz)'");
    CHECK(unknown.exit_code == 1);
    auto e = cli.err_json();
    CHECK(e["error"] == "unknown_meta_path");
    CHECK(e["message"].get<std::string>().find("(Foo, bar, Baz)") != std::string::npos);

    CHECK(cli("run " + cli.engine_args() + " --task XYZ --out " + cli.tmp.file("x")).exit_code == 1);
    CHECK(cli.err_json()["error"] == "invalid_argument");

    CHECK(cli("run --kg /nonexistent/kg.tsv --task DEC --out " + cli.tmp.file("x")).exit_code == 1);
    CHECK(cli.err_json()["error"] == "config_error");

    CHECK(cli("").exit_code == 1);
    CHECK(cli.err_json().contains("error"));
    CHECK(cli("run --no-such-flag").exit_code == 1);
    CHECK(cli.err_json()["error"] == "invalid_argument");

    write_file(cli.tmp.file("bad.jsonl"), "{not json\n");
    CHECK(cli("eval " + cli.tmp.file("bad.jsonl")).exit_code == 1);
    CHECK(cli.err_json().contains("message"));
  }

  TEST_CASE("provider outages exit 2") {
    Cli cli;
    REQUIRE(cli("gen-cohort --out " + cli.tmp.file("cohort.jsonl") + " --patients 2").exit_code == 0);
    auto r = cli("run " + cli.engine_args() + " --task DEC --provider-mode http --llm-url http://127.0.0.1:1/v1 --out " +
                 cli.tmp.file("t.jsonl"));
    CHECK(r.exit_code == 2);
    CHECK(cli.err_json()["error"] == "provider_error");
    // Failed episodes are still recorded.
    auto t = slurp(cli.tmp.file("t.jsonl"));
    CHECK(std::count(t.begin(), t.end(), '\n') == 2);
    CHECK(t.find("\"failed\"") != std::string::npos);
  }

  TEST_CASE("config prints defaults and applies overrides") {
    Cli cli;
    auto r = cli("config -K 4 --eta 2.5");
    REQUIRE(r.exit_code == 0);
    auto c = json::parse(r.out);
    CHECK(c["agent"]["K"] == 4);
    CHECK(c["reward"]["eta"] == 2.5);
    auto d = json::parse(cli("config").out);
    CHECK(d["agent"]["K"] == 3);
    CHECK(d["reward"]["L"] == 3);

    write_file(cli.tmp.file("bad.json"), R"({"agent": {"unknown_key": 1}})");
    CHECK(cli("--config " + cli.tmp.file("bad.json") + " config").exit_code == 1);
    CHECK(cli.err_json()["error"] == "config_error");
  }
}
