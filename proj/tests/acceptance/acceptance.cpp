// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>

#include "ghar/config.hpp"
#include "ghar/embedding.hpp"
#include "ghar/engine.hpp"
#include "ghar/retriever.hpp"
#include "ghar/rl_math.hpp"
#include "ghar/serialize.hpp"
#include "ghar/service.hpp"
#include "ghar/tasks.hpp"
#include "reward_cases.hpp"
#include "rl_oracles.hpp"
#include "support.hpp"

using namespace ghar;
using json = nlohmann::json;

namespace {

const std::string kCli = GHAR_CLI;

// Collects failure messages for one criterion.
struct Check {
  std::vector<std::string> failures;
  std::string note;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// 1: hand-computed reward values.
void reward_oracle(Check& c) {
  auto cases = testing::reward_cases();
  c.expect(cases.size() >= 20, "fewer than 20 cases");
  for (const auto& rc : cases) {
    double got = rc.compute();
    c.expect(std::abs(got - rc.expected) <= 1e-12, rc.name + ": got " + fmt(got) + " want " + fmt(rc.expected));
  }
  c.note = std::to_string(cases.size()) + " cases";
}

// 2: backward GAE recursion against the literal double sum.
void gae_equivalence(Check& c) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0), delta(-10.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t len = rng() % 17;
    std::vector<double> d(len);
    for (auto& x : d) x = delta(rng);
    double gamma = unit(rng), lam = unit(rng);
    auto got = gae(d, gamma, lam);
    auto want = testing::gae_double_sum(d, gamma, lam);
    c.expect(got.size() == want.size(), "length mismatch in trial " + std::to_string(trial));
    for (std::size_t t = 0; t < std::min(got.size(), want.size()); ++t) {
      c.expect(std::abs(got[t] - want[t]) <= 1e-9, "trial " + std::to_string(trial) + " t=" + std::to_string(t));
    }
  }
  c.note = "1000 trajectories";
}

// 3: PPO clip bound and the inactive region.
void ppo_clip(Check& c) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ratio(0.0, 3.0), adv(-10.0, 10.0), eps(0.0, 0.5);
  std::size_t inactive = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    double r = ratio(rng), a = adv(rng), e = eps(rng);
    // Bias some triples into the unclipped band.
    if (trial % 3 == 0) r = 1.0 + e * (2.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng) - 1.0);
    double term = clipped_surrogate(r, a, e);
    c.expect(term <= testing::clip_bound(a, e), "bound violated at r=" + fmt(r) + " A=" + fmt(a) + " eps=" + fmt(e));
    if (std::abs(r - 1.0) <= e) {
      ++inactive;
      c.expect(term == r * a, "clipped != unclipped at r=" + fmt(r) + " eps=" + fmt(e));
    }
  }
  c.note = "1000 triples, " + std::to_string(inactive) + " in the unclipped band";
}

// Independent ranking: cosine from the definition, then a stable sort by
// (score desc, key asc).
std::vector<std::pair<std::string, double>> brute_force(const std::vector<IndexEntry>& entries,
                                                        const Vector& q, std::size_t n) {
  std::vector<std::pair<std::string, double>> scored;
  for (const auto& e : entries) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      dot += e.vector[i] * q[i];
      na += e.vector[i] * e.vector[i];
      nb += q[i] * q[i];
    }
    scored.emplace_back(e.key, na == 0 || nb == 0 ? 0.0 : dot / (std::sqrt(na) * std::sqrt(nb)));
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  scored.resize(std::min(n, scored.size()));
  return scored;
}

bool same_ranking(const RankedMatches& got, const std::vector<std::pair<std::string, double>>& want) {
  if (got.size() != want.size()) return false;
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i].key != want[i].first || got[i].score != want[i].second) return false;
  }
  return true;
}

// 4: flat index ranking against a brute-force scan.
void retrieval_oracle(Check& c) {
  auto kg = gen_synthetic_kg(11, 1000);
  auto catalog = catalog_meta_paths(kg);
  MockEmbeddingProvider embedder;
  auto indexes = build_indexes(kg, catalog, embedder);
  std::mt19937_64 rng(5);
  std::size_t queries = 0, tie_queries = 0;
  for (const auto& [mp, idx] : indexes) {
    for (const auto* entries : {&idx.node_entries, &idx.edge_entries}) {
      if (entries->empty()) continue;
      // Duplicate some vectors under shuffled keys so ties are exercised.
      std::vector<IndexEntry> tied = *entries;
      for (std::size_t i = 0; i < std::min<std::size_t>(entries->size(), 8); ++i) {
        const auto& src = (*entries)[rng() % entries->size()];
        tied.push_back(IndexEntry{"dup" + std::to_string(rng() % 1000) + "-" + src.key, src.vector});
      }
      std::shuffle(tied.begin(), tied.end(), rng);
      for (int q = 0; q < 10; ++q) {
        Vector query = q % 2 == 0 ? (*entries)[rng() % entries->size()].vector
                                  : embed("query " + std::to_string(rng() % 97) + " " + kg.nodes()[rng() % kg.nodes().size()].name, embedder);
        for (std::size_t n : {1u, 5u}) {
          ++queries;
          c.expect(same_ranking(top_n(*entries, query, n), brute_force(*entries, query, n)),
                   "meta-path " + std::to_string(mp) + " N=" + std::to_string(n));
          auto tied_want = brute_force(tied, query, n);
          c.expect(same_ranking(top_n(tied, query, n), tied_want),
                   "ties, meta-path " + std::to_string(mp) + " N=" + std::to_string(n));
          if (tied_want.size() > 1 && tied_want[0].second == tied_want[1].second) ++tie_queries;
        }
        auto via_index = entries == &idx.node_entries ? idx.top_nodes(query, 5) : idx.top_edges(query, 5);
        c.expect(same_ranking(via_index, brute_force(*entries, query, 5)), "index method, meta-path " + std::to_string(mp));
      }
    }
  }
  c.expect(tie_queries > 0, "no query exercised a tie");
  c.note = std::to_string(kg.nodes().size()) + " nodes, " + std::to_string(queries) + " ranked queries, " +
           std::to_string(tie_queries) + " with tied leaders";
}

// 5: retrieval stays inside the selection; partitions tile the edge set.
void partition_containment(Check& c) {
  auto kg = gen_synthetic_kg(12, 1000);
  auto catalog = catalog_meta_paths(kg);
  MockEmbeddingProvider embedder;
  auto indexes = build_indexes(kg, catalog, embedder);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    MetaPathSelection sel;
    std::vector<std::size_t> all(catalog.count());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(1 + rng() % std::min<std::size_t>(catalog.count(), 3));
    sel.correct = all;
    auto corpus = retrieve_subgraph("trial " + std::to_string(trial), sel, indexes, 1 + rng() % 5, embedder);
    for (const auto& p : corpus.provenance) {
      bool selected = std::find(sel.correct.begin(), sel.correct.end(), p.meta_path) != sel.correct.end();
      c.expect(selected, "trial " + std::to_string(trial) + ": item from unselected meta-path");
      if (!selected) continue;
      auto part = partition(kg, catalog.at(p.meta_path));
      bool member = p.kind == ItemKind::kNode
                        ? std::any_of(part.nodes.begin(), part.nodes.end(), [&](const Node& n) { return n.id == p.key; })
                        : std::any_of(part.edges.begin(), part.edges.end(), [&](const Edge& e) { return e.key() == p.key; });
      c.expect(member, "trial " + std::to_string(trial) + ": " + p.key + " not in its partition");
    }
  }
  std::multiset<std::string> tiled;
  for (const auto& mp : catalog.paths()) {
    for (const auto& e : partition(kg, mp).edges) tiled.insert(e.key());
  }
  std::multiset<std::string> full;
  for (const auto& e : kg.edges()) full.insert(e.key());
  c.expect(tiled == full, "union of partitions differs from the edge set");
  for (const auto& key : full) c.expect(tiled.count(key) == 1, "edge " + key + " not covered exactly once");
  c.note = std::to_string(catalog.count()) + " meta-paths, " + std::to_string(full.size()) + " edges";
}

// Writes a 100-patient cohort, a matching KG and a config file.
struct Workspace {
  testing::TempDir tmp;
  std::string config = tmp.file("config.json");

  explicit Workspace(std::size_t patients, std::uint64_t kg_seed = 3) {
    CohortSpec spec;
    spec.n_patients = patients;
    write_file(tmp.file("cohort.jsonl"), serialize_cohort(gen_synthetic_cohort(spec)));
    write_file(tmp.file("kg.tsv"), to_tsv(gen_synthetic_kg(kg_seed, 300, spec)));
    json cfg = {{"paths",
                 {{"kg", tmp.file("kg.tsv")},
                  {"cohort", tmp.file("cohort.jsonl")},
                  {"references", testing::fixture("references.jsonl")}}},
                {"service", {{"port", 0}, {"max_concurrent_episodes", 8}}}};
    write_file(config, cfg.dump(2));
  }
  std::string cli(const std::string& args) const {
    return kCli + " --config " + config + " " + args + " 2>" + tmp.file("stderr.txt");
  }
};

// 6: bounded iteration and seeded determinism.
void episode_determinism(Check& c) {
  Workspace ws(100);
  auto a = ws.tmp.file("a.jsonl"), b = ws.tmp.file("b.jsonl");
  for (const auto& out : {a, b}) {
    auto r = testing::run_command(ws.cli("run --task DEC -I 5 --seed 7 --out " + out));
    c.expect(r.exit_code == 0, "cli run exited " + std::to_string(r.exit_code) + ": " + slurp(ws.tmp.file("stderr.txt")));
  }
  auto first = slurp(a);
  c.expect(!first.empty() && first == slurp(b), "seed-7 trajectory files differ");
  auto trs = parse_trajectories(first);
  c.expect(trs.size() == 100, "expected 100 trajectories, got " + std::to_string(trs.size()));
  for (const auto& tr : trs) {
    c.expect(tr.status == EpisodeStatus::kOk, tr.episode_id + " failed: " + tr.error);
    c.expect(!tr.steps.empty() && tr.steps.size() <= 5, tr.episode_id + " has " + std::to_string(tr.steps.size()) + " steps");
  }

  auto cfg = load_config(ws.config, {{"providers", {{"llm", {{"mock_script", testing::fixture("continue_forever.jsonl")}}}}}});
  cfg.parallelism = 4;
  Engine engine(cfg);
  std::vector<EpisodeRequest> requests;
  for (const auto& entry : engine.cohort()) requests.push_back(engine.request_for(entry, TaskKind::kDec));
  auto forever = engine.run_all(requests);
  for (const auto& tr : forever) {
    bool forced = tr.steps.size() == 5 && tr.steps.back().forced_terminate &&
                  tr.steps.back().top_action.control == Control::kTerminate;
    for (std::size_t i = 0; i + 1 < tr.steps.size(); ++i) forced = forced && !tr.steps[i].forced_terminate;
    c.expect(tr.status == EpisodeStatus::kOk && forced,
             tr.episode_id + ": " + std::to_string(tr.steps.size()) + " steps without a single forced terminal step");
  }
  c.note = "100 scripted + 100 continue-forever episodes";
}

// 7: metrics fixture and the majority-class baseline.
void metrics_fixture(Check& c) {
  auto read = TaskSpec::make(TaskKind::kRead);
  auto to_labels = [&](const TaskSpec& t, std::initializer_list<const char*> v) {
    std::vector<Label> out;
    for (auto x : v) out.push_back(make_label(t, x));
    return out;
  };
  auto m = metrics(to_labels(read, {"yes", "no", "no", "no"}), to_labels(read, {"yes", "yes", "no", "no"}), read);
  c.expect(std::abs(m.accuracy - 0.75) <= 1e-12, "accuracy " + fmt(m.accuracy));
  c.expect(std::abs(m.balanced_accuracy - 0.75) <= 1e-12, "balanced accuracy " + fmt(m.balanced_accuracy));
  c.expect(std::abs(m.macro_f1 - (2.0 / 3.0 + 4.0 / 5.0) / 2.0) <= 1e-12, "macro F1 " + fmt(m.macro_f1));

  Workspace ws(200);
  auto cohort = read_cohort(ws.tmp.file("cohort.jsonl"));
  for (const char* task : {"READ", "DEC"}) {
    std::map<std::string, std::size_t> counts;
    for (const auto& e : cohort) ++counts[e.labels.at(task)];
    auto majority = std::max_element(counts.begin(), counts.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
    c.expect(counts.size() == 2, std::string(task) + ": cohort lacks one of the classes");
    double prevalence = static_cast<double>(majority->second) / static_cast<double>(cohort.size());

    // A policy that answers the majority label immediately.
    auto script = ws.tmp.file(std::string("majority_") + task + ".jsonl");
    std::string rules;
    for (const auto& [tag, response] : std::vector<std::pair<std::string, std::string>>{
             {"generate", "first angle\nsecond angle\nthird angle"},
             {"decide", "ROUTE: LLM; CONTROL: TERMINATE"},
             {"llm", "no extra knowledge"},
             {"final", "<answer>" + majority->first + "</answer>"}}) {
      rules += json{{"match", {{"template_tag", tag}}}, {"response", response}, {"log_prob", -0.1}, {"value", 0.0}}.dump() + "\n";
    }
    write_file(script, rules);
    Engine engine(load_config(ws.config, {{"providers", {{"llm", {{"mock_script", script}}}}}}));
    std::vector<EpisodeRequest> requests;
    for (const auto& entry : engine.cohort()) requests.push_back(engine.request_for(entry, parse_task_kind(task)));
    auto result = evaluate(engine.run_all(requests));
    c.expect(result.report.n == cohort.size(), std::string(task) + ": evaluated " + std::to_string(result.report.n));
    c.expect(std::abs(result.report.accuracy - prevalence) <= 1e-12,
             std::string(task) + ": accuracy " + fmt(result.report.accuracy) + " vs prevalence " + fmt(prevalence));
    c.expect(std::abs(result.report.balanced_accuracy - 0.5) <= 1e-12,
             std::string(task) + ": balanced accuracy " + fmt(result.report.balanced_accuracy));
    c.note += std::string(c.note.empty() ? "" : ", ") + task + " majority '" + majority->first + "' at " + fmt(prevalence);
  }
}

// 8: label boundaries.
void label_table(Check& c) {
  const std::vector<std::pair<double, std::string>> read{{14, "yes"}, {15, "yes"}, {16, "no"}};
  for (const auto& [gap, want] : read) {
    PatientRecord p{"p", {}};
    p.visits.push_back(Visit{0.0, 1.0, {"D1"}, {}, {}, false});
    p.visits.push_back(Visit{gap, gap + 2.0, {"D2"}, {}, {}, false});
    auto got = label_read(p, 0).value;
    c.expect(got == want, "READ gap " + fmt(gap) + " -> " + got);
  }
  const std::vector<std::pair<double, std::size_t>> los{{0.5, 0}, {1, 1}, {7, 7}, {8, 8}, {14, 8}, {15, 9}};
  for (const auto& [days, want] : los) {
    auto got = label_los(Visit{3.0, 3.0 + days, {}, {}, {}, false}).index;
    c.expect(got == want, "LOS " + fmt(days) + " days -> bin " + std::to_string(got));
  }
}

// 9: the service and the CLI produce the same bytes.
void cross_surface(Check& c) {
  Workspace ws(20);
  auto cli_out = ws.tmp.file("cli.jsonl");
  auto r = testing::run_command(ws.cli("run --task READ --out " + cli_out));
  c.expect(r.exit_code == 0, "cli run exited " + std::to_string(r.exit_code));
  auto cli_lines = lines_of(slurp(cli_out));
  c.expect(cli_lines.size() == 20, "cli wrote " + std::to_string(cli_lines.size()) + " lines");
  if (cli_lines.size() != 20) return;

  auto cfg = load_config(ws.config);
  cfg.paths.trajectories = ws.tmp.file("service.jsonl");
  Engine engine(cfg);
  Service service(engine);
  int port = service.start();

  // Sequential round-trip of the first patient.
  httplib::Client client("127.0.0.1", port);
  json body = {{"task", "READ"}, {"patient_id", engine.cohort()[0].patient.patient_id}};
  auto post = client.Post("/v1/episodes", body.dump(), "application/json");
  c.expect(post && post->status == 200, "POST failed");
  if (!post || post->status != 200) return;
  auto id = json::parse(post->body)["episode_id"].get<std::string>();
  auto get = client.Get("/v1/episodes/" + id);
  c.expect(get && get->status == 200 && get->body == cli_lines[0], "GET differs from the CLI line");

  // Twenty concurrent submissions.
  std::vector<std::future<std::string>> futures;
  for (std::size_t i = 0; i < 20; ++i) {
    futures.push_back(std::async(std::launch::async, [&, i]() -> std::string {
      httplib::Client cl("127.0.0.1", port);
      json b = {{"task", "READ"}, {"patient_id", engine.cohort()[i].patient.patient_id}};
      auto res = cl.Post("/v1/episodes", b.dump(), "application/json");
      if (!res || res->status != 200) return "";
      auto g = cl.Get("/v1/episodes/" + json::parse(res->body)["episode_id"].get<std::string>());
      return g && g->status == 200 ? g->body : "";
    }));
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < 20; ++i) {
    auto line = futures[i].get();
    c.expect(line == cli_lines[i], "concurrent submission " + std::to_string(i) + " differs from the CLI line");
    if (line.empty()) continue;
    auto tr = parse_trajectory(line);
    c.expect(tr.patient_id == engine.cohort()[i].patient.patient_id, "patient mix-up in submission " + std::to_string(i));
    ids.insert(tr.episode_id);
  }
  c.expect(ids.size() == 20, "expected 20 distinct episodes, got " + std::to_string(ids.size()));
  service.stop();
  auto stored = lines_of(slurp(cfg.paths.trajectories));
  for (const auto& line : stored) {
    c.expect(std::find(cli_lines.begin(), cli_lines.end(), line) != cli_lines.end(), "corrupt line in the service trajectory file");
  }
  c.note = "20 concurrent round-trips, " + std::to_string(stored.size()) + " persisted lines";
}

// 10: default hyperparameters reach every snapshot.
void hyperparameters(Check& c) {
  auto cfg = load_config(std::nullopt);
  const auto& agent = cfg.episode.agent;
  c.expect(agent.rewrites == 3, "K");
  c.expect(agent.top_n == 1, "N");
  c.expect(agent.max_meta_paths == 3, "max_meta_paths");
  c.expect(cfg.episode.reward.eta == 5.0, "eta");
  c.expect(cfg.episode.reward.expected_reason_length == 3, "L");

  Workspace ws(30);
  std::string all;
  for (const char* task : {"DEC", "READ", "LOS"}) {
    auto out = ws.tmp.file(std::string(task) + ".jsonl");
    auto r = testing::run_command(ws.cli(std::string("run --task ") + task + " --out " + out));
    c.expect(r.exit_code == 0, std::string("cli run ") + task);
    all += slurp(out);
  }
  std::size_t n = 0;
  for (const auto& line : lines_of(all)) {
    auto snap = json::parse(line).at("config");
    ++n;
    c.expect(snap.at("K") == 3 && snap.at("N") == 1 && snap.at("eta") == 5.0 && snap.at("L") == 3 &&
                 snap.at("max_meta_paths") == 3,
             "snapshot " + snap.dump());
  }
  c.expect(n == 90, "expected 90 trajectories, got " + std::to_string(n));
  c.note = std::to_string(n) + " snapshots";
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: no time limit
  std::function<void(Check&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "reward oracle suite", 1.0, reward_oracle},
      {2, "GAE brute-force equivalence", 5.0, gae_equivalence},
      {3, "PPO clip properties", 1.0, ppo_clip},
      {4, "retrieval oracle", 2.0, retrieval_oracle},
      {5, "partition containment", 2.0, partition_containment},
      {6, "episode determinism and bounded iteration", 10.0, episode_determinism},
      {7, "metrics fixture and majority baseline", 2.0, metrics_fixture},
      {8, "label boundary table", 1.0, label_table},
      {9, "cross-surface equivalence", 10.0, cross_surface},
      {10, "hyperparameter defaults", 0.0, hyperparameters},
  };
  int failed = 0;
  for (const auto& crit : criteria) {
    Check check;
    auto start = std::chrono::steady_clock::now();
    try {
      crit.run(check);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (crit.limit_seconds > 0 && secs >= crit.limit_seconds) {
      check.failures.push_back("took " + fmt(secs) + " s, limit " + fmt(crit.limit_seconds) + " s");
    }
    bool ok = check.failures.empty();
    failed += ok ? 0 : 1;
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.3f s", secs);
    std::cout << (ok ? "PASS " : "FAIL ") << crit.id << ' ' << crit.name << " (" << timing;
    if (crit.limit_seconds > 0) std::cout << " < " << crit.limit_seconds << " s";
    if (!check.note.empty()) std::cout << "; " << check.note;
    std::cout << ')';
    for (const auto& f : check.failures) std::cout << "\n    " << f;
    std::cout << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
