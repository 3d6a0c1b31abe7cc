#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "ghar/kg_store.hpp"
#include "ghar/tasks.hpp"
#include "support.hpp"

using namespace ghar;

namespace {

KnowledgeGraph parse(const std::string& text) {
  std::istringstream in(text);
  return ingest_triples(in);
}

MetaPathCatalog three_entry_catalog() {
  return MetaPathCatalog({{0, "a", "r", "b"}, {1, "b", "s", "c"}, {2, "c", "t", "d"}});
}

std::vector<std::string> warnings;
void collect(std::string_view m) { warnings.emplace_back(m); }

}  // namespace

TEST_SUITE("kg_store") {
  TEST_CASE("empty input gives an empty graph") {
    auto kg = parse("");
    CHECK(kg.nodes().empty());
    CHECK(kg.edges().empty());
    CHECK(catalog_meta_paths(kg).count() == 0);
  }

  TEST_CASE("one triple line gives two nodes and one edge") {
    auto kg = parse("d1\tdisease\tFlu\ttreated_by\tm1\tdrug\tOseltamivir\n");
    REQUIRE(kg.nodes().size() == 2);
    REQUIRE(kg.edges().size() == 1);
    CHECK(kg.node("d1") == Node{"d1", "disease", "Flu"});
    CHECK(kg.node("m1") == Node{"m1", "drug", "Oseltamivir"});
    CHECK(kg.edges()[0] == Edge{"d1", "treated_by", "m1"});
    CHECK(kg.node_types() == std::set<std::string>{"disease", "drug"});
    CHECK(kg.edge_types() == std::set<std::string>{"treated_by"});
  }

  TEST_CASE("comments and blank lines are skipped") {
    auto kg = parse("# header\n\n  \nd1\tdisease\tFlu\ttreated_by\tm1\tdrug\tOseltamivir\n# trailer\n");
    CHECK(kg.edges().size() == 1);
  }

  TEST_CASE("a six-field line is a parse error naming the line") {
    try {
      parse("# c\nd1\tdisease\tFlu\ttreated_by\tm1\tdrug\tOseltamivir\nd1\tdisease\tFlu\ttreated_by\tm1\tdrug\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
  }

  TEST_CASE("conflicting node types are a consistency error") {
    try {
      parse("d1\tdisease\tFlu\ttreated_by\tm1\tdrug\tOseltamivir\nd1\tdrug\tFlu\ttreated_by\tm1\tdrug\tOseltamivir\n");
      FAIL("expected a consistency error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConsistency);
      CHECK(std::string(e.what()).find("d1") != std::string::npos);
    }
  }

  TEST_CASE("conflicting names keep the first and warn") {
    warnings.clear();
    set_warning_sink(&collect);
    auto kg = parse("d1\tdisease\tFlu\ttreated_by\tm1\tdrug\tOseltamivir\nd1\tdisease\tInfluenza\ttreated_by\tm1\tdrug\tTamiflu\n");
    set_warning_sink(nullptr);
    CHECK(kg.node("d1").name == "Flu");
    CHECK(kg.node("m1").name == "Oseltamivir");
    CHECK(warnings.size() == 2);
    CHECK(kg.edges().size() == 1);  // identical edge collapses
  }

  TEST_CASE("empty ids or types are rejected") {
    CHECK_THROWS_AS(parse("\tdisease\tFlu\ttreated_by\tm1\tdrug\tOseltamivir\n"), ParseError);
    CHECK_THROWS_AS(parse("d1\t\tFlu\ttreated_by\tm1\tdrug\tOseltamivir\n"), ParseError);
  }

  TEST_CASE("single edge signature gives a catalog of one") {
    auto kg = parse("d1\tdisease\tFlu\ttreated_by\tm1\tdrug\tOseltamivir\nd2\tdisease\tCold\ttreated_by\tm1\tdrug\tOseltamivir\n");
    auto cat = catalog_meta_paths(kg);
    REQUIRE(cat.count() == 1);
    CHECK(cat.at(0) == MetaPath{0, "disease", "treated_by", "drug"});
    CHECK(cat.at(0).to_string() == "(disease, treated_by, drug)");
  }

  TEST_CASE("catalog is lexicographic, dense and exported as JSON") {
    auto kg = testing::toy_kg();
    auto cat = catalog_meta_paths(kg);
    REQUIRE(cat.count() == 3);
    CHECK(cat.at(0).to_string() == "(disease, associated_with, gene/protein)");
    CHECK(cat.at(1).to_string() == "(disease, treated_by, drug)");
    CHECK(cat.at(2).to_string() == "(drug, drug_protein, gene/protein)");
    CHECK(cat.to_json() ==
          R"([{"index":0,"head_type":"disease","relation":"associated_with","tail_type":"gene/protein"},)"
          R"({"index":1,"head_type":"disease","relation":"treated_by","tail_type":"drug"},)"
          R"({"index":2,"head_type":"drug","relation":"drug_protein","tail_type":"gene/protein"}])");
    CHECK_THROWS_AS(cat.at(3), Error);
    CHECK(cat.resolve("2") == 2u);
    CHECK(cat.resolve("(drug, drug_protein, gene/protein)") == 2u);
    CHECK(cat.resolve("drug,drug_protein,gene/protein") == 2u);
    CHECK_FALSE(cat.resolve("(drug, drug_protein, gene)").has_value());
    CHECK_FALSE(cat.resolve("7").has_value());
  }

  TEST_CASE("catalog is deterministic across ingestions") {
    auto a = catalog_meta_paths(testing::toy_kg());
    auto b = catalog_meta_paths(testing::toy_kg());
    CHECK(a.paths() == b.paths());
  }

  TEST_CASE("partition picks exactly the edges of the meta-path") {
    auto kg = testing::toy_kg();
    auto cat = catalog_meta_paths(kg);
    auto part = partition(kg, cat.at(*cat.find("drug", "drug_protein", "gene/protein")));
    CHECK(part.edges.size() == 3);
    CHECK(part.nodes.size() == 6);
    for (const auto& e : part.edges) CHECK(e.relation == "drug_protein");
    CHECK(std::is_sorted(part.nodes.begin(), part.nodes.end(),
                         [](const Node& a, const Node& b) { return a.id < b.id; }));
    auto dd = partition(kg, cat.at(*cat.find("disease", "treated_by", "drug")));
    CHECK(dd.edges.size() == 2);
  }

  TEST_CASE("partition of a meta-path absent from the graph is an error") {
    auto kg = testing::toy_kg();
    try {
      partition(kg, MetaPath{0, "drug", "cures", "disease"});
      FAIL("expected an unknown meta-path error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUnknownMetaPath);
    }
  }

  TEST_CASE("partitions cover every edge exactly once") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      auto kg = gen_synthetic_kg(seed, 400);
      auto cat = catalog_meta_paths(kg);
      std::map<std::string, int> seen;
      for (const auto& mp : cat.paths()) {
        auto part = partition(kg, mp);
        std::set<std::string> endpoints;
        for (const auto& e : part.edges) {
          ++seen[e.key()];
          CHECK(kg.node(e.head).type == mp.head_type);
          CHECK(kg.node(e.tail).type == mp.tail_type);
          endpoints.insert(e.head);
          endpoints.insert(e.tail);
        }
        std::set<std::string> ids;
        for (const auto& n : part.nodes) ids.insert(n.id);
        CHECK(ids == endpoints);
      }
      CHECK(seen.size() == kg.edges().size());
      for (const auto& [key, count] : seen) CHECK(count == 1);
    }
  }

  TEST_CASE("meta-path ids: two valid ids") {
    auto sel = parse_meta_path_ids("IDs: 0, 2", three_entry_catalog(), 3);
    CHECK(sel.correct == std::vector<std::size_t>{0, 2});
    CHECK(sel.erroneous.empty());
    CHECK(sel.repeated.empty());
  }

  TEST_CASE("meta-path ids: repeats and unknown ids") {
    auto sel = parse_meta_path_ids("IDs: 0, 0, 9", three_entry_catalog(), 3);
    CHECK(sel.correct == std::vector<std::size_t>{0});
    CHECK(sel.repeated == std::vector<std::size_t>{0});
    CHECK(sel.erroneous == std::vector<std::string>{"9"});
  }

  TEST_CASE("meta-path ids: empty text") {
    auto sel = parse_meta_path_ids("", three_entry_catalog(), 3);
    CHECK(sel == MetaPathSelection{});
  }

  TEST_CASE("meta-path ids: triples, negatives, decimals and overflow") {
    auto cat = three_entry_catalog();
    auto sel = parse_meta_path_ids("(b, s, c) 1 -1 2.5 (x, y, z) 0 2", cat, 2);
    CHECK(sel.correct == std::vector<std::size_t>{1, 0});
    CHECK(sel.repeated == std::vector<std::size_t>{1});
    CHECK(sel.erroneous == std::vector<std::string>{"-1", "2.5", "(x, y, z)"});
    CHECK(sel.overflow == std::vector<std::size_t>{2});
  }

  TEST_CASE("meta-path ids: every token is classified and ids stay in range") {
    std::mt19937_64 rng(11);
    auto cat = three_entry_catalog();
    const std::vector<std::string> pieces{"0", "1", "2", "3", "17", "(a, r, b)", "(c, t, d)", "(q, q, q)",
                                          "-4", "x", ",", " ", "IDS:", "1.5", "("};
    for (int trial = 0; trial < 500; ++trial) {
      std::string text;
      int len = static_cast<int>(rng() % 12);
      for (int i = 0; i < len; ++i) text += pieces[rng() % pieces.size()] + " ";
      std::size_t max = rng() % 4;
      auto tokens = extract_meta_path_tokens(text);
      auto sel = parse_meta_path_ids(text, cat, max);
      CHECK(sel.correct.size() + sel.repeated.size() + sel.erroneous.size() + sel.overflow.size() == tokens.size());
      CHECK(sel.correct.size() <= max);
      std::set<std::size_t> uniq(sel.correct.begin(), sel.correct.end());
      CHECK(uniq.size() == sel.correct.size());
      for (auto i : sel.correct) CHECK(i < cat.count());
      for (auto i : sel.repeated) CHECK(i < cat.count());
      for (auto i : sel.overflow) CHECK(i < cat.count());
    }
  }
}
