#include "ghar/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <set>

#include <json.hpp>

#include "ghar/error.hpp"
#include "strings.hpp"

namespace ghar {

using ojson = nlohmann::ordered_json;

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kConfig, "vector dimension mismatch: " + std::to_string(a.size()) +
                                        " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

RankedMatches top_n(std::span<const IndexEntry> entries, std::span<const double> query, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "top_n requires n >= 1");
  RankedMatches all;
  all.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    all.push_back(Match{entries[i].key, cosine_similarity(entries[i].vector, query), i});
  }
  auto better = [](const Match& a, const Match& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
  };
  std::size_t k = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
  all.resize(k);
  return all;
}

RankedMatches PartitionIndex::top_nodes(std::span<const double> query, std::size_t n) const {
  if (query.size() != dim) {
    throw Error(ErrorCode::kConfig, "query dimension " + std::to_string(query.size()) +
                                        " does not match index dimension " + std::to_string(dim));
  }
  return top_n(node_entries, query, n);
}

RankedMatches PartitionIndex::top_edges(std::span<const double> query, std::size_t n) const {
  if (query.size() != dim) {
    throw Error(ErrorCode::kConfig, "query dimension " + std::to_string(query.size()) +
                                        " does not match index dimension " + std::to_string(dim));
  }
  return top_n(edge_entries, query, n);
}

std::string node_text(const Node& n) { return n.type + ": " + n.name; }

std::string edge_text(const Edge& e, const Node& head, const Node& tail) {
  return head.name + " " + e.relation + " " + tail.name;
}

PartitionIndex build_index(const SubgraphPartition& part, const EmbeddingProvider& provider) {
  PartitionIndex index;
  index.meta_path = part.meta_path;
  index.nodes = part.nodes;
  index.edges = part.edges;

  std::map<std::string, const Node*> by_id;
  for (const auto& n : part.nodes) by_id.emplace(n.id, &n);
  auto lookup = [&](const std::string& id) -> const Node& {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kConsistency, "partition edge endpoint '" + id + "' missing from partition");
    }
    return *it->second;
  };

  std::vector<std::string> texts;
  texts.reserve(part.nodes.size() + part.edges.size());
  for (const auto& n : part.nodes) texts.push_back(node_text(n));
  for (const auto& e : part.edges) texts.push_back(edge_text(e, lookup(e.head), lookup(e.tail)));

  auto vectors = embed_all(texts, provider);
  index.dim = vectors.empty() ? provider.dim() : vectors.front().size();
  for (std::size_t i = 0; i < part.nodes.size(); ++i) {
    index.node_entries.push_back({part.nodes[i].id, std::move(vectors[i])});
  }
  for (std::size_t i = 0; i < part.edges.size(); ++i) {
    index.edge_entries.push_back({part.edges[i].key(), std::move(vectors[part.nodes.size() + i])});
  }
  return index;
}

std::string PartitionIndex::to_json() const {
  ojson j;
  j["meta_path"] = {{"index", meta_path.index},
                    {"head_type", meta_path.head_type},
                    {"relation", meta_path.relation},
                    {"tail_type", meta_path.tail_type}};
  j["dim"] = dim;
  auto jn = ojson::array();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    jn.push_back({{"id", nodes[i].id},
                  {"type", nodes[i].type},
                  {"name", nodes[i].name},
                  {"vector", node_entries[i].vector}});
  }
  j["nodes"] = std::move(jn);
  auto je = ojson::array();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    je.push_back({{"head", edges[i].head},
                  {"relation", edges[i].relation},
                  {"tail", edges[i].tail},
                  {"vector", edge_entries[i].vector}});
  }
  j["edges"] = std::move(je);
  return j.dump();
}

PartitionIndex PartitionIndex::from_json(std::string_view line) {
  PartitionIndex index;
  try {
    auto j = nlohmann::json::parse(line);
    const auto& mp = j.at("meta_path");
    index.meta_path = MetaPath{mp.at("index").get<std::size_t>(), mp.at("head_type").get<std::string>(),
                               mp.at("relation").get<std::string>(), mp.at("tail_type").get<std::string>()};
    index.dim = j.at("dim").get<std::size_t>();
    for (const auto& n : j.at("nodes")) {
      Node node{n.at("id").get<std::string>(), n.at("type").get<std::string>(),
                n.at("name").get<std::string>()};
      index.node_entries.push_back({node.id, n.at("vector").get<Vector>()});
      index.nodes.push_back(std::move(node));
    }
    for (const auto& e : j.at("edges")) {
      Edge edge{e.at("head").get<std::string>(), e.at("relation").get<std::string>(),
                e.at("tail").get<std::string>()};
      index.edge_entries.push_back({edge.key(), e.at("vector").get<Vector>()});
      index.edges.push_back(std::move(edge));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed index record: ") + e.what());
  }
  for (const auto* entries : {&index.node_entries, &index.edge_entries}) {
    for (const auto& entry : *entries) {
      if (entry.vector.size() != index.dim) {
        throw Error(ErrorCode::kConfig, "index entry '" + entry.key + "' has the wrong dimension");
      }
    }
  }
  return index;
}

std::string PartitionIndex::checksum() const { return detail::hex64(detail::fnv1a64(to_json())); }

IndexSet build_indexes(const KnowledgeGraph& kg, const MetaPathCatalog& catalog,
                       const EmbeddingProvider& provider, std::span<const std::size_t> which,
                       std::size_t parallelism) {
  std::vector<std::size_t> targets(which.begin(), which.end());
  if (targets.empty()) {
    for (const auto& mp : catalog.paths()) targets.push_back(mp.index);
  }
  for (auto idx : targets) catalog.at(idx);
  parallelism = std::max<std::size_t>(1, parallelism);

  IndexSet out;
  for (std::size_t start = 0; start < targets.size(); start += parallelism) {
    std::vector<std::future<PartitionIndex>> batch;
    for (std::size_t i = start; i < std::min(targets.size(), start + parallelism); ++i) {
      const MetaPath& mp = catalog.at(targets[i]);
      batch.push_back(std::async(parallelism == 1 ? std::launch::deferred : std::launch::async,
                                 [&kg, &provider, &mp] { return build_index(partition(kg, mp), provider); }));
    }
    for (auto& f : batch) {
      auto index = f.get();
      auto key = index.meta_path.index;
      out.insert_or_assign(key, std::move(index));
    }
  }
  return out;
}

void save_indexes(const IndexSet& indexes, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write index file '" + path + "'");
  for (const auto& [idx, index] : indexes) out << index.to_json() << '\n';
  if (!out) throw Error(ErrorCode::kIo, "failed writing index file '" + path + "'");
}

IndexSet load_indexes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open index file '" + path + "'");
  IndexSet out;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto index = PartitionIndex::from_json(line);
    auto key = index.meta_path.index;
    out.insert_or_assign(key, std::move(index));
  }
  return out;
}

RetrievedCorpus retrieve_subgraph(std::string_view query_text, const MetaPathSelection& selection,
                                  const IndexSet& indexes, std::size_t n,
                                  const EmbeddingProvider& provider) {
  RetrievedCorpus corpus;
  if (selection.correct.empty()) return corpus;
  for (auto idx : selection.correct) {
    if (!indexes.contains(idx)) {
      throw Error(ErrorCode::kRetrieval, "no index built for meta-path partition " + std::to_string(idx));
    }
  }

  Vector query = embed(query_text, provider);
  std::set<std::string> seen_nodes, seen_edges;
  for (auto idx : selection.correct) {
    const PartitionIndex& index = indexes.at(idx);
    for (const auto& m : index.top_nodes(query, n)) {
      if (!seen_nodes.insert(m.key).second) continue;
      const Node& node = index.nodes[m.position];
      corpus.names.emplace(node.id, node.name);
      corpus.nodes.push_back(node);
      corpus.provenance.push_back({idx, ItemKind::kNode, m.key, m.score});
    }
    std::map<std::string, const Node*> endpoints;
    for (const auto& node : index.nodes) endpoints.emplace(node.id, &node);
    for (const auto& m : index.top_edges(query, n)) {
      if (!seen_edges.insert(m.key).second) continue;
      const Edge& edge = index.edges[m.position];
      for (const auto& id : {edge.head, edge.tail}) {
        auto it = endpoints.find(id);
        corpus.names.emplace(id, it == endpoints.end() ? id : it->second->name);
      }
      corpus.edges.push_back(edge);
      corpus.provenance.push_back({idx, ItemKind::kEdge, m.key, m.score});
    }
  }
  return corpus;
}

std::string serialize_corpus(const RetrievedCorpus& corpus) {
  std::map<std::string, const Node*> nodes;
  for (const auto& n : corpus.nodes) nodes.emplace(n.id, &n);
  std::map<std::string, const Edge*> edges;
  for (const auto& e : corpus.edges) edges.emplace(e.key(), &e);
  auto name_of = [&](const std::string& id) -> const std::string& {
    auto it = corpus.names.find(id);
    return it == corpus.names.end() ? id : it->second;
  };

  std::string out;
  for (const auto& p : corpus.provenance) {
    if (!out.empty()) out.push_back('\n');
    if (p.kind == ItemKind::kNode) {
      auto it = nodes.find(p.key);
      if (it == nodes.end()) throw Error(ErrorCode::kConsistency, "provenance node '" + p.key + "' missing");
      out += node_text(*it->second);
    } else {
      auto it = edges.find(p.key);
      if (it == edges.end()) throw Error(ErrorCode::kConsistency, "provenance edge '" + p.key + "' missing");
      const Edge& e = *it->second;
      out += "(" + name_of(e.head) + ") -[" + e.relation + "]-> (" + name_of(e.tail) + ")";
    }
  }
  return out;
}

}  // namespace ghar
