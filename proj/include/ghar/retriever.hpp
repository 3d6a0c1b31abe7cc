#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ghar/embedding.hpp"
#include "ghar/kg_store.hpp"

namespace ghar {

struct IndexEntry {
  std::string key;
  Vector vector;
};

struct Match {
  std::string key;
  double score = 0.0;
  std::size_t position = 0;  // offset into the searched entry list
};

using RankedMatches = std::vector<Match>;

/// Cosine similarity; 0 if either side has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Exact flat scan. Highest cosine first, ties by ascending key. Returns
/// min(n, entries.size()) matches. Throws kConfig on dimension mismatch and
/// kInvalidArgument for n == 0.
RankedMatches top_n(std::span<const IndexEntry> entries, std::span<const double> query, std::size_t n);

/// Flat vector index over one meta-path partition. Node i of `nodes` is
/// described by node_entries[i]; likewise for edges.
struct PartitionIndex {
  MetaPath meta_path;
  std::size_t dim = 0;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<IndexEntry> node_entries;
  std::vector<IndexEntry> edge_entries;

  RankedMatches top_nodes(std::span<const double> query, std::size_t n) const;
  RankedMatches top_edges(std::span<const double> query, std::size_t n) const;

  // Single-line JSON export; byte-identical for identical inputs.
  std::string to_json() const;
  static PartitionIndex from_json(std::string_view line);
  std::string checksum() const;  // FNV-1a 64 of to_json(), hex
};

std::string node_text(const Node& n);                         // "type: name"
std::string edge_text(const Edge& e, const Node& head, const Node& tail);  // "head rel tail"

PartitionIndex build_index(const SubgraphPartition& part, const EmbeddingProvider& provider);

using IndexSet = std::map<std::size_t, PartitionIndex>;

/// Builds partition indexes for `which` (all catalog entries when empty),
/// with at most `parallelism` partitions embedding at once.
IndexSet build_indexes(const KnowledgeGraph& kg, const MetaPathCatalog& catalog,
                       const EmbeddingProvider& provider, std::span<const std::size_t> which = {},
                       std::size_t parallelism = 1);

void save_indexes(const IndexSet& indexes, const std::string& path);
IndexSet load_indexes(const std::string& path);

enum class ItemKind { kNode, kEdge };

struct Provenance {
  std::size_t meta_path = 0;
  ItemKind kind = ItemKind::kNode;
  std::string key;
  double score = 0.0;

  bool operator==(const Provenance&) const = default;
};

/// Retrieved subgraph; `provenance` lists items in retrieval order and is the
/// rendering order of serialize_corpus.
struct RetrievedCorpus {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<Provenance> provenance;
  std::map<std::string, std::string> names;  // node id -> name, for every referenced node

  bool empty() const { return provenance.empty(); }
};

/// Union over the selected partitions of the top-n nodes and top-n edges for
/// the query. Items already contributed by an earlier partition are skipped.
RetrievedCorpus retrieve_subgraph(std::string_view query_text, const MetaPathSelection& selection,
                                  const IndexSet& indexes, std::size_t n,
                                  const EmbeddingProvider& provider);

/// One line per item in provenance order:
///   edges "(head_name) -[relation]-> (tail_name)", nodes "type: name".
std::string serialize_corpus(const RetrievedCorpus& corpus);

}  // namespace ghar
