#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ghar {

struct Node {
  std::string id;
  std::string type;
  std::string name;

  bool operator==(const Node&) const = default;
};

struct Edge {
  std::string head;
  std::string relation;
  std::string tail;

  // Stable key used by indexes and provenance records.
  std::string key() const { return head + "|" + relation + "|" + tail; }
  bool operator==(const Edge&) const = default;
};

/// Heterogeneous graph. Immutable once ingestion returns; safe to share
/// read-only across concurrent episodes.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::set<std::string>& node_types() const { return node_types_; }
  const std::set<std::string>& edge_types() const { return edge_types_; }

  const Node* find(std::string_view id) const;
  const Node& node(std::string_view id) const;  // throws kNotFound

  // Builder interface used by ingest_triples. Returns false when the node
  // already existed (possibly with a different name).
  bool add_node(Node node);
  void add_edge(Edge edge);

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> node_index_;
  std::set<std::string> edge_keys_;
  std::set<std::string> node_types_;
  std::set<std::string> edge_types_;
};

/// Single-hop typed relation pattern (head_type, relation, tail_type).
struct MetaPath {
  std::size_t index = 0;
  std::string head_type;
  std::string relation;
  std::string tail_type;

  std::string to_string() const;  // "(head_type, relation, tail_type)"
  bool same_signature(const MetaPath& other) const {
    return head_type == other.head_type && relation == other.relation &&
           tail_type == other.tail_type;
  }
  bool operator==(const MetaPath&) const = default;
};

class MetaPathCatalog {
 public:
  MetaPathCatalog() = default;
  explicit MetaPathCatalog(std::vector<MetaPath> paths);

  const std::vector<MetaPath>& paths() const { return paths_; }
  std::size_t count() const { return paths_.size(); }
  bool empty() const { return paths_.empty(); }

  const MetaPath& at(std::size_t index) const;  // throws kUnknownMetaPath
  std::optional<std::size_t> find(std::string_view head_type,
                                  std::string_view relation,
                                  std::string_view tail_type) const;
  // Accepts either a decimal index or a "(a, b, c)" / "a,b,c" triple.
  std::optional<std::size_t> resolve(std::string_view name) const;

  std::string to_json() const;

 private:
  std::vector<MetaPath> paths_;
  std::map<std::string, std::size_t> by_signature_;
};

struct MetaPathSelection {
  std::vector<std::size_t> correct;     // first occurrences, in order
  std::vector<std::string> erroneous;   // raw tokens that resolved to nothing
  std::vector<std::size_t> repeated;    // later occurrences of a valid id
  std::vector<std::size_t> overflow;    // valid ids beyond max_meta_paths

  bool operator==(const MetaPathSelection&) const = default;
};

struct SubgraphPartition {
  MetaPath meta_path;
  std::vector<Node> nodes;  // sorted by id
  std::vector<Edge> edges;  // ingestion order
};

/// Reads the 7-field TSV triple format. Lines starting with '#' and blank
/// lines are skipped.
KnowledgeGraph ingest_triples(std::istream& in);
KnowledgeGraph ingest_triples_file(const std::string& path);

MetaPathCatalog catalog_meta_paths(const KnowledgeGraph& kg);

/// Edges instantiating mp plus their endpoints. Throws kUnknownMetaPath when
/// no edge of kg carries mp's signature.
SubgraphPartition partition(const KnowledgeGraph& kg, const MetaPath& mp);

inline constexpr std::size_t kDefaultMaxMetaPaths = 3;

/// Classifies every candidate token of an LLM answer against the catalog.
/// Candidates are bracketed triples "(a, b, c)" and integer literals outside
/// brackets, taken in textual order.
MetaPathSelection parse_meta_path_ids(std::string_view text,
                                      const MetaPathCatalog& catalog,
                                      std::size_t max_meta_paths = kDefaultMaxMetaPaths);

// Exposed for property tests: the raw candidate tokens parse_meta_path_ids sees.
std::vector<std::string> extract_meta_path_tokens(std::string_view text);

}  // namespace ghar
