#include "ghar/kg_store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ghar/error.hpp"
#include "strings.hpp"

namespace ghar {

const Node* KnowledgeGraph::find(std::string_view id) const {
  auto it = node_index_.find(std::string(id));
  return it == node_index_.end() ? nullptr : &nodes_[it->second];
}

const Node& KnowledgeGraph::node(std::string_view id) const {
  if (const Node* n = find(id)) return *n;
  throw Error(ErrorCode::kNotFound, "unknown node id '" + std::string(id) + "'");
}

bool KnowledgeGraph::add_node(Node node) {
  if (node.id.empty() || node.type.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "node id and type must be nonempty");
  }
  if (const Node* existing = find(node.id)) {
    if (existing->type != node.type) {
      throw Error(ErrorCode::kConsistency, "node '" + node.id + "' declared with types '" +
                                               existing->type + "' and '" + node.type + "'");
    }
    return false;
  }
  node_types_.insert(node.type);
  node_index_.emplace(node.id, nodes_.size());
  nodes_.push_back(std::move(node));
  return true;
}

void KnowledgeGraph::add_edge(Edge edge) {
  if (edge.head.empty() || edge.tail.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "edge endpoints must be nonempty");
  }
  if (!find(edge.head) || !find(edge.tail)) {
    throw Error(ErrorCode::kConsistency, "edge " + edge.key() + " references a missing node");
  }
  if (!edge_keys_.insert(edge.key()).second) return;
  edge_types_.insert(edge.relation);
  edges_.push_back(std::move(edge));
}

std::string MetaPath::to_string() const {
  return "(" + head_type + ", " + relation + ", " + tail_type + ")";
}

namespace {

std::string signature(std::string_view h, std::string_view r, std::string_view t) {
  std::string s;
  s.reserve(h.size() + r.size() + t.size() + 2);
  s.append(h).push_back('\x1f');
  s.append(r).push_back('\x1f');
  s.append(t);
  return s;
}

}  // namespace

MetaPathCatalog::MetaPathCatalog(std::vector<MetaPath> paths) : paths_(std::move(paths)) {
  for (std::size_t i = 0; i < paths_.size(); ++i) {
    if (paths_[i].index != i) {
      throw Error(ErrorCode::kConsistency, "meta-path indices must be dense from 0");
    }
    auto sig = signature(paths_[i].head_type, paths_[i].relation, paths_[i].tail_type);
    if (!by_signature_.emplace(std::move(sig), i).second) {
      throw Error(ErrorCode::kConsistency, "duplicate meta-path " + paths_[i].to_string());
    }
  }
}

const MetaPath& MetaPathCatalog::at(std::size_t index) const {
  if (index >= paths_.size()) {
    throw Error(ErrorCode::kUnknownMetaPath, "unknown meta-path index " + std::to_string(index));
  }
  return paths_[index];
}

std::optional<std::size_t> MetaPathCatalog::find(std::string_view head_type,
                                                 std::string_view relation,
                                                 std::string_view tail_type) const {
  auto it = by_signature_.find(signature(head_type, relation, tail_type));
  if (it == by_signature_.end()) return std::nullopt;
  return it->second;
}

namespace {

constexpr std::string_view kQuoteChars = " \t\r\n'\"`";

std::optional<std::size_t> parse_index(std::string_view token) {
  if (token.empty() || token.size() > 18) return std::nullopt;
  std::size_t value = 0;
  for (char c : token) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    value = value * 10 + static_cast<std::size_t>(c - '0');
  }
  return value;
}

std::optional<std::size_t> resolve_triple(const MetaPathCatalog& catalog, std::string_view body) {
  auto parts = detail::split(body, ',');
  if (parts.size() != 3) return std::nullopt;
  return catalog.find(detail::trim(parts[0], kQuoteChars), detail::trim(parts[1], kQuoteChars),
                      detail::trim(parts[2], kQuoteChars));
}

}  // namespace

std::optional<std::size_t> MetaPathCatalog::resolve(std::string_view name) const {
  name = detail::trim(name);
  if (auto idx = parse_index(name)) {
    if (*idx < paths_.size()) return idx;
    return std::nullopt;
  }
  if (name.size() >= 2 && name.front() == '(' && name.back() == ')') {
    name = name.substr(1, name.size() - 2);
  }
  return resolve_triple(*this, name);
}

std::string MetaPathCatalog::to_json() const {
  auto out = nlohmann::ordered_json::array();
  for (const auto& mp : paths_) {
    out.push_back({{"index", mp.index},
                   {"head_type", mp.head_type},
                   {"relation", mp.relation},
                   {"tail_type", mp.tail_type}});
  }
  return out.dump();
}

KnowledgeGraph ingest_triples(std::istream& in) {
  KnowledgeGraph kg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty() || line.front() == '#') continue;

    auto fields = detail::split(line, '\t');
    if (fields.size() != 7) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 7 tab-separated fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    Node head{std::string(fields[0]), std::string(fields[1]), std::string(fields[2])};
    Node tail{std::string(fields[4]), std::string(fields[5]), std::string(fields[6])};
    std::string relation(fields[3]);
    if (head.id.empty() || head.type.empty() || tail.id.empty() || tail.type.empty() ||
        relation.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty id, type or relation field",
                       line_no);
    }

    for (Node* n : {&head, &tail}) {
      try {
        if (const Node* existing = kg.find(n->id);
            existing && existing->type == n->type && existing->name != n->name) {
          warn("line " + std::to_string(line_no) + ": node '" + n->id + "' renamed '" + n->name +
               "', keeping '" + existing->name + "'");
        }
        kg.add_node(*n);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kConsistency) throw;
        throw Error(ErrorCode::kConsistency, "line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    kg.add_edge(Edge{head.id, std::move(relation), tail.id});
  }
  return kg;
}

KnowledgeGraph ingest_triples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open triple file '" + path + "'");
  return ingest_triples(in);
}

MetaPathCatalog catalog_meta_paths(const KnowledgeGraph& kg) {
  std::set<std::tuple<std::string, std::string, std::string>> triples;
  for (const auto& e : kg.edges()) {
    triples.emplace(kg.node(e.head).type, e.relation, kg.node(e.tail).type);
  }
  std::vector<MetaPath> paths;
  paths.reserve(triples.size());
  for (const auto& [h, r, t] : triples) {
    paths.push_back(MetaPath{paths.size(), h, r, t});
  }
  return MetaPathCatalog(std::move(paths));
}

SubgraphPartition partition(const KnowledgeGraph& kg, const MetaPath& mp) {
  SubgraphPartition part;
  part.meta_path = mp;
  bool known = false;
  std::map<std::string, const Node*> endpoints;
  for (const auto& e : kg.edges()) {
    if (e.relation != mp.relation) continue;
    const Node& h = kg.node(e.head);
    const Node& t = kg.node(e.tail);
    if (h.type != mp.head_type || t.type != mp.tail_type) continue;
    known = true;
    part.edges.push_back(e);
    endpoints.emplace(h.id, &h);
    endpoints.emplace(t.id, &t);
  }
  if (!known) {
    throw Error(ErrorCode::kUnknownMetaPath,
                "meta-path " + mp.to_string() + " is not in the graph's catalog");
  }
  part.nodes.reserve(endpoints.size());
  for (const auto& [id, n] : endpoints) part.nodes.push_back(*n);
  return part;
}

std::vector<std::string> extract_meta_path_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  auto is_digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; };
  while (i < text.size()) {
    char c = text[i];
    if (c == '(') {
      auto close = text.find_first_of("()", i + 1);
      if (close != std::string_view::npos && text[close] == ')') {
        tokens.emplace_back(text.substr(i, close - i + 1));
        i = close + 1;
        continue;
      }
      ++i;
      continue;
    }
    bool negative = c == '-' && i + 1 < text.size() && is_digit(text[i + 1]) &&
                    (i == 0 || !is_word(text[i - 1]));
    if (is_digit(c) || negative) {
      std::size_t start = i;
      if (negative) ++i;
      while (i < text.size() && is_digit(text[i])) ++i;
      if (i + 1 < text.size() && text[i] == '.' && is_digit(text[i + 1])) {
        ++i;
        while (i < text.size() && is_digit(text[i])) ++i;
      }
      tokens.emplace_back(text.substr(start, i - start));
      continue;
    }
    ++i;
  }
  return tokens;
}

MetaPathSelection parse_meta_path_ids(std::string_view text, const MetaPathCatalog& catalog,
                                      std::size_t max_meta_paths) {
  MetaPathSelection sel;
  std::set<std::size_t> seen;
  for (const auto& token : extract_meta_path_tokens(text)) {
    std::optional<std::size_t> idx;
    if (token.front() == '(') {
      idx = resolve_triple(catalog, std::string_view(token).substr(1, token.size() - 2));
    } else if (auto raw = parse_index(token); raw && *raw < catalog.count()) {
      idx = raw;
    }
    if (!idx) {
      sel.erroneous.push_back(token);
    } else if (!seen.insert(*idx).second) {
      sel.repeated.push_back(*idx);
    } else if (sel.correct.size() < max_meta_paths) {
      sel.correct.push_back(*idx);
    } else {
      sel.overflow.push_back(*idx);
    }
  }
  return sel;
}

}  // namespace ghar
