#include "kgt/kg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "kgt/errors.hpp"

namespace kgt {

namespace {

uint64_t triple_key(EntityId h, RelationId r, EntityId t) {
  uint64_t z = 0xcbf29ce484222325ull;
  for (uint64_t v : {static_cast<uint64_t>(h), static_cast<uint64_t>(r),
                     static_cast<uint64_t>(t)}) {
    z ^= v + 0x9e3779b97f4a7c15ull + (z << 6) + (z >> 2);
  }
  return z;
}

void insert_sorted_unique(std::vector<int32_t>& v, int32_t x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) v.insert(it, x);
}

double population_std(const std::vector<size_t>& counts) {
  if (counts.empty()) return 0.0;
  double mean = 0.0;
  for (size_t c : counts) mean += static_cast<double>(c);
  mean /= static_cast<double>(counts.size());
  double var = 0.0;
  for (size_t c : counts) {
    const double dev = static_cast<double>(c) - mean;
    var += dev * dev;
  }
  return std::sqrt(var / static_cast<double>(counts.size()));
}

}  // namespace

double graph_density(size_t n_entities, size_t n_relations, size_t n_triples) {
  const double denom = static_cast<double>(n_entities) *
                       static_cast<double>(n_entities) *
                       static_cast<double>(n_relations);
  return static_cast<double>(n_triples) / denom;
}

EntityId KnowledgeGraph::add_entity(const std::string& label) {
  auto it = entity_ids_.find(label);
  if (it != entity_ids_.end()) return it->second;
  const EntityId id = static_cast<EntityId>(entity_labels_.size());
  entity_ids_.emplace(label, id);
  entity_labels_.push_back(label);
  out_index_.emplace_back();
  in_index_.emplace_back();
  head_rels_.emplace_back();
  tail_rels_.emplace_back();
  return id;
}

RelationId KnowledgeGraph::add_relation(const std::string& label) {
  auto it = relation_ids_.find(label);
  if (it != relation_ids_.end()) return it->second;
  const RelationId id = static_cast<RelationId>(relation_labels_.size());
  relation_ids_.emplace(label, id);
  relation_labels_.push_back(label);
  rel_heads_.emplace_back();
  rel_tails_.emplace_back();
  return id;
}

bool KnowledgeGraph::add_triple(EntityId h, RelationId r, EntityId t) {
  check_entity(h);
  check_entity(t);
  if (r < 0 || static_cast<size_t>(r) >= relation_labels_.size()) {
    throw DataError("add_triple: unknown relation id " + std::to_string(r));
  }
  auto& bucket = triple_buckets_[triple_key(h, r, t)];
  for (int32_t idx : bucket) {
    const Triple& x = triples_[idx];
    if (x.head == h && x.rel == r && x.tail == t) return false;
  }
  const int32_t idx = static_cast<int32_t>(triples_.size());
  triples_.push_back({h, r, t});
  bucket.push_back(idx);
  out_index_[h].push_back(idx);
  in_index_[t].push_back(idx);
  insert_sorted_unique(head_rels_[h], r);
  insert_sorted_unique(tail_rels_[t], r);
  insert_sorted_unique(rel_heads_[r], h);
  insert_sorted_unique(rel_tails_[r], t);
  return true;
}

bool KnowledgeGraph::add_triple(const std::string& h, const std::string& r,
                                const std::string& t) {
  const EntityId hid = add_entity(h);
  const RelationId rid = add_relation(r);
  const EntityId tid = add_entity(t);
  return add_triple(hid, rid, tid);
}

const std::string& KnowledgeGraph::entity_label(EntityId e) const {
  check_entity(e);
  return entity_labels_[e];
}

const std::string& KnowledgeGraph::relation_label(RelationId r) const {
  if (r < 0 || static_cast<size_t>(r) >= relation_labels_.size()) {
    throw DataError("unknown relation id " + std::to_string(r));
  }
  return relation_labels_[r];
}

std::optional<EntityId> KnowledgeGraph::find_entity(
    const std::string& label) const {
  auto it = entity_ids_.find(label);
  if (it == entity_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(
    const std::string& label) const {
  auto it = relation_ids_.find(label);
  if (it == relation_ids_.end()) return std::nullopt;
  return it->second;
}

const std::vector<int32_t>& KnowledgeGraph::out_index(EntityId e) const {
  check_entity(e);
  return out_index_[e];
}

const std::vector<int32_t>& KnowledgeGraph::in_index(EntityId e) const {
  check_entity(e);
  return in_index_[e];
}

size_t KnowledgeGraph::degree(EntityId e) const {
  check_entity(e);
  return out_index_[e].size() + in_index_[e].size();
}

std::vector<int32_t> KnowledgeGraph::neighbor_indices(EntityId e) const {
  check_entity(e);
  std::vector<int32_t> merged;
  merged.reserve(out_index_[e].size() + in_index_[e].size());
  std::merge(out_index_[e].begin(), out_index_[e].end(), in_index_[e].begin(),
             in_index_[e].end(), std::back_inserter(merged));
  return merged;
}

std::vector<Triple> KnowledgeGraph::neighbors(EntityId e) const {
  std::vector<Triple> out;
  for (int32_t idx : neighbor_indices(e)) out.push_back(triples_[idx]);
  return out;
}

std::vector<EntityId> KnowledgeGraph::same_role_entities(EntityId e) const {
  check_entity(e);
  std::vector<EntityId> result;
  for (RelationId r : head_rels_[e]) {
    result.insert(result.end(), rel_heads_[r].begin(), rel_heads_[r].end());
  }
  for (RelationId r : tail_rels_[e]) {
    result.insert(result.end(), rel_tails_[r].begin(), rel_tails_[r].end());
  }
  std::sort(result.begin(), result.end());
  result.erase(std::unique(result.begin(), result.end()), result.end());
  auto it = std::lower_bound(result.begin(), result.end(), e);
  if (it != result.end() && *it == e) result.erase(it);
  return result;
}

std::vector<EntityId> KnowledgeGraph::entities_with_triples() const {
  std::vector<EntityId> out;
  for (size_t e = 0; e < entity_labels_.size(); ++e) {
    if (!out_index_[e].empty() || !in_index_[e].empty()) {
      out.push_back(static_cast<EntityId>(e));
    }
  }
  return out;
}

GraphStats KnowledgeGraph::stats() const {
  if (triples_.empty() || entity_labels_.empty() || relation_labels_.empty()) {
    throw DataError("stats: empty graph");
  }
  GraphStats s;
  s.n_entities = entity_labels_.size();
  s.n_relations = relation_labels_.size();
  s.n_triples = triples_.size();

  std::vector<size_t> rel_counts(relation_labels_.size(), 0);
  for (const Triple& t : triples_) rel_counts[t.rel]++;
  s.std_rel = population_std(rel_counts);

  // Per-entity incidence: a self-loop counts once as head and once as tail.
  std::vector<size_t> ent_counts(entity_labels_.size(), 0);
  for (const Triple& t : triples_) {
    ent_counts[t.head]++;
    ent_counts[t.tail]++;
  }
  s.std_ent = population_std(ent_counts);

  s.density = graph_density(s.n_entities, s.n_relations, s.n_triples);
  return s;
}

void KnowledgeGraph::write_vocab_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open vocab file for writing: " + path);
  for (size_t i = 0; i < entity_labels_.size(); ++i) {
    out << "entity\t" << entity_labels_[i] << "\t" << i << "\n";
  }
  for (size_t i = 0; i < relation_labels_.size(); ++i) {
    out << "relation\t" << relation_labels_[i] << "\t" << i << "\n";
  }
}

void KnowledgeGraph::check_entity(EntityId e) const {
  if (e < 0 || static_cast<size_t>(e) >= entity_labels_.size()) {
    throw DataError("unknown entity id " + std::to_string(e));
  }
}

namespace {

void load_into(KnowledgeGraph& g, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triple file: " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t tab1 = line.find('\t');
    const size_t tab2 = tab1 == std::string::npos
                            ? std::string::npos
                            : line.find('\t', tab1 + 1);
    const size_t tab3 = tab2 == std::string::npos
                            ? std::string::npos
                            : line.find('\t', tab2 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        tab3 != std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected 3 tab-separated fields");
    }
    const std::string h = line.substr(0, tab1);
    const std::string r = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string t = line.substr(tab2 + 1);
    if (h.empty() || r.empty() || t.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": empty field");
    }
    g.add_triple(h, r, t);
  }
}

}  // namespace

KnowledgeGraph load_triples(const std::string& path) {
  return load_triples(std::vector<std::string>{path});
}

KnowledgeGraph load_triples(const std::vector<std::string>& paths) {
  KnowledgeGraph g;
  for (const std::string& p : paths) load_into(g, p);
  if (g.triple_count() == 0) {
    throw DataError("empty graph: no triples in " +
                    (paths.empty() ? std::string("(no files)") : paths[0]));
  }
  return g;
}

}  // namespace kgt
