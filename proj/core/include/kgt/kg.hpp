#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgt {

using EntityId = int32_t;
using RelationId = int32_t;

struct Triple {
  EntityId head = 0;
  RelationId rel = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// True iff the triples have an entity in common (head/tail in either slot)
// or use the same relation.
inline bool share_element(const Triple& a, const Triple& b) {
  return a.rel == b.rel || a.head == b.head || a.head == b.tail ||
         a.tail == b.head || a.tail == b.tail;
}

struct GraphStats {
  size_t n_entities = 0;
  size_t n_relations = 0;
  size_t n_triples = 0;
  double std_rel = 0.0;  // population std-dev of per-relation triple counts
  double std_ent = 0.0;  // population std-dev of per-entity incidence counts
  double density = 0.0;  // n_triples / (n_entities^2 * n_relations)
};

double graph_density(size_t n_entities, size_t n_relations, size_t n_triples);

// Immutable once built: construct (optionally via load_triples), then query
// from any number of threads.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  EntityId add_entity(const std::string& label);
  RelationId add_relation(const std::string& label);
  // Returns false when the triple is already present (dedup).
  bool add_triple(EntityId h, RelationId r, EntityId t);
  bool add_triple(const std::string& h, const std::string& r,
                  const std::string& t);

  size_t entity_count() const { return entity_labels_.size(); }
  size_t relation_count() const { return relation_labels_.size(); }
  size_t triple_count() const { return triples_.size(); }
  const std::vector<Triple>& triples() const { return triples_; }
  const Triple& triple(size_t index) const { return triples_[index]; }

  const std::string& entity_label(EntityId e) const;
  const std::string& relation_label(RelationId r) const;
  std::optional<EntityId> find_entity(const std::string& label) const;
  std::optional<RelationId> find_relation(const std::string& label) const;

  // Triple indices with head e / tail e, ascending.
  const std::vector<int32_t>& out_index(EntityId e) const;
  const std::vector<int32_t>& in_index(EntityId e) const;
  size_t degree(EntityId e) const;

  // Union of out- and in-triples of e, ascending triple index.
  std::vector<Triple> neighbors(EntityId e) const;
  std::vector<int32_t> neighbor_indices(EntityId e) const;

  // Entities (other than e) that appear as head of some relation that e
  // heads, or as tail of some relation that e tails. Sorted ascending.
  std::vector<EntityId> same_role_entities(EntityId e) const;

  // Entities with at least one incident triple, ascending.
  std::vector<EntityId> entities_with_triples() const;

  GraphStats stats() const;

  // label<TAB>id dump, entities then relations, for reproducing id
  // assignments outside the process.
  void write_vocab_tsv(const std::string& path) const;

 private:
  void check_entity(EntityId e) const;

  std::vector<std::string> entity_labels_;
  std::vector<std::string> relation_labels_;
  std::unordered_map<std::string, EntityId> entity_ids_;
  std::unordered_map<std::string, RelationId> relation_ids_;
  std::vector<Triple> triples_;
  std::unordered_map<uint64_t, std::vector<int32_t>> triple_buckets_;
  std::vector<std::vector<int32_t>> out_index_;
  std::vector<std::vector<int32_t>> in_index_;
  std::vector<std::vector<RelationId>> head_rels_;  // sorted unique
  std::vector<std::vector<RelationId>> tail_rels_;  // sorted unique
  std::vector<std::vector<EntityId>> rel_heads_;    // sorted unique
  std::vector<std::vector<EntityId>> rel_tails_;    // sorted unique
};

// One triple per line, three tab-separated fields, UTF-8, no header.
// Duplicate lines collapse to one triple. Throws DataError on malformed
// lines (with line number) and on files that yield an empty graph.
KnowledgeGraph load_triples(const std::string& path);
KnowledgeGraph load_triples(const std::vector<std::string>& paths);

}  // namespace kgt
