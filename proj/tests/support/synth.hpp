#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "kgt/kg.hpp"
#include "kgt/rng.hpp"
#include "kgt/tasks.hpp"

namespace kgt::test {

// Synthetic KG whose truth is a structural rule: entities carry a hidden
// group, each relation r maps group(h) through a fixed permutation, and a
// triple is true iff group(t) matches. Splits of the valid set stay
// rule-consistent, so held-out positives are decidable from structure alone.
struct GroupKg {
  KnowledgeGraph g;
  size_t n_groups = 0;
  std::vector<int> group_of;              // entity -> group
  std::vector<std::vector<int>> sigma;    // relation -> group permutation
  std::vector<Triple> extra_valid;        // valid triples not in the graph

  bool is_valid(const Triple& t) const {
    return group_of[t.tail] == sigma[t.rel][group_of[t.head]];
  }
};

inline GroupKg make_group_kg(size_t n_groups, size_t per_group,
                             size_t n_relations, size_t n_triples,
                             uint64_t seed, const std::string& prefix) {
  GroupKg out;
  out.n_groups = n_groups;
  const size_t n_entities = n_groups * per_group;
  Rng rng(seed);

  for (size_t e = 0; e < n_entities; ++e) {
    out.g.add_entity(prefix + "e" + std::to_string(e));
    out.group_of.push_back(static_cast<int>(e % n_groups));
  }
  for (size_t r = 0; r < n_relations; ++r) {
    out.g.add_relation(prefix + "r" + std::to_string(r));
    std::vector<int> perm(n_groups);
    for (size_t i = 0; i < n_groups; ++i) perm[i] = static_cast<int>(i);
    rng.shuffle(perm);
    out.sigma.push_back(perm);
  }

  std::vector<Triple> pool;
  for (size_t h = 0; h < n_entities; ++h) {
    for (size_t r = 0; r < n_relations; ++r) {
      const int want = out.sigma[r][out.group_of[h]];
      for (size_t t = 0; t < n_entities; ++t) {
        if (out.group_of[t] == want && t != h) {
          pool.push_back({static_cast<EntityId>(h),
                          static_cast<RelationId>(r),
                          static_cast<EntityId>(t)});
        }
      }
    }
  }
  rng.shuffle(pool);

  // Cover every entity first so none is isolated, then fill to n_triples.
  std::vector<bool> covered(n_entities, false);
  std::vector<Triple> chosen;
  std::vector<Triple> rest;
  for (const Triple& t : pool) {
    if (chosen.size() < n_triples &&
        (!covered[t.head] || !covered[t.tail])) {
      chosen.push_back(t);
      covered[t.head] = covered[t.tail] = true;
    } else {
      rest.push_back(t);
    }
  }
  for (const Triple& t : rest) {
    if (chosen.size() >= n_triples) {
      out.extra_valid.push_back(t);
    } else {
      chosen.push_back(t);
    }
  }
  for (const Triple& t : chosen) out.g.add_triple(t.head, t.rel, t.tail);
  return out;
}

// Memorization-friendly KG: relation 0 is one full cycle over the entities,
// the remaining relations are random partial matchings, and no entity pair
// is connected twice. Every (h,r,?) and (?,r,t) has a unique completion and
// every (h,?,t) a unique relation, so masked-element recovery has no
// ambiguity ceiling.
inline KnowledgeGraph make_matching_kg(size_t n_entities, size_t n_relations,
                                       size_t n_triples, uint64_t seed,
                                       const std::string& prefix) {
  KnowledgeGraph g;
  Rng rng(seed);
  for (size_t e = 0; e < n_entities; ++e) {
    g.add_entity(prefix + "e" + std::to_string(e));
  }
  for (size_t r = 0; r < n_relations; ++r) {
    g.add_relation(prefix + "r" + std::to_string(r));
  }
  std::set<std::pair<EntityId, EntityId>> used_pairs;

  // relation 0: a single cycle covering every entity
  std::vector<EntityId> cycle(n_entities);
  for (size_t i = 0; i < n_entities; ++i) {
    cycle[i] = static_cast<EntityId>(i);
  }
  rng.shuffle(cycle);
  size_t added = 0;
  for (size_t i = 0; i < n_entities && added < n_triples; ++i) {
    const EntityId h = cycle[i];
    const EntityId t = cycle[(i + 1) % n_entities];
    g.add_triple(h, 0, t);
    used_pairs.insert({h, t});
    ++added;
  }

  if (n_relations > 1 && added < n_triples) {
    size_t cap =
        (n_triples - added + n_relations - 2) / (n_relations - 1);
    std::vector<size_t> per_relation(n_relations, 0);
    size_t r = 1;
    size_t stalled = 0;
    while (added < n_triples) {
      const size_t before = added;
      std::vector<EntityId> heads(n_entities), tails(n_entities);
      for (size_t i = 0; i < n_entities; ++i) {
        heads[i] = static_cast<EntityId>(i);
        tails[i] = static_cast<EntityId>(i);
      }
      rng.shuffle(heads);
      rng.shuffle(tails);
      for (size_t i = 0; i < n_entities && added < n_triples &&
                         per_relation[r] < cap;
           ++i) {
        const EntityId h = heads[i];
        const EntityId t = tails[i];
        if (h == t || used_pairs.count({h, t})) continue;
        if (g.add_triple(h, static_cast<RelationId>(r), t)) {
          used_pairs.insert({h, t});
          ++per_relation[r];
          ++added;
        }
      }
      r = r + 1 < n_relations ? r + 1 : 1;
      stalled = added == before ? stalled + 1 : 0;
      if (stalled >= n_relations) {
        ++cap;  // collisions starved every relation; loosen the balance
        stalled = 0;
      }
    }
  }
  return g;
}

// Block-cyclic KG: entities sit in `n_blocks` blocks of `per_block`;
// relation r joins block i to block (i+r) mod n_blocks via a rotation
// matching over `heads_per_pair` consecutive in-block slots. Every (h,r,?)
// and (?,r,t) has a unique completion, no entity pair repeats across
// relations, and the relation of a pair is decodable from the block
// structure, so masked-element recovery is noiseless and learnable.
// n_blocks * n_blocks * heads_per_pair triples over n_blocks * per_block
// entities and n_blocks relations.
inline KnowledgeGraph make_block_cycle_kg(size_t n_blocks, size_t per_block,
                                          size_t heads_per_pair,
                                          uint64_t seed,
                                          const std::string& prefix) {
  KnowledgeGraph g;
  Rng rng(seed);
  const size_t n_entities = n_blocks * per_block;
  for (size_t e = 0; e < n_entities; ++e) {
    g.add_entity(prefix + "e" + std::to_string(e));
  }
  for (size_t r = 0; r < n_blocks; ++r) {
    g.add_relation(prefix + "r" + std::to_string(r));
  }
  auto entity = [per_block](size_t block, size_t slot) {
    return static_cast<EntityId>(block * per_block + slot % per_block);
  };
  for (size_t r = 0; r < n_blocks; ++r) {
    for (size_t i = 0; i < n_blocks; ++i) {
      const size_t j = (i + r) % n_blocks;
      const size_t first_head = rng.index(per_block);
      size_t offset = 1 + rng.index(per_block - 1);  // no self-loops at r=0
      for (size_t s = 0; s < heads_per_pair; ++s) {
        const size_t slot = first_head + s;
        g.add_triple(entity(i, slot), static_cast<RelationId>(r),
                     entity(j, slot + offset));
      }
    }
  }
  return g;
}

// Shift-cycle KG over Z_n with n = n_parts * part_size entities: relation r
// adds (x, r, x + shift_r) for every x outside residue part r, with
// shift_r = n_parts * r + c. Every entity has exactly 8 incidences when
// n_parts = 5 (4 head and 4 tail roles), all (h,r,?) / (?,r,t) / (h,?,t)
// completions are unique, and each entity's 2*(n_parts-1) neighbours are
// distinct. A center's full one-hop star therefore fits in a k = 8 sample,
// which keeps masked-element recovery exact (the missing element is
// determined by the visible remainder of the star).
inline KnowledgeGraph make_shift_cycle_kg(size_t n_parts, size_t part_size,
                                          std::vector<size_t> shifts,
                                          uint64_t seed,
                                          const std::string& prefix) {
  KnowledgeGraph g;
  const size_t n = n_parts * part_size;
  Rng rng(seed);
  std::vector<size_t> relabel(n);
  for (size_t i = 0; i < n; ++i) relabel[i] = i;
  rng.shuffle(relabel);  // decouple label order from the cyclic structure
  for (size_t e = 0; e < n; ++e) {
    g.add_entity(prefix + "e" + std::to_string(relabel[e]));
  }
  for (size_t r = 0; r < n_parts; ++r) {
    g.add_relation(prefix + "r" + std::to_string(r));
  }
  for (size_t r = 0; r < n_parts; ++r) {
    const size_t shift = shifts.at(r);
    for (size_t x = 0; x < n; ++x) {
      if (x % n_parts == r) continue;  // dropped head part keeps 8-regularity
      g.add_triple(static_cast<EntityId>(x), static_cast<RelationId>(r),
                   static_cast<EntityId>((x + shift) % n));
    }
  }
  return g;
}

// 5x10 instance whose shifts make the relation a function of the mod-5
// parts of head and tail alone (gap residues 0,2,4,1,3), with no inverse
// shift collisions, so every entity keeps 8 distinct neighbours.
inline KnowledgeGraph make_shift_cycle_kg_50(uint64_t seed,
                                             const std::string& prefix) {
  return make_shift_cycle_kg(5, 10, {5, 7, 14, 21, 23}, seed, prefix);
}

// 50 entities, 200 triples: four full shift cycles over Z_50 with shifts of
// distinct mod-5 residue and no inverse collisions, so the graph is exactly
// 8-regular, every entity heads and tails all four cycle relations (one
// constant relation profile graph-wide), and a single triple is relabelled
// to the fifth relation to keep five relations present.
inline KnowledgeGraph make_template_cycle_kg(uint64_t seed,
                                             const std::string& prefix) {
  KnowledgeGraph g;
  const size_t n = 50;
  const std::vector<size_t> shifts = {7, 11, 23, 34};
  Rng rng(seed);
  std::vector<size_t> relabel(n);
  for (size_t i = 0; i < n; ++i) relabel[i] = i;
  rng.shuffle(relabel);
  for (size_t e = 0; e < n; ++e) {
    g.add_entity(prefix + "e" + std::to_string(relabel[e]));
  }
  for (size_t r = 0; r < 5; ++r) {
    g.add_relation(prefix + "r" + std::to_string(r));
  }
  const size_t swap_head = rng.index(n);
  for (size_t r = 0; r < shifts.size(); ++r) {
    for (size_t x = 0; x < n; ++x) {
      const bool swapped = r == 3 && x == swap_head;
      g.add_triple(static_cast<EntityId>(x),
                   static_cast<RelationId>(swapped ? 4 : r),
                   static_cast<EntityId>((x + shifts[r]) % n));
    }
  }
  return g;
}

// Ten disjoint complete directed 5-cliques: 50 entities, 200 triples, every
// entity exactly 8-regular (4 out, 4 in). The relation of edge (u,v) is the
// cyclic gap of the community-local indices (gaps 1..4 -> relations 0..3),
// with one edge relabelled to relation 4 so all five relations exist.
// Random walks cannot leave a community, so any sample covers most of its
// 5-entity roster and masked elements stay recoverable by elimination.
inline KnowledgeGraph make_community_kg(uint64_t seed,
                                        const std::string& prefix) {
  KnowledgeGraph g;
  Rng rng(seed);
  std::vector<size_t> relabel(50);
  for (size_t i = 0; i < 50; ++i) relabel[i] = i;
  rng.shuffle(relabel);
  for (size_t e = 0; e < 50; ++e) {
    g.add_entity(prefix + "e" + std::to_string(relabel[e]));
  }
  for (size_t r = 0; r < 5; ++r) {
    g.add_relation(prefix + "r" + std::to_string(r));
  }
  const size_t swap_community = rng.index(10);
  for (size_t c = 0; c < 10; ++c) {
    for (size_t i = 0; i < 5; ++i) {
      for (size_t gap = 1; gap <= 4; ++gap) {
        const size_t j = (i + gap) % 5;
        const bool swapped = c == swap_community && i == 0 && gap == 1;
        g.add_triple(static_cast<EntityId>(5 * c + i),
                     static_cast<RelationId>(swapped ? 4 : gap - 1),
                     static_cast<EntityId>(5 * c + j));
      }
    }
  }
  return g;
}

// Class-typed KG: 5 classes of 10 entities; every edge points at a tail of
// class r ("the relation names the tail's class"), each entity sends one
// edge to every class except its own (rotation-assigned receiver), so the
// graph is exactly 8-regular with unique (h,r,?), (?,r,t) per sender class,
// and the masked-relation answer is a function of the visible tail alone.
inline KnowledgeGraph make_class_kg(uint64_t seed, const std::string& prefix) {
  KnowledgeGraph g;
  Rng rng(seed);
  std::vector<size_t> relabel(50);
  for (size_t i = 0; i < 50; ++i) relabel[i] = i;
  rng.shuffle(relabel);
  for (size_t e = 0; e < 50; ++e) {
    g.add_entity(prefix + "e" + std::to_string(relabel[e]));
  }
  for (size_t r = 0; r < 5; ++r) {
    g.add_relation(prefix + "r" + std::to_string(r));
  }
  // entity = 10*class + index; sender class a reaches class c through a
  // random index rotation. Affine offsets like (c - a) are off the table:
  // they preserve index-minus-class and the graph would fall apart into
  // disjoint five-entity components.
  size_t offsets[5][5];
  for (size_t a = 0; a < 5; ++a) {
    for (size_t c = 0; c < 5; ++c) offsets[a][c] = rng.index(10);
  }
  for (size_t a = 0; a < 5; ++a) {
    for (size_t i = 0; i < 10; ++i) {
      for (size_t c = 0; c < 5; ++c) {
        if (c == a) continue;  // no edges into the sender's own class
        const size_t j = (i + offsets[a][c]) % 10;
        g.add_triple(static_cast<EntityId>(10 * a + i),
                     static_cast<RelationId>(c),
                     static_cast<EntityId>(10 * c + j));
      }
    }
  }
  return g;
}

// Club KG: ten disjoint clubs of five entities, one entity per class in
// each club, complete directed graph inside every club, and the relation of
// an edge is the class of its tail. 50 entities, 5 relations, 200 triples,
// exactly 8-regular. Walks cannot leave a club; a masked relation is the
// class missing from the sample's visible relation multiset and a masked
// entity is the club member with the occurrence deficit, so both masked
// objectives are solvable by one graph-wide rule.
inline KnowledgeGraph make_club_kg(uint64_t seed, const std::string& prefix) {
  KnowledgeGraph g;
  Rng rng(seed);
  std::vector<size_t> relabel(50);
  for (size_t i = 0; i < 50; ++i) relabel[i] = i;
  rng.shuffle(relabel);
  for (size_t e = 0; e < 50; ++e) {
    g.add_entity(prefix + "e" + std::to_string(relabel[e]));
  }
  for (size_t r = 0; r < 5; ++r) {
    g.add_relation(prefix + "r" + std::to_string(r));
  }
  for (size_t club = 0; club < 10; ++club) {
    for (size_t a = 0; a < 5; ++a) {
      for (size_t c = 0; c < 5; ++c) {
        if (a == c) continue;
        g.add_triple(static_cast<EntityId>(5 * club + a),
                     static_cast<RelationId>(c),
                     static_cast<EntityId>(5 * club + c));
      }
    }
  }
  return g;
}

// 1:1 labelled set: `count` held-out valid positives plus as many
// rule-violating corruptions.
inline std::vector<TcExample> make_tc_testset(GroupKg& kg, size_t offset,
                                              size_t count, uint64_t seed) {
  Rng rng(seed);
  std::vector<TcExample> out;
  for (size_t i = 0; i < count; ++i) {
    const Triple& t = kg.extra_valid.at(offset + i);
    out.push_back({t.head, t.rel, t.tail, 1});
    Triple neg = t;
    do {
      const EntityId cand =
          static_cast<EntityId>(rng.index(kg.g.entity_count()));
      if (rng.coin(0.5)) {
        neg = {cand, t.rel, t.tail};
      } else {
        neg = {t.head, t.rel, cand};
      }
    } while (kg.is_valid(neg));
    out.push_back({neg.head, neg.rel, neg.tail, 0});
  }
  return out;
}

inline std::string write_temp_file(const std::string& name,
                                   const std::string& content) {
  const std::string path = std::string("/tmp/kgt_test_") + name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

inline std::string triples_tsv(const KnowledgeGraph& g,
                               const std::vector<Triple>& triples) {
  std::string s;
  for (const Triple& t : triples) {
    s += g.entity_label(t.head) + "\t" + g.relation_label(t.rel) + "\t" +
         g.entity_label(t.tail) + "\n";
  }
  return s;
}

inline std::string tc_tsv(const KnowledgeGraph& g,
                          const std::vector<TcExample>& examples) {
  std::string s;
  for (const TcExample& ex : examples) {
    s += g.entity_label(ex.head) + "\t" + g.relation_label(ex.rel) + "\t" +
         g.entity_label(ex.tail) + "\t" + std::to_string(ex.label) + "\n";
  }
  return s;
}

}  // namespace kgt::test
