#pragma once

#include <optional>
#include <vector>

#include "kgt/kg.hpp"
#include "kgt/rng.hpp"

namespace kgt {

struct SubGraph {
  std::vector<Triple> triples;  // at most k, no duplicates
  EntityId center = 0;
};

struct EpmPair {
  SubGraph left;
  SubGraph right;
  int label = 0;  // 1 iff right.center shares a head/tail role with left's
};

// Walks k steps from e, each step picking a uniform incident triple of the
// current entity and hopping to its other endpoint. Revisited triples are
// skipped rather than re-appended. nullopt when e has no incident triples.
std::optional<SubGraph> random_walk_sample(const KnowledgeGraph& g, EntityId e,
                                           size_t k, Rng& rng);

// min(k, n) one-hop triples uniformly without replacement; when n < k, tops
// up with at most k-n triples incident to the one-hop endpoints, again
// uniformly without replacement. nullopt when e has no incident triples.
std::optional<SubGraph> entity_centered_sample(const KnowledgeGraph& g,
                                               EntityId e, size_t k, Rng& rng);

// Coin with probability `positive_prob` for a positive pair (partner drawn
// from same_role_entities) vs a negative one (partner drawn from the
// remaining entities). Falls back to label 0 when no same-role candidate
// exists. Both sides are entity-centered samples. nullopt when e is isolated
// or no partner with triples exists.
std::optional<EpmPair> sample_epm_pair(const KnowledgeGraph& g, EntityId e,
                                       size_t k, Rng& rng,
                                       double positive_prob = 0.5);

}  // namespace kgt
