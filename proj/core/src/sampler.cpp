#include "kgt/sampler.hpp"

#include <algorithm>

namespace kgt {

std::optional<SubGraph> random_walk_sample(const KnowledgeGraph& g, EntityId e,
                                           size_t k, Rng& rng) {
  if (g.degree(e) == 0) return std::nullopt;
  SubGraph sg;
  sg.center = e;
  std::vector<int32_t> chosen;
  EntityId current = e;
  for (size_t step = 0; step < k; ++step) {
    const std::vector<int32_t> incident = g.neighbor_indices(current);
    if (incident.empty()) break;
    const int32_t idx = incident[rng.index(incident.size())];
    if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end()) {
      chosen.push_back(idx);
      sg.triples.push_back(g.triple(idx));
    }
    const Triple& t = g.triple(idx);
    current = (t.head == current) ? t.tail : t.head;
  }
  return sg;
}

std::optional<SubGraph> entity_centered_sample(const KnowledgeGraph& g,
                                               EntityId e, size_t k,
                                               Rng& rng) {
  const std::vector<int32_t> one_hop = g.neighbor_indices(e);
  if (one_hop.empty()) return std::nullopt;

  std::vector<int32_t> chosen =
      rng.sample_without_replacement(one_hop, std::min(k, one_hop.size()));

  if (one_hop.size() < k) {
    // All one-hop triples are in `chosen`; pool the endpoints' incident
    // triples and draw the remainder from what is not already selected.
    std::vector<EntityId> endpoints;
    for (int32_t idx : one_hop) {
      const Triple& t = g.triple(idx);
      endpoints.push_back(t.head == e ? t.tail : t.head);
    }
    std::sort(endpoints.begin(), endpoints.end());
    endpoints.erase(std::unique(endpoints.begin(), endpoints.end()),
                    endpoints.end());

    std::vector<int32_t> pool;
    for (EntityId ep : endpoints) {
      const std::vector<int32_t> inc = g.neighbor_indices(ep);
      pool.insert(pool.end(), inc.begin(), inc.end());
    }
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    std::vector<int32_t> sorted_chosen = chosen;
    std::sort(sorted_chosen.begin(), sorted_chosen.end());
    std::vector<int32_t> candidates;
    std::set_difference(pool.begin(), pool.end(), sorted_chosen.begin(),
                        sorted_chosen.end(), std::back_inserter(candidates));

    const size_t want = k - one_hop.size();
    std::vector<int32_t> extra =
        rng.sample_without_replacement(candidates, want);
    chosen.insert(chosen.end(), extra.begin(), extra.end());
  }

  SubGraph sg;
  sg.center = e;
  for (int32_t idx : chosen) sg.triples.push_back(g.triple(idx));
  return sg;
}

std::optional<EpmPair> sample_epm_pair(const KnowledgeGraph& g, EntityId e,
                                       size_t k, Rng& rng,
                                       double positive_prob) {
  if (g.degree(e) == 0) return std::nullopt;

  const std::vector<EntityId> same_role = g.same_role_entities(e);
  std::vector<EntityId> positive_pool;
  for (EntityId x : same_role) {
    if (g.degree(x) > 0) positive_pool.push_back(x);
  }

  std::vector<EntityId> negative_pool;
  for (EntityId x : g.entities_with_triples()) {
    if (x == e) continue;
    if (std::binary_search(same_role.begin(), same_role.end(), x)) continue;
    negative_pool.push_back(x);
  }

  bool want_positive = rng.coin(positive_prob);
  int label;
  EntityId partner;
  if (want_positive && !positive_pool.empty()) {
    label = 1;
    partner = positive_pool[rng.index(positive_pool.size())];
  } else if (!negative_pool.empty()) {
    label = 0;
    partner = negative_pool[rng.index(negative_pool.size())];
  } else if (!positive_pool.empty()) {
    label = 1;
    partner = positive_pool[rng.index(positive_pool.size())];
  } else {
    return std::nullopt;
  }

  auto left = entity_centered_sample(g, e, k, rng);
  auto right = entity_centered_sample(g, partner, k, rng);
  if (!left || !right) return std::nullopt;

  EpmPair pair;
  pair.left = std::move(*left);
  pair.right = std::move(*right);
  pair.label = label;
  return pair;
}

}  // namespace kgt
