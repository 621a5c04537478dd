#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "kgt/config.hpp"
#include "kgt/metrics.hpp"
#include "kgt/model.hpp"
#include "kgt/pretrain.hpp"

namespace kgt {

// TSV with a `dim=<n>` header line, then `id<TAB>v1,v2,...` rows.
struct FeatureFile {
  size_t dim = 0;
  std::vector<std::string> ids;
  std::unordered_map<std::string, size_t> index;
  std::vector<std::vector<double>> vectors;

  const std::vector<double>& get(const std::string& id) const;
  bool contains(const std::string& id) const { return index.count(id) > 0; }
};

FeatureFile load_features(const std::string& path);
void save_features(const std::string& path, const FeatureFile& f);

struct TcExample {
  EntityId head = 0;
  RelationId rel = 0;
  EntityId tail = 0;
  int label = 1;
};

struct ZslExample {
  std::string image_id;
  EntityId cls = 0;
  int label = 1;
};

struct QaExample {
  std::string group_id;
  std::string qc_id;
  std::vector<EntityId> keywords;
  int label = 0;
};

// h<TAB>r<TAB>t<TAB>label, labels referencing task-graph vocabulary.
std::vector<TcExample> load_tc_examples(const std::string& path,
                                        const KnowledgeGraph& g);
// image_id<TAB>class_label<TAB>label
std::vector<ZslExample> load_zsl_examples(const std::string& path,
                                          const KnowledgeGraph& g);
// group_id<TAB>qc_id<TAB>kw1,kw2,...<TAB>label
std::vector<QaExample> load_qa_examples(const std::string& path,
                                        const KnowledgeGraph& g);

// --- forward scores ---

// Evidence is the concatenation of head- and tail-centered sub-graphs with a
// [T][h][r][t] prompt; returns the 2-class logits of the task head over the
// [B] and [T] summaries.
Tensor tc_logits(const TcExample& ex, const KnowledgeGraph& g,
                 const Vocab& vocab, ModelParams& params, size_t k, Rng& rng);

// Class-centered evidence with a [T][C][M][V] prompt, one-way gating, the
// image feature injected at [V]; cosine of the two projected summaries.
Tensor zsl_score(const std::vector<double>& image_vec, EntityId cls,
                 const KnowledgeGraph& g, const Vocab& vocab,
                 ModelParams& params, size_t k, Rng& rng);

// Keyword-extracted evidence with a [T][M][M][Q] prompt, the text feature
// injected at [Q]; 2-class logits over [B], [Q] and the raw feature.
Tensor qa_logits(const std::vector<double>& qc_vec,
                 const std::vector<EntityId>& keywords,
                 const KnowledgeGraph& g, const Vocab& vocab,
                 ModelParams& params, size_t k, Rng& rng);

// Up to k triples incident to the keyword entities (uniform without
// replacement when more exist); falls back to uniform triples when the
// keywords touch nothing.
SubGraph keyword_subgraph(const KnowledgeGraph& g,
                          const std::vector<EntityId>& keywords, size_t k,
                          Rng& rng);

// --- tuning ---

struct TuneRow {
  int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

std::string tune_csv(const std::vector<TuneRow>& rows);

// Corruption-based negatives (tc_negatives per positive, filtered against
// the known-true set), constant-lr Adam over batches of task_batch.
std::vector<TuneRow> tune_tc(const std::vector<TcExample>& positives,
                             const KnowledgeGraph& g, const Vocab& vocab,
                             ModelParams& params, const RunConfig& config);

// Negative pairs re-labelled onto random other seen classes; BCE on the
// affinely rescaled cosine score.
std::vector<TuneRow> tune_zsl(const std::vector<ZslExample>& train,
                              const std::vector<EntityId>& seen_classes,
                              const FeatureFile& features,
                              const KnowledgeGraph& g, const Vocab& vocab,
                              ModelParams& params, const RunConfig& config);

// Per-example cross-entropy with gradient accumulation (grad_accum
// micro-batches per optimizer step).
std::vector<TuneRow> tune_qa(const std::vector<QaExample>& train,
                             const FeatureFile& features,
                             const KnowledgeGraph& g, const Vocab& vocab,
                             ModelParams& params, const RunConfig& config);

// --- evaluation ---

ConfusionMetrics tc_evaluate(const std::vector<TcExample>& examples,
                             const KnowledgeGraph& g, const Vocab& vocab,
                             ModelParams& params, size_t k, uint64_t seed);

// Highest-scoring candidate; ties resolved to the lowest class id.
EntityId zsl_predict(const std::vector<double>& image_vec,
                     const std::vector<EntityId>& candidates,
                     const KnowledgeGraph& g, const Vocab& vocab,
                     ModelParams& params, size_t k, uint64_t seed);

ZslMetrics zsl_evaluate(const std::vector<ZslExample>& test,
                        const std::vector<EntityId>& seen_classes,
                        const std::vector<EntityId>& unseen_classes,
                        const FeatureFile& features, const KnowledgeGraph& g,
                        const Vocab& vocab, ModelParams& params, size_t k,
                        uint64_t seed);

// Groups must have exactly 5 members with exactly one positive; returns the
// fraction of groups whose argmax member is the positive one.
double qa_evaluate(const std::vector<QaExample>& examples,
                   const FeatureFile& features, const KnowledgeGraph& g,
                   const Vocab& vocab, ModelParams& params, size_t k,
                   uint64_t seed);

}  // namespace kgt
