#pragma once

#include <functional>
#include <vector>

#include "kgt/config.hpp"
#include "kgt/model.hpp"
#include "kgt/pretrain_types.hpp"

namespace kgt {

// Masked-entity scoring loss: for every MEM mask record, a binary
// cross-entropy pulling the scored original entity towards 1 and each
// negative towards 0, summed over records. score(x) = sigmoid(s W E(x)^T).
Tensor mem_loss(const Tensor& hidden, const TripleSequence& seq,
                ModelParams& params, const std::vector<std::vector<EntityId>>&
                    negatives_per_record,
                const Vocab& vocab);

// Masked-relation classification: softmax cross-entropy over all relations,
// summed over MRM mask records.
Tensor mrm_loss(const Tensor& hidden, const TripleSequence& seq,
                ModelParams& params, const Vocab& vocab);

// Pair coherence: 2-way cross-entropy on the two segment summaries.
Tensor epm_loss(const Tensor& hidden, const TripleSequence& seq,
                ModelParams& params, int label);

struct LossRow {
  int64_t step = 0;
  double lr = 0.0;
  double mem = 0.0;
  double mrm = 0.0;
  double epm = 0.0;
  double total = 0.0;
};

std::string loss_csv(const std::vector<LossRow>& rows);

// Per-entity sample bundle for one optimization step.
struct PretrainBatch {
  std::vector<PretrainItem> mem_items;
  std::vector<PretrainItem> mrm_items;
  std::vector<PretrainItem> epm_items;
};

PretrainBatch build_pretrain_batch(const KnowledgeGraph& g, const Vocab& vocab,
                                   const std::vector<EntityId>& centers,
                                   const RunConfig& config, Rng& rng);

using CheckpointSink =
    std::function<void(int64_t step, const ModelParams& params)>;

// Full loop: per epoch shuffles the eligible centers, builds batches, sums
// the enabled objective terms, and runs Adam under the warmup/decay
// schedule. Deterministic for a fixed config and graph. Throws NumericError
// when the loss turns non-finite.
std::vector<LossRow> pretrain_loop(const KnowledgeGraph& g, const Vocab& vocab,
                                   ModelParams& params,
                                   const RunConfig& config,
                                   const CheckpointSink& sink = {});

struct PretrainEval {
  double mem_hit1 = 0.0;
  double mrm_accuracy = 0.0;
  double epm_accuracy = 0.0;
};

// Greedy accuracy of the three heads on freshly drawn training-distribution
// samples (argmax over all entities / relations / the two pair classes).
PretrainEval evaluate_pretrain(const KnowledgeGraph& g, const Vocab& vocab,
                               ModelParams& params, const RunConfig& config,
                               size_t n_centers, uint64_t seed);

}  // namespace kgt
