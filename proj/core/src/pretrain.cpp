#include "kgt/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "kgt/errors.hpp"
#include "kgt/optim.hpp"
#include "kgt/sampler.hpp"

namespace kgt {

namespace {

double fmt_ready(double v) { return v == 0.0 ? 0.0 : v; }  // normalize -0

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", fmt_ready(v));
  return buf;
}

Tensor scalar_zero() { return Tensor::zeros({1, 1}); }

}  // namespace

Tensor mem_loss(const Tensor& hidden, const TripleSequence& seq,
                ModelParams& params,
                const std::vector<std::vector<EntityId>>& negatives_per_record,
                const Vocab& vocab) {
  size_t n_mem = 0;
  Tensor total = scalar_zero();
  size_t neg_idx = 0;
  for (const MaskRecord& rec : seq.mask_records) {
    if (rec.kind != MaskKind::MEM) continue;
    if (neg_idx >= negatives_per_record.size()) {
      throw DataError("mem_loss: negatives missing for a mask record");
    }
    const EntityId target = vocab.to_entity(rec.original);
    Tensor s = extract_row(hidden, rec.pos);
    Tensor u = matmul(s, params.w_mem);
    Tensor e_pos = gather_rows(params.embeddings, {vocab.entity_token(target)});
    total = add(total, bce_with_logits(matmul(u, transpose(e_pos)), 1.0));
    for (EntityId neg : negatives_per_record[neg_idx]) {
      if (neg == target) {
        throw DataError("mem_loss: negative equals the masked entity");
      }
      Tensor e_neg = gather_rows(params.embeddings, {vocab.entity_token(neg)});
      total = add(total, bce_with_logits(matmul(u, transpose(e_neg)), 0.0));
    }
    ++neg_idx;
    ++n_mem;
  }
  if (n_mem == 0) throw DataError("mem_loss: sequence has no MEM masks");
  return total;
}

Tensor mrm_loss(const Tensor& hidden, const TripleSequence& seq,
                ModelParams& params, const Vocab& vocab) {
  size_t n_mrm = 0;
  Tensor total = scalar_zero();
  for (const MaskRecord& rec : seq.mask_records) {
    if (rec.kind != MaskKind::MRM) continue;
    const RelationId target = vocab.to_relation(rec.original);
    Tensor s = extract_row(hidden, rec.pos);
    Tensor logits = apply_linear(matmul(s, params.w_mrm), params.mrm_out);
    total = add(total, cross_entropy_logits(logits,
                                            static_cast<size_t>(target)));
    ++n_mrm;
  }
  if (n_mrm == 0) throw DataError("mrm_loss: sequence has no MRM masks");
  return total;
}

Tensor epm_loss(const Tensor& hidden, const TripleSequence& seq,
                ModelParams& params, int label) {
  if (seq.segments.size() < 2) {
    throw DataError("epm_loss: sequence has a single segment");
  }
  Tensor b0 = extract_row(hidden, seq.segments[0].begin);
  Tensor b1 = extract_row(hidden, seq.segments[1].begin);
  Tensor logits = apply_linear(concat_cols(b0, b1), params.epm_out);
  return cross_entropy_logits(logits, static_cast<size_t>(label));
}

std::string loss_csv(const std::vector<LossRow>& rows) {
  std::ostringstream os;
  os << "step,lr,L_MEM,L_MRM,L_EPM,L_total\n";
  for (const LossRow& r : rows) {
    os << r.step << "," << num(r.lr) << "," << num(r.mem) << "," << num(r.mrm)
       << "," << num(r.epm) << "," << num(r.total) << "\n";
  }
  return os.str();
}

namespace {

TripleSequence make_masked_item(const KnowledgeGraph& g, const Vocab& vocab,
                                EntityId center, MaskKind kind,
                                const RunConfig& config, Rng& rng) {
  std::optional<SubGraph> sg;
  // Fair coin between the two sampling strategies.
  if (rng.coin(0.5)) {
    sg = random_walk_sample(g, center, config.k, rng);
  } else {
    sg = entity_centered_sample(g, center, config.k, rng);
  }
  if (!sg) throw DataError("pretrain sample: center entity is isolated");
  TripleSequence seq = serialize(*sg, vocab);
  build_matrix(seq);
  apply_mask(seq, kind, config.mask_rate, rng);
  if (!config.use_matrix) apply_all_ones_matrix(seq);
  return seq;
}

}  // namespace

PretrainBatch build_pretrain_batch(const KnowledgeGraph& g, const Vocab& vocab,
                                   const std::vector<EntityId>& centers,
                                   const RunConfig& config, Rng& rng) {
  PretrainBatch batch;
  // One seed per (center, objective); drawn unconditionally so ablation
  // toggles do not shift the other streams.
  struct Seeds {
    uint64_t mem, mrm, epm;
  };
  std::vector<Seeds> seeds;
  for (size_t i = 0; i < centers.size(); ++i) {
    seeds.push_back({rng.next_u64(), rng.next_u64(), rng.next_u64()});
  }
  const uint64_t negatives_seed = rng.next_u64();

  for (size_t i = 0; i < centers.size(); ++i) {
    const EntityId e = centers[i];
    if (config.use_mem) {
      Rng r(seeds[i].mem);
      PretrainItem item;
      item.center = e;
      item.seq = make_masked_item(g, vocab, e, MaskKind::MEM, config, r);
      batch.mem_items.push_back(std::move(item));
    }
    if (config.use_mrm) {
      Rng r(seeds[i].mrm);
      PretrainItem item;
      item.center = e;
      item.seq = make_masked_item(g, vocab, e, MaskKind::MRM, config, r);
      batch.mrm_items.push_back(std::move(item));
    }
    if (config.use_epm) {
      Rng r(seeds[i].epm);
      std::optional<EpmPair> pair =
          sample_epm_pair(g, e, config.k, r, config.epm_positive_prob);
      if (!pair) throw DataError("epm sample: no partner entity available");
      TripleSequence left = serialize(pair->left, vocab);
      TripleSequence right = serialize(pair->right, vocab);
      TripleSequence both = concat_graph_sequences(left, right);
      build_matrix(both);
      if (!config.use_matrix) apply_all_ones_matrix(both);
      PretrainItem item;
      item.center = e;
      item.seq = std::move(both);
      item.epm_label = pair->label;
      batch.epm_items.push_back(std::move(item));
    }
  }

  // Negative entities for MEM: the other entities present in this batch.
  if (config.use_mem && config.mem_negatives > 0) {
    std::vector<EntityId> pool;
    auto collect = [&pool](const std::vector<PretrainItem>& items) {
      for (const PretrainItem& it : items) {
        for (const Triple& t : it.seq.triples) {
          pool.push_back(t.head);
          pool.push_back(t.tail);
        }
      }
    };
    collect(batch.mem_items);
    collect(batch.mrm_items);
    collect(batch.epm_items);
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

    Rng neg_rng(negatives_seed);
    for (PretrainItem& item : batch.mem_items) {
      for (const MaskRecord& rec : item.seq.mask_records) {
        const EntityId target = vocab.to_entity(rec.original);
        std::vector<EntityId> candidates;
        candidates.reserve(pool.size());
        for (EntityId x : pool) {
          if (x != target) candidates.push_back(x);
        }
        if (candidates.empty()) {
          for (size_t e2 = 0; e2 < g.entity_count(); ++e2) {
            if (static_cast<EntityId>(e2) != target) {
              candidates.push_back(static_cast<EntityId>(e2));
            }
          }
        }
        if (candidates.empty()) {
          throw DataError("mem negatives: no candidate entities");
        }
        std::vector<EntityId> negs;
        if (candidates.size() >= config.mem_negatives) {
          negs = neg_rng.sample_without_replacement(candidates,
                                                    config.mem_negatives);
        } else {
          for (size_t j = 0; j < config.mem_negatives; ++j) {
            negs.push_back(candidates[neg_rng.index(candidates.size())]);
          }
        }
        item.mem_negatives.push_back(std::move(negs));
      }
    }
  } else {
    for (PretrainItem& item : batch.mem_items) {
      item.mem_negatives.assign(item.seq.mask_records.size(), {});
    }
  }
  return batch;
}

std::vector<LossRow> pretrain_loop(const KnowledgeGraph& g, const Vocab& vocab,
                                   ModelParams& params,
                                   const RunConfig& config,
                                   const CheckpointSink& sink) {
  const std::vector<EntityId> eligible = g.entities_with_triples();
  if (eligible.empty()) throw DataError("pretrain: graph has no triples");

  const int64_t steps_per_epoch = static_cast<int64_t>(
      (eligible.size() + config.batch - 1) / config.batch);
  const int64_t total =
      config.total_steps > 0
          ? config.total_steps
          : static_cast<int64_t>(config.epochs) * steps_per_epoch;
  const int64_t warmup =
      config.warmup_steps > 0 ? config.warmup_steps : std::max<int64_t>(
                                                          1, total / 10);
  if (warmup >= total) {
    throw ConfigError("pretrain: schedule needs warmup < total steps");
  }

  std::vector<Tensor> trainable = params.group_tensors(kGroupEmbeddings);
  for (Tensor& t : params.group_tensors(kGroupLayers)) trainable.push_back(t);
  if (config.use_mem) trainable.push_back(params.w_mem);
  if (config.use_mrm) {
    trainable.push_back(params.w_mrm);
    trainable.push_back(params.mrm_out.w);
    trainable.push_back(params.mrm_out.b);
  }
  if (config.use_epm) {
    trainable.push_back(params.epm_out.w);
    trainable.push_back(params.epm_out.b);
  }
  Adam adam(trainable, {config.beta1, config.beta2, config.eps});

  std::vector<LossRow> rows;
  Rng dropout_rng(derive_seed(config.seed, 0xd20));
  int64_t step = 0;
  size_t epoch = 0;
  while (step < total) {
    std::vector<EntityId> order = eligible;
    Rng epoch_rng(derive_seed(config.seed, 0xe0, epoch));
    epoch_rng.shuffle(order);
    for (size_t start = 0; start < order.size() && step < total;
         start += config.batch) {
      const size_t end = std::min(order.size(), start + config.batch);
      std::vector<EntityId> centers(order.begin() + start,
                                    order.begin() + end);
      ++step;
      Rng batch_rng(derive_seed(config.seed, 0xb0, epoch, start));
      PretrainBatch batch =
          build_pretrain_batch(g, vocab, centers, config, batch_rng);

      Tensor mem_total = scalar_zero();
      Tensor mrm_total = scalar_zero();
      Tensor epm_total = scalar_zero();
      for (const PretrainItem& item : batch.mem_items) {
        Tensor hidden = forward(item.seq, params, nullptr, &dropout_rng);
        mem_total = add(mem_total, mem_loss(hidden, item.seq, params,
                                            item.mem_negatives, vocab));
      }
      for (const PretrainItem& item : batch.mrm_items) {
        Tensor hidden = forward(item.seq, params, nullptr, &dropout_rng);
        mrm_total = add(mrm_total, mrm_loss(hidden, item.seq, params, vocab));
      }
      for (const PretrainItem& item : batch.epm_items) {
        Tensor hidden = forward(item.seq, params, nullptr, &dropout_rng);
        epm_total =
            add(epm_total, epm_loss(hidden, item.seq, params, item.epm_label));
      }
      Tensor loss = add(add(mem_total, mrm_total), epm_total);
      if (!std::isfinite(loss.item())) {
        throw NumericError("pretrain: non-finite loss at step " +
                           std::to_string(step));
      }
      loss.backward();
      const double lr = lr_schedule(step, warmup, total, config.lr);
      adam.step(lr);

      rows.push_back({step, lr, mem_total.item(), mrm_total.item(),
                      epm_total.item(), loss.item()});
      if (sink && config.checkpoint_every > 0 &&
          step % static_cast<int64_t>(config.checkpoint_every) == 0 &&
          step != total) {
        sink(step, params);
      }
    }
    ++epoch;
  }
  if (sink) sink(step, params);
  return rows;
}

PretrainEval evaluate_pretrain(const KnowledgeGraph& g, const Vocab& vocab,
                               ModelParams& params, const RunConfig& config,
                               size_t n_centers, uint64_t seed) {
  const std::vector<EntityId> eligible = g.entities_with_triples();
  if (eligible.empty()) throw DataError("evaluate_pretrain: empty graph");
  Rng rng(derive_seed(seed, 0xe5a1));

  size_t mem_hits = 0, mem_total = 0;
  size_t mrm_hits = 0, mrm_total = 0;
  size_t epm_hits = 0, epm_total = 0;

  std::vector<int32_t> entity_tokens;
  for (size_t e = 0; e < vocab.n_entities; ++e) {
    entity_tokens.push_back(vocab.entity_token(static_cast<EntityId>(e)));
  }

  for (size_t i = 0; i < n_centers; ++i) {
    const EntityId center = eligible[rng.index(eligible.size())];
    std::vector<EntityId> centers{center};
    PretrainBatch batch =
        build_pretrain_batch(g, vocab, centers, config, rng);

    for (const PretrainItem& item : batch.mem_items) {
      Tensor hidden = forward(item.seq, params);
      Tensor all_entities = gather_rows(params.embeddings, entity_tokens);
      for (const MaskRecord& rec : item.seq.mask_records) {
        Tensor s = extract_row(hidden, rec.pos);
        Tensor scores =
            matmul(matmul(s, params.w_mem), transpose(all_entities));
        size_t best = 0;
        for (size_t j = 1; j < scores.cols(); ++j) {
          if (scores.at(0, j) > scores.at(0, best)) best = j;
        }
        mem_hits += (static_cast<EntityId>(best) ==
                     vocab.to_entity(rec.original));
        ++mem_total;
      }
    }
    for (const PretrainItem& item : batch.mrm_items) {
      Tensor hidden = forward(item.seq, params);
      for (const MaskRecord& rec : item.seq.mask_records) {
        Tensor s = extract_row(hidden, rec.pos);
        Tensor logits = apply_linear(matmul(s, params.w_mrm), params.mrm_out);
        size_t best = 0;
        for (size_t j = 1; j < logits.cols(); ++j) {
          if (logits.at(0, j) > logits.at(0, best)) best = j;
        }
        mrm_hits += (static_cast<RelationId>(best) ==
                     vocab.to_relation(rec.original));
        ++mrm_total;
      }
    }
    for (const PretrainItem& item : batch.epm_items) {
      Tensor hidden = forward(item.seq, params);
      Tensor b0 = extract_row(hidden, item.seq.segments[0].begin);
      Tensor b1 = extract_row(hidden, item.seq.segments[1].begin);
      Tensor logits = apply_linear(concat_cols(b0, b1), params.epm_out);
      const int pred = logits.at(0, 1) > logits.at(0, 0) ? 1 : 0;
      epm_hits += (pred == item.epm_label);
      ++epm_total;
    }
  }

  PretrainEval ev;
  ev.mem_hit1 = mem_total ? static_cast<double>(mem_hits) / mem_total : 0.0;
  ev.mrm_accuracy =
      mrm_total ? static_cast<double>(mrm_hits) / mrm_total : 0.0;
  ev.epm_accuracy =
      epm_total ? static_cast<double>(epm_hits) / epm_total : 0.0;
  return ev;
}

}  // namespace kgt
