#pragma once

#include <set>
#include <string>
#include <vector>

#include "kgt/checkpoint.hpp"
#include "kgt/sequence.hpp"
#include "kgt/tensor.hpp"

namespace kgt {

// Additive fill for gated-out attention scores; drives softmax mass to an
// exact zero in float64.
inline constexpr double kMaskFill = -1e9;

// Parameter group names. "layers" is the transferable set: attention, FFN
// and norm weights, excluding the embedding table and all heads.
inline const std::string kGroupEmbeddings = "embeddings";
inline const std::string kGroupLayers = "layers";
inline const std::string kGroupPretrainHeads = "pretrain_heads";
inline const std::string kGroupTaskHeads = "task_heads";

struct LinearLayer {
  Tensor w;
  Tensor b;
  bool defined() const { return w.defined(); }
};

Tensor apply_linear(const Tensor& x, const LinearLayer& l);

struct LayerParams {
  Tensor wq, wk, wv, wo;            // d x d each, heads packed along columns
  Tensor ffn_w1, ffn_b1;            // d x 4d, 1 x 4d
  Tensor ffn_w2, ffn_b2;            // 4d x d, 1 x d
  Tensor ln1_gamma, ln1_beta;       // 1 x d
  Tensor ln2_gamma, ln2_beta;       // 1 x d
};

struct ModelDims {
  size_t d = 768;
  size_t heads = 12;
  size_t layers = 4;
  size_t vocab = 0;
  size_t n_relations = 0;
  double dropout = 0.0;
};

struct NamedParam {
  std::string name;
  std::string group;
  Tensor tensor;
};

struct ModelParams {
  ModelDims dims;
  Tensor embeddings;  // vocab x d
  std::vector<LayerParams> layers;

  // pretraining heads
  Tensor w_mem;          // d x d
  Tensor w_mrm;          // d x d
  LinearLayer mrm_out;   // d -> n_relations
  LinearLayer epm_out;   // 2d -> 2

  // task heads, created on demand
  LinearLayer tc_out;                  // 2d -> 2
  LinearLayer zsl_proj_b, zsl_proj_v;  // d -> d
  Tensor zsl_wmap;                     // d_ext x d
  LinearLayer qa_out;                  // 2d + d_ext -> 2
  Tensor qa_wmap;                      // d_ext x d

  std::set<std::string> frozen;

  std::vector<NamedParam> named() const;
  std::vector<Tensor> group_tensors(const std::string& group) const;
};

// Fresh embeddings, layer stack and pretraining heads; weights normal(0,
// 0.02), biases and norm offsets zero, norm scales one.
ModelParams init_model(const ModelDims& dims, Rng& rng);
void init_task_head(ModelParams& params, TaskKind task, size_t d_ext,
                    Rng& rng);
// Re-draws the layer stack only (embeddings and heads untouched).
void reinit_layers(ModelParams& params, Rng& rng);

// Marks groups as frozen: requires_grad off, optimizer skips them. Unlisted
// groups are (re)thawed. Throws ConfigError on an unknown group name.
void set_frozen(ModelParams& params, const std::set<std::string>& groups);

size_t layer_param_count(const ModelParams& params);

Checkpoint to_checkpoint(const ModelParams& params, int64_t step,
                         const std::string& rng_state,
                         std::map<std::string, std::string> meta = {});
// Restores every tensor found in the checkpoint by name (shape-checked).
void load_params(ModelParams& params, const Checkpoint& ckpt);
// Copies only the "layers" group; shapes must match. The target keeps its
// own embeddings and heads.
void transplant_layers(ModelParams& params, const Checkpoint& ckpt);

// Per-layer, per-head softmax attention weights captured during forward.
struct ForwardTrace {
  size_t n = 0;
  std::vector<std::vector<double>> probs;  // layers*heads entries, n*n each
};

// Embedding rows for the sequence tokens; positions listed in seq.injected
// are overridden with their feature vector projected by the task's map.
Tensor embed(const TripleSequence& seq, ModelParams& params);

// One masked multi-head self-attention block (no residual/norm).
Tensor attention(const Tensor& h, const std::vector<uint8_t>& matrix,
                 const LayerParams& layer, size_t heads,
                 ForwardTrace* trace = nullptr);

// Full stack: embed, then per layer post-norm attention and FFN sublayers.
// No positional signal anywhere.
Tensor forward(const TripleSequence& seq, ModelParams& params,
               ForwardTrace* trace = nullptr, Rng* dropout_rng = nullptr);

// Hidden-state row lookups.
size_t segment_begin_position(const TripleSequence& seq, size_t segment);
size_t unique_token_position(const TripleSequence& seq, TokenId token);
Tensor extract_row(const Tensor& hidden, size_t position);

}  // namespace kgt
