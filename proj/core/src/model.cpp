#include "kgt/model.hpp"

#include <algorithm>
#include <cmath>

#include "kgt/errors.hpp"

namespace kgt {

Tensor apply_linear(const Tensor& x, const LinearLayer& l) {
  return add_row_broadcast(matmul(x, l.w), l.b);
}

namespace {

// normal(0, 0.02) at the reference width d=768, scaled as 1/sqrt(d) so
// activation magnitudes survive at small widths.
double init_stddev(size_t d) { return 0.02 * std::sqrt(768.0 / d); }

Tensor weight(std::vector<size_t> shape, Rng& rng, size_t d) {
  return Tensor::randn(std::move(shape), rng, init_stddev(d), true);
}

LinearLayer make_linear(size_t in, size_t out, Rng& rng, size_t d) {
  LinearLayer l;
  l.w = weight({in, out}, rng, d);
  l.b = Tensor::zeros({1, out}, true);
  return l;
}

LayerParams make_layer(size_t d, Rng& rng) {
  LayerParams lp;
  lp.wq = weight({d, d}, rng, d);
  lp.wk = weight({d, d}, rng, d);
  lp.wv = weight({d, d}, rng, d);
  lp.wo = weight({d, d}, rng, d);
  lp.ffn_w1 = weight({d, 4 * d}, rng, d);
  lp.ffn_b1 = Tensor::zeros({1, 4 * d}, true);
  lp.ffn_w2 = weight({4 * d, d}, rng, d);
  lp.ffn_b2 = Tensor::zeros({1, d}, true);
  lp.ln1_gamma = Tensor::full({1, d}, 1.0, true);
  lp.ln1_beta = Tensor::zeros({1, d}, true);
  lp.ln2_gamma = Tensor::full({1, d}, 1.0, true);
  lp.ln2_beta = Tensor::zeros({1, d}, true);
  return lp;
}

void push_layer(std::vector<NamedParam>& out, const std::string& prefix,
                const LayerParams& lp) {
  out.push_back({prefix + ".wq", kGroupLayers, lp.wq});
  out.push_back({prefix + ".wk", kGroupLayers, lp.wk});
  out.push_back({prefix + ".wv", kGroupLayers, lp.wv});
  out.push_back({prefix + ".wo", kGroupLayers, lp.wo});
  out.push_back({prefix + ".ffn_w1", kGroupLayers, lp.ffn_w1});
  out.push_back({prefix + ".ffn_b1", kGroupLayers, lp.ffn_b1});
  out.push_back({prefix + ".ffn_w2", kGroupLayers, lp.ffn_w2});
  out.push_back({prefix + ".ffn_b2", kGroupLayers, lp.ffn_b2});
  out.push_back({prefix + ".ln1_gamma", kGroupLayers, lp.ln1_gamma});
  out.push_back({prefix + ".ln1_beta", kGroupLayers, lp.ln1_beta});
  out.push_back({prefix + ".ln2_gamma", kGroupLayers, lp.ln2_gamma});
  out.push_back({prefix + ".ln2_beta", kGroupLayers, lp.ln2_beta});
}

}  // namespace

ModelParams init_model(const ModelDims& dims, Rng& rng) {
  if (dims.d == 0 || dims.heads == 0 || dims.d % dims.heads != 0) {
    throw ConfigError("model dims: d must be a positive multiple of heads");
  }
  ModelParams p;
  p.dims = dims;
  p.embeddings = weight({dims.vocab, dims.d}, rng, dims.d);
  for (size_t i = 0; i < dims.layers; ++i) {
    p.layers.push_back(make_layer(dims.d, rng));
  }
  p.w_mem = weight({dims.d, dims.d}, rng, dims.d);
  p.w_mrm = weight({dims.d, dims.d}, rng, dims.d);
  p.mrm_out = make_linear(dims.d, dims.n_relations, rng, dims.d);
  p.epm_out = make_linear(2 * dims.d, 2, rng, dims.d);
  return p;
}

void init_task_head(ModelParams& p, TaskKind task, size_t d_ext, Rng& rng) {
  const size_t d = p.dims.d;
  switch (task) {
    case TaskKind::TripleClassification:
      p.tc_out = make_linear(2 * d, 2, rng, d);
      break;
    case TaskKind::ZeroShot:
      p.zsl_proj_b = make_linear(d, d, rng, d);
      p.zsl_proj_v = make_linear(d, d, rng, d);
      p.zsl_wmap = weight({d_ext, d}, rng, d);
      break;
    case TaskKind::QuestionAnswering:
      p.qa_out = make_linear(2 * d + d_ext, 2, rng, d);
      p.qa_wmap = weight({d_ext, d}, rng, d);
      break;
  }
}

void reinit_layers(ModelParams& p, Rng& rng) {
  p.layers.clear();
  for (size_t i = 0; i < p.dims.layers; ++i) {
    p.layers.push_back(make_layer(p.dims.d, rng));
  }
  set_frozen(p, p.frozen);  // reapply flags to the new tensors
}

std::vector<NamedParam> ModelParams::named() const {
  std::vector<NamedParam> out;
  out.push_back({"embeddings", kGroupEmbeddings, embeddings});
  for (size_t i = 0; i < layers.size(); ++i) {
    push_layer(out, "layers." + std::to_string(i), layers[i]);
  }
  out.push_back({"pretrain.w_mem", kGroupPretrainHeads, w_mem});
  out.push_back({"pretrain.w_mrm", kGroupPretrainHeads, w_mrm});
  out.push_back({"pretrain.mrm_out.w", kGroupPretrainHeads, mrm_out.w});
  out.push_back({"pretrain.mrm_out.b", kGroupPretrainHeads, mrm_out.b});
  out.push_back({"pretrain.epm_out.w", kGroupPretrainHeads, epm_out.w});
  out.push_back({"pretrain.epm_out.b", kGroupPretrainHeads, epm_out.b});
  auto push_opt = [&out](const std::string& name, const Tensor& t) {
    if (t.defined()) out.push_back({name, kGroupTaskHeads, t});
  };
  push_opt("task.tc_out.w", tc_out.w);
  push_opt("task.tc_out.b", tc_out.b);
  push_opt("task.zsl_proj_b.w", zsl_proj_b.w);
  push_opt("task.zsl_proj_b.b", zsl_proj_b.b);
  push_opt("task.zsl_proj_v.w", zsl_proj_v.w);
  push_opt("task.zsl_proj_v.b", zsl_proj_v.b);
  push_opt("task.zsl_wmap", zsl_wmap);
  push_opt("task.qa_out.w", qa_out.w);
  push_opt("task.qa_out.b", qa_out.b);
  push_opt("task.qa_wmap", qa_wmap);
  return out;
}

std::vector<Tensor> ModelParams::group_tensors(const std::string& group) const {
  std::vector<Tensor> out;
  for (const NamedParam& np : named()) {
    if (np.group == group) out.push_back(np.tensor);
  }
  return out;
}

void set_frozen(ModelParams& params, const std::set<std::string>& groups) {
  static const std::set<std::string> known = {
      kGroupEmbeddings, kGroupLayers, kGroupPretrainHeads, kGroupTaskHeads};
  for (const std::string& g : groups) {
    if (!known.count(g)) throw ConfigError("unknown parameter group: " + g);
  }
  params.frozen = groups;
  for (NamedParam& np : params.named()) {
    np.tensor.set_requires_grad(!groups.count(np.group));
  }
}

size_t layer_param_count(const ModelParams& params) {
  size_t total = 0;
  for (const NamedParam& np : params.named()) {
    if (np.group == kGroupLayers) total += np.tensor.size();
  }
  return total;
}

Checkpoint to_checkpoint(const ModelParams& params, int64_t step,
                         const std::string& rng_state,
                         std::map<std::string, std::string> meta) {
  Checkpoint ckpt;
  ckpt.step = step;
  ckpt.rng_state = rng_state;
  ckpt.meta = std::move(meta);
  ckpt.meta["d"] = std::to_string(params.dims.d);
  ckpt.meta["heads"] = std::to_string(params.dims.heads);
  ckpt.meta["layers"] = std::to_string(params.dims.layers);
  ckpt.meta["vocab"] = std::to_string(params.dims.vocab);
  ckpt.meta["n_relations"] = std::to_string(params.dims.n_relations);
  for (const NamedParam& np : params.named()) {
    CheckpointTensor t;
    t.name = np.name;
    t.group = np.group;
    t.shape = np.tensor.shape();
    t.frozen = !np.tensor.requires_grad();
    t.data = np.tensor.data();
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void load_params(ModelParams& params, const Checkpoint& ckpt) {
  for (NamedParam& np : params.named()) {
    const CheckpointTensor* src = ckpt.find(np.name);
    if (!src) continue;
    if (src->shape != np.tensor.shape()) {
      throw DataError("checkpoint tensor " + np.name + " has wrong shape");
    }
    np.tensor.data() = src->data;
  }
}

void transplant_layers(ModelParams& params, const Checkpoint& ckpt) {
  for (NamedParam& np : params.named()) {
    if (np.group != kGroupLayers) continue;
    const CheckpointTensor* src = ckpt.find(np.name);
    if (!src) throw DataError("checkpoint missing layer tensor " + np.name);
    if (src->shape != np.tensor.shape()) {
      throw DataError("layer tensor " + np.name +
                      " shape mismatch; checkpoint was built with different "
                      "model dims");
    }
    np.tensor.data() = src->data;
  }
}

Tensor embed(const TripleSequence& seq, ModelParams& params) {
  for (TokenId t : seq.tokens) {
    if (t < 0 || static_cast<size_t>(t) >= params.dims.vocab) {
      throw DataError("embed: token " + std::to_string(t) +
                      " outside embedding table");
    }
  }
  Tensor base = gather_rows(params.embeddings, seq.tokens);
  if (seq.injected.empty()) return base;

  std::vector<size_t> positions;
  std::vector<Tensor> rows;
  for (const auto& [pos, feat] : seq.injected) {
    const TokenId tok = seq.tokens.at(pos);
    Tensor wmap;
    if (tok == Vocab::kImage) {
      wmap = params.zsl_wmap;
    } else if (tok == Vocab::kQuery) {
      wmap = params.qa_wmap;
    } else {
      throw DataError("injected feature at a non-feature token position");
    }
    if (!wmap.defined()) {
      throw DataError("feature projection not initialised for this task");
    }
    if (wmap.rows() != feat.size()) {
      throw ShapeError("injected feature dim " + std::to_string(feat.size()) +
                       " does not match projection rows " +
                       std::to_string(wmap.rows()));
    }
    Tensor f = Tensor::from_data({1, feat.size()}, feat);
    positions.push_back(pos);
    rows.push_back(matmul(f, wmap));
  }
  return replace_rows(base, positions, rows);
}

Tensor attention(const Tensor& h, const std::vector<uint8_t>& matrix,
                 const LayerParams& layer, size_t heads, ForwardTrace* trace) {
  const size_t n = h.rows();
  const size_t d = h.cols();
  if (matrix.size() != n * n) {
    throw ShapeError("attention: matrix size does not match sequence length");
  }
  const size_t dk = d / heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  // (QK^T .* M)/sqrt(dk) + (1-M)*fill, via two constant tensors.
  std::vector<double> scale_data(n * n), fill_data(n * n);
  for (size_t i = 0; i < n * n; ++i) {
    scale_data[i] = matrix[i] ? inv_sqrt_dk : 0.0;
    fill_data[i] = matrix[i] ? 0.0 : kMaskFill;
  }
  Tensor gate = Tensor::from_data({n, n}, std::move(scale_data));
  Tensor fill = Tensor::from_data({n, n}, std::move(fill_data));

  Tensor q = matmul(h, layer.wq);
  Tensor k = matmul(h, layer.wk);
  Tensor v = matmul(h, layer.wv);

  std::vector<Tensor> head_out;
  for (size_t hd = 0; hd < heads; ++hd) {
    Tensor qh = slice_cols(q, hd * dk, dk);
    Tensor kh = slice_cols(k, hd * dk, dk);
    Tensor vh = slice_cols(v, hd * dk, dk);
    Tensor scores = add(mul(matmul(qh, transpose(kh)), gate), fill);
    Tensor probs = row_softmax(scores);
    if (trace) {
      trace->n = n;
      trace->probs.push_back(probs.data());
    }
    head_out.push_back(matmul(probs, vh));
  }
  Tensor merged = heads == 1 ? head_out[0] : concat_cols(head_out);
  return matmul(merged, layer.wo);
}

Tensor forward(const TripleSequence& seq, ModelParams& params,
               ForwardTrace* trace, Rng* dropout_rng) {
  if (!seq.matrix_built()) {
    throw ShapeError("forward: sequence matrix not built");
  }
  Tensor h = embed(seq, params);
  const double rate = params.dims.dropout;
  for (const LayerParams& layer : params.layers) {
    Tensor a = attention(h, seq.matrix, layer, params.dims.heads, trace);
    if (rate > 0.0 && dropout_rng) a = dropout(a, rate, *dropout_rng);
    h = layer_norm(add(h, a), layer.ln1_gamma, layer.ln1_beta);
    Tensor f = apply_linear(relu(apply_linear(h, {layer.ffn_w1, layer.ffn_b1})),
                            {layer.ffn_w2, layer.ffn_b2});
    if (rate > 0.0 && dropout_rng) f = dropout(f, rate, *dropout_rng);
    h = layer_norm(add(h, f), layer.ln2_gamma, layer.ln2_beta);
  }
  return h;
}

size_t segment_begin_position(const TripleSequence& seq, size_t segment) {
  if (segment >= seq.segments.size()) {
    throw DataError("segment index out of range");
  }
  return seq.segments[segment].begin;
}

size_t unique_token_position(const TripleSequence& seq, TokenId token) {
  size_t found = seq.tokens.size();
  for (size_t i = 0; i < seq.tokens.size(); ++i) {
    if (seq.tokens[i] == token) {
      if (found != seq.tokens.size()) {
        throw DataError("token occurs more than once in sequence");
      }
      found = i;
    }
  }
  if (found == seq.tokens.size()) {
    throw DataError("token absent from sequence");
  }
  return found;
}

Tensor extract_row(const Tensor& hidden, size_t position) {
  if (position >= hidden.rows()) {
    throw ShapeError("extract_row: position out of range");
  }
  return gather_rows(hidden, {static_cast<int32_t>(position)});
}

}  // namespace kgt
