#include "kgt/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "kgt/errors.hpp"
#include "kgt/optim.hpp"
#include "kgt/sampler.hpp"

namespace kgt {

const std::vector<double>& FeatureFile::get(const std::string& id) const {
  auto it = index.find(id);
  if (it == index.end()) throw DataError("feature id not found: " + id);
  return vectors[it->second];
}

FeatureFile load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty feature file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("dim=", 0) != 0) {
    throw DataError(path + ":1: expected 'dim=<n>' header");
  }
  FeatureFile f;
  f.dim = static_cast<size_t>(std::stoul(line.substr(4)));
  if (f.dim == 0) throw DataError(path + ":1: dim must be positive");
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected id<TAB>values");
    }
    const std::string id = line.substr(0, tab);
    if (f.index.count(id)) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": duplicate feature id " + id);
    }
    std::vector<double> values;
    values.reserve(f.dim);
    std::stringstream vs(line.substr(tab + 1));
    std::string item;
    while (std::getline(vs, item, ',')) {
      try {
        values.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": bad number '" + item + "'");
      }
    }
    if (values.size() != f.dim) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(f.dim) + " values, got " +
                      std::to_string(values.size()));
    }
    f.index.emplace(id, f.ids.size());
    f.ids.push_back(id);
    f.vectors.push_back(std::move(values));
  }
  return f;
}

void save_features(const std::string& path, const FeatureFile& f) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open feature file for writing: " + path);
  out << "dim=" << f.dim << "\n";
  char buf[64];
  for (size_t i = 0; i < f.ids.size(); ++i) {
    out << f.ids[i] << "\t";
    for (size_t j = 0; j < f.vectors[i].size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", f.vectors[i][j]);
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t begin = 0;
  while (true) {
    const size_t tab = line.find('\t', begin);
    if (tab == std::string::npos) {
      out.push_back(line.substr(begin));
      return out;
    }
    out.push_back(line.substr(begin, tab - begin));
    begin = tab + 1;
  }
}

int parse_label(const std::string& path, size_t line_no, const std::string& s) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw DataError(path + ":" + std::to_string(line_no) +
                  ": label must be 0 or 1, got '" + s + "'");
}

template <typename Fn>
void for_each_tsv_row(const std::string& path, size_t n_fields, Fn fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open task file: " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != n_fields) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(n_fields) + " tab-separated fields");
    }
    fn(line_no, fields);
  }
}

EntityId require_entity(const KnowledgeGraph& g, const std::string& path,
                        size_t line_no, const std::string& label) {
  auto e = g.find_entity(label);
  if (!e) {
    throw DataError(path + ":" + std::to_string(line_no) +
                    ": unknown entity '" + label + "'");
  }
  return *e;
}

}  // namespace

std::vector<TcExample> load_tc_examples(const std::string& path,
                                        const KnowledgeGraph& g) {
  std::vector<TcExample> out;
  for_each_tsv_row(path, 4, [&](size_t line_no,
                                const std::vector<std::string>& f) {
    TcExample ex;
    ex.head = require_entity(g, path, line_no, f[0]);
    auto r = g.find_relation(f[1]);
    if (!r) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": unknown relation '" + f[1] + "'");
    }
    ex.rel = *r;
    ex.tail = require_entity(g, path, line_no, f[2]);
    ex.label = parse_label(path, line_no, f[3]);
    out.push_back(ex);
  });
  if (out.empty()) throw DataError("no examples in " + path);
  return out;
}

std::vector<ZslExample> load_zsl_examples(const std::string& path,
                                          const KnowledgeGraph& g) {
  std::vector<ZslExample> out;
  for_each_tsv_row(path, 3, [&](size_t line_no,
                                const std::vector<std::string>& f) {
    ZslExample ex;
    ex.image_id = f[0];
    ex.cls = require_entity(g, path, line_no, f[1]);
    ex.label = parse_label(path, line_no, f[2]);
    out.push_back(ex);
  });
  if (out.empty()) throw DataError("no examples in " + path);
  return out;
}

std::vector<QaExample> load_qa_examples(const std::string& path,
                                        const KnowledgeGraph& g) {
  std::vector<QaExample> out;
  for_each_tsv_row(path, 4, [&](size_t line_no,
                                const std::vector<std::string>& f) {
    QaExample ex;
    ex.group_id = f[0];
    ex.qc_id = f[1];
    if (!f[2].empty()) {
      std::stringstream ks(f[2]);
      std::string kw;
      while (std::getline(ks, kw, ',')) {
        ex.keywords.push_back(require_entity(g, path, line_no, kw));
      }
    }
    ex.label = parse_label(path, line_no, f[3]);
    out.push_back(ex);
  });
  if (out.empty()) throw DataError("no examples in " + path);
  return out;
}

// ---------------------------------------------------------------------------
// forward scores
// ---------------------------------------------------------------------------

Tensor tc_logits(const TcExample& ex, const KnowledgeGraph& g,
                 const Vocab& vocab, ModelParams& params, size_t k, Rng& rng) {
  auto gh = entity_centered_sample(g, ex.head, k, rng);
  auto gt = entity_centered_sample(g, ex.tail, k, rng);
  if (!gh && !gt) {
    throw DataError("tc: both head and tail are isolated entities");
  }
  TripleSequence seq;
  if (gh && gt) {
    seq = concat_graph_sequences(serialize(*gh, vocab), serialize(*gt, vocab));
  } else {
    seq = serialize(gh ? *gh : *gt, vocab);
  }
  build_matrix(seq);
  const std::array<TokenId, 4> prompt = {
      Vocab::kTask, vocab.entity_token(ex.head), vocab.relation_token(ex.rel),
      vocab.entity_token(ex.tail)};
  append_prompt(seq, TaskKind::TripleClassification, prompt,
                {vocab.entity_token(ex.head), vocab.relation_token(ex.rel),
                 vocab.entity_token(ex.tail)},
                vocab);
  Tensor hidden = forward(seq, params);
  Tensor s_b = extract_row(hidden, 0);
  Tensor s_t = extract_row(hidden, seq.segments.back().begin);
  if (!params.tc_out.defined()) {
    throw ConfigError("tc head not initialised");
  }
  return apply_linear(concat_cols(s_b, s_t), params.tc_out);
}

Tensor zsl_score(const std::vector<double>& image_vec, EntityId cls,
                 const KnowledgeGraph& g, const Vocab& vocab,
                 ModelParams& params, size_t k, Rng& rng) {
  auto gc = entity_centered_sample(g, cls, k, rng);
  if (!gc) throw DataError("zsl: class entity has no triples");
  TripleSequence seq = serialize(*gc, vocab);
  build_matrix(seq);
  const std::array<TokenId, 4> prompt = {Vocab::kTask,
                                         vocab.entity_token(cls), Vocab::kMask,
                                         Vocab::kImage};
  append_prompt(seq, TaskKind::ZeroShot, prompt, {vocab.entity_token(cls)},
                vocab);
  const size_t v_pos = seq.segments.back().begin + 3;
  seq.injected[v_pos] = image_vec;
  Tensor hidden = forward(seq, params);
  Tensor s_b = extract_row(hidden, 0);
  Tensor s_v = extract_row(hidden, v_pos);
  if (!params.zsl_proj_b.defined() || !params.zsl_proj_v.defined()) {
    throw ConfigError("zsl head not initialised");
  }
  return cosine_similarity(apply_linear(s_b, params.zsl_proj_b),
                           apply_linear(s_v, params.zsl_proj_v));
}

SubGraph keyword_subgraph(const KnowledgeGraph& g,
                          const std::vector<EntityId>& keywords, size_t k,
                          Rng& rng) {
  std::vector<int32_t> pool;
  for (EntityId kw : keywords) {
    const auto inc = g.neighbor_indices(kw);
    pool.insert(pool.end(), inc.begin(), inc.end());
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  if (pool.empty()) {
    // Keywords touch nothing; fall back to uniform evidence.
    for (size_t i = 0; i < g.triple_count(); ++i) {
      pool.push_back(static_cast<int32_t>(i));
    }
  }
  std::vector<int32_t> chosen =
      pool.size() > k ? rng.sample_without_replacement(pool, k) : pool;
  SubGraph sg;
  sg.center = keywords.empty() ? g.triple(chosen[0]).head : keywords[0];
  for (int32_t idx : chosen) sg.triples.push_back(g.triple(idx));
  return sg;
}

Tensor qa_logits(const std::vector<double>& qc_vec,
                 const std::vector<EntityId>& keywords,
                 const KnowledgeGraph& g, const Vocab& vocab,
                 ModelParams& params, size_t k, Rng& rng) {
  SubGraph sg = keyword_subgraph(g, keywords, k, rng);
  TripleSequence seq = serialize(sg, vocab);
  build_matrix(seq);
  std::vector<TokenId> keys;
  for (EntityId kw : keywords) keys.push_back(vocab.entity_token(kw));
  const std::array<TokenId, 4> prompt = {Vocab::kTask, Vocab::kMask,
                                         Vocab::kMask, Vocab::kQuery};
  append_prompt(seq, TaskKind::QuestionAnswering, prompt, keys, vocab);
  const size_t q_pos = seq.segments.back().begin + 3;
  seq.injected[q_pos] = qc_vec;
  Tensor hidden = forward(seq, params);
  Tensor s_b = extract_row(hidden, 0);
  Tensor s_q = extract_row(hidden, q_pos);
  if (!params.qa_out.defined()) throw ConfigError("qa head not initialised");
  Tensor raw = Tensor::from_data({1, qc_vec.size()}, qc_vec);
  return apply_linear(concat_cols({s_b, s_q, raw}), params.qa_out);
}

// ---------------------------------------------------------------------------
// tuning
// ---------------------------------------------------------------------------

std::string tune_csv(const std::vector<TuneRow>& rows) {
  std::ostringstream os;
  os << "step,lr,loss\n";
  char buf[64];
  for (const TuneRow& r : rows) {
    os << r.step << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.lr);
    os << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.loss);
    os << buf << "\n";
  }
  return os.str();
}

namespace {

std::vector<Tensor> trainable_for_task(ModelParams& params, TaskName task) {
  std::vector<Tensor> out = params.group_tensors(kGroupEmbeddings);
  for (Tensor& t : params.group_tensors(kGroupLayers)) out.push_back(t);
  switch (task) {
    case TaskName::TC:
      out.push_back(params.tc_out.w);
      out.push_back(params.tc_out.b);
      break;
    case TaskName::ZSL:
      out.push_back(params.zsl_proj_b.w);
      out.push_back(params.zsl_proj_b.b);
      out.push_back(params.zsl_proj_v.w);
      out.push_back(params.zsl_proj_v.b);
      out.push_back(params.zsl_wmap);
      break;
    case TaskName::QA:
      out.push_back(params.qa_out.w);
      out.push_back(params.qa_out.b);
      out.push_back(params.qa_wmap);
      break;
    case TaskName::Pretrain:
      break;
  }
  return out;
}

double task_lr_of(const RunConfig& c) {
  return c.task_lr > 0.0 ? c.task_lr : c.lr;
}

void check_finite(double v, const char* what, int64_t step) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(what) + ": non-finite loss at step " +
                       std::to_string(step));
  }
}

}  // namespace

std::vector<TuneRow> tune_tc(const std::vector<TcExample>& positives,
                             const KnowledgeGraph& g, const Vocab& vocab,
                             ModelParams& params, const RunConfig& config) {
  if (positives.empty()) throw DataError("tune_tc: no training positives");
  // Known-true set: graph triples plus the training positives.
  std::set<Triple> known;
  for (const Triple& t : g.triples()) known.insert(t);
  for (const TcExample& ex : positives) {
    known.insert({ex.head, ex.rel, ex.tail});
  }

  Adam adam(trainable_for_task(params, TaskName::TC),
            {config.beta1, config.beta2, config.eps});
  const double lr = task_lr_of(config);
  std::vector<TuneRow> rows;
  int64_t step = 0;

  for (size_t epoch = 0; epoch < config.task_epochs; ++epoch) {
    std::vector<size_t> order(positives.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng epoch_rng(derive_seed(config.seed, 0x7c, epoch));
    epoch_rng.shuffle(order);

    std::vector<TcExample> stream;
    for (size_t idx : order) {
      const TcExample& pos = positives[idx];
      stream.push_back(pos);
      for (size_t n = 0; n < config.tc_negatives; ++n) {
        TcExample neg = pos;
        neg.label = 0;
        for (int tries = 0; tries < 64; ++tries) {
          const EntityId cand =
              static_cast<EntityId>(epoch_rng.index(g.entity_count()));
          if (epoch_rng.coin(0.5)) {
            neg.head = cand;
            neg.tail = pos.tail;
          } else {
            neg.head = pos.head;
            neg.tail = cand;
          }
          if (!known.count({neg.head, neg.rel, neg.tail})) break;
        }
        stream.push_back(neg);
      }
    }

    for (size_t start = 0; start < stream.size();
         start += config.task_batch) {
      const size_t end = std::min(stream.size(), start + config.task_batch);
      ++step;
      Rng sample_rng(derive_seed(config.seed, 0x7c5a, epoch, start));
      Tensor loss = Tensor::zeros({1, 1});
      for (size_t i = start; i < end; ++i) {
        Tensor logits =
            tc_logits(stream[i], g, vocab, params, config.k, sample_rng);
        loss = add(loss, cross_entropy_logits(
                             logits, static_cast<size_t>(stream[i].label)));
      }
      check_finite(loss.item(), "tune_tc", step);
      loss.backward();
      adam.step(lr);
      rows.push_back({step, lr, loss.item()});
    }
  }
  return rows;
}

std::vector<TuneRow> tune_zsl(const std::vector<ZslExample>& train,
                              const std::vector<EntityId>& seen_classes,
                              const FeatureFile& features,
                              const KnowledgeGraph& g, const Vocab& vocab,
                              ModelParams& params, const RunConfig& config) {
  if (train.empty()) throw DataError("tune_zsl: no training examples");
  if (seen_classes.empty()) throw DataError("tune_zsl: no seen classes");

  Adam adam(trainable_for_task(params, TaskName::ZSL),
            {config.beta1, config.beta2, config.eps});
  const double lr = task_lr_of(config);
  std::vector<TuneRow> rows;
  int64_t step = 0;

  for (size_t epoch = 0; epoch < config.task_epochs; ++epoch) {
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng epoch_rng(derive_seed(config.seed, 0x251, epoch));
    epoch_rng.shuffle(order);

    std::vector<ZslExample> stream;
    for (size_t idx : order) {
      const ZslExample& pos = train[idx];
      stream.push_back(pos);
      for (size_t n = 0; n < config.zsl_negatives; ++n) {
        ZslExample neg = pos;
        neg.label = 0;
        for (int tries = 0; tries < 64; ++tries) {
          const EntityId cand =
              seen_classes[epoch_rng.index(seen_classes.size())];
          if (cand != pos.cls) {
            neg.cls = cand;
            break;
          }
        }
        stream.push_back(neg);
      }
    }

    for (size_t start = 0; start < stream.size();
         start += config.task_batch) {
      const size_t end = std::min(stream.size(), start + config.task_batch);
      ++step;
      Rng sample_rng(derive_seed(config.seed, 0x251a, epoch, start));
      Tensor loss = Tensor::zeros({1, 1});
      for (size_t i = start; i < end; ++i) {
        const ZslExample& ex = stream[i];
        Tensor score = zsl_score(features.get(ex.image_id), ex.cls, g, vocab,
                                 params, config.k, sample_rng);
        Tensor prob = add_scalar(scale(score, 0.5), 0.5);
        loss = add(loss, bce_probability(prob, ex.label));
      }
      check_finite(loss.item(), "tune_zsl", step);
      loss.backward();
      adam.step(lr);
      rows.push_back({step, lr, loss.item()});
    }
  }
  return rows;
}

std::vector<TuneRow> tune_qa(const std::vector<QaExample>& train,
                             const FeatureFile& features,
                             const KnowledgeGraph& g, const Vocab& vocab,
                             ModelParams& params, const RunConfig& config) {
  if (train.empty()) throw DataError("tune_qa: no training examples");

  Adam adam(trainable_for_task(params, TaskName::QA),
            {config.beta1, config.beta2, config.eps});
  const double lr = task_lr_of(config);
  std::vector<TuneRow> rows;
  int64_t step = 0;
  const size_t micro =
      std::max<size_t>(1, (config.task_batch + config.grad_accum - 1) /
                              config.grad_accum);

  for (size_t epoch = 0; epoch < config.task_epochs; ++epoch) {
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng epoch_rng(derive_seed(config.seed, 0x9a, epoch));
    epoch_rng.shuffle(order);

    for (size_t start = 0; start < order.size();
         start += config.task_batch) {
      const size_t end = std::min(order.size(), start + config.task_batch);
      ++step;
      Rng sample_rng(derive_seed(config.seed, 0x9a5a, epoch, start));
      double batch_loss = 0.0;
      // Micro-batches backward separately; gradients accumulate until the
      // single optimizer step below.
      for (size_t mb = start; mb < end; mb += micro) {
        const size_t mb_end = std::min(end, mb + micro);
        Tensor loss = Tensor::zeros({1, 1});
        for (size_t i = mb; i < mb_end; ++i) {
          const QaExample& ex = train[order[i]];
          Tensor logits = qa_logits(features.get(ex.qc_id), ex.keywords, g,
                                    vocab, params, config.k, sample_rng);
          loss = add(loss, cross_entropy_logits(
                               logits, static_cast<size_t>(ex.label)));
        }
        batch_loss += loss.item();
        loss.backward();
      }
      check_finite(batch_loss, "tune_qa", step);
      adam.step(lr);
      rows.push_back({step, lr, batch_loss});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

ConfusionMetrics tc_evaluate(const std::vector<TcExample>& examples,
                             const KnowledgeGraph& g, const Vocab& vocab,
                             ModelParams& params, size_t k, uint64_t seed) {
  std::vector<int> labels, preds;
  for (size_t i = 0; i < examples.size(); ++i) {
    Rng rng(derive_seed(seed, 0x7ce, i));
    Tensor logits = tc_logits(examples[i], g, vocab, params, k, rng);
    labels.push_back(examples[i].label);
    preds.push_back(logits.at(0, 1) > logits.at(0, 0) ? 1 : 0);
  }
  return confusion_metrics(labels, preds);
}

EntityId zsl_predict(const std::vector<double>& image_vec,
                     const std::vector<EntityId>& candidates,
                     const KnowledgeGraph& g, const Vocab& vocab,
                     ModelParams& params, size_t k, uint64_t seed) {
  if (candidates.empty()) throw DataError("zsl_predict: no candidates");
  std::vector<EntityId> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  EntityId best = sorted[0];
  double best_score = -2.0;
  for (EntityId cls : sorted) {
    Rng rng(derive_seed(seed, 0x251e, static_cast<uint64_t>(cls)));
    const double s =
        zsl_score(image_vec, cls, g, vocab, params, k, rng).item();
    if (s > best_score) {
      best_score = s;
      best = cls;
    }
  }
  return best;
}

ZslMetrics zsl_evaluate(const std::vector<ZslExample>& test,
                        const std::vector<EntityId>& seen_classes,
                        const std::vector<EntityId>& unseen_classes,
                        const FeatureFile& features, const KnowledgeGraph& g,
                        const Vocab& vocab, ModelParams& params, size_t k,
                        uint64_t seed) {
  std::vector<EntityId> all_classes = seen_classes;
  all_classes.insert(all_classes.end(), unseen_classes.begin(),
                     unseen_classes.end());
  std::sort(all_classes.begin(), all_classes.end());

  auto class_slot = [](const std::vector<EntityId>& classes, EntityId c) {
    const auto it = std::find(classes.begin(), classes.end(), c);
    return it == classes.end()
               ? classes.size()
               : static_cast<size_t>(it - classes.begin());
  };

  std::vector<size_t> t1_correct(unseen_classes.size(), 0);
  std::vector<size_t> t1_total(unseen_classes.size(), 0);
  std::vector<size_t> s_correct(seen_classes.size(), 0);
  std::vector<size_t> s_total(seen_classes.size(), 0);
  std::vector<size_t> u_correct(unseen_classes.size(), 0);
  std::vector<size_t> u_total(unseen_classes.size(), 0);

  for (size_t i = 0; i < test.size(); ++i) {
    if (test[i].label != 1) continue;  // only (image, true class) rows
    const std::vector<double>& vec = features.get(test[i].image_id);
    const size_t useen = class_slot(unseen_classes, test[i].cls);
    const size_t sseen = class_slot(seen_classes, test[i].cls);
    const uint64_t ex_seed = derive_seed(seed, 0x251f, i);

    if (useen < unseen_classes.size()) {
      const EntityId p1 = zsl_predict(vec, unseen_classes, g, vocab, params,
                                      k, ex_seed);
      t1_total[useen]++;
      if (p1 == test[i].cls) t1_correct[useen]++;
      const EntityId p2 =
          zsl_predict(vec, all_classes, g, vocab, params, k, ex_seed);
      u_total[useen]++;
      if (p2 == test[i].cls) u_correct[useen]++;
    } else if (sseen < seen_classes.size()) {
      const EntityId p =
          zsl_predict(vec, all_classes, g, vocab, params, k, ex_seed);
      s_total[sseen]++;
      if (p == test[i].cls) s_correct[sseen]++;
    }
  }

  ZslMetrics m;
  m.t1 = class_balanced_accuracy(t1_correct, t1_total);
  m.s = class_balanced_accuracy(s_correct, s_total);
  m.u = class_balanced_accuracy(u_correct, u_total);
  m.h = harmonic_mean(m.s, m.u);
  return m;
}

double qa_evaluate(const std::vector<QaExample>& examples,
                   const FeatureFile& features, const KnowledgeGraph& g,
                   const Vocab& vocab, ModelParams& params, size_t k,
                   uint64_t seed) {
  // Group by id, preserving first-appearance order.
  std::vector<std::string> group_order;
  std::unordered_map<std::string, std::vector<size_t>> groups;
  for (size_t i = 0; i < examples.size(); ++i) {
    auto [it, fresh] = groups.try_emplace(examples[i].group_id);
    if (fresh) group_order.push_back(examples[i].group_id);
    it->second.push_back(i);
  }

  size_t correct = 0;
  for (const std::string& gid : group_order) {
    const std::vector<size_t>& members = groups[gid];
    if (members.size() != 5) {
      throw DataError("qa group " + gid + " must have exactly 5 members");
    }
    int positives = 0;
    for (size_t i : members) positives += examples[i].label;
    if (positives != 1) {
      throw DataError("qa group " + gid + " must have exactly one positive");
    }
    size_t best = members[0];
    double best_score = 0.0;
    bool first = true;
    for (size_t i : members) {
      Rng rng(derive_seed(seed, 0x9ae, i));
      Tensor logits = qa_logits(features.get(examples[i].qc_id),
                                examples[i].keywords, g, vocab, params, k,
                                rng);
      const double s = logits.at(0, 1) - logits.at(0, 0);
      if (first || s > best_score) {
        best = i;
        best_score = s;
        first = false;
      }
    }
    if (examples[best].label == 1) ++correct;
  }
  return group_order.empty()
             ? 0.0
             : static_cast<double>(correct) / group_order.size();
}

}  // namespace kgt
