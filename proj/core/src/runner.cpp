#include "kgt/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "kgt/errors.hpp"
#include "kgt/version.hpp"

namespace kgt {

namespace {

namespace fs = std::filesystem;

std::string prepare_out_dir(const RunConfig& config) {
  if (config.out_dir.empty()) {
    throw ConfigError("paths.out_dir is required for this command");
  }
  fs::create_directories(config.out_dir);
  return config.out_dir;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

std::string write_manifest(const RunConfig& config, const std::string& dir) {
  std::ostringstream os;
  os << "[manifest]\n";
  os << "version = " << kVersion << "\n";
  os << "config_hash = " << config_hash(config) << "\n";
  os << "seed = " << config.seed << "\n\n";
  os << serialize_config(config);
  const std::string path = dir + "/manifest.txt";
  write_file(path, os.str());
  return path;
}

KnowledgeGraph load_graph_or_throw(const RunConfig& config) {
  if (config.graph.empty()) {
    throw ConfigError("paths.graph is required for this command");
  }
  return load_triples(config.graph);
}

void check_checkpoint_dims(const Checkpoint& ckpt, const RunConfig& config) {
  auto want = [&](const char* key, size_t value) {
    auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) return;
    if (std::stoull(it->second) != value) {
      throw DataError(std::string("checkpoint ") + key + "=" + it->second +
                      " does not match configured " + std::to_string(value));
    }
  };
  want("d", config.d);
  want("heads", config.heads);
  want("layers", config.layers);
}

ModelDims dims_from(const RunConfig& config, const Vocab& vocab) {
  ModelDims dims;
  dims.d = config.d;
  dims.heads = config.heads;
  dims.layers = config.layers;
  dims.vocab = vocab.size();
  dims.n_relations = vocab.n_relations;
  dims.dropout = config.dropout;
  return dims;
}

std::string save_model(const std::string& dir, const ModelParams& params,
                       int64_t step, const std::string& rng_state,
                       std::map<std::string, std::string> meta) {
  const std::string path = dir + "/checkpoint.kgt";
  save_checkpoint(path, to_checkpoint(params, step, rng_state,
                                      std::move(meta)));
  return path;
}

}  // namespace

PretrainOutputs run_pretrain(const RunConfig& config) {
  validate(config);
  if (config.task != TaskName::Pretrain) {
    throw ConfigError("run.task must be 'pretrain' for the pretrain command");
  }
  const std::string dir = prepare_out_dir(config);
  KnowledgeGraph g = load_graph_or_throw(config);
  const Vocab vocab(g);

  Rng init_rng(derive_seed(config.seed, 0x1417));
  ModelParams params = init_model(dims_from(config, vocab), init_rng);

  std::map<std::string, std::string> meta = {
      {"task", "pretrain"}, {"config_hash", config_hash(config)}};
  auto sink = [&](int64_t step, const ModelParams& p) {
    save_model(dir, p, step, init_rng.state(), meta);
  };
  std::vector<LossRow> rows = pretrain_loop(g, vocab, params, config, sink);

  PretrainOutputs out;
  out.rows = std::move(rows);
  out.loss_csv_path = dir + "/loss.csv";
  write_file(out.loss_csv_path, loss_csv(out.rows));
  out.checkpoint_path = dir + "/checkpoint.kgt";
  out.manifest_path = write_manifest(config, dir);
  g.write_vocab_tsv(dir + "/vocab.tsv");
  return out;
}

namespace {

struct TaskData {
  std::vector<TcExample> tc_train, tc_test;
  std::vector<ZslExample> zsl_train, zsl_test;
  std::vector<QaExample> qa_train, qa_test;
  FeatureFile features;
  std::vector<EntityId> seen_classes, unseen_classes;
};

TaskData load_task_data(const RunConfig& config, const KnowledgeGraph& g,
                        bool need_train) {
  TaskData data;
  const bool need_features =
      config.task == TaskName::ZSL || config.task == TaskName::QA;
  if (need_features) {
    if (config.features.empty()) {
      throw ConfigError("paths.features is required for zsl/qa");
    }
    data.features = load_features(config.features);
  }
  if (need_train && config.train.empty()) {
    throw ConfigError("paths.train is required for tuning");
  }
  if (config.test.empty()) {
    throw ConfigError("paths.test is required");
  }
  switch (config.task) {
    case TaskName::TC:
      if (need_train) data.tc_train = load_tc_examples(config.train, g);
      data.tc_test = load_tc_examples(config.test, g);
      break;
    case TaskName::ZSL: {
      if (config.train.empty()) {
        throw ConfigError("paths.train is required for zsl (class split)");
      }
      data.zsl_train = load_zsl_examples(config.train, g);
      data.zsl_test = load_zsl_examples(config.test, g);
      std::set<EntityId> seen;
      for (const ZslExample& ex : data.zsl_train) seen.insert(ex.cls);
      std::set<EntityId> unseen;
      for (const ZslExample& ex : data.zsl_test) {
        if (!seen.count(ex.cls)) unseen.insert(ex.cls);
      }
      data.seen_classes.assign(seen.begin(), seen.end());
      data.unseen_classes.assign(unseen.begin(), unseen.end());
      break;
    }
    case TaskName::QA:
      if (need_train) data.qa_train = load_qa_examples(config.train, g);
      data.qa_test = load_qa_examples(config.test, g);
      break;
    case TaskName::Pretrain:
      throw ConfigError("run.task must name a task (tc, zsl, qa)");
  }
  return data;
}

size_t external_dim(const RunConfig& config, const TaskData& data) {
  if (config.task == TaskName::ZSL || config.task == TaskName::QA) {
    return data.features.dim;
  }
  return 0;
}

TaskKind kind_of(TaskName task) {
  switch (task) {
    case TaskName::TC: return TaskKind::TripleClassification;
    case TaskName::ZSL: return TaskKind::ZeroShot;
    case TaskName::QA: return TaskKind::QuestionAnswering;
    case TaskName::Pretrain: break;
  }
  throw ConfigError("not a task");
}

std::vector<MetricRow> evaluate_task(const RunConfig& config,
                                     const TaskData& data,
                                     const KnowledgeGraph& g,
                                     const Vocab& vocab, ModelParams& params) {
  std::vector<MetricRow> rows;
  switch (config.task) {
    case TaskName::TC: {
      ConfusionMetrics m = tc_evaluate(data.tc_test, g, vocab, params,
                                       config.k, config.seed);
      rows = {{"tc", "accuracy", m.accuracy},
              {"tc", "precision", m.precision},
              {"tc", "recall", m.recall},
              {"tc", "f1", m.f1}};
      break;
    }
    case TaskName::ZSL: {
      ZslMetrics m = zsl_evaluate(data.zsl_test, data.seen_classes,
                                  data.unseen_classes, data.features, g,
                                  vocab, params, config.k, config.seed);
      rows = {{"zsl", "t1", m.t1},
              {"zsl", "s", m.s},
              {"zsl", "u", m.u},
              {"zsl", "h", m.h}};
      break;
    }
    case TaskName::QA: {
      const double acc = qa_evaluate(data.qa_test, data.features, g, vocab,
                                     params, config.k, config.seed);
      rows = {{"qa", "accuracy", acc}};
      break;
    }
    case TaskName::Pretrain:
      throw ConfigError("not a task");
  }
  return rows;
}

}  // namespace

TuneOutputs run_tune(const RunConfig& config) {
  validate(config);
  if (config.task == TaskName::Pretrain) {
    throw ConfigError("run.task must be tc, zsl or qa for the tune command");
  }
  const std::string dir = prepare_out_dir(config);
  KnowledgeGraph g = load_graph_or_throw(config);
  const Vocab vocab(g);
  TaskData data = load_task_data(config, g, /*need_train=*/true);

  Rng init_rng(derive_seed(config.seed, 0x7e4e));
  ModelParams params = init_model(dims_from(config, vocab), init_rng);
  init_task_head(params, kind_of(config.task), external_dim(config, data),
                 init_rng);

  if (config.mode != TuneMode::Scratch) {
    if (config.checkpoint.empty()) {
      throw ConfigError("paths.checkpoint is required unless mode=scratch");
    }
    Checkpoint ckpt = load_checkpoint(config.checkpoint);
    check_checkpoint_dims(ckpt, config);
    transplant_layers(params, ckpt);
  }

  // Fit the fresh embedding table to the transferred stack; the stack stays
  // frozen except in scratch mode, where everything trains.
  if (config.mode == TuneMode::Scratch) {
    set_frozen(params, {});
  } else {
    set_frozen(params, {kGroupLayers});
  }
  RunConfig continual = config;
  continual.epochs = std::max<size_t>(1, config.continual_epochs);
  continual.total_steps = 0;
  TuneOutputs out;
  out.continual_rows = pretrain_loop(g, vocab, params, continual);

  // Task tuning: only scratch and finetune update the stack.
  if (config.mode == TuneMode::Frozen) {
    set_frozen(params, {kGroupLayers});
  } else {
    set_frozen(params, {});
  }
  switch (config.task) {
    case TaskName::TC: {
      std::vector<TcExample> positives;
      for (const TcExample& ex : data.tc_train) {
        if (ex.label == 1) positives.push_back(ex);
      }
      out.tune_rows = tune_tc(positives, g, vocab, params, config);
      break;
    }
    case TaskName::ZSL:
      out.tune_rows = tune_zsl(data.zsl_train, data.seen_classes,
                               data.features, g, vocab, params, config);
      break;
    case TaskName::QA:
      out.tune_rows = tune_qa(data.qa_train, data.features, g, vocab, params,
                              config);
      break;
    case TaskName::Pretrain:
      break;
  }

  out.metrics = evaluate_task(config, data, g, vocab, params);

  write_file(dir + "/continual_loss.csv", loss_csv(out.continual_rows));
  write_file(dir + "/tune_loss.csv", tune_csv(out.tune_rows));
  out.metrics_csv_path = dir + "/metrics.csv";
  write_file(out.metrics_csv_path, metrics_csv(out.metrics));
  write_file(dir + "/metrics.txt", metrics_summary(out.metrics));
  std::map<std::string, std::string> meta = {
      {"task", to_string(config.task)},
      {"mode", to_string(config.mode)},
      {"d_ext", std::to_string(external_dim(config, data))},
      {"config_hash", config_hash(config)}};
  out.checkpoint_path = save_model(
      dir, params, static_cast<int64_t>(out.tune_rows.size()),
      init_rng.state(), meta);
  write_manifest(config, dir);
  return out;
}

EvalOutputs run_eval(const RunConfig& config) {
  validate(config);
  if (config.task == TaskName::Pretrain) {
    throw ConfigError("run.task must be tc, zsl or qa for the eval command");
  }
  if (config.checkpoint.empty()) {
    throw ConfigError("paths.checkpoint is required for eval");
  }
  const std::string dir = prepare_out_dir(config);
  KnowledgeGraph g = load_graph_or_throw(config);
  const Vocab vocab(g);
  TaskData data = load_task_data(config, g, /*need_train=*/false);

  Checkpoint ckpt = load_checkpoint(config.checkpoint);
  check_checkpoint_dims(ckpt, config);
  Rng init_rng(derive_seed(config.seed, 0xe5a0));
  ModelParams params = init_model(dims_from(config, vocab), init_rng);
  init_task_head(params, kind_of(config.task), external_dim(config, data),
                 init_rng);
  load_params(params, ckpt);

  EvalOutputs out;
  out.metrics = evaluate_task(config, data, g, vocab, params);
  out.report_csv = metrics_csv(out.metrics);
  out.report_text = metrics_summary(out.metrics);
  out.metrics_csv_path = dir + "/metrics.csv";
  write_file(out.metrics_csv_path, out.report_csv);
  write_file(dir + "/metrics.txt", out.report_text);
  write_manifest(config, dir);
  return out;
}

std::string run_stats(const RunConfig& config) {
  KnowledgeGraph g = load_graph_or_throw(config);
  const GraphStats s = g.stats();
  std::ostringstream os;
  char buf[64];
  os << "entities   " << s.n_entities << "\n";
  os << "relations  " << s.n_relations << "\n";
  os << "triples    " << s.n_triples << "\n";
  std::snprintf(buf, sizeof(buf), "%.6f", s.std_rel);
  os << "std_rel    " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6f", s.std_ent);
  os << "std_ent    " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6g", s.density);
  os << "density    " << buf << "\n";
  if (!config.out_dir.empty()) {
    const std::string dir = prepare_out_dir(config);
    g.write_vocab_tsv(dir + "/vocab.tsv");
    std::vector<MetricRow> rows = {
        {"stats", "entities", static_cast<double>(s.n_entities)},
        {"stats", "relations", static_cast<double>(s.n_relations)},
        {"stats", "triples", static_cast<double>(s.n_triples)},
        {"stats", "std_rel", s.std_rel},
        {"stats", "std_ent", s.std_ent},
        {"stats", "density", s.density}};
    write_file(dir + "/stats.csv", metrics_csv(rows));
  }
  return os.str();
}

std::string run_dump_sequence(const RunConfig& config,
                              const DumpOptions& options) {
  KnowledgeGraph g = load_graph_or_throw(config);
  const Vocab vocab(g);
  EntityId e;
  if (auto found = g.find_entity(options.entity)) {
    e = *found;
  } else {
    try {
      e = static_cast<EntityId>(std::stol(options.entity));
    } catch (const std::exception&) {
      throw DataError("unknown entity: " + options.entity);
    }
    if (e < 0 || static_cast<size_t>(e) >= g.entity_count()) {
      throw DataError("unknown entity: " + options.entity);
    }
  }
  Rng rng(config.seed);
  std::optional<SubGraph> sg;
  if (options.strategy == "walk") {
    sg = random_walk_sample(g, e, config.k, rng);
  } else if (options.strategy == "centered") {
    sg = entity_centered_sample(g, e, config.k, rng);
  } else {
    throw ConfigError("strategy must be 'walk' or 'centered'");
  }
  if (!sg) throw DataError("entity has no incident triples");
  TripleSequence seq = serialize(*sg, vocab);
  build_matrix(seq);
  if (options.mask == "mem") {
    apply_mask(seq, MaskKind::MEM, config.mask_rate, rng);
  } else if (options.mask == "mrm") {
    apply_mask(seq, MaskKind::MRM, config.mask_rate, rng);
  } else if (!options.mask.empty()) {
    throw ConfigError("mask must be 'mem' or 'mrm'");
  }
  return dump_grid(seq, vocab, &g);
}

}  // namespace kgt
