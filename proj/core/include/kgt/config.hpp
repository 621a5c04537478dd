#pragma once

#include <cstdint>
#include <string>

namespace kgt {

enum class TuneMode { Frozen, Finetune, Scratch };
enum class TaskName { Pretrain, TC, ZSL, QA };

std::string to_string(TuneMode m);
std::string to_string(TaskName t);
TuneMode tune_mode_from_string(const std::string& s);
TaskName task_from_string(const std::string& s);

// Flat key=value run configuration grouped into sections. Defaults follow
// the reference training recipe (768-dim, 12 heads, 4 layers, 126-triple
// sub-graphs, Adam at 1e-4, batch 4, 15% masking, 2 negatives, balanced
// pair sampling).
struct RunConfig {
  // [model]
  size_t d = 768;
  size_t heads = 12;
  size_t layers = 4;
  double dropout = 0.0;

  // [sampler]
  size_t k = 126;

  // [pretrain]
  double mask_rate = 0.15;
  size_t mem_negatives = 2;
  double epm_positive_prob = 0.5;
  size_t epochs = 10;
  size_t batch = 4;
  bool use_mem = true;
  bool use_mrm = true;
  bool use_epm = true;
  bool use_matrix = true;
  size_t checkpoint_every = 1000;

  // [optim]
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t warmup_steps = 0;  // 0 = max(1, total/10)
  int64_t total_steps = 0;   // 0 = epochs * steps per epoch
  size_t grad_accum = 1;

  // [tune]
  TuneMode mode = TuneMode::Frozen;
  size_t continual_epochs = 1;
  size_t task_epochs = 3;
  size_t task_batch = 16;
  double task_lr = 0.0;  // 0 = lr
  size_t tc_negatives = 10;
  size_t zsl_negatives = 4;

  // [run]
  TaskName task = TaskName::Pretrain;
  uint64_t seed = 42;

  // [paths]
  std::string graph;
  std::string train;
  std::string valid;
  std::string test;
  std::string features;
  std::string checkpoint;
  std::string out_dir;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string serialize_config(const RunConfig& c);
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// "section.key=value" or "key=value" when the key is unambiguous.
void apply_override(RunConfig& c, const std::string& assignment);

// Throws ConfigError naming every offending field.
void validate(const RunConfig& c);

// FNV-1a of the serialized form, hex.
std::string config_hash(const RunConfig& c);

}  // namespace kgt
