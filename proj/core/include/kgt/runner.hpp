#pragma once

#include <string>
#include <vector>

#include "kgt/config.hpp"
#include "kgt/metrics.hpp"
#include "kgt/pretrain.hpp"
#include "kgt/tasks.hpp"

namespace kgt {

// Command implementations behind the CLI, exposed so tests can drive whole
// runs in-process. Every run writes a manifest (version, config hash, seed,
// full config) next to its outputs.

struct PretrainOutputs {
  std::string checkpoint_path;
  std::string loss_csv_path;
  std::string manifest_path;
  std::vector<LossRow> rows;
};

PretrainOutputs run_pretrain(const RunConfig& config);

struct TuneOutputs {
  std::string checkpoint_path;
  std::string metrics_csv_path;
  std::vector<MetricRow> metrics;
  std::vector<LossRow> continual_rows;
  std::vector<TuneRow> tune_rows;
};

TuneOutputs run_tune(const RunConfig& config);

struct EvalOutputs {
  std::string metrics_csv_path;
  std::vector<MetricRow> metrics;
  std::string report_csv;
  std::string report_text;
};

EvalOutputs run_eval(const RunConfig& config);

// GraphStats report; also writes vocab.tsv and stats.csv when out_dir is set.
std::string run_stats(const RunConfig& config);

struct DumpOptions {
  std::string entity;              // label, or decimal id when not a label
  std::string strategy = "centered";  // "centered" or "walk"
  std::string mask;                // "", "mem" or "mrm"
};

std::string run_dump_sequence(const RunConfig& config,
                              const DumpOptions& options);

}  // namespace kgt
