#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgt/errors.hpp"
#include "kgt/runner.hpp"
#include "kgt/version.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  // Convenience flags mirrored into config keys when set on the command line.
  std::string graph, train, valid, test, features, checkpoint, out_dir;
  std::string task, mode;
  int64_t seed = -1;
  int64_t k = -1;
  std::string use_matrix, use_mem, use_mrm, use_epm;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path,
                  "config file (default: $KGT_CONFIG when set)");
  cmd->add_option("--set", a.overrides,
                  "override a config key, e.g. --set model.d=32")
      ->take_all();
  cmd->add_option("--graph", a.graph, "triple TSV for the (task) KG");
  cmd->add_option("--train", a.train, "training examples TSV");
  cmd->add_option("--valid", a.valid, "validation examples TSV");
  cmd->add_option("--test", a.test, "test examples TSV");
  cmd->add_option("--features", a.features, "external feature TSV");
  cmd->add_option("--checkpoint", a.checkpoint, "input checkpoint");
  cmd->add_option("--out", a.out_dir, "output directory");
  cmd->add_option("--task", a.task, "pretrain|tc|zsl|qa");
  cmd->add_option("--mode", a.mode, "frozen|finetune|scratch");
  cmd->add_option("--seed", a.seed, "random seed");
  cmd->add_option("--k", a.k, "triples per sampled sub-graph");
  cmd->add_option("--use-matrix", a.use_matrix, "true|false");
  cmd->add_option("--use-mem", a.use_mem, "true|false");
  cmd->add_option("--use-mrm", a.use_mrm, "true|false");
  cmd->add_option("--use-epm", a.use_epm, "true|false");
}

kgt::RunConfig build_config(const CommonArgs& a) {
  kgt::RunConfig config;
  std::string path = a.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("KGT_CONFIG")) path = env;
  }
  if (!path.empty()) config = kgt::load_config(path);

  auto set_if = [&config](const std::string& key, const std::string& value) {
    if (!value.empty()) kgt::apply_override(config, key + "=" + value);
  };
  set_if("paths.graph", a.graph);
  set_if("paths.train", a.train);
  set_if("paths.valid", a.valid);
  set_if("paths.test", a.test);
  set_if("paths.features", a.features);
  set_if("paths.checkpoint", a.checkpoint);
  set_if("paths.out_dir", a.out_dir);
  set_if("run.task", a.task);
  set_if("tune.mode", a.mode);
  if (a.seed >= 0) set_if("run.seed", std::to_string(a.seed));
  if (a.k >= 0) set_if("sampler.k", std::to_string(a.k));
  set_if("pretrain.use_matrix", a.use_matrix);
  set_if("pretrain.use_mem", a.use_mem);
  set_if("pretrain.use_mrm", a.use_mrm);
  set_if("pretrain.use_epm", a.use_epm);
  for (const std::string& kv : a.overrides) kgt::apply_override(config, kv);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge-graph transformer: pretraining and prompt tuning"};
  app.set_version_flag("--version", kgt::kVersion);
  app.require_subcommand(1);

  CommonArgs pretrain_args, tune_args, eval_args, stats_args, dump_args;
  kgt::DumpOptions dump_options;

  CLI::App* cmd_pretrain = app.add_subcommand(
      "pretrain", "self-supervised pretraining on a knowledge graph");
  add_common(cmd_pretrain, pretrain_args);

  CLI::App* cmd_tune = app.add_subcommand(
      "tune", "continual training plus prompt tuning for a task");
  add_common(cmd_tune, tune_args);

  CLI::App* cmd_eval =
      app.add_subcommand("eval", "evaluate a checkpoint on a task test set");
  add_common(cmd_eval, eval_args);

  CLI::App* cmd_stats =
      app.add_subcommand("stats", "dataset statistics for a triple file");
  add_common(cmd_stats, stats_args);

  CLI::App* cmd_dump = app.add_subcommand(
      "dump-sequence", "serialize one sub-graph and print its matrix");
  add_common(cmd_dump, dump_args);
  cmd_dump->add_option("--entity", dump_options.entity, "center entity")
      ->required();
  cmd_dump->add_option("--strategy", dump_options.strategy,
                       "centered|walk (default centered)");
  cmd_dump->add_option("--mask", dump_options.mask, "mem|mrm (optional)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_pretrain->parsed()) {
      kgt::PretrainOutputs out = kgt::run_pretrain(build_config(pretrain_args));
      std::cout << "checkpoint: " << out.checkpoint_path << "\n"
                << "loss log:   " << out.loss_csv_path << "\n";
      if (!out.rows.empty()) {
        std::cout << "final loss: " << out.rows.back().total << " after "
                  << out.rows.back().step << " steps\n";
      }
    } else if (cmd_tune->parsed()) {
      kgt::TuneOutputs out = kgt::run_tune(build_config(tune_args));
      std::cout << "checkpoint: " << out.checkpoint_path << "\n";
      std::cout << kgt::metrics_summary(out.metrics);
    } else if (cmd_eval->parsed()) {
      kgt::EvalOutputs out = kgt::run_eval(build_config(eval_args));
      std::cout << out.report_text;
    } else if (cmd_stats->parsed()) {
      std::cout << kgt::run_stats(build_config(stats_args));
    } else if (cmd_dump->parsed()) {
      std::cout << kgt::run_dump_sequence(build_config(dump_args),
                                          dump_options);
    }
  } catch (const kgt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const kgt::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const kgt::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
