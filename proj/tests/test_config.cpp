#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "kgt/errors.hpp"
#include "kgt/checkpoint.hpp"
#include "kgt/runner.hpp"
#include "support/synth.hpp"

using namespace kgt;
using kgt::test::write_temp_file;

TEST_CASE("defaults echo the reference training recipe") {
  RunConfig c;
  CHECK(c.d == 768);
  CHECK(c.heads == 12);
  CHECK(c.layers == 4);
  CHECK(c.k == 126);
  CHECK(c.lr == 1e-4);
  CHECK(c.batch == 4);
  CHECK(c.mask_rate == 0.15);
  CHECK(c.mem_negatives == 2);
  CHECK(c.epm_positive_prob == 0.5);
  CHECK(c.epochs == 10);
}

TEST_CASE("config round-trips through serialization") {
  RunConfig c;
  c.d = 32;
  c.heads = 4;
  c.dropout = 0.125;
  c.lr = 3.5e-4;
  c.use_matrix = false;
  c.mode = TuneMode::Scratch;
  c.task = TaskName::ZSL;
  c.graph = "/data/graph.tsv";
  c.seed = 987654321;
  c.warmup_steps = 17;
  RunConfig back = parse_config(serialize_config(c));
  CHECK(back == c);
  // and a second round for fixpoint
  CHECK(serialize_config(back) == serialize_config(c));
}

TEST_CASE("overrides hit the right fields and reject unknown keys") {
  RunConfig c;
  apply_override(c, "model.d=64");
  CHECK(c.d == 64);
  apply_override(c, "k=9");
  CHECK(c.k == 9);
  apply_override(c, "pretrain.use_matrix=false");
  CHECK_FALSE(c.use_matrix);
  apply_override(c, "tune.mode=finetune");
  CHECK(c.mode == TuneMode::Finetune);
  CHECK_THROWS_AS(apply_override(c, "no_such_key=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "model.d=grape"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "nonsense"), ConfigError);
}

TEST_CASE("validation lists every offending field") {
  RunConfig c;
  c.d = 10;
  c.heads = 3;
  c.mask_rate = 1.5;
  c.batch = 0;
  try {
    validate(c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("model.d") != std::string::npos);
    CHECK(msg.find("mask_rate") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
  }
}

TEST_CASE("config files parse sections and comments") {
  const std::string path = write_temp_file("conf1.ini",
                                           "# comment\n"
                                           "[model]\n"
                                           "d = 16\n"
                                           "heads = 2\n"
                                           "\n"
                                           "[run]\n"
                                           "seed = 5\n");
  RunConfig c = load_config(path);
  CHECK(c.d == 16);
  CHECK(c.heads == 2);
  CHECK(c.seed == 5);
  CHECK_THROWS_AS(parse_config("[model\nd=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("dangling\n"), ConfigError);
}

TEST_CASE("config hash is stable and sensitive") {
  RunConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("stats command reports the dataset and writes artifacts") {
  auto kg = kgt::test::make_group_kg(3, 4, 2, 20, 3, "st");
  const std::string graph = write_temp_file(
      "stats_graph.tsv", kgt::test::triples_tsv(kg.g, kg.g.triples()));
  RunConfig c;
  c.graph = graph;
  c.out_dir = "/tmp/kgt_test_stats_out";
  std::filesystem::remove_all(c.out_dir);
  const std::string report = run_stats(c);
  CHECK(report.find("entities   12") != std::string::npos);
  CHECK(report.find("triples    20") != std::string::npos);
  CHECK(std::filesystem::exists(c.out_dir + "/vocab.tsv"));
  CHECK(std::filesystem::exists(c.out_dir + "/stats.csv"));
}

TEST_CASE("dump-sequence prints a grid for a named entity") {
  KnowledgeGraph g;
  g.add_triple("a", "r", "b");
  const std::string graph =
      write_temp_file("dump_graph.tsv", kgt::test::triples_tsv(g, g.triples()));
  RunConfig c;
  c.graph = graph;
  c.k = 4;
  DumpOptions opts;
  opts.entity = "a";
  const std::string grid = run_dump_sequence(c, opts);
  CHECK(grid.find("tokens: [B] a r b [S]") != std::string::npos);
  CHECK(grid.find("matrix:") != std::string::npos);

  opts.entity = "ghost";
  CHECK_THROWS_AS(run_dump_sequence(c, opts), DataError);
  opts.entity = "a";
  opts.strategy = "sideways";
  CHECK_THROWS_AS(run_dump_sequence(c, opts), ConfigError);
}

TEST_CASE("runner surfaces config and data errors distinctly") {
  RunConfig c;
  c.task = TaskName::Pretrain;
  CHECK_THROWS_AS(run_pretrain(c), ConfigError);  // missing out_dir

  c.out_dir = "/tmp/kgt_test_badrun";
  c.graph = "/tmp/kgt_test_does_not_exist.tsv";
  CHECK_THROWS_AS(run_pretrain(c), DataError);

  RunConfig t;
  t.task = TaskName::Pretrain;
  t.out_dir = "/tmp/kgt_test_badrun2";
  CHECK_THROWS_AS(run_tune(t), ConfigError);  // pretrain is not a tune task
}

TEST_CASE("tiny pretrain runs end to end and is reproducible byte for byte") {
  auto kg = kgt::test::make_group_kg(3, 4, 2, 24, 9, "pr");
  const std::string graph = write_temp_file(
      "tiny_pretrain.tsv", kgt::test::triples_tsv(kg.g, kg.g.triples()));
  RunConfig c;
  c.graph = graph;
  c.d = 8;
  c.heads = 2;
  c.layers = 1;
  c.k = 3;
  c.epochs = 1;
  c.batch = 4;
  c.seed = 77;
  c.checkpoint_every = 0;

  auto read_file = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  c.out_dir = "/tmp/kgt_test_pr1";
  std::filesystem::remove_all(c.out_dir);
  PretrainOutputs o1 = run_pretrain(c);
  c.out_dir = "/tmp/kgt_test_pr2";
  std::filesystem::remove_all(c.out_dir);
  PretrainOutputs o2 = run_pretrain(c);

  CHECK(read_file(o1.loss_csv_path) == read_file(o2.loss_csv_path));
  // checkpoints match tensor-for-tensor (the manifest hash embeds out_dir)
  Checkpoint c1 = load_checkpoint(o1.checkpoint_path);
  Checkpoint c2 = load_checkpoint(o2.checkpoint_path);
  REQUIRE(c1.tensors.size() == c2.tensors.size());
  for (size_t i = 0; i < c1.tensors.size(); ++i) {
    CHECK(c1.tensors[i].name == c2.tensors[i].name);
    CHECK(c1.tensors[i].data == c2.tensors[i].data);
  }
  CHECK(c1.rng_state == c2.rng_state);
  CHECK(std::filesystem::exists(o1.manifest_path));
  const std::string manifest = read_file(o1.manifest_path);
  CHECK(manifest.find("config_hash = ") != std::string::npos);
  CHECK(manifest.find("version = ") != std::string::npos);
  CHECK(manifest.find("seed = 77") != std::string::npos);
}
