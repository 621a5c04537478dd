#include <doctest.h>

#include <cmath>

#include "kgt/errors.hpp"
#include "kgt/model.hpp"
#include "kgt/optim.hpp"
#include "support/fd.hpp"
#include "support/synth.hpp"

using namespace kgt;

namespace {

struct Toy {
  KnowledgeGraph g;
  Vocab vocab;
  ModelParams params;
};

Toy make_toy(size_t d = 8, size_t heads = 2, size_t layers = 2,
             uint64_t seed = 7) {
  Toy toy;
  toy.g.add_triple("a", "r1", "b");
  toy.g.add_triple("b", "r2", "c");
  toy.g.add_triple("x", "r1", "y");
  toy.vocab = Vocab(toy.g);
  ModelDims dims{d, heads, layers, toy.vocab.size(), toy.g.relation_count(),
                 0.0};
  Rng rng(seed);
  toy.params = init_model(dims, rng);
  return toy;
}

TripleSequence seq_of(const Toy& toy, std::vector<size_t> triple_ids) {
  SubGraph sg;
  sg.center = 0;
  for (size_t i : triple_ids) sg.triples.push_back(toy.g.triple(i));
  TripleSequence seq = serialize(sg, toy.vocab);
  build_matrix(seq);
  return seq;
}

// Plain-loop reference for one masked multi-head attention block.
std::vector<double> attention_reference(const Tensor& h,
                                        const std::vector<uint8_t>& m,
                                        const LayerParams& lp, size_t heads) {
  const size_t n = h.rows(), d = h.cols(), dk = d / heads;
  auto matvec = [&](const Tensor& w, size_t row, size_t col) {
    double s = 0.0;
    for (size_t i = 0; i < d; ++i) s += h.at(row, i) * w.at(i, col);
    return s;
  };
  std::vector<double> merged(n * d, 0.0);
  for (size_t head = 0; head < heads; ++head) {
    std::vector<double> q(n * dk), k(n * dk), v(n * dk);
    for (size_t i = 0; i < n; ++i) {
      for (size_t c = 0; c < dk; ++c) {
        q[i * dk + c] = matvec(lp.wq, i, head * dk + c);
        k[i * dk + c] = matvec(lp.wk, i, head * dk + c);
        v[i * dk + c] = matvec(lp.wv, i, head * dk + c);
      }
    }
    for (size_t i = 0; i < n; ++i) {
      std::vector<double> scores(n);
      for (size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (size_t c = 0; c < dk; ++c) dot += q[i * dk + c] * k[j * dk + c];
        scores[j] = m[i * n + j]
                        ? dot / std::sqrt(static_cast<double>(dk))
                        : kMaskFill;
      }
      double mx = scores[0];
      for (double s : scores) mx = std::max(mx, s);
      double z = 0.0;
      std::vector<double> p(n);
      for (size_t j = 0; j < n; ++j) {
        p[j] = std::exp(scores[j] - mx);
        z += p[j];
      }
      for (size_t j = 0; j < n; ++j) p[j] /= z;
      for (size_t c = 0; c < dk; ++c) {
        double acc = 0.0;
        for (size_t j = 0; j < n; ++j) acc += p[j] * v[j * dk + c];
        merged[i * d + head * dk + c] = acc;
      }
    }
  }
  std::vector<double> out(n * d, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (size_t l = 0; l < d; ++l) {
        acc += merged[i * d + l] * lp.wo.at(l, c);
      }
      out[i * d + c] = acc;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("embed returns table rows, mask rows, and injected projections") {
  Toy toy = make_toy();
  TripleSequence seq = seq_of(toy, {0});
  Tensor rows = embed(seq, toy.params);
  CHECK(rows.rows() == 5);
  for (size_t j = 0; j < toy.params.dims.d; ++j) {
    CHECK(rows.at(0, j) == toy.params.embeddings.at(Vocab::kBegin, j));
    CHECK(rows.at(1, j) ==
          toy.params.embeddings.at(toy.vocab.entity_token(0), j));
  }

  // a masked position embeds as the mask token
  Rng rng(5);
  apply_mask(seq, MaskKind::MRM, 0.2, rng);
  Tensor rows2 = embed(seq, toy.params);
  for (size_t j = 0; j < toy.params.dims.d; ++j) {
    CHECK(rows2.at(2, j) == toy.params.embeddings.at(Vocab::kMask, j));
  }

  // injected feature positions override the table with W_map-projected rows
  Rng head_rng(11);
  init_task_head(toy.params, TaskKind::ZeroShot, 3, head_rng);
  TripleSequence zseq = seq_of(toy, {0});
  append_prompt(zseq, TaskKind::ZeroShot,
                {Vocab::kTask, toy.vocab.entity_token(0), Vocab::kMask,
                 Vocab::kImage},
                {toy.vocab.entity_token(0)}, toy.vocab);
  const size_t vpos = zseq.segments.back().begin + 3;
  zseq.injected[vpos] = {1.0, 2.0, 3.0};
  Tensor rows3 = embed(zseq, toy.params);
  for (size_t j = 0; j < toy.params.dims.d; ++j) {
    double want = 0.0;
    for (size_t i = 0; i < 3; ++i) {
      want += zseq.injected[vpos][i] * toy.params.zsl_wmap.at(i, j);
    }
    CHECK(rows3.at(vpos, j) == doctest::Approx(want).epsilon(1e-12));
  }

  TripleSequence bad = seq_of(toy, {0});
  bad.tokens[1] = static_cast<TokenId>(toy.vocab.size() + 3);
  CHECK_THROWS_AS(embed(bad, toy.params), DataError);
}

TEST_CASE("attention with an all-ones matrix equals unmasked attention") {
  Toy toy = make_toy(12, 3, 1, 21);
  Rng rng(2);
  Tensor h = Tensor::randn({4, 12}, rng, 1.0, false);
  std::vector<uint8_t> ones(16, 1);
  Tensor out = attention(h, ones, toy.params.layers[0], 3);
  const auto ref = attention_reference(h, ones, toy.params.layers[0], 3);
  for (size_t i = 0; i < 4; ++i) {
    for (size_t j = 0; j < 12; ++j) {
      CHECK(std::fabs(out.at(i, j) - ref[i * 12 + j]) < 1e-10);
    }
  }
}

TEST_CASE("attention matches the naive reference under a random matrix") {
  Toy toy = make_toy(8, 2, 1, 33);
  Rng rng(3);
  Tensor h = Tensor::randn({3, 8}, rng, 1.0, false);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng mask_rng(seed);
    std::vector<uint8_t> m(9, 0);
    for (size_t i = 0; i < 3; ++i) {
      m[i * 3 + i] = 1;  // keep the diagonal so every row attends somewhere
      for (size_t j = 0; j < 3; ++j) {
        if (i != j && mask_rng.coin(0.6)) m[i * 3 + j] = 1;
      }
    }
    Tensor out = attention(h, m, toy.params.layers[0], 2);
    const auto ref = attention_reference(h, m, toy.params.layers[0], 2);
    for (size_t i = 0; i < out.size(); ++i) {
      CHECK(std::fabs(out.data()[i] - ref[i]) < 1e-10);
    }
  }
}

TEST_CASE("gated-out pairs receive exactly zero attention mass") {
  Toy toy = make_toy(8, 2, 2, 5);
  TripleSequence seq = seq_of(toy, {0, 2});  // disjoint triples
  ForwardTrace trace;
  forward(seq, toy.params, &trace);
  const size_t n = seq.length();
  REQUIRE(trace.probs.size() ==
          toy.params.dims.layers * toy.params.dims.heads);
  for (const auto& probs : trace.probs) {
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j) {
        if (!seq.at(i, j)) {
          CHECK(probs[i * n + j] < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("a zero-layer stack returns the embeddings unchanged") {
  Toy toy = make_toy(8, 2, 0, 9);
  TripleSequence seq = seq_of(toy, {0});
  Tensor h = forward(seq, toy.params);
  Tensor e = embed(seq, toy.params);
  for (size_t i = 0; i < h.size(); ++i) {
    CHECK(h.data()[i] == e.data()[i]);
  }
}

TEST_CASE("permuting whole-triple blocks permutes hidden states") {
  Toy toy = make_toy(8, 2, 2, 13);
  TripleSequence seq = seq_of(toy, {0, 1, 2});
  TripleSequence perm = seq_of(toy, {2, 0, 1});
  Tensor h1 = forward(seq, toy.params);
  Tensor h2 = forward(perm, toy.params);
  // block permutation: triple t at positions 1+4t..4+4t moves with it
  auto old_pos = [](size_t new_triple, size_t offset) {
    static const size_t mapping[3] = {2, 0, 1};  // new index -> old index
    return 1 + 4 * mapping[new_triple] + offset;
  };
  for (size_t t = 0; t < 3; ++t) {
    for (size_t off = 0; off < 4; ++off) {
      const size_t np = 1 + 4 * t + off;
      const size_t op = old_pos(t, off);
      for (size_t j = 0; j < 8; ++j) {
        CHECK(std::fabs(h2.at(np, j) - h1.at(op, j)) < 1e-10);
      }
    }
  }
  for (size_t j = 0; j < 8; ++j) {
    CHECK(std::fabs(h2.at(0, j) - h1.at(0, j)) < 1e-10);
  }
}

TEST_CASE("transferable parameter count hits the published scale") {
  ModelDims dims{768, 12, 4, 10, 3, 0.0};
  Rng rng(1);
  ModelParams params = init_model(dims, rng);
  const double count = static_cast<double>(layer_param_count(params));
  CHECK(std::fabs(count - 28.3e6) <= 0.02 * 28.3e6);
}

TEST_CASE("extract helpers find unique roles and reject duplicates") {
  Toy toy = make_toy();
  TripleSequence seq = seq_of(toy, {0, 1});
  CHECK(segment_begin_position(seq, 0) == 0);
  CHECK_THROWS_AS(segment_begin_position(seq, 5), DataError);
  // entity b appears in both triples
  CHECK_THROWS_AS(unique_token_position(seq, toy.vocab.entity_token(1)),
                  DataError);
  CHECK(unique_token_position(seq, toy.vocab.entity_token(0)) == 1);
  CHECK_THROWS_AS(unique_token_position(seq, Vocab::kTask), DataError);

  TripleSequence pair =
      concat_graph_sequences(seq_of(toy, {0}), seq_of(toy, {2}));
  CHECK(segment_begin_position(pair, 1) == 5);

  Tensor h = forward(seq_of(toy, {0}), toy.params);
  Tensor row = extract_row(h, 2);
  for (size_t j = 0; j < 8; ++j) CHECK(row.at(0, j) == h.at(2, j));
  CHECK_THROWS_AS(extract_row(h, 99), ShapeError);
}

TEST_CASE("frozen groups stay bit-identical through training steps") {
  Toy toy = make_toy(8, 2, 2, 17);
  set_frozen(toy.params, {kGroupLayers});
  const std::vector<double> before = toy.params.layers[0].wq.data();

  std::vector<Tensor> trainable =
      toy.params.group_tensors(kGroupEmbeddings);
  for (Tensor& t : toy.params.group_tensors(kGroupLayers)) {
    trainable.push_back(t);
  }
  Adam adam(trainable);
  for (int step = 0; step < 100; ++step) {
    TripleSequence seq = seq_of(toy, {0, 1});
    Tensor loss = mean(mul(forward(seq, toy.params),
                           forward(seq, toy.params)));
    loss.backward();
    adam.step(1e-2);
  }
  CHECK(toy.params.layers[0].wq.data() == before);

  // thawing makes them move
  set_frozen(toy.params, {});
  TripleSequence seq = seq_of(toy, {0, 1});
  Tensor loss = mean(mul(forward(seq, toy.params), forward(seq, toy.params)));
  loss.backward();
  adam.step(1e-2);
  CHECK(toy.params.layers[0].wq.data() != before);

  CHECK_THROWS_AS(set_frozen(toy.params, {"nonsense"}), ConfigError);
}

TEST_CASE("layer reinitialisation redraws the stack in place") {
  Toy toy = make_toy(8, 2, 2, 19);
  const std::vector<double> before = toy.params.layers[0].wq.data();
  Rng rng(991);
  reinit_layers(toy.params, rng);
  CHECK(toy.params.layers[0].wq.data() != before);
  CHECK(toy.params.layers.size() == 2);
}

TEST_CASE("checkpoint round-trip and layer transplant") {
  Toy toy = make_toy(8, 2, 2, 23);
  Checkpoint ckpt = to_checkpoint(toy.params, 42, "rngstate", {{"k", "v"}});
  const std::string path = "/tmp/kgt_test_ckpt.kgt";
  save_checkpoint(path, ckpt);
  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.step == 42);
  CHECK(loaded.rng_state == "rngstate");
  CHECK(loaded.meta.at("k") == "v");
  CHECK(loaded.meta.at("d") == "8");

  Toy fresh = make_toy(8, 2, 2, 999);
  CHECK(fresh.params.layers[0].wq.data() != toy.params.layers[0].wq.data());
  transplant_layers(fresh.params, loaded);
  CHECK(fresh.params.layers[0].wq.data() == toy.params.layers[0].wq.data());
  // embeddings stay the target's own
  CHECK(fresh.params.embeddings.data() != toy.params.embeddings.data());

  Toy wrong = make_toy(12, 2, 2, 1000);
  CHECK_THROWS_AS(transplant_layers(wrong.params, loaded), DataError);
}

TEST_CASE("full forward gradients match finite differences at toy dims") {
  Toy toy = make_toy(8, 2, 2, 29);
  TripleSequence seq = seq_of(toy, {0, 1});
  std::vector<Tensor> leaves;
  for (const NamedParam& np : toy.params.named()) leaves.push_back(np.tensor);
  auto loss = [&] {
    Tensor h = forward(seq, toy.params);
    return mean(mul(h, h));
  };
  CHECK(kgt::test::max_fd_rel_error(loss, leaves, 1e-5, 6) < 1e-4);
}
