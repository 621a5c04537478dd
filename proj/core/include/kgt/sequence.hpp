#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kgt/kg.hpp"
#include "kgt/rng.hpp"
#include "kgt/sampler.hpp"

namespace kgt {

using TokenId = int32_t;

// Token-id layout: six fixed control tokens, then entities, then relations.
// The three id classes never overlap.
struct Vocab {
  static constexpr TokenId kBegin = 0;  // sequence start
  static constexpr TokenId kSep = 1;    // triple separator
  static constexpr TokenId kMask = 2;   // masked element
  static constexpr TokenId kTask = 3;   // task prompt head
  static constexpr TokenId kImage = 4;  // injected image feature slot
  static constexpr TokenId kQuery = 5;  // injected text feature slot
  static constexpr TokenId kFirstElement = 6;

  size_t n_entities = 0;
  size_t n_relations = 0;

  Vocab() = default;
  Vocab(size_t entities, size_t relations)
      : n_entities(entities), n_relations(relations) {}
  explicit Vocab(const KnowledgeGraph& g)
      : Vocab(g.entity_count(), g.relation_count()) {}

  size_t size() const { return kFirstElement + n_entities + n_relations; }

  TokenId entity_token(EntityId e) const;
  TokenId relation_token(RelationId r) const;
  bool is_entity(TokenId t) const;
  bool is_relation(TokenId t) const;
  EntityId to_entity(TokenId t) const;
  RelationId to_relation(TokenId t) const;
};

enum class MaskKind { MEM, MRM };

struct MaskRecord {
  size_t pos = 0;          // 0-based sequence position, holds kMask
  TokenId original = 0;    // token replaced by kMask
  MaskKind kind = MaskKind::MEM;
};

enum class SegmentKind { Graph, Prompt };

struct Segment {
  size_t begin = 0;  // inclusive
  size_t end = 0;    // exclusive
  SegmentKind kind = SegmentKind::Graph;
  size_t triple_offset = 0;  // into TripleSequence::triples
  size_t triple_count = 0;
};

// A serialized sub-graph (possibly several concatenated, possibly with a
// 4-token task prompt appended) plus the binary matrix gating attention.
struct TripleSequence {
  std::vector<TokenId> tokens;
  std::vector<uint8_t> matrix;  // row-major tokens.size()^2; empty until built
  std::vector<Segment> segments;
  std::vector<Triple> triples;  // all graph triples, serialization order
  std::vector<MaskRecord> mask_records;
  std::map<size_t, std::vector<double>> injected;  // position -> raw feature

  size_t length() const { return tokens.size(); }
  bool matrix_built() const { return !matrix.empty(); }
  uint8_t at(size_t i, size_t j) const { return matrix[i * tokens.size() + j]; }

  // Triple owning position i, or -1 for [B] and prompt positions.
  int triple_of(size_t i) const;
  bool graph_only() const;
};

// [B], then h, r, t, [S] per triple. Throws on an empty sub-graph.
TripleSequence serialize(const SubGraph& sg, const Vocab& vocab);

// Fills `matrix`: position pairs connect iff their triples share an element;
// each segment's [B] row and column connect the whole segment; cross-segment
// pairs connect only through shared elements. Idempotent.
void build_matrix(TripleSequence& seq);

// Masks ceil(rate * n_triples) triples: MEM replaces head or tail (fair
// coin), MRM replaces the relation. Requires the matrix to be built first so
// connectivity reflects the original elements.
void apply_mask(TripleSequence& seq, MaskKind kind, double rate, Rng& rng);

// Concatenates two graph-only sequences; each keeps its own [B]. The result
// has no matrix yet; call build_matrix.
TripleSequence concat_graph_sequences(const TripleSequence& a,
                                      const TripleSequence& b);

enum class TaskKind { TripleClassification, ZeroShot, QuestionAnswering };

// Appends a 4-token prompt segment and extends the matrix. Prompt positions
// connect to graph positions whose triple contains one of `relatedness_keys`
// (token ids of entities/relations): bidirectionally for TC and QA, and
// one-way (prompt reads graph, graph cannot read prompt) for ZSL. The prompt
// block is fully connected and every segment [B] connects to the prompt.
void append_prompt(TripleSequence& seq, TaskKind task,
                   const std::array<TokenId, 4>& prompt_tokens,
                   const std::vector<TokenId>& relatedness_keys,
                   const Vocab& vocab);

// Replaces the matrix with all-ones (attention gating disabled).
void apply_all_ones_matrix(TripleSequence& seq);

std::string token_name(TokenId t, const Vocab& vocab,
                       const KnowledgeGraph* g = nullptr);

// Plain-text listing of tokens and the 0/1 matrix grid.
std::string dump_grid(const TripleSequence& seq, const Vocab& vocab,
                      const KnowledgeGraph* g = nullptr);

}  // namespace kgt
