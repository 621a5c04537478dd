#include "kgt/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kgt/errors.hpp"

namespace kgt {

TokenId Vocab::entity_token(EntityId e) const {
  if (e < 0 || static_cast<size_t>(e) >= n_entities) {
    throw DataError("entity id out of vocab range: " + std::to_string(e));
  }
  return kFirstElement + e;
}

TokenId Vocab::relation_token(RelationId r) const {
  if (r < 0 || static_cast<size_t>(r) >= n_relations) {
    throw DataError("relation id out of vocab range: " + std::to_string(r));
  }
  return static_cast<TokenId>(kFirstElement + n_entities + r);
}

bool Vocab::is_entity(TokenId t) const {
  return t >= kFirstElement &&
         t < static_cast<TokenId>(kFirstElement + n_entities);
}

bool Vocab::is_relation(TokenId t) const {
  return t >= static_cast<TokenId>(kFirstElement + n_entities) &&
         t < static_cast<TokenId>(size());
}

EntityId Vocab::to_entity(TokenId t) const {
  if (!is_entity(t)) throw DataError("token is not an entity");
  return t - kFirstElement;
}

RelationId Vocab::to_relation(TokenId t) const {
  if (!is_relation(t)) throw DataError("token is not a relation");
  return static_cast<RelationId>(t - kFirstElement - n_entities);
}

int TripleSequence::triple_of(size_t i) const {
  for (const Segment& seg : segments) {
    if (i < seg.begin || i >= seg.end) continue;
    if (seg.kind == SegmentKind::Prompt) return -1;
    if (i == seg.begin) return -1;  // [B]
    return static_cast<int>(seg.triple_offset + (i - seg.begin - 1) / 4);
  }
  throw ShapeError("position out of sequence range");
}

bool TripleSequence::graph_only() const {
  return std::all_of(segments.begin(), segments.end(), [](const Segment& s) {
    return s.kind == SegmentKind::Graph;
  });
}

TripleSequence serialize(const SubGraph& sg, const Vocab& vocab) {
  if (sg.triples.empty()) throw DataError("serialize: empty sub-graph");
  TripleSequence seq;
  seq.tokens.push_back(Vocab::kBegin);
  for (const Triple& t : sg.triples) {
    seq.tokens.push_back(vocab.entity_token(t.head));
    seq.tokens.push_back(vocab.relation_token(t.rel));
    seq.tokens.push_back(vocab.entity_token(t.tail));
    seq.tokens.push_back(Vocab::kSep);
  }
  seq.triples = sg.triples;
  seq.segments.push_back(
      {0, seq.tokens.size(), SegmentKind::Graph, 0, sg.triples.size()});
  return seq;
}

void build_matrix(TripleSequence& seq) {
  if (!seq.graph_only()) {
    throw ShapeError("build_matrix: sequence already has a prompt segment");
  }
  const size_t n = seq.tokens.size();
  seq.matrix.assign(n * n, 0);

  // Segment id and owning triple per position.
  std::vector<int> seg_of(n, -1);
  std::vector<int> trp(n, -1);
  for (size_t s = 0; s < seq.segments.size(); ++s) {
    const Segment& seg = seq.segments[s];
    for (size_t i = seg.begin; i < seg.end; ++i) {
      seg_of[i] = static_cast<int>(s);
      trp[i] = (i == seg.begin)
                   ? -1
                   : static_cast<int>(seg.triple_offset + (i - seg.begin - 1) / 4);
    }
  }

  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      uint8_t v = 0;
      if (i == j) {
        v = 1;
      } else if (seg_of[i] == seg_of[j] && (trp[i] < 0 || trp[j] < 0)) {
        v = 1;  // a segment's [B] row/column spans its segment
      } else if (trp[i] >= 0 && trp[j] >= 0) {
        v = share_element(seq.triples[trp[i]], seq.triples[trp[j]]) ? 1 : 0;
      }
      seq.matrix[i * n + j] = v;
    }
  }
}

void apply_mask(TripleSequence& seq, MaskKind kind, double rate, Rng& rng) {
  if (!seq.graph_only()) throw ShapeError("apply_mask: graph-only sequences");
  if (!seq.matrix_built()) {
    throw ShapeError("apply_mask: build the matrix before masking");
  }
  if (!(rate > 0.0 && rate < 1.0)) {
    throw ConfigError("mask rate must be in (0,1)");
  }
  const size_t n_triples = seq.triples.size();
  const size_t n_mask = static_cast<size_t>(
      std::ceil(rate * static_cast<double>(n_triples)));

  std::vector<size_t> indices(n_triples);
  for (size_t i = 0; i < n_triples; ++i) indices[i] = i;
  std::vector<size_t> selected =
      rng.sample_without_replacement(indices, n_mask);
  std::sort(selected.begin(), selected.end());

  // Map triple index back to its segment to locate sequence positions.
  for (size_t t : selected) {
    const Segment* seg = nullptr;
    for (const Segment& s : seq.segments) {
      if (t >= s.triple_offset && t < s.triple_offset + s.triple_count) {
        seg = &s;
        break;
      }
    }
    const size_t base = seg->begin + 1 + 4 * (t - seg->triple_offset);
    size_t pos;
    if (kind == MaskKind::MEM) {
      pos = rng.coin(0.5) ? base : base + 2;  // head or tail
    } else {
      pos = base + 1;  // relation
    }
    seq.mask_records.push_back({pos, seq.tokens[pos], kind});
    seq.tokens[pos] = Vocab::kMask;
  }
}

TripleSequence concat_graph_sequences(const TripleSequence& a,
                                      const TripleSequence& b) {
  if (!a.graph_only() || !b.graph_only()) {
    throw ShapeError("concat_graph_sequences: graph-only inputs");
  }
  TripleSequence out;
  out.tokens = a.tokens;
  out.tokens.insert(out.tokens.end(), b.tokens.begin(), b.tokens.end());
  out.triples = a.triples;
  out.triples.insert(out.triples.end(), b.triples.begin(), b.triples.end());
  out.segments = a.segments;
  for (Segment seg : b.segments) {
    seg.begin += a.tokens.size();
    seg.end += a.tokens.size();
    seg.triple_offset += a.triples.size();
    out.segments.push_back(seg);
  }
  for (const MaskRecord& m : a.mask_records) out.mask_records.push_back(m);
  for (MaskRecord m : b.mask_records) {
    m.pos += a.tokens.size();
    out.mask_records.push_back(m);
  }
  return out;
}

namespace {

bool triple_has_key(const Triple& t, const std::vector<TokenId>& keys,
                    const Vocab& vocab) {
  const TokenId h = vocab.entity_token(t.head);
  const TokenId r = vocab.relation_token(t.rel);
  const TokenId tl = vocab.entity_token(t.tail);
  for (TokenId k : keys) {
    if (k == h || k == r || k == tl) return true;
  }
  return false;
}

}  // namespace

void append_prompt(TripleSequence& seq, TaskKind task,
                   const std::array<TokenId, 4>& prompt_tokens,
                   const std::vector<TokenId>& relatedness_keys,
                   const Vocab& vocab) {
  if (!seq.matrix_built()) {
    throw ShapeError("append_prompt: build the graph matrix first");
  }
  if (!seq.graph_only()) {
    throw ShapeError("append_prompt: sequence already has a prompt");
  }
  const size_t n = seq.tokens.size();
  const size_t m = n + 4;

  std::vector<uint8_t> grown(m * m, 0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) grown[i * m + j] = seq.matrix[i * n + j];
  }

  // Prompt block is fully connected.
  for (size_t i = n; i < m; ++i) {
    for (size_t j = n; j < m; ++j) grown[i * m + j] = 1;
  }

  // Per-position relatedness of the graph part to the prompt.
  for (size_t i = 0; i < n; ++i) {
    const int t = seq.triple_of(i);
    bool related;
    if (t < 0) {
      related = true;  // segment [B] rows/columns stay global
    } else {
      related = triple_has_key(seq.triples[t], relatedness_keys, vocab);
    }
    if (!related) continue;
    for (size_t p = n; p < m; ++p) {
      grown[p * m + i] = 1;  // prompt reads graph
      if (task != TaskKind::ZeroShot || t < 0) {
        grown[i * m + p] = 1;  // graph reads prompt (one-way for ZSL)
      }
    }
  }

  seq.tokens.insert(seq.tokens.end(), prompt_tokens.begin(),
                    prompt_tokens.end());
  seq.segments.push_back({n, m, SegmentKind::Prompt, seq.triples.size(), 0});
  seq.matrix = std::move(grown);
}

void apply_all_ones_matrix(TripleSequence& seq) {
  const size_t n = seq.tokens.size();
  seq.matrix.assign(n * n, 1);
}

std::string token_name(TokenId t, const Vocab& vocab,
                       const KnowledgeGraph* g) {
  switch (t) {
    case Vocab::kBegin: return "[B]";
    case Vocab::kSep: return "[S]";
    case Vocab::kMask: return "[M]";
    case Vocab::kTask: return "[T]";
    case Vocab::kImage: return "[V]";
    case Vocab::kQuery: return "[Q]";
    default: break;
  }
  if (vocab.is_entity(t)) {
    const EntityId e = vocab.to_entity(t);
    return g ? g->entity_label(e) : "e" + std::to_string(e);
  }
  if (vocab.is_relation(t)) {
    const RelationId r = vocab.to_relation(t);
    return g ? g->relation_label(r) : "r" + std::to_string(r);
  }
  return "?" + std::to_string(t);
}

std::string dump_grid(const TripleSequence& seq, const Vocab& vocab,
                      const KnowledgeGraph* g) {
  std::ostringstream os;
  os << "tokens:";
  for (TokenId t : seq.tokens) os << " " << token_name(t, vocab, g);
  os << "\n";
  if (seq.matrix_built()) {
    os << "matrix:\n";
    const size_t n = seq.tokens.size();
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j) {
        if (j) os << " ";
        os << static_cast<int>(seq.matrix[i * n + j]);
      }
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace kgt
