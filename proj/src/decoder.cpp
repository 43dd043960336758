#include "arbor/decoder.hpp"

#include <algorithm>

namespace arbor {

using ad::Tensor;

std::vector<std::string> copy_labels(Framework f, const io::Sentence& s) {
  std::vector<std::string> out = s.tokens;
  if (f == Framework::kAmr && s.lemmas.size() == s.tokens.size())
    for (std::size_t t = 0; t < out.size(); ++t)
      if (!s.lemmas[t].empty()) out[t] = s.lemmas[t];
  return out;
}

EncodedSentence prepare(const TransducerModel& m, const EncoderInput& in, bool train, std::mt19937_64& rng) {
  EncodedSentence e;
  e.encoder = encode(m, in, train, rng);
  e.att_keys = m.att_s.rows(e.encoder.states);
  e.copy_labels = copy_labels(in.framework.value_or(m.config().framework), in.sentence);
  const auto& pos = m.vocabs().pos;
  e.pos_ids.resize(in.size());
  for (std::size_t t = 0; t < in.size(); ++t)
    e.pos_ids[t] = in.sentence.pos.empty() ? pos.unk_id() : pos.id(in.sentence.pos[t]);
  return e;
}

namespace {

Tensor index_row(const TransducerModel& m, int index) {
  const auto rows = m.config().index_rows;
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::max(index, 0)), rows - 1);
  return ad::row(m.index_table, i);
}

Tensor node_embedding(const TransducerModel& m, const EmittedNode& n) {
  const auto row = n.origin == Origin::kRoot ? m.root_node_row() : m.vocabs().nodes.id(n.label);
  return ad::concat({ad::row(m.node_table, row), m.dec_chars(char_ids(n.label)), ad::row(m.pos_table, n.pos_id)});
}

}  // namespace

DecoderState start_state(const TransducerModel& m, const EncodedSentence& enc) {
  DecoderState s;
  s.lstm = enc.encoder.decoder_init;
  EmittedNode root;
  root.label = std::string(kRootLabel);
  root.index = 0;
  root.pos_id = m.vocabs().pos.unk_id();
  root.origin = Origin::kRoot;
  s.embedding.push_back(node_embedding(m, root));
  s.index_embedding.push_back(index_row(m, 0));
  s.nodes.push_back(std::move(root));
  const auto& h = s.lstm.back().h;
  s.h.push_back(h);
  s.end_rep.push_back(m.end(h));
  s.rel_src_rep.push_back(m.rel_src(h));
  s.coverage = Tensor::zeros({enc.size()});
  return s;
}

StepOutput target_node_step(const TransducerModel& m, const EncodedSentence& enc, DecoderState& state,
                            const RelationInput& in) {
  if (state.finished) throw ValidationError("decoder: step after EOS");
  if (in.source_position >= state.nodes.size())
    throw ValidationError("decoder: source position " + std::to_string(in.source_position) + " not yet emitted");
  const auto i = state.length();
  const auto& h = state.h.back();
  StepOutput out;

  auto q = ad::matmul(m.att_h, h);
  auto scores = ad::matmul(ad::elu(ad::add(enc.att_keys, q)), m.att_v);
  out.a_enc = ad::softmax(scores);
  out.context = ad::matmul_t(enc.encoder.states, out.a_enc);

  const auto rel_row = i == 0 ? m.none_relation_row() : in.relation_row;
  auto z = m.relation_state(ad::concat({h, out.context, ad::row(m.relation_table, rel_row),
                                        state.embedding[in.source_position],
                                        state.index_embedding[in.source_position]}));

  out.vocab_logits = m.vocab_out(z);
  out.p_vocab = ad::softmax(out.vocab_logits);
  auto switch_logits = m.switch_out(z);
  Tensor p_gen, p_enc;
  if (i == 0) {
    auto two = ad::softmax(ad::slice(switch_logits, 0, 2));
    out.switch_probs = ad::concat({two, Tensor::zeros({1})});
  } else {
    out.switch_probs = ad::softmax(switch_logits);
  }
  p_gen = ad::slice(out.switch_probs, 0, 1);
  p_enc = ad::slice(out.switch_probs, 1, 2);

  const auto V = out.p_vocab.size();
  const auto n = out.a_enc.size();
  std::vector<Tensor> parts{ad::mul(ad::expand(p_gen, V), out.p_vocab), ad::mul(ad::expand(p_enc, n), out.a_enc)};
  if (i > 0) {
    state.copy_keys.push_back(m.copy_k(z));
    auto dq = ad::matmul(m.copy_q, z);
    auto dscores = ad::matmul(ad::elu(ad::add(ad::stack(state.copy_keys), dq)), m.copy_v);
    out.a_dec = ad::softmax(dscores);
    auto p_dec = ad::slice(out.switch_probs, 2, 3);
    parts.push_back(ad::mul(ad::expand(p_dec, i), out.a_dec));
  }
  out.p_v = ad::concat(parts);

  out.coverage_loss = ad::sum(ad::minimum(out.a_enc, state.coverage));
  state.coverage = ad::add(state.coverage, out.a_enc);

  out.vocab_size = V;
  out.encoder_size = n;
  out.decoder_size = i;
  return out;
}

TargetChoice choice_at(const StepOutput& out, std::size_t p) {
  if (p < out.vocab_size) return {Origin::kVocab, p};
  p -= out.vocab_size;
  if (p < out.encoder_size) return {Origin::kEncoder, p};
  p -= out.encoder_size;
  if (p < out.decoder_size) return {Origin::kDecoder, p + 1};
  throw ValidationError("decoder: support position out of range");
}

std::size_t support_position(const StepOutput& out, const TargetChoice& c) {
  switch (c.origin) {
    case Origin::kVocab:
      return c.id;
    case Origin::kEncoder:
      return out.vocab_size + c.id;
    case Origin::kDecoder:
      return out.vocab_size + out.encoder_size + c.id - 1;
    case Origin::kRoot:
      break;
  }
  throw ValidationError("decoder: ROOT is not a target");
}

EmittedNode describe_choice(const TransducerModel& m, const EncodedSentence& enc, const DecoderState& state,
                            const TargetChoice& c) {
  EmittedNode n;
  n.origin = c.origin;
  n.source = c.id;
  switch (c.origin) {
    case Origin::kVocab:
      n.label = m.vocabs().nodes.token(c.id);
      n.index = state.next_index;
      n.pos_id = m.vocabs().pos.unk_id();
      break;
    case Origin::kEncoder:
      n.label = enc.copy_labels.at(c.id);
      n.index = state.next_index;
      n.pos_id = enc.pos_ids.at(c.id);
      n.anchors = {{static_cast<int>(c.id), static_cast<int>(c.id) + 1}};
      break;
    case Origin::kDecoder: {
      const auto& a = state.nodes.at(c.id);
      n.label = a.label;
      n.index = a.index;
      n.pos_id = a.pos_id;
      n.anchors = a.anchors;
      break;
    }
    case Origin::kRoot:
      throw ValidationError("decoder: ROOT is not a target");
  }
  return n;
}

void push_node(const TransducerModel& m, DecoderState& state, EmittedNode node, bool train, std::mt19937_64& rng) {
  auto emb = node_embedding(m, node);
  auto idx = index_row(m, node.index);
  auto x = ad::dropout(ad::concat({emb, idx}), m.config().dropout, train, rng);
  state.lstm = m.decoder.step(x, state.lstm, m.config().dropout, train, rng);
  const auto& h = state.lstm.back().h;
  state.h.push_back(h);
  state.end_rep.push_back(m.end(h));
  state.rel_src_rep.push_back(m.rel_src(h));
  state.embedding.push_back(emb);
  state.index_embedding.push_back(idx);
  state.next_index = std::max(state.next_index, node.index + 1);
  state.nodes.push_back(std::move(node));
  ++state.emitted;
}

SourceOutput source_node_step(const TransducerModel& m, const DecoderState& state) {
  const auto i = state.length();
  if (i == 0) throw ValidationError("decoder: no node to attach");
  SourceOutput out;
  if (i == 1) {
    out.probs = Tensor::vector({1.0});
    out.log_probs = Tensor::vector({0.0});
    out.first = 0;
    return out;
  }
  // ROOT already has its single child; candidates are positions 1..i-1.
  auto start = m.start(state.h.back());
  std::vector<Tensor> cands(state.end_rep.begin() + 1, state.end_rep.end() - 1);
  auto scores = m.pointer(start, ad::stack(cands));
  out.probs = ad::softmax(scores);
  out.log_probs = ad::log_softmax(scores);
  out.first = 1;
  return out;
}

RelationOutput relation_type_step(const TransducerModel& m, const DecoderState& state, std::size_t source) {
  if (source + 1 >= state.nodes.size()) throw ValidationError("decoder: relation source must precede the target");
  RelationOutput out;
  if (source == 0) {
    out.probs = Tensor::vector({1.0});
    out.log_probs = Tensor::vector({0.0});
    out.first = 0;
    out.forced = true;
    return out;
  }
  auto scores = m.relation(state.rel_src_rep[source], m.rel_tgt(state.h.back()));
  const auto k = scores.size();
  if (k < 2) throw ValidationError("decoder: relation vocabulary has no non-root types");
  std::vector<std::size_t> ids(k - 1);
  for (std::size_t r = 1; r < k; ++r) ids[r - 1] = r;
  auto picked = ad::pick(scores, ids);
  out.probs = ad::softmax(picked);
  out.log_probs = ad::log_softmax(picked);
  out.first = 1;
  return out;
}

Relation make_relation(const TransducerModel& m, const DecoderState& state, std::size_t source,
                       std::size_t relation_id) {
  const auto& src = state.nodes.at(source);
  const auto& tgt = state.nodes.back();
  Relation r;
  r.source_label = src.label;
  r.source_index = src.index;
  r.relation = m.vocabs().relations.token(relation_id);
  r.target_label = tgt.label;
  r.target_index = tgt.index;
  r.source_position = source;
  r.target_anchors = tgt.anchors;
  return r;
}

}  // namespace arbor
