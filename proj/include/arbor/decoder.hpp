// The three decoder modules: target node (pointer-generator over vocabulary,
// encoder tokens and preceding nodes), source node (biaffine pointer) and
// relation type (bilinear).
#pragma once

#include <random>
#include <string>
#include <vector>

#include "arbor/encoder.hpp"
#include "arbor/model.hpp"

namespace arbor {

enum class Origin { kRoot, kVocab, kEncoder, kDecoder };

struct EmittedNode {
  std::string label;
  int index = 0;
  std::size_t pos_id = 0;
  std::vector<Span> anchors;
  Origin origin = Origin::kVocab;
  std::size_t source = 0;  // vocab id, token position or node position
};

/// Per-sentence tensors the decoder reuses at every step.
struct EncodedSentence {
  EncoderOutput encoder;
  ad::Tensor att_keys;  // att_s applied to every encoder state, [n×att]
  std::vector<std::string> copy_labels;
  std::vector<std::size_t> pos_ids;
  std::size_t size() const { return copy_labels.size(); }
};

/// Strings an encoder copy produces: lemmas (falling back to tokens) for
/// AMR, tokens otherwise.
std::vector<std::string> copy_labels(Framework f, const io::Sentence& s);

EncodedSentence prepare(const TransducerModel& m, const EncoderInput& in, bool train, std::mt19937_64& rng);

struct DecoderState {
  std::vector<nn::LstmState> lstm;
  std::vector<EmittedNode> nodes;  // position 0 is ROOT
  std::vector<ad::Tensor> h;       // top-layer state per position
  std::vector<ad::Tensor> embedding;
  std::vector<ad::Tensor> index_embedding;
  std::vector<ad::Tensor> end_rep;      // pointer candidates
  std::vector<ad::Tensor> rel_src_rep;  // relation sources
  std::vector<ad::Tensor> copy_keys;    // copy_k(z_j) for positions 1..i
  ad::Tensor coverage;
  int next_index = 1;
  std::size_t emitted = 0;  // instrumented step counter
  bool finished = false;

  /// Emitted nodes excluding ROOT.
  std::size_t length() const { return nodes.size() - 1; }
};

/// What the previous relation feeds into the next target step.
struct RelationInput {
  std::size_t relation_row = 0;
  std::size_t source_position = 0;
};

struct StepOutput {
  ad::Tensor p_v;           // [V + n + i]
  ad::Tensor switch_probs;  // [3]: generate, encoder copy, decoder copy
  ad::Tensor vocab_logits;  // [V]
  ad::Tensor p_vocab;       // [V]
  ad::Tensor a_enc;         // [n]
  ad::Tensor a_dec;         // [i]; undefined when i = 0
  ad::Tensor context;
  ad::Tensor coverage_loss;  // scalar [1]
  std::size_t vocab_size = 0;
  std::size_t encoder_size = 0;
  std::size_t decoder_size = 0;
};

struct TargetChoice {
  Origin origin = Origin::kVocab;
  std::size_t id = 0;  // vocab id, token position, or node position (1-based)
};

/// Maps a position in P(v)'s support to its block.
TargetChoice choice_at(const StepOutput& out, std::size_t support_position);
std::size_t support_position(const StepOutput& out, const TargetChoice& c);
inline bool is_eos(const TargetChoice& c) { return c.origin == Origin::kVocab && c.id == kEosId; }

struct SourceOutput {
  ad::Tensor probs;  // over positions first..first+size-1
  ad::Tensor log_probs;
  std::size_t first = 0;
};

struct RelationOutput {
  ad::Tensor probs;  // over relation ids first..first+size-1
  ad::Tensor log_probs;
  std::size_t first = 0;
  bool forced = false;  // ROOT source: type fixed to "root"
};

DecoderState start_state(const TransducerModel& m, const EncodedSentence& enc);

/// Embeds the previous relation, attends, and gives P(v_{i+1}). Updates
/// coverage and the decoder-copy keys.
StepOutput target_node_step(const TransducerModel& m, const EncodedSentence& enc, DecoderState& state,
                            const RelationInput& in);

/// Node record for a decoded choice (new index for vocab/encoder origins).
EmittedNode describe_choice(const TransducerModel& m, const EncodedSentence& enc, const DecoderState& state,
                            const TargetChoice& c);

/// Embeds the node and advances the decoder LSTM by one position.
void push_node(const TransducerModel& m, DecoderState& state, EmittedNode node, bool train, std::mt19937_64& rng);

/// P(u) for the newest node over ROOT (first relation) or positions 1..i.
SourceOutput source_node_step(const TransducerModel& m, const DecoderState& state);

/// P(r) for the newest node hanging off position `source`.
RelationOutput relation_type_step(const TransducerModel& m, const DecoderState& state, std::size_t source);

/// Builds the relation tuple for the newest node.
Relation make_relation(const TransducerModel& m, const DecoderState& state, std::size_t source,
                       std::size_t relation_id);

}  // namespace arbor
