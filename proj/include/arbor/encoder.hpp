// Token embedding and BiLSTM encoding of an input sentence.
#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "arbor/io.hpp"
#include "arbor/model.hpp"

namespace arbor {

struct EncoderInput {
  io::Sentence sentence;
  /// Frozen per-token vectors [n][external_dim]; empty when the channel is off.
  std::vector<std::vector<double>> external;
  /// Framework of the expected output; decides copy labels. Falls back to
  /// the model's framework.
  std::optional<Framework> framework;

  std::size_t size() const { return sentence.size(); }
};

struct EncoderOutput {
  ad::Tensor states;                      // final layer, [n×2H]
  std::vector<ad::Tensor> layer_states;   // one [n×2H] per layer
  std::vector<nn::LstmState> decoder_init;  // h = [←s_1; →s_n], c = 0, per layer
};

/// Row id of a word: exact match, then lowercase, then unknown.
std::size_t word_id(const Vocabulary& words, const std::string& token);

/// [n×D] in the order word, external, chars, pos, features.
ad::Tensor embed_tokens(const TransducerModel& m, const EncoderInput& in, bool train, std::mt19937_64& rng);

EncoderOutput encode(const TransducerModel& m, const EncoderInput& in, bool train, std::mt19937_64& rng);

}  // namespace arbor
