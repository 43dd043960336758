// Tiny models and inputs for decoder, training and inference tests.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "arbor/decoder.hpp"
#include "arbor/encoder.hpp"
#include "arbor/model.hpp"
#include "support/generators.hpp"

namespace arbor::testing {

inline ModelConfig tiny_config(std::size_t scale = 8) {
  ModelConfig c;
  c.word_dim = scale;
  c.char_embed_dim = 4;
  c.char_channels = scale / 2;
  c.pos_dim = 4;
  c.feature_dim = 4;
  c.anonymization_dim = 3;
  c.encoder_hidden = scale;
  c.encoder_layers = 2;
  c.decoder_hidden = 2 * scale;
  c.decoder_layers = 2;
  c.index_dim = 4;
  c.index_rows = 16;
  c.relation_dim = 4;
  c.attention_dim = scale;
  c.biaffine_dim = scale;
  c.bilinear_dim = scale;
  c.dropout = 0.0;
  return c;
}

inline Vocabularies tiny_vocabs(const std::vector<std::string>& labels, const std::vector<std::string>& relations,
                                const std::vector<std::string>& words = {"Pierre", "Vinken", "expressed", "concern"},
                                const std::vector<std::string>& pos = {"NNP", "VBD", "NN"}) {
  Vocabularies v;
  for (const auto& l : labels) v.nodes.add(l);
  for (const auto& r : relations) v.relations.add(r);
  for (const auto& w : words) v.words.add(w);
  for (const auto& p : pos) v.pos.add(p);
  return v;
}

inline TransducerModel random_model(std::uint64_t seed, ModelConfig c = tiny_config()) {
  return TransducerModel(c, tiny_vocabs({"want", "boy", "go", "Pierre", "person"}, {"ARG0", "ARG1", "mod"}), seed);
}

/// Sentence over the tiny vocabulary plus unseen words.
inline EncoderInput random_input(std::mt19937_64& rng, std::size_t max_tokens = 5) {
  static const std::vector<std::string> words{"Pierre", "Vinken", "expressed", "concern", "boy", "zyzzyva"};
  static const std::vector<std::string> tags{"NNP", "VBD", "NN", "JJ"};
  EncoderInput in;
  const auto n = 1 + pick(rng, max_tokens);
  for (std::size_t t = 0; t < n; ++t) {
    in.sentence.tokens.push_back(words[pick(rng, words.size())]);
    in.sentence.pos.push_back(tags[pick(rng, tags.size())]);
  }
  return in;
}

/// Scales every parameter so random models produce peaked distributions.
inline void sharpen(TransducerModel& m, double factor) {
  for (auto t : m.params().tensors())
    for (double& x : t.mutable_value()) x *= factor;
}

}  // namespace arbor::testing
