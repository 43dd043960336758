// Brute-force search over every output sequence of a micro-domain model.
#pragma once

#include <cmath>
#include <limits>

#include "arbor/decoder.hpp"
#include "support/models.hpp"

namespace arbor::testing {

/// Node labels {@eos@, @unk@, a}; non-root relation types {@unk@, x}.
inline TransducerModel micro_model(std::uint64_t seed) {
  auto c = tiny_config(4);
  c.encoder_layers = c.decoder_layers = 1;
  return TransducerModel(c, tiny_vocabs({"a"}, {"x"}, {"a", "b"}, {"A"}), seed);
}

inline EncoderInput micro_input(std::mt19937_64& rng) {
  static const std::vector<std::string> words{"a", "b", "c"};
  EncoderInput in;
  const auto n = 1 + pick(rng, 2);
  for (std::size_t t = 0; t < n; ++t) {
    in.sentence.tokens.push_back(words[pick(rng, words.size())]);
    in.sentence.pos.push_back("A");
  }
  return in;
}

struct BruteForceResult {
  double score = -std::numeric_limits<double>::infinity();
  std::vector<Relation> relations;
  std::size_t sequences = 0;
  std::size_t widest = 0;  // most partial sequences alive at one length
};

namespace detail {

inline void brute_force(const TransducerModel& m, const EncodedSentence& enc, DecoderState state,
                        const RelationInput& next, std::vector<Relation>& prefix, double score, std::size_t max_len,
                        BruteForceResult& best, std::vector<std::size_t>& alive) {
  static std::mt19937_64 rng(0);
  auto out = target_node_step(m, enc, state, next);
  const auto& pv = out.p_v.value();
  ++best.sequences;
  const double end = score + std::log(pv[kEosId]);
  if (end > best.score) {
    best.score = end;
    best.relations = prefix;
  }
  if (prefix.size() == max_len) return;
  for (std::size_t t = 1; t < pv.size(); ++t) {
    DecoderState st = state;
    push_node(m, st, describe_choice(m, enc, st, choice_at(out, t)), false, rng);
    auto src = source_node_step(m, st);
    for (std::size_t u = 0; u < src.probs.size(); ++u) {
      const auto j = src.first + u;
      auto rel = relation_type_step(m, st, j);
      for (std::size_t r = 0; r < rel.probs.size(); ++r) {
        const auto rid = rel.first + r;
        prefix.push_back(make_relation(m, st, j, rid));
        ++alive[prefix.size()];
        brute_force(m, enc, st, {rid, j}, prefix,
                    score + std::log(pv[t]) + src.log_probs[u] + rel.log_probs[r], max_len, best, alive);
        prefix.pop_back();
      }
    }
  }
}

}  // namespace detail

inline BruteForceResult brute_force_best(const TransducerModel& m, const EncoderInput& in, std::size_t max_len) {
  ad::NoGradScope ng;
  std::mt19937_64 rng(0);
  auto enc = prepare(m, in, false, rng);
  BruteForceResult best;
  std::vector<Relation> prefix;
  std::vector<std::size_t> alive(max_len + 1, 0);
  detail::brute_force(m, enc, start_state(m, enc), {}, prefix, 0.0, max_len, best, alive);
  for (auto a : alive) best.widest = std::max(best.widest, a);
  return best;
}

}  // namespace arbor::testing
