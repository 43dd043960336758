// Greedy and beam decoding over semantic relations, and full parsing.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "arbor/decoder.hpp"
#include "arbor/graph.hpp"

namespace arbor {

struct DecodeResult {
  RelationSequence relations;
  double score = 0.0;      // Σ log P(u) + log P(r) + log P(v), EOS included
  bool truncated = false;  // EOS was forced at max_len
  std::size_t steps = 0;   // decoder positions advanced
};

/// argmax v, then u, then r; ties go to the lowest id. EOS is never chosen
/// before `min_len` relations (used to pin output length when timing).
DecodeResult greedy_decode(const TransducerModel& m, const EncoderInput& in, std::size_t max_len,
                           std::size_t min_len = 0);

/// Every live hypothesis expands its top-k targets, top-k sources and top-k
/// relation types; the k best candidates survive. k = 1 is greedy.
DecodeResult beam_decode(const TransducerModel& m, const EncoderInput& in, std::size_t beam_size,
                         std::size_t max_len);

struct DecodeOptions {
  std::size_t beam_size = 1;
  std::size_t max_len = 100;
  bool greedy = false;  // forces the greedy decoder regardless of beam size
};

struct ParseResult {
  SemanticGraph graph;
  Arborescence arbor;
  DecodeResult decode;
};

/// Decode, rebuild the arborescence, convert back to the framework and
/// restore AMR senses.
ParseResult parse(const TransducerModel& m, const EncoderInput& in, const DecodeOptions& opt);

}  // namespace arbor
