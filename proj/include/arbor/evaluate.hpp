// Scoring: labeled triple F1, Smatch, relation F1, validity audit and
// decoding speed.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "arbor/encoder.hpp"
#include "arbor/graph.hpp"
#include "arbor/io.hpp"
#include "arbor/model.hpp"

namespace arbor {

struct F1Report {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t matched = 0;
  std::size_t gold = 0;
  std::size_t pred = 0;

  static F1Report from_counts(std::size_t matched, std::size_t gold, std::size_t pred);
  /// Micro-average.
  F1Report& operator+=(const F1Report& o);
  io::Json to_json() const;
};

/// (source anchors, label, target anchors) multisets plus one triple per
/// top. Unanchored UCCA units are identified by their terminal yield.
F1Report labeled_triple_f1(const SemanticGraph& gold, const SemanticGraph& pred);

enum class SmatchMode { kExact, kHillClimb };

struct SmatchOptions {
  SmatchMode mode = SmatchMode::kHillClimb;
  std::size_t restarts = 4;
  std::uint64_t seed = 1;
  bool include_tops = true;
  std::size_t exact_limit = 10;
};

/// Instance, relation and top triples maximized over a variable mapping.
F1Report smatch_score(const SemanticGraph& gold, const SemanticGraph& pred, const SmatchOptions& opt = {});

/// Smatch for AMR, labeled triple F1 otherwise.
F1Report graph_score(const SemanticGraph& gold, const SemanticGraph& pred, const SmatchOptions& opt = {});

/// Micro F1 over (source label, source index, relation, target label,
/// target index) tuples.
F1Report relation_f1(const std::vector<RelationSequence>& gold, const std::vector<RelationSequence>& pred);

struct ValidityAudit {
  std::size_t graphs = 0;
  std::size_t invalid = 0;
  std::vector<std::string> examples;  // first few offending nodes
  std::optional<double> rate() const {
    if (graphs == 0) return std::nullopt;
    return static_cast<double>(invalid) / static_cast<double>(graphs);
  }
  io::Json to_json() const;
};

std::set<std::string> default_functional_labels(Framework f);

/// A graph is invalid when a node has two outgoing edges with the same
/// functional label.
ValidityAudit validity_audit(const std::vector<SemanticGraph>& graphs, const std::set<std::string>& functional);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct SpeedReport {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  double greedy_seconds = 0.0;
  double beam_seconds = 0.0;
  double greedy_tokens_per_sec = 0.0;
  double beam_tokens_per_sec = 0.0;
  std::size_t beam_size = 0;
  /// Greedy decode time against emitted node count.
  LinearFit fit;
  std::size_t total_steps = 0;
  std::size_t total_relations = 0;
  io::Json to_json() const;
};

SpeedReport speed_bench(const TransducerModel& m, const std::vector<EncoderInput>& inputs, std::size_t beam_size,
                        std::size_t max_len);

}  // namespace arbor
