// Reversible conversions between framework graphs and the unified
// arborescence, plus AMR sense stripping/restoration.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "arbor/graph.hpp"
#include "arbor/io.hpp"

namespace arbor::convert {

/// What a forward conversion did. Diagnostic only: the inverse conversions
/// work from the arborescence alone.
struct ConversionTrace {
  /// graph node id -> arborescence positions of its duplicated copies
  std::map<std::string, std::vector<std::size_t>> duplicates;
  /// DM edges that were reversed and given the inverse suffix
  std::vector<GraphEdge> reversed;
  /// DM component roots attached to the top by a null edge
  std::vector<std::string> null_attached;
  /// UCCA pre-terminal id -> its terminal ids, first terminal first
  std::map<std::string, std::vector<std::string>> collapsed;
  /// UCCA non-terminal id -> label it received
  std::map<std::string, std::string> added_labels;
};

Arborescence amr_to_arbor(const SemanticGraph& g, ConversionTrace* trace = nullptr);
SemanticGraph arbor_to_amr(const Arborescence& a);

Arborescence dm_to_arbor(const SemanticGraph& g, ConversionTrace* trace = nullptr);
SemanticGraph arbor_to_dm(const Arborescence& a);

Arborescence ucca_to_arbor(const SemanticGraph& g, ConversionTrace* trace = nullptr);
SemanticGraph arbor_to_ucca(const Arborescence& a);

/// Dispatch on g.framework.
Arborescence to_arbor(const SemanticGraph& g, ConversionTrace* trace = nullptr);
SemanticGraph from_arbor(const Arborescence& a, Framework f);

/// Per-lemma sense counts gathered from training graphs. The empty suffix
/// counts occurrences without a sense.
class SenseTable {
 public:
  void observe(const std::string& lemma, const std::string& suffix);
  /// Most frequent suffix for a lemma; "-01" for unseen plain-word lemmas;
  /// unchanged for unseen constants.
  std::string restore(const std::string& label) const;
  std::size_t count(const std::string& lemma, const std::string& suffix) const;

  io::Json to_json() const;
  static SenseTable from_json(const io::Json& j);

 private:
  std::map<std::string, std::map<std::string, std::size_t>> counts_;
};

/// Splits "express-01" into {"express", "-01"}; labels without a trailing
/// two-digit sense return an empty suffix.
std::pair<std::string, std::string> split_sense(const std::string& label);

/// Removes sense suffixes, recording each node's (lemma, suffix) in `table`
/// when given.
SemanticGraph strip_senses(const SemanticGraph& g, SenseTable* table = nullptr);
SemanticGraph restore_senses(const SemanticGraph& g, const SenseTable& table);

}  // namespace arbor::convert
