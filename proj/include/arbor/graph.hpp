// Core graph types: framework semantic graphs, unified arborescences and
// relation sequences.
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace arbor {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input or a violated precondition on a structure.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// File system / stream failures.
class IoError : public Error {
 public:
  using Error::Error;
};

enum class Framework { kAmr, kDm, kUcca };

std::string_view framework_name(Framework f);
Framework parse_framework(std::string_view name);

/// Half-open token span [begin, end).
struct Span {
  int begin = 0;
  int end = 0;
  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

// Reserved labels shared across conversion, linearization and decoding.
inline constexpr std::string_view kRootLabel = "@root@";
inline constexpr std::string_view kRootRelation = "root";
inline constexpr std::string_view kNullRelation = "null";
inline constexpr std::string_view kPhraseRelation = "phrase";
inline constexpr std::string_view kTerminalRelation = "Terminal";
inline constexpr std::string_view kInverseSuffix = "-of";
inline constexpr std::string_view kExtraTopRelation = "@top@";

struct GraphNode {
  std::string id;
  std::string label;
  std::vector<Span> anchors;
};

struct GraphEdge {
  std::string source;
  std::string target;
  std::string label;
};

class SemanticGraph {
 public:
  Framework framework = Framework::kAmr;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  std::vector<std::string> tops;

  /// Position of a node id in `nodes`, or nullopt.
  std::optional<std::size_t> find(std::string_view id) const;
  /// Position of a node id; throws ValidationError if missing.
  std::size_t at(std::string_view id) const;

  std::vector<std::size_t> out_degree() const;
  std::vector<std::size_t> in_degree() const;

  /// Structural invariants (unique ids, edge endpoints, nonempty labels,
  /// plus the framework-specific rules). Empty result iff valid.
  std::vector<std::string> violations() const;
  void validate() const;

  /// Weakly connected components as lists of node positions, each sorted,
  /// components ordered by their smallest member.
  std::vector<std::vector<std::size_t>> weak_components() const;
};

struct ArborEdge {
  std::string label;
  std::size_t child = 0;  // position in Arborescence::nodes
};

struct ArborNode {
  std::string label;
  int index = 0;
  std::vector<Span> anchors;
  std::vector<ArborEdge> children;
};

/// Rooted ordered tree stored flat; nodes[0] is the root. An empty node list
/// is the empty arborescence.
struct Arborescence {
  std::vector<ArborNode> nodes;

  bool empty() const { return nodes.empty(); }
  std::size_t add_node(std::string label, int index, std::vector<Span> anchors = {});
  void add_child(std::size_t parent, std::string label, std::size_t child);
  std::size_t edge_count() const;
  /// Node positions in pre-order (children in stored order).
  std::vector<std::size_t> preorder() const;
};

/// Ordered structural equality from the root: labels, indices, anchors, edge
/// labels and child order. Storage order is irrelevant.
bool structurally_equal(const Arborescence& a, const Arborescence& b);

struct ValidationReport {
  std::vector<std::string> tree_shape;
  std::vector<std::string> index_coherence;
  std::vector<std::string> index_positivity;

  bool ok() const {
    return tree_shape.empty() && index_coherence.empty() && index_positivity.empty();
  }
  std::vector<std::string> all() const;
};

ValidationReport validate_arborescence(const Arborescence& a);

/// <u, d_u, r, v, d_v> plus bookkeeping the decoder needs. `source_position`
/// is the position (0 = ROOT, k = k-th relation's target) of the actual
/// parent when known; `target_anchors` carries token anchors of the target.
struct Relation {
  std::string source_label;
  int source_index = 0;
  std::string relation;
  std::string target_label;
  int target_index = 0;
  std::optional<std::size_t> source_position;
  std::vector<Span> target_anchors;

  /// Compares the five tuple fields only.
  bool same_tuple(const Relation& o) const {
    return source_label == o.source_label && source_index == o.source_index &&
           relation == o.relation && target_label == o.target_label &&
           target_index == o.target_index;
  }
  friend bool operator==(const Relation&, const Relation&) = default;
};

struct RelationSequence {
  std::vector<Relation> relations;
  /// relations[0] hangs off the ROOT pseudo-node (always true when nonempty).
  bool starts_at_root = true;
  /// The sequence is closed by an EOS target.
  bool eos_terminated = false;

  friend bool operator==(const RelationSequence&, const RelationSequence&) = default;
};

/// True iff a bijection on nodes preserves labels, anchors, edge labels (as
/// a multiset) and tops. Throws ValidationError on framework mismatch.
bool graph_isomorphic(const SemanticGraph& g1, const SemanticGraph& g2);

}  // namespace arbor
