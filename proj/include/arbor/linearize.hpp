// Arborescence <-> relation sequence.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "arbor/graph.hpp"

namespace arbor {

enum class OrderingPolicy { kAlphanumeric, kSurfaceOrder, kSourceOrder };

OrderingPolicy policy_for(Framework f);

/// Copy of `a` with every child list sorted under `policy` (stable).
Arborescence order_children(const Arborescence& a, OrderingPolicy policy);

/// Pre-order linearization after ordering children. The first relation hangs
/// off ROOT ("@root@", 0) with relation type "root".
RelationSequence arbor_to_relations(const Arborescence& a, OrderingPolicy policy);

/// Rebuilds the arborescence. Uses each relation's source_position when set,
/// otherwise the latest matching earlier target.
Arborescence relations_to_arbor(const RelationSequence& rs);

/// Position (0 = ROOT, k = target of relations[k-1]) of the latest target in
/// `prefix` with the given label and index.
std::size_t resolve_source(const std::vector<Relation>& prefix, const std::string& label, int index);

}  // namespace arbor
