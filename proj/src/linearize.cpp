#include "arbor/linearize.hpp"

#include <algorithm>
#include <limits>

namespace arbor {

OrderingPolicy policy_for(Framework f) {
  switch (f) {
    case Framework::kAmr:
      return OrderingPolicy::kAlphanumeric;
    case Framework::kDm:
      return OrderingPolicy::kSurfaceOrder;
    case Framework::kUcca:
      return OrderingPolicy::kSourceOrder;
  }
  return OrderingPolicy::kSourceOrder;
}

Arborescence order_children(const Arborescence& a, OrderingPolicy policy) {
  Arborescence out = a;
  if (policy == OrderingPolicy::kSourceOrder) return out;
  auto anchor = [&](const ArborEdge& e) {
    const auto& n = out.nodes[e.child];
    return n.anchors.empty() ? std::numeric_limits<int>::max() : n.anchors.front().begin;
  };
  for (auto& n : out.nodes) {
    if (policy == OrderingPolicy::kAlphanumeric) {
      std::stable_sort(n.children.begin(), n.children.end(), [&](const ArborEdge& x, const ArborEdge& y) {
        if (x.label != y.label) return x.label < y.label;
        return out.nodes[x.child].label < out.nodes[y.child].label;
      });
    } else {
      std::stable_sort(n.children.begin(), n.children.end(),
                       [&](const ArborEdge& x, const ArborEdge& y) { return anchor(x) < anchor(y); });
    }
  }
  return out;
}

RelationSequence arbor_to_relations(const Arborescence& a, OrderingPolicy policy) {
  auto report = validate_arborescence(a);
  if (!report.ok()) throw ValidationError("arbor_to_relations: " + report.all().front());
  RelationSequence rs;
  if (a.empty()) return rs;
  const auto t = order_children(a, policy);
  std::vector<std::size_t> emitted_at(t.nodes.size(), 0);
  // Explicit stack pre-order; children pushed in reverse.
  struct Item {
    std::size_t node;
    std::size_t parent_pos;
    std::string relation;
    std::size_t parent_node;
  };
  std::vector<Item> stack{{0, 0, std::string(kRootRelation), 0}};
  while (!stack.empty()) {
    auto it = stack.back();
    stack.pop_back();
    const auto& n = t.nodes[it.node];
    Relation r;
    if (rs.relations.empty()) {
      r.source_label = std::string(kRootLabel);
      r.source_index = 0;
    } else {
      r.source_label = t.nodes[it.parent_node].label;
      r.source_index = t.nodes[it.parent_node].index;
    }
    r.relation = it.relation;
    r.target_label = n.label;
    r.target_index = n.index;
    r.source_position = it.parent_pos;
    r.target_anchors = n.anchors;
    rs.relations.push_back(std::move(r));
    emitted_at[it.node] = rs.relations.size();
    for (auto c = n.children.rbegin(); c != n.children.rend(); ++c)
      stack.push_back({c->child, emitted_at[it.node], c->label, it.node});
  }
  return rs;
}

std::size_t resolve_source(const std::vector<Relation>& prefix, const std::string& label, int index) {
  if (label == kRootLabel && index == 0) return 0;
  for (std::size_t k = prefix.size(); k > 0; --k)
    if (prefix[k - 1].target_label == label && prefix[k - 1].target_index == index) return k;
  throw ValidationError("dangling source (" + label + ", " + std::to_string(index) + ")");
}

Arborescence relations_to_arbor(const RelationSequence& rs) {
  Arborescence a;
  const auto& rel = rs.relations;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    const auto& r = rel[k];
    const bool from_root = r.source_label == kRootLabel && r.source_index == 0;
    if (k == 0) {
      if (!from_root) throw ValidationError("relations_to_arbor: first relation must hang off ROOT");
    } else if (from_root) {
      throw ValidationError("relations_to_arbor: second ROOT relation at position " + std::to_string(k + 1));
    }
    std::size_t parent = 0;
    if (k > 0) {
      if (r.source_position) {
        parent = *r.source_position;
        if (parent == 0 || parent > k || rel[parent - 1].target_label != r.source_label ||
            rel[parent - 1].target_index != r.source_index)
          throw ValidationError("relations_to_arbor: source position of relation " + std::to_string(k + 1) +
                                " does not match its source");
      } else {
        parent = resolve_source({rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(k)}, r.source_label,
                                r.source_index);
      }
    }
    auto pos = a.add_node(r.target_label, r.target_index, r.target_anchors);
    if (k > 0) a.add_child(parent - 1, r.relation, pos);
  }
  return a;
}

}  // namespace arbor
