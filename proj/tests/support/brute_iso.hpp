// Exhaustive isomorphism check: tries every node bijection. Small graphs only.
#pragma once

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "arbor/graph.hpp"

namespace arbor::testing {

inline bool brute_isomorphic(const SemanticGraph& a, const SemanticGraph& b) {
  if (a.nodes.size() != b.nodes.size() || a.edges.size() != b.edges.size() || a.tops.size() != b.tops.size())
    return false;
  const auto n = a.nodes.size();
  using E = std::tuple<std::size_t, std::size_t, std::string>;
  std::multiset<E> eb;
  for (const auto& e : b.edges) eb.insert({b.at(e.source), b.at(e.target), e.label});
  std::set<std::size_t> tb;
  for (const auto& t : b.tops) tb.insert(b.at(t));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i)
      ok = a.nodes[i].label == b.nodes[perm[i]].label && a.nodes[i].anchors == b.nodes[perm[i]].anchors;
    if (!ok) continue;
    std::set<std::size_t> ta;
    for (const auto& t : a.tops) ta.insert(perm[a.at(t)]);
    if (ta != tb) continue;
    std::multiset<E> ea;
    for (const auto& e : a.edges) ea.insert({perm[a.at(e.source)], perm[a.at(e.target)], e.label});
    if (ea == eb) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

}  // namespace arbor::testing
