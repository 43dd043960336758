// Random structure generators shared by the fuzz tests.
#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "arbor/graph.hpp"

namespace arbor::testing {

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

/// Reachable AMR graph with reentrancies, cycles and repeated labels.
inline SemanticGraph random_amr(std::mt19937_64& rng, std::size_t max_nodes = 12) {
  static const std::vector<std::string> labels{"want-01", "boy", "girl", "go-02", "person", "\"Pierre\"", "-", "3"};
  static const std::vector<std::string> roles{"ARG0", "ARG1", "ARG2", "mod", "poss", "polarity"};
  SemanticGraph g;
  g.framework = Framework::kAmr;
  const auto n = 1 + pick(rng, max_nodes);
  for (std::size_t i = 0; i < n; ++i) g.nodes.push_back({"v" + std::to_string(i), labels[pick(rng, labels.size())], {}});
  for (std::size_t i = 1; i < n; ++i)
    g.edges.push_back({g.nodes[pick(rng, i)].id, g.nodes[i].id, roles[pick(rng, roles.size())]});
  const auto extra = pick(rng, n + 1);
  for (std::size_t k = 0; k < extra; ++k)
    g.edges.push_back({g.nodes[pick(rng, n)].id, g.nodes[pick(rng, n)].id, roles[pick(rng, roles.size())]});
  g.tops.push_back(g.nodes[0].id);
  // Shuffle storage so ids and order carry no information.
  std::shuffle(g.nodes.begin(), g.nodes.end(), rng);
  std::shuffle(g.edges.begin(), g.edges.end(), rng);
  return g;
}

/// DM-style graph: single-token anchors, up to 3 weak components, 0-2 tops,
/// no parallel edges or self-loops.
inline SemanticGraph random_dm(std::mt19937_64& rng, std::size_t max_nodes = 12) {
  static const std::vector<std::string> labels{"the", "cat", "sat", "on", "mat", "Pierre", "Vinken"};
  static const std::vector<std::string> roles{"ARG1", "ARG2", "BV", "compound", "loc"};
  SemanticGraph g;
  g.framework = Framework::kDm;
  const auto n = 1 + pick(rng, max_nodes);
  const auto ncomp = 1 + pick(rng, std::min<std::size_t>(3, n));
  std::vector<std::size_t> comp(n);
  for (std::size_t i = 0; i < n; ++i) comp[i] = i < ncomp ? i : pick(rng, ncomp);
  // Token positions: a random injective placement within 0..2n.
  std::vector<int> pos(2 * n);
  std::iota(pos.begin(), pos.end(), 0);
  std::shuffle(pos.begin(), pos.end(), rng);
  for (std::size_t i = 0; i < n; ++i)
    g.nodes.push_back({std::to_string(pos[i] + 1), labels[pick(rng, labels.size())], {Span{pos[i], pos[i] + 1}}});
  std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
  auto add = [&](std::size_t s, std::size_t t) {
    if (s == t || used[s][t]) return;
    used[s][t] = true;
    g.edges.push_back({g.nodes[s].id, g.nodes[t].id, roles[pick(rng, roles.size())]});
  };
  for (std::size_t c = 0; c < ncomp; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (comp[i] == c) members.push_back(i);
    for (std::size_t k = 1; k < members.size(); ++k) {
      auto other = members[pick(rng, k)];
      if (coin(rng, 0.5)) add(other, members[k]);
      else add(members[k], other);
    }
    const auto extra = pick(rng, members.size() + 1);
    for (std::size_t k = 0; k < extra; ++k) add(members[pick(rng, members.size())], members[pick(rng, members.size())]);
  }
  const auto ntops = pick(rng, 3);
  for (std::size_t k = 0; k < ntops; ++k) {
    const auto& id = g.nodes[pick(rng, n)].id;
    if (std::find(g.tops.begin(), g.tops.end(), id) == g.tops.end()) g.tops.push_back(id);
  }
  std::shuffle(g.edges.begin(), g.edges.end(), rng);
  return g;
}

/// UCCA-style foundational tree with terminals and remote edges.
inline SemanticGraph random_ucca(std::mt19937_64& rng, std::size_t max_units = 5, std::size_t max_tokens = 7) {
  static const std::vector<std::string> cats{"A", "E", "P", "C", "D", "H", "U"};
  static const std::vector<std::string> words{"Pierre", "Vinken", "expressed", "his", "concern", "."};
  SemanticGraph g;
  g.framework = Framework::kUcca;
  const auto units = 1 + pick(rng, max_units);
  for (std::size_t i = 0; i < units; ++i) g.nodes.push_back({"u" + std::to_string(i), "", {}});
  for (std::size_t i = 1; i < units; ++i)
    g.edges.push_back({g.nodes[pick(rng, i)].id, g.nodes[i].id, cats[pick(rng, cats.size())]});
  const auto tokens = 1 + pick(rng, max_tokens);
  for (std::size_t t = 0; t < tokens; ++t) {
    const int ti = static_cast<int>(t);
    g.nodes.push_back({"t" + std::to_string(t), words[pick(rng, words.size())], {Span{ti, ti + 1}}});
    g.edges.push_back({g.nodes[pick(rng, units)].id, g.nodes.back().id, std::string(kTerminalRelation)});
  }
  if (units > 1) {
    const auto remotes = pick(rng, 3);
    for (std::size_t k = 0; k < remotes; ++k) {
      auto s = pick(rng, units);
      auto t = 1 + pick(rng, units - 1);
      if (s != t) g.edges.push_back({g.nodes[s].id, g.nodes[t].id, "A"});
    }
  }
  g.tops.push_back("u0");
  return g;
}

/// Random index-coherent arborescence with duplicated (same label/index) leaves.
inline Arborescence random_arbor(std::mt19937_64& rng, std::size_t max_nodes = 15) {
  static const std::vector<std::string> labels{"a", "b", "c", "d"};
  static const std::vector<std::string> rels{"x", "y", "z"};
  Arborescence a;
  const auto n = 1 + pick(rng, max_nodes);
  std::vector<std::size_t> originals;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t pos;
    if (i > 0 && coin(rng, 0.25)) {
      const auto& o = a.nodes[originals[pick(rng, originals.size())]];
      pos = a.add_node(o.label, o.index, o.anchors);
    } else {
      std::vector<Span> anchors;
      if (coin(rng, 0.5)) {
        int b = static_cast<int>(pick(rng, 10));
        anchors.push_back({b, b + 1});
      }
      pos = a.add_node(labels[pick(rng, labels.size())], static_cast<int>(originals.size()) + 1, anchors);
      originals.push_back(pos);
    }
    if (i > 0) a.add_child(pick(rng, i), rels[pick(rng, rels.size())], pos);
  }
  return a;
}

}  // namespace arbor::testing
