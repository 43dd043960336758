#include <random>

#include "arbor/graph.hpp"
#include "doctest.h"
#include "support/brute_iso.hpp"
#include "support/generators.hpp"

using namespace arbor;

namespace {

SemanticGraph fig_amr() {
  SemanticGraph g;
  g.framework = Framework::kAmr;
  g.nodes = {{"e", "express-01", {}}, {"p", "person", {}}, {"c", "concern", {}}};
  g.edges = {{"e", "p", "ARG0"}, {"e", "c", "ARG1"}, {"c", "p", "poss"}};
  g.tops = {"e"};
  return g;
}

// Rebuild by pre-order; true iff every node is visited exactly once.
bool preorder_visits_once(const Arborescence& a) {
  if (a.empty()) return true;
  std::vector<int> seen(a.nodes.size(), 0);
  std::vector<std::size_t> stack{0};
  std::size_t steps = 0;
  while (!stack.empty() && steps <= a.nodes.size()) {
    auto n = stack.back();
    stack.pop_back();
    ++steps;
    if (seen[n]++) return false;
    for (const auto& c : a.nodes[n].children) stack.push_back(c.child);
  }
  return stack.empty() && std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
}

}  // namespace

TEST_CASE("validate: single node") {
  Arborescence a;
  a.add_node("a", 1);
  CHECK(validate_arborescence(a).ok());
}

TEST_CASE("validate: legal duplicated reentrancy") {
  Arborescence a;
  auto r = a.add_node("A", 1);
  a.add_child(r, "arg0", a.add_node("B", 2));
  a.add_child(r, "arg1", a.add_node("B", 2));
  CHECK(validate_arborescence(a).ok());
}

TEST_CASE("validate: index shared by different labels") {
  Arborescence a;
  auto r = a.add_node("A", 1);
  a.add_child(r, "x", a.add_node("B", 2));
  a.add_child(r, "y", a.add_node("C", 2));
  auto rep = validate_arborescence(a);
  CHECK(rep.index_coherence.size() == 1);
  CHECK(rep.tree_shape.empty());
  CHECK(rep.index_positivity.empty());
}

TEST_CASE("validate: shape and positivity violations") {
  Arborescence a;
  auto r = a.add_node("A", 1);
  auto b = a.add_node("B", 0);
  a.add_child(r, "x", b);
  a.add_child(r, "y", b);  // two parents
  auto rep = validate_arborescence(a);
  CHECK_FALSE(rep.tree_shape.empty());
  CHECK(rep.index_positivity.size() == 1);
}

TEST_CASE("validate agrees with pre-order reconstruction on random parent maps") {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 2000; ++it) {
    Arborescence a;
    const auto n = 1 + testing::pick(rng, 6);
    for (std::size_t i = 0; i < n; ++i) a.add_node("x", static_cast<int>(i) + 1);
    const auto edges = testing::pick(rng, n + 1);
    for (std::size_t k = 0; k < edges; ++k) a.add_child(testing::pick(rng, n), "r", testing::pick(rng, n));
    CHECK(validate_arborescence(a).tree_shape.empty() == preorder_visits_once(a));
  }
}

TEST_CASE("isomorphism: reflexive and id-renaming invariant") {
  auto g = fig_amr();
  CHECK(graph_isomorphic(g, g));
  auto h = g;
  for (auto& n : h.nodes) n.id = n.id == "p" ? "c" : n.id == "c" ? "p" : n.id;
  for (auto& e : h.edges) {
    for (auto* s : {&e.source, &e.target}) *s = *s == "p" ? "c" : *s == "c" ? "p" : *s;
  }
  CHECK(graph_isomorphic(g, h));
}

TEST_CASE("isomorphism: one edge label changed") {
  auto g = fig_amr();
  auto h = g;
  h.edges[2].label = "mod";
  CHECK_FALSE(graph_isomorphic(g, h));
  CHECK_FALSE(testing::brute_isomorphic(g, h));
}

TEST_CASE("isomorphism: framework mismatch throws") {
  auto g = fig_amr();
  auto h = g;
  h.framework = Framework::kDm;
  CHECK_THROWS_AS(graph_isomorphic(g, h), ValidationError);
}

TEST_CASE("isomorphism agrees with exhaustive search on small graphs") {
  std::mt19937_64 rng(11);
  static const std::vector<std::string> labels{"a", "a", "b"};
  static const std::vector<std::string> rels{"r", "s"};
  int positives = 0;
  for (int it = 0; it < 3000; ++it) {
    auto make = [&] {
      SemanticGraph g;
      g.framework = Framework::kDm;  // no AMR connectivity requirement
      const auto n = 1 + testing::pick(rng, 6);
      for (std::size_t i = 0; i < n; ++i) g.nodes.push_back({"n" + std::to_string(i), labels[testing::pick(rng, 3)], {}});
      const auto m = testing::pick(rng, 7);
      for (std::size_t k = 0; k < m; ++k)
        g.edges.push_back({g.nodes[testing::pick(rng, n)].id, g.nodes[testing::pick(rng, n)].id, rels[testing::pick(rng, 2)]});
      if (testing::coin(rng, 0.5)) g.tops.push_back(g.nodes[testing::pick(rng, n)].id);
      return g;
    };
    auto g = make();
    SemanticGraph h;
    if (testing::coin(rng, 0.5)) {
      // Relabel ids and shuffle, then maybe perturb one thing.
      h = g;
      std::vector<std::size_t> perm(h.nodes.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      auto rename = [&](std::string& id) { id = "m" + std::to_string(perm[std::stoul(id.substr(1))]); };
      for (auto& n : h.nodes) rename(n.id);
      for (auto& e : h.edges) rename(e.source), rename(e.target);
      for (auto& t : h.tops) rename(t);
      std::shuffle(h.nodes.begin(), h.nodes.end(), rng);
      std::shuffle(h.edges.begin(), h.edges.end(), rng);
      if (!h.edges.empty() && testing::coin(rng, 0.4)) {
        auto& e = h.edges[testing::pick(rng, h.edges.size())];
        e.target = h.nodes[testing::pick(rng, h.nodes.size())].id;
      }
    } else {
      h = make();
    }
    const bool brute = testing::brute_isomorphic(g, h);
    positives += brute;
    REQUIRE(graph_isomorphic(g, h) == brute);
    CHECK(graph_isomorphic(h, g) == brute);
  }
  CHECK(positives > 500);
}

TEST_CASE("framework invariants") {
  auto g = fig_amr();
  CHECK(g.violations().empty());
  g.tops.push_back("p");
  CHECK_FALSE(g.violations().empty());

  SemanticGraph d;
  d.framework = Framework::kDm;
  d.nodes = {{"1", "a", {{0, 1}}}, {"2", "b", {{0, 1}}}};
  CHECK_FALSE(d.violations().empty());  // two nodes on one token

  SemanticGraph dup = fig_amr();
  dup.nodes.push_back({"e", "x", {}});
  CHECK_FALSE(dup.violations().empty());
  SemanticGraph dangling = fig_amr();
  dangling.edges.push_back({"e", "zz", "ARG2"});
  CHECK_FALSE(dangling.violations().empty());
}

TEST_CASE("structural equality ignores storage order") {
  Arborescence a;
  auto r = a.add_node("R", 1);
  auto b = a.add_node("B", 2);
  auto c = a.add_node("C", 3);
  a.add_child(r, "x", b);
  a.add_child(b, "y", c);

  Arborescence s;  // same tree, children stored before their parents
  auto sr = s.add_node("R", 1);
  auto sc = s.add_node("C", 3);
  auto sb = s.add_node("B", 2);
  s.add_child(sr, "x", sb);
  s.add_child(sb, "y", sc);
  CHECK(structurally_equal(a, s));
  s.nodes[sc].label = "D";
  CHECK_FALSE(structurally_equal(a, s));
}
