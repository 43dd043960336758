#include <random>

#include "arbor/convert.hpp"
#include "arbor/io.hpp"
#include "doctest.h"
#include "support/brute_iso.hpp"
#include "support/generators.hpp"

using namespace arbor;
using namespace arbor::convert;

namespace {

std::vector<const ArborNode*> with_label(const Arborescence& a, const std::string& label) {
  std::vector<const ArborNode*> out;
  for (const auto& n : a.nodes)
    if (n.label == label) out.push_back(&n);
  return out;
}

std::size_t edges_labeled(const Arborescence& a, const std::string& label) {
  std::size_t k = 0;
  for (const auto& n : a.nodes)
    for (const auto& e : n.children) k += e.label == label;
  return k;
}

SemanticGraph dm(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges, std::vector<std::string> tops) {
  SemanticGraph g;
  g.framework = Framework::kDm;
  g.nodes = std::move(nodes);
  g.edges = std::move(edges);
  g.tops = std::move(tops);
  return g;
}

GraphNode tok(int t, std::string label) { return {std::to_string(t + 1), std::move(label), {{t, t + 1}}}; }

}  // namespace

// ------------------------------------------------------------------ AMR

TEST_CASE("amr: reentrant person duplicated with index 2") {
  auto g = io::read_penman("(e / express-01 :ARG0 (p / person) :ARG1 (c / concern :poss p))");
  ConversionTrace trace;
  auto a = amr_to_arbor(g, &trace);
  CHECK(validate_arborescence(a).ok());
  auto persons = with_label(a, "person");
  REQUIRE(persons.size() == 2);
  CHECK(persons[0]->index == 2);
  CHECK(persons[1]->index == 2);
  CHECK(a.nodes[0].label == "express-01");
  CHECK(a.nodes[0].index == 1);
  CHECK(trace.duplicates.at("p").size() == 1);
  auto back = arbor_to_amr(a);
  CHECK(back.nodes.size() == 3);
  CHECK(graph_isomorphic(back, g));
}

TEST_CASE("amr: chain has no duplicates") {
  auto g = io::read_penman("(a / a :r (b / b :r (c / c)))");
  auto a = amr_to_arbor(g);
  REQUIRE(a.nodes.size() == 3);
  std::vector<int> idx;
  for (auto p : a.preorder()) idx.push_back(a.nodes[p].index);
  CHECK(idx == std::vector<int>{1, 2, 3});
  auto back = arbor_to_amr(a);
  CHECK(back.nodes.size() == 3);
  CHECK(back.edges.size() == 2);
}

TEST_CASE("amr: k incoming edges give k-1 copies") {
  auto g = io::read_penman("(r / r :a (x / x) :b (y / y :c x) :d (z / z :e x))");
  ConversionTrace trace;
  auto a = amr_to_arbor(g, &trace);
  const auto indeg = g.in_degree()[g.at("x")];
  CHECK(with_label(a, "x").size() == indeg);
  CHECK(trace.duplicates.at("x").size() == indeg - 1);
}

TEST_CASE("amr: errors") {
  SemanticGraph g;
  g.framework = Framework::kAmr;
  g.nodes = {{"a", "a", {}}, {"b", "b", {}}};
  g.edges = {{"b", "a", "r"}};
  g.tops = {"a"};
  CHECK_THROWS_AS(amr_to_arbor(g), ValidationError);  // b unreachable
  g.tops = {"a", "b"};
  CHECK_THROWS_AS(amr_to_arbor(g), ValidationError);
  Arborescence bad;
  auto r = bad.add_node("a", 1);
  bad.add_child(r, "x", bad.add_node("b", 1));
  CHECK_THROWS_AS(arbor_to_amr(bad), ValidationError);
}

TEST_CASE("amr: fuzzed round trip") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 500; ++i) {
    auto g = testing::random_amr(rng);
    auto a = amr_to_arbor(g);
    REQUIRE(validate_arborescence(a).ok());
    auto back = arbor_to_amr(a);
    REQUIRE(graph_isomorphic(back, g));
    if (g.nodes.size() <= 6) CHECK(testing::brute_isomorphic(back, g));
  }
}

// ------------------------------------------------------------------ DM

TEST_CASE("dm: single edge from top") {
  auto g = dm({tok(0, "a"), tok(1, "b")}, {{"1", "2", "ARG1"}}, {"1"});
  ConversionTrace trace;
  auto a = dm_to_arbor(g, &trace);
  REQUIRE(a.nodes.size() == 2);
  CHECK(a.nodes[0].label == "a");
  REQUIRE(a.nodes[0].children.size() == 1);
  CHECK(a.nodes[0].children[0].label == "ARG1");
  CHECK(trace.reversed.empty());
  CHECK(trace.null_attached.empty());
  CHECK(graph_isomorphic(arbor_to_dm(a), g));
}

TEST_CASE("dm: two parents into c reverses one edge") {
  // a -> c <- b, a top. b is reachable only against an edge.
  auto g = dm({tok(0, "a"), tok(1, "b"), tok(2, "c")}, {{"1", "3", "ARG1"}, {"2", "3", "ARG2"}}, {"1"});
  ConversionTrace trace;
  auto a = dm_to_arbor(g, &trace);
  CHECK(validate_arborescence(a).ok());
  CHECK(edges_labeled(a, "ARG2-of") == 1);
  REQUIRE(trace.reversed.size() == 1);
  CHECK(trace.reversed[0].label == "ARG2");
  // c under a, b under c via the reversed edge.
  CHECK(a.nodes[0].label == "a");
  const auto& c = a.nodes[a.nodes[0].children[0].child];
  CHECK(c.label == "c");
  REQUIRE(c.children.size() == 1);
  CHECK(c.children[0].label == "ARG2-of");
  CHECK(a.nodes[c.children[0].child].label == "b");
  CHECK(graph_isomorphic(arbor_to_dm(a), g));
}

TEST_CASE("dm: components joined by null edges") {
  // Pierre Vinken expressed concern: two fragments, express is top.
  auto g = dm({tok(0, "Pierre"), tok(1, "Vinken"), tok(2, "expressed"), tok(3, "concern")},
              {{"2", "1", "compound"}, {"3", "4", "ARG2"}}, {"3"});
  ConversionTrace trace;
  auto a = dm_to_arbor(g, &trace);
  CHECK(a.nodes[0].label == "expressed");
  CHECK(edges_labeled(a, "null") == 1);
  CHECK(trace.null_attached == std::vector<std::string>{"2"});
  CHECK(graph_isomorphic(arbor_to_dm(a), g));
}

TEST_CASE("dm: only null edges") {
  Arborescence a;
  auto r = a.add_node("x", 1, {{0, 1}});
  a.add_child(r, "null", a.add_node("y", 2, {{1, 2}}));
  a.add_child(r, "null", a.add_node("z", 3, {{2, 3}}));
  auto g = arbor_to_dm(a);
  CHECK(g.nodes.size() == 3);
  CHECK(g.edges.empty());
  CHECK(g.weak_components().size() == 3);
}

TEST_CASE("dm: no tops and several tops") {
  auto none = dm({tok(0, "a"), tok(1, "b"), tok(2, "c")}, {{"2", "1", "r"}, {"2", "3", "r"}}, {});
  auto a = dm_to_arbor(none);
  CHECK(a.nodes[0].label == std::string(kRootLabel));
  CHECK(a.nodes[a.nodes[0].children[0].child].label == "b");  // max out-degree
  CHECK(graph_isomorphic(arbor_to_dm(a), none));

  auto many = dm({tok(0, "a"), tok(1, "b"), tok(2, "c")}, {{"1", "2", "r"}}, {"1", "3", "2"});
  auto m = dm_to_arbor(many);
  CHECK(edges_labeled(m, std::string(kExtraTopRelation)) == 2);
  CHECK(graph_isomorphic(arbor_to_dm(m), many));
}

TEST_CASE("dm: empty-base inverse label") {
  Arborescence a;
  auto r = a.add_node("x", 1, {{0, 1}});
  a.add_child(r, "-of", a.add_node("y", 2, {{1, 2}}));
  CHECK_THROWS_AS(arbor_to_dm(a), ValidationError);
}

TEST_CASE("dm: fuzzed round trip and edge accounting") {
  std::mt19937_64 rng(33);
  for (int i = 0; i < 500; ++i) {
    auto g = testing::random_dm(rng);
    ConversionTrace trace;
    auto a = dm_to_arbor(g, &trace);
    REQUIRE(validate_arborescence(a).ok());
    std::size_t inverse = 0, plain = 0;
    for (const auto& n : a.nodes)
      for (const auto& e : n.children) {
        if (e.label.ends_with("-of")) ++inverse;
        else if (e.label != "null" && e.label != std::string(kExtraTopRelation)) ++plain;
      }
    CHECK(inverse == trace.reversed.size());
    CHECK(inverse + plain == g.edges.size());
    auto back = arbor_to_dm(a);
    REQUIRE(graph_isomorphic(back, g));
    if (g.nodes.size() <= 6) CHECK(testing::brute_isomorphic(back, g));
  }
}

// ------------------------------------------------------------------ UCCA

namespace {

SemanticGraph ucca_fig() {
  // root -H-> scene; scene -A-> P(Pierre Vinken); scene -P-> expressed
  SemanticGraph g;
  g.framework = Framework::kUcca;
  g.nodes = {{"r", "", {}},         {"s", "", {}},       {"p", "", {}},
             {"x", "", {}},         {"t0", "Pierre", {{0, 1}}}, {"t1", "Vinken", {{1, 2}}},
             {"t2", "expressed", {{2, 3}}}};
  g.edges = {{"r", "s", "H"},          {"s", "p", "A"},          {"s", "x", "P"},
             {"p", "t0", "Terminal"}, {"p", "t1", "Terminal"}, {"x", "t2", "Terminal"}};
  g.tops = {"r"};
  return g;
}

}  // namespace

TEST_CASE("ucca: pre-terminal collapse with phrase edge") {
  auto g = ucca_fig();
  ConversionTrace trace;
  auto a = ucca_to_arbor(g, &trace);
  CHECK(validate_arborescence(a).ok());
  CHECK(a.nodes[0].label == std::string(kRootLabel));
  auto pierre = with_label(a, "Pierre");
  REQUIRE(pierre.size() == 1);
  REQUIRE(pierre[0]->children.size() == 1);
  CHECK(pierre[0]->children[0].label == "phrase");
  CHECK(a.nodes[pierre[0]->children[0].child].label == "Vinken");
  auto scene = with_label(a, "H");
  REQUIRE(scene.size() == 1);  // non-terminal labeled by its incoming edge
  CHECK(trace.added_labels.at("s") == "H");
  CHECK(trace.collapsed.at("p") == std::vector<std::string>{"t0", "t1"});
  // single-terminal pre-terminal: collapse only
  auto expressed = with_label(a, "expressed");
  REQUIRE(expressed.size() == 1);
  CHECK(expressed[0]->children.empty());
  CHECK(edges_labeled(a, "phrase") == 1);
  CHECK(graph_isomorphic(arbor_to_ucca(a), g));
}

TEST_CASE("ucca: phrase under unanchored node") {
  Arborescence a;
  auto r = a.add_node("@root@", 1);
  a.add_child(r, "phrase", a.add_node("w", 2, {{0, 1}}));
  CHECK_THROWS_AS(arbor_to_ucca(a), ValidationError);
}

TEST_CASE("ucca: terminal without anchor") {
  auto g = ucca_fig();
  g.nodes[4].anchors.clear();
  CHECK_THROWS_AS(ucca_to_arbor(g), ValidationError);
}

TEST_CASE("ucca: fuzzed round trip") {
  std::mt19937_64 rng(44);
  for (int i = 0; i < 500; ++i) {
    auto g = testing::random_ucca(rng);
    auto a = ucca_to_arbor(g);
    REQUIRE(validate_arborescence(a).ok());
    auto back = arbor_to_ucca(a);
    REQUIRE(graph_isomorphic(back, g));
  }
}

TEST_CASE("dispatch") {
  std::mt19937_64 rng(2);
  auto g = testing::random_dm(rng);
  CHECK(graph_isomorphic(from_arbor(to_arbor(g), Framework::kDm), g));
}

// ------------------------------------------------------------------ senses

TEST_CASE("senses: strip and restore") {
  CHECK(split_sense("express-01") == std::pair<std::string, std::string>{"express", "-01"});
  CHECK(split_sense("person").second.empty());
  CHECK(split_sense("-").second.empty());

  SenseTable table;
  for (int i = 0; i < 5; ++i) table.observe("express", "-01");
  table.observe("express", "-02");
  table.observe("person", "");
  CHECK(table.restore("express") == "express-01");
  CHECK(table.restore("person") == "person");
  CHECK(table.restore("want") == "want-01");
  CHECK(table.restore("\"Pierre\"") == "\"Pierre\"");
  CHECK(table.restore("3") == "3");

  auto g = io::read_penman("(e / express-01 :ARG0 (p / person))");
  SenseTable t2;
  auto stripped = strip_senses(g, &t2);
  CHECK(stripped.nodes[0].label == "express");
  CHECK(stripped.nodes[1].label == "person");
  CHECK(t2.count("express", "-01") == 1);
  CHECK(graph_isomorphic(restore_senses(stripped, t2), g));
  CHECK(SenseTable::from_json(t2.to_json()).count("person", "") == 1);
}
