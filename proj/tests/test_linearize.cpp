#include <random>

#include "arbor/convert.hpp"
#include "arbor/linearize.hpp"
#include "doctest.h"
#include "support/generators.hpp"

using namespace arbor;

namespace {

Arborescence three() {
  Arborescence a;
  auto r = a.add_node("R", 1);
  a.add_child(r, "y", a.add_node("C", 3));
  a.add_child(r, "x", a.add_node("B", 2));
  return a;
}

Relation rel(std::string u, int du, std::string r, std::string v, int dv) {
  return Relation{std::move(u), du, std::move(r), std::move(v), dv, std::nullopt, {}};
}

}  // namespace

TEST_CASE("pre-order with alphanumeric policy") {
  auto rs = arbor_to_relations(three(), OrderingPolicy::kAlphanumeric);
  REQUIRE(rs.relations.size() == 3);
  CHECK(rs.relations[0].same_tuple(rel("@root@", 0, "root", "R", 1)));
  CHECK(rs.relations[1].same_tuple(rel("R", 1, "x", "B", 2)));
  CHECK(rs.relations[2].same_tuple(rel("R", 1, "y", "C", 3)));
  CHECK(structurally_equal(relations_to_arbor(rs), order_children(three(), OrderingPolicy::kAlphanumeric)));
}

TEST_CASE("single node and ARG ordering") {
  Arborescence one;
  one.add_node("a", 1);
  CHECK(arbor_to_relations(one, OrderingPolicy::kAlphanumeric).relations.size() == 1);

  Arborescence a;
  auto r = a.add_node("want-01", 1);
  a.add_child(r, "ARG1", a.add_node("go-02", 2));
  a.add_child(r, "ARG0", a.add_node("boy", 3));
  auto rs = arbor_to_relations(a, OrderingPolicy::kAlphanumeric);
  CHECK(rs.relations[1].relation == "ARG0");
  CHECK(arbor_to_relations(a, OrderingPolicy::kSourceOrder).relations[1].relation == "ARG1");
}

TEST_CASE("surface order puts unanchored children last") {
  Arborescence a;
  auto r = a.add_node("r", 1, {{5, 6}});
  a.add_child(r, "a", a.add_node("x", 2));
  a.add_child(r, "b", a.add_node("y", 3, {{4, 5}}));
  a.add_child(r, "c", a.add_node("z", 4, {{1, 2}}));
  auto rs = arbor_to_relations(a, OrderingPolicy::kSurfaceOrder);
  CHECK(rs.relations[1].target_label == "z");
  CHECK(rs.relations[2].target_label == "y");
  CHECK(rs.relations[3].target_label == "x");
}

TEST_CASE("dangling source and double root") {
  RelationSequence rs;
  rs.relations = {rel("@root@", 0, "root", "R", 1), rel("Q", 9, "x", "B", 2)};
  CHECK_THROWS_WITH_AS(relations_to_arbor(rs), doctest::Contains("dangling"), ValidationError);
  rs.relations = {rel("@root@", 0, "root", "R", 1), rel("@root@", 0, "root", "B", 2)};
  CHECK_THROWS_AS(relations_to_arbor(rs), ValidationError);
  rs.relations = {rel("R", 1, "x", "B", 2)};
  CHECK_THROWS_AS(relations_to_arbor(rs), ValidationError);
}

TEST_CASE("resolve_source picks latest occurrence") {
  std::vector<Relation> prefix{rel("@root@", 0, "root", "A", 1), rel("A", 1, "r", "B", 2), rel("B", 2, "s", "A", 1)};
  CHECK(resolve_source(prefix, "A", 1) == 3);
  CHECK(resolve_source(prefix, "B", 2) == 2);
  CHECK(resolve_source(prefix, "@root@", 0) == 0);
  CHECK_THROWS_AS(resolve_source(prefix, "Z", 7), ValidationError);
}

TEST_CASE("relation invariants and fuzzed identity") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    auto a = testing::random_arbor(rng);
    const auto policy = static_cast<OrderingPolicy>(testing::pick(rng, 3));
    auto rs = arbor_to_relations(a, policy);
    REQUIRE(rs.relations.size() == a.nodes.size());
    CHECK(rs.relations[0].relation == "root");
    for (std::size_t k = 1; k < rs.relations.size(); ++k) {
      std::vector<Relation> prefix(rs.relations.begin(), rs.relations.begin() + static_cast<std::ptrdiff_t>(k));
      CHECK_NOTHROW(resolve_source(prefix, rs.relations[k].source_label, rs.relations[k].source_index));
    }
    REQUIRE(structurally_equal(relations_to_arbor(rs), order_children(a, policy)));
    // Proper prefixes are valid partial arborescences.
    auto cut = rs;
    cut.relations.resize(1 + testing::pick(rng, rs.relations.size()));
    CHECK(validate_arborescence(relations_to_arbor(cut)).tree_shape.empty());
  }
}

TEST_CASE("latest-occurrence resolution preserves the graph") {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 200; ++i) {
    auto g = testing::random_amr(rng, 8);
    auto a = convert::amr_to_arbor(g);
    auto rs = arbor_to_relations(a, OrderingPolicy::kAlphanumeric);
    for (auto& r : rs.relations) r.source_position.reset();
    // Resolution by latest occurrence: copies share (label, index) and are
    // leaves, so the rebuilt graph is the same even if the tree differs.
    auto back = relations_to_arbor(rs);
    CHECK(validate_arborescence(back).ok());
    CHECK(graph_isomorphic(convert::arbor_to_amr(back), g));
  }
}
