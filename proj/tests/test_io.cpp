#include <cstring>
#include <filesystem>
#include <random>

#include "arbor/io.hpp"
#include "doctest.h"
#include "support/generators.hpp"

using namespace arbor;
using namespace arbor::io;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "arbor_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::size_t count_edges(const SemanticGraph& g, const std::string& label) {
  return static_cast<std::size_t>(
      std::count_if(g.edges.begin(), g.edges.end(), [&](const GraphEdge& e) { return e.label == label; }));
}

}  // namespace

TEST_CASE("penman: reentrant person") {
  auto g = read_penman("(e / express-01 :ARG0 (p / person) :ARG1 (c / concern :poss p))");
  REQUIRE(g.nodes.size() == 3);
  CHECK(g.edges.size() == 3);
  CHECK(g.tops == std::vector<std::string>{"e"});
  bool poss = false;
  for (const auto& e : g.edges)
    if (e.label == "poss") poss = e.source == "c" && e.target == "p";
  CHECK(poss);
  CHECK(g.in_degree()[g.at("p")] == 2);
}

TEST_CASE("penman: single node and malformed input") {
  auto g = read_penman("(a / alpha)");
  CHECK(g.nodes.size() == 1);
  CHECK(g.edges.empty());
  CHECK_THROWS_WITH_AS(read_penman("(a / alpha :mod (b / beta) :mod b"), doctest::Contains("unbalanced"),
                       ValidationError);
  CHECK_THROWS_AS(read_penman("(a / alpha :mod)"), ValidationError);
  CHECK_THROWS_AS(read_penman("(a / alpha :mod (a / beta))"), ValidationError);
  CHECK_THROWS_AS(read_penman("(a / alpha))"), ValidationError);
}

TEST_CASE("penman: constants and inverse roles") {
  auto g = read_penman("(w / want-01 :polarity - :ARG0 (b / boy :name-of (n / name :op1 \"Bob\")))");
  CHECK(g.nodes.size() == 5);
  CHECK(count_edges(g, "name") == 1);
  const auto& e = g.edges[g.edges.size() - 2];
  CHECK(e.label == "name");
  CHECK(e.source == "n");
  CHECK(e.target == "b");
}

TEST_CASE("penman: write round-trips") {
  auto g = read_penman("(e / express-01 :ARG0 (p / person) :ARG1 (c / concern :poss p))");
  auto text = write_penman(g);
  CHECK(graph_isomorphic(read_penman(text), g));

  auto one = read_penman("(a / alpha)");
  CHECK(write_penman(one) == "(a0 / alpha)");

  // Cycle through a reentrancy.
  auto cyc = read_penman("(a / alpha :r (b / beta :s a))");
  CHECK(graph_isomorphic(read_penman(write_penman(cyc)), cyc));
}

TEST_CASE("penman: write rejects invalid graphs") {
  SemanticGraph g;
  g.framework = Framework::kAmr;
  g.nodes = {{"a", "x", {}}, {"b", "y", {}}};
  g.tops = {"a"};
  CHECK_THROWS_AS(write_penman(g), ValidationError);  // disconnected
  g.edges = {{"a", "b", "r"}};
  g.tops = {};
  CHECK_THROWS_AS(write_penman(g), ValidationError);
  g.tops = {"a", "b"};
  CHECK_THROWS_AS(write_penman(g), ValidationError);
}

TEST_CASE("penman: fuzzed write/read round-trip") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    auto g = testing::random_amr(rng);
    auto back = read_penman(write_penman(g));
    REQUIRE(graph_isomorphic(back, g));
  }
}

TEST_CASE("penman: corpus with metadata") {
  auto entries = read_penman_corpus("# ::id s1\n# ::tok a b\n(a / alpha)\n\n# ::id s2\n(b / beta\n  :mod (c / gamma))\n");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].id == "s1");
  CHECK(entries[0].tokens == std::vector<std::string>{"a", "b"});
  CHECK(entries[1].graph.edges.size() == 1);
}

TEST_CASE("sdp: two-token sentence") {
  auto s = read_sdp("1\tPierre\tPierre\tNNP\t+\t+\t_\n2\tVinken\tVinken\tNNP\t-\t-\tARG1\n");
  REQUIRE(s.graph.nodes.size() == 2);
  REQUIRE(s.graph.edges.size() == 1);
  CHECK(s.graph.edges[0].label == "ARG1");
  CHECK(s.graph.edges[0].source == "1");
  CHECK(s.graph.edges[0].target == "2");
  CHECK(s.graph.tops == std::vector<std::string>{"1"});
  CHECK(s.graph.nodes[1].anchors == std::vector<Span>{{1, 2}});
}

TEST_CASE("sdp: no predicates and ragged rows") {
  auto s = read_sdp("1\ta\ta\tDT\t-\t-\n2\tb\tb\tNN\t-\t-\n");
  CHECK(s.graph.edges.empty());
  CHECK(s.sentence.size() == 2);
  CHECK_THROWS_AS(read_sdp("1\ta\ta\tDT\t-\t+\t_\n2\tb\tb\tNN\t-\t-\n"), ValidationError);
  CHECK_THROWS_AS(read_sdp("1\ta\ta\tDT\t-\t+\t_\n2\tb\tb\tNN\t-\t-\t_\t_\n"), ValidationError);
  CHECK_THROWS_AS(read_sdp("1\ta\ta\tDT\t-\t-\t_\n"), ValidationError);  // extra arg column
}

TEST_CASE("sdp: write/read field-equivalent") {
  const std::string text =
      "#20001\n1\tPierre\tPierre\tNNP\t-\t-\t_\t_\n2\tVinken\tVinken\tNNP\t-\t+\tcompound\t_\n"
      "3\texpressed\texpress\tVBD\t+\t+\t_\t_\n4\tconcern\tconcern\tNN\t-\t-\t_\tARG2\n";
  auto s = read_sdp(text);
  CHECK(s.id == "20001");
  CHECK(write_sdp(s) == text);
  auto again = read_sdp(write_sdp(s));
  CHECK(graph_isomorphic(again.graph, s.graph));
  CHECK(again.sentence.tokens == s.sentence.tokens);
}

TEST_CASE("sdp: corpus splitting") {
  auto c = read_sdp_corpus("#1\n1\ta\ta\tDT\t+\t-\n\n#2\n1\tb\tb\tNN\t-\t-\n");
  REQUIRE(c.size() == 2);
  CHECK(c[1].id == "2");
}

TEST_CASE("canonical: write/read bit-exact") {
  const std::string line =
      R"({"id":"u1","framework":"ucca","tokens":["Pierre","Vinken"],"pos":["NNP","NNP"],"features":{"ner":["B","I"]},)"
      R"("nodes":[{"id":"0","label":"","anchors":[]},{"id":"1","label":"Pierre","anchors":[[0,1]]},)"
      R"({"id":"2","label":"Vinken","anchors":[[1,2]]}],"edges":[{"src":"0","tgt":"1","label":"Terminal"},)"
      R"({"src":"0","tgt":"2","label":"Terminal"}],"tops":["0"]})";
  auto r = read_canonical(line);
  CHECK(r.graph.nodes.size() == 3);
  CHECK(r.sentence.features.at("ner").size() == 2);
  CHECK(write_canonical(r) == line);
  auto again = read_canonical(write_canonical(r));
  CHECK(write_canonical(again) == line);
}

TEST_CASE("canonical: column length mismatch and file round trip") {
  CHECK_THROWS_AS(read_canonical(R"({"id":"x","framework":"dm","tokens":["a"],"pos":["A","B"]})"), ValidationError);
  CHECK_THROWS_AS(read_canonical("{not json"), ValidationError);
  std::mt19937_64 rng(5);
  std::vector<CanonicalRecord> recs;
  for (int i = 0; i < 20; ++i) {
    CanonicalRecord r;
    r.id = "r" + std::to_string(i);
    r.graph = testing::random_dm(rng);
    int n = 0;
    for (const auto& node : r.graph.nodes) n = std::max(n, node.anchors[0].end);
    r.sentence.tokens.assign(static_cast<std::size_t>(n), "w");
    r.sentence.pos.assign(static_cast<std::size_t>(n), "NN");
    recs.push_back(r);
  }
  auto path = temp_path("recs.jsonl");
  write_canonical_file(path, recs);
  auto back = read_canonical_file(path);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(write_canonical(back[i]) == write_canonical(recs[i]));
  CHECK_THROWS_AS(read_canonical_file(temp_path("missing.jsonl")), IoError);
}

TEST_CASE("arborescence json round trip") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    auto a = testing::random_arbor(rng);
    CHECK(structurally_equal(arbor_from_json(Json::parse(arbor_to_json(a).dump())), a));
  }
  CHECK(arbor_from_json(arbor_to_json(Arborescence{})).empty());
}

TEST_CASE("embeddings") {
  auto t = parse_embeddings("the 0.1 0.2 0.3\nCat 1 2 3\n", 3);
  CHECK(t.size() == 2);
  REQUIRE(t.lookup("the") != nullptr);
  CHECK((*t.lookup("the"))[1] == doctest::Approx(0.2));
  CHECK(t.lookup("cat") == nullptr);
  REQUIRE(t.lookup("THE") != nullptr);  // lowercase fallback
  CHECK(t.lookup("dog") == nullptr);
  CHECK_THROWS_AS(parse_embeddings("the 0.1 0.2", 3), ValidationError);
  CHECK_THROWS_AS(parse_embeddings("the 0.1 x 0.3", 3), ValidationError);
}

TEST_CASE("checkpoint: bitwise round trip and header checks") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  CheckpointData c;
  c.hyperparameters = Json{{"hidden", 4}};
  c.vocabularies = Json{{"words", {"a", "b"}}};
  for (int t = 0; t < 3; ++t) {
    NamedTensor nt{"w" + std::to_string(t), {2, static_cast<std::size_t>(t + 1)}, {}};
    for (std::size_t i = 0; i < 2u * (t + 1); ++i) nt.values.push_back(static_cast<double>(static_cast<float>(nd(rng))));
    c.tensors.push_back(nt);
  }
  auto path = temp_path("ckpt.bin");
  save_checkpoint(path, c);
  auto back = load_checkpoint(path);
  REQUIRE(back.tensors.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(back.tensors[t].name == c.tensors[t].name);
    CHECK(back.tensors[t].shape == c.tensors[t].shape);
    CHECK(std::memcmp(back.tensors[t].values.data(), c.tensors[t].values.data(), c.tensors[t].values.size() * 8) == 0);
  }
  CHECK(back.hyperparameters == c.hyperparameters);
  CHECK(encode_checkpoint(back) == encode_checkpoint(c));

  auto bytes = encode_checkpoint(c);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), ValidationError);
  auto bumped = bytes;
  auto at = bumped.find("\"format_version\":1");
  REQUIRE(at != std::string::npos);
  bumped[at + 17] = '2';
  CHECK_THROWS_WITH_AS(decode_checkpoint(bumped), doctest::Contains("version"), ValidationError);
  CheckpointData dup = c;
  dup.tensors.push_back(c.tensors[0]);
  CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(dup)), ValidationError);
}
