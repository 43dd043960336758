#include <cstring>
#include <filesystem>
#include <random>

#include "arbor/encoder.hpp"
#include "arbor/model.hpp"
#include "doctest.h"
#include "support/models.hpp"

using namespace arbor;
using arbor::testing::random_model;
using arbor::testing::tiny_config;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "arbor_model_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

EncoderInput sentence(std::vector<std::string> tokens, std::vector<std::string> pos) {
  EncoderInput in;
  in.sentence.tokens = std::move(tokens);
  in.sentence.pos = std::move(pos);
  return in;
}

}  // namespace

TEST_CASE("config: framework defaults and validation") {
  auto amr = ModelConfig::defaults_for(Framework::kAmr);
  auto dm = ModelConfig::defaults_for(Framework::kDm);
  auto ucca = ModelConfig::defaults_for(Framework::kUcca);
  CHECK(amr.bilinear_dim == 128);
  CHECK(dm.bilinear_dim == 256);
  CHECK(ucca.bilinear_dim == 128);
  CHECK(amr.dropout == doctest::Approx(0.33));
  CHECK(dm.dropout == doctest::Approx(0.2));
  CHECK(amr.encoder_input_dim() == 500);
  CHECK_NOTHROW(amr.validate());

  auto bad = amr;
  bad.decoder_hidden = 1000;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = amr;
  bad.char_width = 4;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = amr;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = amr;
  bad.decoder_layers = 3;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  auto with_feats = amr;
  with_feats.features = {"ner", "anon"};
  CHECK(with_feats.encoder_input_dim() == 500 + 100 + 50);
  CHECK(ModelConfig::from_json(with_feats.to_json()).to_json() == with_feats.to_json());
}

TEST_CASE("vocabularies: reserved entries and json round trip") {
  auto v = testing::tiny_vocabs({"a", "b"}, {"ARG0"});
  CHECK(v.nodes.id(std::string(kEosLabel)) == kEosId);
  CHECK(v.relations.id(std::string(kRootRelation)) == 0);
  auto back = Vocabularies::from_json(v.to_json());
  CHECK(back.to_json() == v.to_json());
  auto j = v.to_json();
  j["nodes"] = io::Json::array({"a", "b"});
  CHECK_THROWS_AS(Vocabularies::from_json(j), ValidationError);
}

TEST_CASE("char ids are byte based") {
  CHECK(char_ids("ab") == std::vector<std::size_t>{2 + 'a', 2 + 'b'});
  CHECK(char_ids("é").size() == 2);
  CHECK(char_ids("").empty());
}

TEST_CASE("encoder: default sizes give a [1x1024] output for one token") {
  auto cfg = ModelConfig::defaults_for(Framework::kAmr);
  TransducerModel m(cfg, testing::tiny_vocabs({"x"}, {"ARG0"}), 1);
  std::mt19937_64 rng(1);
  auto emb = embed_tokens(m, sentence({"Pierre"}, {"NNP"}), false, rng);
  CHECK(emb.shape() == ad::Shape{1, 500});
  auto out = encode(m, sentence({"Pierre"}, {"NNP"}), false, rng);
  CHECK(out.states.shape() == ad::Shape{1, 1024});
  REQUIRE(out.decoder_init.size() == 2);
  CHECK(out.decoder_init[0].h.size() == 1024);
  for (double c : out.decoder_init[0].c.value()) CHECK(c == 0.0);
}

TEST_CASE("encoder: unknown words, determinism and column checks") {
  auto m = random_model(3);
  std::mt19937_64 rng(1);
  const auto& words = m.vocabs().words;
  CHECK(word_id(words, "zyzzyva") == words.id(std::string(kUnkLabel)));
  CHECK(word_id(words, "Concern") == words.id("concern"));
  CHECK(word_id(words, "pierre") == words.unk_id());  // only the token is lowercased
  auto in = sentence({"Pierre", "zyzzyva", "concern"}, {"NNP", "XX", "NN"});
  auto a = encode(m, in, false, rng);
  auto b = encode(m, in, false, rng);
  CHECK(a.states.value() == b.states.value());
  CHECK(a.states.shape() == ad::Shape{3, 2 * m.config().encoder_hidden});
  // Final-layer decoder init: backward state at the first token, forward at the last.
  const auto h = m.config().encoder_hidden;
  for (std::size_t k = 0; k < h; ++k) {
    CHECK(a.decoder_init.back().h[k] == a.states.at(0, h + k));
    CHECK(a.decoder_init.back().h[h + k] == a.states.at(2, k));
  }
  auto bad = in;
  bad.sentence.pos.pop_back();
  CHECK_THROWS_AS(encode(m, bad, false, rng), ValidationError);
  auto empty = sentence({}, {});
  CHECK_THROWS_AS(encode(m, empty, false, rng), ValidationError);
}

TEST_CASE("encoder: gradients reach the embeddings") {
  auto m = random_model(4);
  std::mt19937_64 rng(1);
  m.params().zero_grad();
  ad::Tape tape;
  {
    ad::TapeScope scope(tape);
    auto out = encode(m, sentence({"Pierre", "Vinken"}, {"NNP", "NNP"}), false, rng);
    tape.backward(ad::sum(out.states));
  }
  auto g = m.word_table.grad();
  const auto d = m.config().word_dim;
  const auto row = m.vocabs().words.id("Pierre");
  double norm = 0;
  for (std::size_t k = 0; k < d; ++k) norm += std::abs(g[row * d + k]);
  CHECK(norm > 0.0);
}

TEST_CASE("checkpoint: save, load and float32 values") {
  auto m = random_model(5);
  auto path = temp_path("model.ckpt");
  m.save(path);
  auto back = TransducerModel::load(path);
  CHECK(back.config().to_json() == m.config().to_json());
  CHECK(back.vocabs().to_json() == m.vocabs().to_json());
  const auto& a = m.params().items();
  const auto& b = back.params().items();
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].first == b[t].first);
    CHECK(a[t].second.shape() == b[t].second.shape());
    for (std::size_t i = 0; i < a[t].second.size(); ++i) {
      const double rounded = static_cast<double>(static_cast<float>(a[t].second[i]));
      CHECK(std::memcmp(&rounded, &b[t].second.value()[i], sizeof(double)) == 0);
    }
  }
  // Re-saving the loaded model reproduces the file byte for byte.
  auto again = temp_path("model2.ckpt");
  back.save(again);
  CHECK(io::encode_checkpoint(io::load_checkpoint(again)) == io::encode_checkpoint(io::load_checkpoint(path)));

  std::mt19937_64 rng(1);
  auto in = sentence({"Pierre", "Vinken"}, {"NNP", "NNP"});
  CHECK(encode(back, in, false, rng).states.value() == encode(TransducerModel::load(path), in, false, rng).states.value());
}

TEST_CASE("checkpoint: architecture mismatches are rejected") {
  auto m = random_model(6);
  auto c = m.to_checkpoint();
  auto other = random_model(7, tiny_config(4));
  CHECK_THROWS_AS(other.assign(c), ValidationError);
  auto missing = c;
  missing.tensors.pop_back();
  CHECK_THROWS_AS(TransducerModel::from_checkpoint(missing), ValidationError);
  CHECK_THROWS_AS(TransducerModel::load(temp_path("nope.ckpt")), IoError);
}

TEST_CASE("pretrained word vectors overwrite matching rows") {
  auto m = random_model(8);
  const auto d = m.config().word_dim;
  std::string line = "pierre";
  for (std::size_t k = 0; k < d; ++k) line += " 0.5";
  auto table = io::parse_embeddings(line + "\n", d);
  CHECK(m.load_pretrained_words(table) == 1);
  const auto row = m.vocabs().words.id("Pierre");
  for (std::size_t k = 0; k < d; ++k) CHECK(m.word_table.value()[row * d + k] == 0.5);
}
