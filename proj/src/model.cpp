#include "arbor/model.hpp"

#include <algorithm>
#include <cctype>

namespace arbor {

using nn::Init;
using nn::Tensor;

// ---------------------------------------------------------------- config

ModelConfig ModelConfig::defaults_for(Framework f) {
  ModelConfig c;
  c.framework = f;
  switch (f) {
    case Framework::kAmr:
      c.bilinear_dim = 128;
      c.dropout = 0.33;
      break;
    case Framework::kDm:
      c.bilinear_dim = 256;
      c.dropout = 0.2;
      break;
    case Framework::kUcca:
      c.bilinear_dim = 128;
      c.dropout = 0.33;
      break;
  }
  return c;
}

std::size_t ModelConfig::feature_size(const std::string& name) const {
  return name == "anon" ? anonymization_dim : feature_dim;
}

std::size_t ModelConfig::encoder_input_dim() const {
  std::size_t d = word_dim + external_dim + char_channels + pos_dim;
  for (const auto& f : features) d += feature_size(f);
  return d;
}

void ModelConfig::validate() const {
  if (decoder_hidden != 2 * encoder_hidden)
    throw ValidationError("config: decoder hidden (" + std::to_string(decoder_hidden) +
                          ") must be twice the encoder hidden (" + std::to_string(encoder_hidden) + ")");
  if (encoder_layers == 0 || decoder_layers == 0) throw ValidationError("config: layer counts must be positive");
  if (encoder_layers != decoder_layers)
    throw ValidationError("config: decoder layers are initialized from encoder layers, counts must match");
  if (char_width % 2 == 0) throw ValidationError("config: char kernel width must be odd");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("config: dropout must be in [0, 1)");
  for (auto d : {word_dim, char_embed_dim, char_channels, pos_dim, feature_dim, anonymization_dim, encoder_hidden,
                 index_dim, index_rows, relation_dim, attention_dim, biaffine_dim, bilinear_dim})
    if (d == 0) throw ValidationError("config: sizes must be positive");
}

io::Json ModelConfig::to_json() const {
  return io::Json{{"framework", std::string(framework_name(framework))},
                  {"word_dim", word_dim},
                  {"external_dim", external_dim},
                  {"char_embed_dim", char_embed_dim},
                  {"char_channels", char_channels},
                  {"char_width", char_width},
                  {"pos_dim", pos_dim},
                  {"feature_dim", feature_dim},
                  {"anonymization_dim", anonymization_dim},
                  {"features", features},
                  {"encoder_hidden", encoder_hidden},
                  {"encoder_layers", encoder_layers},
                  {"decoder_hidden", decoder_hidden},
                  {"decoder_layers", decoder_layers},
                  {"index_dim", index_dim},
                  {"index_rows", index_rows},
                  {"relation_dim", relation_dim},
                  {"attention_dim", attention_dim},
                  {"biaffine_dim", biaffine_dim},
                  {"bilinear_dim", bilinear_dim},
                  {"dropout", dropout}};
}

ModelConfig ModelConfig::from_json(const io::Json& j) try {
  ModelConfig c = defaults_for(parse_framework(j.value("framework", std::string("amr"))));
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("word_dim", c.word_dim);
  get("external_dim", c.external_dim);
  get("char_embed_dim", c.char_embed_dim);
  get("char_channels", c.char_channels);
  get("char_width", c.char_width);
  get("pos_dim", c.pos_dim);
  get("feature_dim", c.feature_dim);
  get("anonymization_dim", c.anonymization_dim);
  get("features", c.features);
  get("encoder_hidden", c.encoder_hidden);
  get("encoder_layers", c.encoder_layers);
  get("decoder_hidden", c.decoder_hidden);
  get("decoder_layers", c.decoder_layers);
  get("index_dim", c.index_dim);
  get("index_rows", c.index_rows);
  get("relation_dim", c.relation_dim);
  get("attention_dim", c.attention_dim);
  get("biaffine_dim", c.biaffine_dim);
  get("bilinear_dim", c.bilinear_dim);
  get("dropout", c.dropout);
  return c;
} catch (const io::Json::exception& e) {
  throw ValidationError(std::string("model config: ") + e.what());
}

// ---------------------------------------------------------------- vocabularies

Vocabulary& Vocabularies::feature(const std::string& name) {
  return features.try_emplace(name, Vocabulary({std::string(kUnkLabel)}, std::string(kUnkLabel))).first->second;
}

const Vocabulary& Vocabularies::feature(const std::string& name) const {
  auto it = features.find(name);
  if (it == features.end()) throw ValidationError("no vocabulary for feature '" + name + "'");
  return it->second;
}

io::Json Vocabularies::to_json() const {
  io::Json f = io::Json::object();
  for (const auto& [name, v] : features) f[name] = v.to_json();
  return io::Json{{"words", words.to_json()},     {"pos", pos.to_json()},
                  {"features", f},                {"nodes", nodes.to_json()},
                  {"relations", relations.to_json()}, {"senses", senses.to_json()}};
}

Vocabularies Vocabularies::from_json(const io::Json& j) try {
  Vocabularies v;
  v.words = Vocabulary::from_json(j.at("words"));
  v.pos = Vocabulary::from_json(j.at("pos"));
  for (const auto& [name, fv] : j.at("features").items()) v.features[name] = Vocabulary::from_json(fv);
  v.nodes = Vocabulary::from_json(j.at("nodes"));
  v.relations = Vocabulary::from_json(j.at("relations"));
  v.senses = convert::SenseTable::from_json(j.value("senses", io::Json::object()));
  if (v.nodes.size() < 2 || v.nodes.token(kEosId) != kEosLabel) throw ValidationError("node vocabulary lacks @eos@");
  if (v.relations.token(0) != kRootRelation) throw ValidationError("relation vocabulary must start with 'root'");
  return v;
} catch (const io::Json::exception& e) {
  throw ValidationError(std::string("vocabularies: ") + e.what());
}

std::vector<std::size_t> char_ids(const std::string& word) {
  std::vector<std::size_t> out;
  out.reserve(word.size());
  for (unsigned char c : word) out.push_back(2 + static_cast<std::size_t>(c));
  return out;
}

// ---------------------------------------------------------------- model

TransducerModel::TransducerModel(ModelConfig config, Vocabularies vocabs, std::uint64_t seed)
    : config_(std::move(config)), vocabs_(std::move(vocabs)) {
  config_.validate();
  for (const auto& f : config_.features) vocabs_.feature(f);
  std::mt19937_64 rng(seed);
  build(rng);
}

void TransducerModel::build(std::mt19937_64& rng) {
  const auto& c = config_;
  auto& ps = params_;
  const auto enc_state = 2 * c.encoder_hidden;
  const auto node_dim = c.node_embedding_dim();

  word_table = ps.add("enc.words", {vocabs_.words.size(), c.word_dim}, Init::kUniform, rng);
  enc_chars = nn::CharCnn::create(ps, "enc.charcnn", kCharRows, c.char_embed_dim, c.char_channels, c.char_width, rng);
  pos_table = ps.add("pos", {vocabs_.pos.size(), c.pos_dim}, Init::kUniform, rng);
  feature_tables.clear();
  for (const auto& f : c.features)
    feature_tables.push_back(
        ps.add("enc.feature." + f, {vocabs_.features.at(f).size(), c.feature_size(f)}, Init::kUniform, rng));
  encoder = nn::BiLstm::create(ps, "enc.bilstm", c.encoder_input_dim(), c.encoder_hidden, c.encoder_layers, rng);

  node_table = ps.add("dec.nodes", {vocabs_.nodes.size() + 1, c.word_dim}, Init::kUniform, rng);
  dec_chars = nn::CharCnn::create(ps, "dec.charcnn", kCharRows, c.char_embed_dim, c.char_channels, c.char_width, rng);
  index_table = ps.add("dec.index", {c.index_rows, c.index_dim}, Init::kUniform, rng);
  relation_table = ps.add("dec.relations", {vocabs_.relations.size() + 1, c.relation_dim}, Init::kUniform, rng);
  decoder = nn::Lstm::create(ps, "dec.lstm", node_dim + c.index_dim, c.decoder_hidden, c.decoder_layers, rng);

  att_h = ps.add("tgt.enc_att.Wh", {c.attention_dim, c.decoder_hidden}, Init::kUniform, rng);
  att_s = nn::Ffn::create(ps, "tgt.enc_att.s", enc_state, c.attention_dim, rng);
  att_v = ps.add("tgt.enc_att.v", {c.attention_dim}, Init::kUniform, rng);
  const auto z_dim = c.decoder_hidden;
  relation_state = nn::Ffn::create(
      ps, "tgt.relation_state", c.decoder_hidden + enc_state + c.relation_dim + node_dim + c.index_dim, z_dim, rng);
  vocab_out = nn::Ffn::create(ps, "tgt.vocab", z_dim, vocabs_.nodes.size(), rng);
  copy_q = ps.add("tgt.dec_att.Wq", {c.attention_dim, z_dim}, Init::kUniform, rng);
  copy_k = nn::Ffn::create(ps, "tgt.dec_att.k", z_dim, c.attention_dim, rng);
  copy_v = ps.add("tgt.dec_att.v", {c.attention_dim}, Init::kUniform, rng);
  switch_out = nn::Ffn::create(ps, "tgt.switch", z_dim, 3, rng);

  start = nn::Mlp::create(ps, "src.start", c.decoder_hidden, c.biaffine_dim, rng);
  end = nn::Mlp::create(ps, "src.end", c.decoder_hidden, c.biaffine_dim, rng);
  pointer = nn::Biaffine::create(ps, "src.biaffine", c.biaffine_dim, c.biaffine_dim, rng);

  rel_src = nn::Mlp::create(ps, "rel.src", c.decoder_hidden, c.bilinear_dim, rng);
  rel_tgt = nn::Mlp::create(ps, "rel.tgt", c.decoder_hidden, c.bilinear_dim, rng);
  relation = nn::Bilinear::create(ps, "rel.bilinear", vocabs_.relations.size(), c.bilinear_dim, c.bilinear_dim, rng);
}

std::size_t TransducerModel::load_pretrained_words(const io::EmbeddingTable& table) {
  if (table.dim() != config_.word_dim)
    throw ValidationError("pretrained embeddings have dimension " + std::to_string(table.dim()) + ", model uses " +
                          std::to_string(config_.word_dim));
  std::size_t hits = 0;
  auto& w = word_table.mutable_value();
  for (std::size_t id = 0; id < vocabs_.words.size(); ++id) {
    if (const auto* v = table.lookup(vocabs_.words.token(id))) {
      std::copy(v->begin(), v->end(), w.begin() + static_cast<std::ptrdiff_t>(id * config_.word_dim));
      ++hits;
    }
  }
  return hits;
}

io::CheckpointData TransducerModel::to_checkpoint() const {
  io::CheckpointData c;
  c.hyperparameters = config_.to_json();
  c.vocabularies = vocabs_.to_json();
  for (const auto& [name, t] : params_.items()) c.tensors.push_back({name, t.shape(), t.value()});
  return c;
}

TransducerModel TransducerModel::from_checkpoint(const io::CheckpointData& c) {
  TransducerModel m(ModelConfig::from_json(c.hyperparameters), Vocabularies::from_json(c.vocabularies), 0);
  m.assign(c);
  return m;
}

void TransducerModel::assign(const io::CheckpointData& c) {
  std::map<std::string, const io::NamedTensor*> by_name;
  for (const auto& t : c.tensors)
    if (!by_name.emplace(t.name, &t).second) throw ValidationError("checkpoint: tensor '" + t.name + "' repeated");
  if (by_name.size() != params_.items().size())
    throw ValidationError("checkpoint: " + std::to_string(by_name.size()) + " tensors, model has " +
                          std::to_string(params_.items().size()));
  for (const auto& [name, t] : params_.items()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ValidationError("checkpoint: missing tensor '" + name + "'");
    if (it->second->shape != t.shape())
      throw ValidationError("checkpoint: tensor '" + name + "' has shape " + ad::shape_str(it->second->shape) +
                            ", expected " + ad::shape_str(t.shape()));
    const_cast<Tensor&>(t).mutable_value() = it->second->values;
  }
}

void TransducerModel::save(const std::filesystem::path& path) const { io::save_checkpoint(path, to_checkpoint()); }

TransducerModel TransducerModel::load(const std::filesystem::path& path) {
  return from_checkpoint(io::load_checkpoint(path));
}

}  // namespace arbor
