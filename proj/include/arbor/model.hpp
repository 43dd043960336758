// The transducer: configuration, vocabularies and every learned tensor.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arbor/convert.hpp"
#include "arbor/graph.hpp"
#include "arbor/io.hpp"
#include "arbor/nn.hpp"
#include "arbor/vocab.hpp"

namespace arbor {

inline constexpr std::string_view kEosLabel = "@eos@";
inline constexpr std::string_view kUnkLabel = "@unk@";
inline constexpr std::size_t kEosId = 0;
inline constexpr std::size_t kCharPad = 0;
inline constexpr std::size_t kCharUnk = 1;
inline constexpr std::size_t kCharRows = 258;  // pad, unk, one per byte

struct ModelConfig {
  Framework framework = Framework::kAmr;

  std::size_t word_dim = 300;
  std::size_t external_dim = 0;  // 0 disables the external channel
  std::size_t char_embed_dim = 100;
  std::size_t char_channels = 100;
  std::size_t char_width = 3;
  std::size_t pos_dim = 100;
  std::size_t feature_dim = 100;
  std::size_t anonymization_dim = 50;  // used for the feature column "anon"
  std::vector<std::string> features;   // feature columns, in embedding order

  std::size_t encoder_hidden = 512;  // per direction
  std::size_t encoder_layers = 2;
  std::size_t decoder_hidden = 1024;
  std::size_t decoder_layers = 2;

  std::size_t index_dim = 50;
  std::size_t index_rows = 512;
  std::size_t relation_dim = 100;
  std::size_t attention_dim = 256;
  std::size_t biaffine_dim = 256;
  std::size_t bilinear_dim = 128;

  double dropout = 0.33;

  /// Defaults for a framework (bilinear size and dropout differ).
  static ModelConfig defaults_for(Framework f);
  std::size_t feature_size(const std::string& name) const;
  std::size_t encoder_input_dim() const;
  std::size_t node_embedding_dim() const { return word_dim + char_channels + pos_dim; }
  /// Throws ValidationError on inconsistent sizes.
  void validate() const;

  io::Json to_json() const;
  static ModelConfig from_json(const io::Json& j);
};

struct Vocabularies {
  Vocabulary words{{std::string(kUnkLabel)}, std::string(kUnkLabel)};
  Vocabulary pos{{std::string(kUnkLabel)}, std::string(kUnkLabel)};
  std::map<std::string, Vocabulary> features;
  /// Output node labels: 0 = @eos@, 1 = @unk@.
  Vocabulary nodes{{std::string(kEosLabel), std::string(kUnkLabel)}, std::string(kUnkLabel)};
  /// Relation types: 0 = "root", 1 = @unk@.
  Vocabulary relations{{std::string(kRootRelation), std::string(kUnkLabel)}, std::string(kUnkLabel)};
  convert::SenseTable senses;

  Vocabulary& feature(const std::string& name);
  const Vocabulary& feature(const std::string& name) const;

  io::Json to_json() const;
  static Vocabularies from_json(const io::Json& j);
};

/// UTF-8 bytes mapped to char-table rows.
std::vector<std::size_t> char_ids(const std::string& word);

class TransducerModel {
 public:
  /// Fresh parameters drawn from `seed`.
  TransducerModel(ModelConfig config, Vocabularies vocabs, std::uint64_t seed);
  // Tensors are shared handles; a copy would alias parameters.
  TransducerModel(const TransducerModel&) = delete;
  TransducerModel& operator=(const TransducerModel&) = delete;
  TransducerModel(TransducerModel&&) = default;
  TransducerModel& operator=(TransducerModel&&) = default;

  const ModelConfig& config() const { return config_; }
  const Vocabularies& vocabs() const { return vocabs_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  /// Overwrites word rows with pretrained vectors where the table has them.
  std::size_t load_pretrained_words(const io::EmbeddingTable& table);

  io::CheckpointData to_checkpoint() const;
  static TransducerModel from_checkpoint(const io::CheckpointData& c);
  /// Overwrites parameter values from a checkpoint of the same architecture.
  void assign(const io::CheckpointData& c);
  void save(const std::filesystem::path& path) const;
  static TransducerModel load(const std::filesystem::path& path);

  // ---- encoder
  nn::Tensor word_table;
  nn::CharCnn enc_chars;
  nn::Tensor pos_table;  // shared with the decoder
  std::vector<nn::Tensor> feature_tables;
  nn::BiLstm encoder;

  // ---- decoder embedding
  nn::Tensor node_table;      // output vocab rows + one @root@ row
  nn::CharCnn dec_chars;
  nn::Tensor index_table;
  nn::Tensor relation_table;  // relation rows + one @none@ row
  nn::Lstm decoder;

  // ---- target node module
  nn::Tensor att_h;   // [att×dec]
  nn::Ffn att_s;      // enc states -> att
  nn::Tensor att_v;   // [att]
  nn::Ffn relation_state;  // [h; c; r; u; d_u] -> z
  nn::Ffn vocab_out;
  nn::Tensor copy_q;  // [att×z]
  nn::Ffn copy_k;     // z -> att
  nn::Tensor copy_v;  // [att]
  nn::Ffn switch_out; // z -> 3

  // ---- source node module
  nn::Mlp start, end;
  nn::Biaffine pointer;

  // ---- relation type module
  nn::Mlp rel_src, rel_tgt;
  nn::Bilinear relation;

  std::size_t root_node_row() const { return vocabs_.nodes.size(); }
  std::size_t none_relation_row() const { return vocabs_.relations.size(); }

 private:
  void build(std::mt19937_64& rng);

  ModelConfig config_;
  Vocabularies vocabs_;
  nn::ParameterStore params_;
};

}  // namespace arbor
