// Readers and writers: PENMAN, SDP 2015 columns, canonical JSONL records,
// arborescence JSONL, word-vector files and model checkpoints.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "arbor/graph.hpp"
#include "json.hpp"

namespace arbor::io {

using Json = nlohmann::ordered_json;

/// Token-level input columns shared by every framework.
struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> lemmas;  // optional; empty or same length as tokens
  std::vector<std::string> pos;
  std::map<std::string, std::vector<std::string>> features;

  std::size_t size() const { return tokens.size(); }
  /// Throws ValidationError unless every column has length size().
  void check_columns() const;
};

// ---------------------------------------------------------------- PENMAN

SemanticGraph read_penman(std::string_view text);
std::string write_penman(const SemanticGraph& g);

struct PenmanEntry {
  std::string id;
  std::vector<std::string> tokens;  // from a "# ::tok" metadata line
  SemanticGraph graph;
};
/// Blank-line separated graphs with optional "# ::id" / "# ::tok" comments.
std::vector<PenmanEntry> read_penman_corpus(std::string_view text);

// ---------------------------------------------------------------- SDP

struct SdpSentence {
  std::string id;  // from a leading "#..." line, without the '#'
  Sentence sentence;
  SemanticGraph graph;
};

/// One sentence in the six-fixed-column layout:
/// id, form, lemma, pos, top(+/-), pred(+/-), then one argument column per
/// predicate. Node ids are the 1-based token ids; anchors are token spans.
SdpSentence read_sdp(std::string_view text);
std::vector<SdpSentence> read_sdp_corpus(std::string_view text);
std::string write_sdp(const SdpSentence& s);

// ---------------------------------------------------------------- canonical

struct CanonicalRecord {
  std::string id;
  Sentence sentence;
  SemanticGraph graph;
};

CanonicalRecord read_canonical(std::string_view line);
/// Single line, no trailing newline. Key order is fixed.
std::string write_canonical(const CanonicalRecord& r);
std::vector<CanonicalRecord> read_canonical_file(const std::filesystem::path& path);
void write_canonical_file(const std::filesystem::path& path, const std::vector<CanonicalRecord>& records);

// ---------------------------------------------------------------- arborescence JSONL

Json arbor_to_json(const Arborescence& a);
Arborescence arbor_from_json(const Json& j);

// ---------------------------------------------------------------- embeddings

/// Word vectors from "word f1 ... fd" lines. Lookup is case-sensitive, then
/// lowercase, then misses.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  void insert(std::string word, std::vector<double> values);
  const std::vector<double>* lookup(const std::string& word) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> rows_;
};

EmbeddingTable parse_embeddings(std::string_view text, std::size_t dim);
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim);

/// Precomputed per-token vectors keyed by record id, JSONL lines of
/// {"id": ..., "vectors": [[...], ...]}.
using ExternalVectors = std::unordered_map<std::string, std::vector<std::vector<double>>>;
ExternalVectors load_external_vectors(const std::filesystem::path& path);

// ---------------------------------------------------------------- checkpoints

inline constexpr int kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

struct CheckpointData {
  Json hyperparameters;
  Json vocabularies;
  std::vector<NamedTensor> tensors;
};

/// One-line JSON header, newline, then little-endian float32 payload.
std::string encode_checkpoint(const CheckpointData& c);
CheckpointData decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const CheckpointData& c);
CheckpointData load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------- files

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

}  // namespace arbor::io
