#include <algorithm>
#include <functional>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "arbor/io.hpp"

namespace arbor::io {

void Sentence::check_columns() const {
  const auto n = tokens.size();
  if (pos.size() != n)
    throw ValidationError("pos column has length " + std::to_string(pos.size()) + ", expected " + std::to_string(n));
  if (!lemmas.empty() && lemmas.size() != n)
    throw ValidationError("lemma column has length " + std::to_string(lemmas.size()) + ", expected " +
                          std::to_string(n));
  for (const auto& [name, col] : features)
    if (col.size() != n)
      throw ValidationError("feature column '" + name + "' has length " + std::to_string(col.size()) +
                            ", expected " + std::to_string(n));
}

// ---------------------------------------------------------------- files

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return os.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

// ---------------------------------------------------------------- canonical

namespace {

Json anchors_json(const std::vector<Span>& anchors) {
  Json a = Json::array();
  for (const auto& s : anchors) a.push_back(Json::array({s.begin, s.end}));
  return a;
}

std::vector<Span> anchors_from(const Json& j) {
  std::vector<Span> out;
  if (j.is_null()) return out;
  for (const auto& s : j) {
    if (!s.is_array() || s.size() != 2) throw ValidationError("anchor must be a [begin, end] pair");
    out.push_back(Span{s[0].get<int>(), s[1].get<int>()});
  }
  return out;
}

template <typename T>
T field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

CanonicalRecord read_canonical(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("canonical record: ") + e.what());
  }
  CanonicalRecord r;
  r.id = field<std::string>(j, "id");
  r.graph.framework = parse_framework(field<std::string>(j, "framework"));
  r.sentence.tokens = field<std::vector<std::string>>(j, "tokens");
  r.sentence.pos = j.contains("pos") ? field<std::vector<std::string>>(j, "pos")
                                     : std::vector<std::string>(r.sentence.tokens.size(), "_");
  if (j.contains("lemmas")) r.sentence.lemmas = field<std::vector<std::string>>(j, "lemmas");
  if (j.contains("features"))
    for (const auto& [name, col] : j["features"].items()) r.sentence.features[name] = col.get<std::vector<std::string>>();
  r.sentence.check_columns();
  for (const auto& n : j.value("nodes", Json::array()))
    r.graph.nodes.push_back(GraphNode{field<std::string>(n, "id"), n.value("label", std::string{}),
                                      anchors_from(n.value("anchors", Json()))});
  for (const auto& e : j.value("edges", Json::array()))
    r.graph.edges.push_back(
        GraphEdge{field<std::string>(e, "src"), field<std::string>(e, "tgt"), field<std::string>(e, "label")});
  r.graph.tops = j.value("tops", std::vector<std::string>{});
  auto v = r.graph.violations();
  if (!v.empty()) throw ValidationError("record '" + r.id + "': " + v.front());
  return r;
}

std::string write_canonical(const CanonicalRecord& r) {
  Json j;
  j["id"] = r.id;
  j["framework"] = std::string(framework_name(r.graph.framework));
  j["tokens"] = r.sentence.tokens;
  if (!r.sentence.lemmas.empty()) j["lemmas"] = r.sentence.lemmas;
  j["pos"] = r.sentence.pos;
  Json features = Json::object();
  for (const auto& [name, col] : r.sentence.features) features[name] = col;
  j["features"] = features;
  Json nodes = Json::array();
  for (const auto& n : r.graph.nodes) {
    Json node;
    node["id"] = n.id;
    node["label"] = n.label;
    node["anchors"] = anchors_json(n.anchors);
    nodes.push_back(std::move(node));
  }
  j["nodes"] = nodes;
  Json edges = Json::array();
  for (const auto& e : r.graph.edges) edges.push_back(Json{{"src", e.source}, {"tgt", e.target}, {"label", e.label}});
  j["edges"] = edges;
  j["tops"] = r.graph.tops;
  return j.dump();
}

std::vector<CanonicalRecord> read_canonical_file(const std::filesystem::path& path) {
  std::vector<CanonicalRecord> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(read_canonical(line));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_canonical_file(const std::filesystem::path& path, const std::vector<CanonicalRecord>& records) {
  std::string data;
  for (const auto& r : records) data += write_canonical(r) + '\n';
  write_file(path, data);
}

// ---------------------------------------------------------------- arborescence JSONL

Json arbor_to_json(const Arborescence& a) {
  if (a.empty()) return Json();
  std::function<Json(std::size_t)> node = [&](std::size_t i) {
    const auto& n = a.nodes[i];
    Json j;
    j["label"] = n.label;
    j["index"] = n.index;
    if (!n.anchors.empty()) j["anchors"] = anchors_json(n.anchors);
    Json children = Json::array();
    for (const auto& e : n.children) children.push_back(Json{{"rel", e.label}, {"node", node(e.child)}});
    j["children"] = children;
    return j;
  };
  return node(0);
}

Arborescence arbor_from_json(const Json& j) {
  Arborescence a;
  if (j.is_null()) return a;
  std::function<std::size_t(const Json&)> node = [&](const Json& n) {
    auto id = a.add_node(field<std::string>(n, "label"), field<int>(n, "index"), anchors_from(n.value("anchors", Json())));
    for (const auto& c : n.value("children", Json::array())) {
      auto child = node(c.at("node"));
      a.add_child(id, field<std::string>(c, "rel"), child);
    }
    return id;
  };
  node(j);
  return a;
}

// ---------------------------------------------------------------- embeddings

void EmbeddingTable::insert(std::string word, std::vector<double> values) {
  if (values.size() != dim_)
    throw ValidationError("embedding for '" + word + "' has dimension " + std::to_string(values.size()) +
                          ", expected " + std::to_string(dim_));
  rows_[std::move(word)] = std::move(values);
}

const std::vector<double>* EmbeddingTable::lookup(const std::string& word) const {
  if (auto it = rows_.find(word); it != rows_.end()) return &it->second;
  std::string lower = word;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (auto it = rows_.find(lower); it != rows_.end()) return &it->second;
  return nullptr;
}

EmbeddingTable parse_embeddings(std::string_view text, std::size_t dim) {
  EmbeddingTable table(dim);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> values;
    std::string tok;
    while (fields >> tok) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ValidationError("embeddings line " + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
    }
    if (values.size() != dim)
      throw ValidationError("embeddings line " + std::to_string(lineno) + ": dimension " +
                            std::to_string(values.size()) + " does not match declared " + std::to_string(dim));
    table.insert(std::move(word), std::move(values));
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim) {
  return parse_embeddings(read_file(path), dim);
}

ExternalVectors load_external_vectors(const std::filesystem::path& path) {
  ExternalVectors out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = Json::parse(line);
    auto vectors = field<std::vector<std::vector<double>>>(j, "vectors");
    for (const auto& v : vectors)
      if (v.size() != vectors.front().size()) throw ValidationError("external vectors: ragged rows");
    out[field<std::string>(j, "id")] = std::move(vectors);
  }
  return out;
}

// ---------------------------------------------------------------- checkpoints

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  return v;
}

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t p = 1;
  for (auto d : shape) p *= d;
  return p;
}

}  // namespace

std::string encode_checkpoint(const CheckpointData& c) {
  Json header;
  header["format_version"] = kCheckpointVersion;
  header["hyperparameters"] = c.hyperparameters;
  header["vocabularies"] = c.vocabularies;
  Json dir = Json::array();
  std::size_t offset = 0;
  std::set<std::string> names;
  for (const auto& t : c.tensors) {
    if (!names.insert(t.name).second) throw ValidationError("checkpoint: duplicate tensor '" + t.name + "'");
    if (product(t.shape) != t.values.size())
      throw ValidationError("checkpoint: tensor '" + t.name + "' shape does not match its values");
    dir.push_back(Json{{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.values.size() * 4;
  }
  header["tensors"] = dir;
  std::string out = header.dump();
  out += '\n';
  const auto payload_start = out.size();
  out.resize(payload_start + offset);
  char* p = out.data() + payload_start;
  for (const auto& t : c.tensors) {
    for (double v : t.values) {
      auto bits = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      std::memcpy(p, &bits, 4);
      p += 4;
    }
  }
  return out;
}

CheckpointData decode_checkpoint(std::string_view bytes) {
  auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw ValidationError("checkpoint: missing header line");
  Json header;
  try {
    header = Json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("checkpoint header: ") + e.what());
  }
  const int version = field<int>(header, "format_version");
  if (version != kCheckpointVersion)
    throw ValidationError("checkpoint: format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  CheckpointData c;
  c.hyperparameters = header.value("hyperparameters", Json::object());
  c.vocabularies = header.value("vocabularies", Json::object());
  const auto payload = bytes.substr(nl + 1);
  std::size_t expected = 0;
  std::set<std::string> names;
  for (const auto& entry : header.at("tensors")) {
    NamedTensor t;
    t.name = field<std::string>(entry, "name");
    t.shape = field<std::vector<std::size_t>>(entry, "shape");
    if (!names.insert(t.name).second) throw ValidationError("checkpoint: duplicate tensor '" + t.name + "'");
    const auto offset = field<std::size_t>(entry, "offset");
    const auto count = product(t.shape);
    if (offset != expected) throw ValidationError("checkpoint: tensor '" + t.name + "' has a non-contiguous offset");
    if (offset + count * 4 > payload.size()) throw ValidationError("checkpoint: payload truncated at '" + t.name + "'");
    t.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, payload.data() + offset + i * 4, 4);
      t.values[i] = static_cast<double>(std::bit_cast<float>(to_le(bits)));
    }
    expected += count * 4;
    c.tensors.push_back(std::move(t));
  }
  if (expected != payload.size())
    throw ValidationError("checkpoint: payload is " + std::to_string(payload.size()) + " bytes, directory declares " +
                          std::to_string(expected));
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& c) {
  write_file(path, encode_checkpoint(c));
}

CheckpointData load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace arbor::io
