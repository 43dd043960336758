#include <algorithm>
#include <sstream>

#include "arbor/io.hpp"

namespace arbor::io {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

constexpr std::size_t kFixedColumns = 6;

}  // namespace

SdpSentence read_sdp(std::string_view text) {
  SdpSentence out;
  out.graph.framework = Framework::kDm;
  std::vector<std::vector<std::string>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (rows.empty()) out.id = line.substr(1);
      continue;
    }
    rows.push_back(split_tabs(line));
  }
  if (rows.empty()) return out;

  const auto width = rows.front().size();
  if (width < kFixedColumns)
    throw ValidationError("SDP: row 1 has " + std::to_string(width) + " columns, need at least 6");
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].size() != width)
      throw ValidationError("SDP: ragged row " + std::to_string(r + 1) + " (" + std::to_string(rows[r].size()) +
                            " columns, expected " + std::to_string(width) + ")");

  std::vector<std::size_t> predicates;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row[0] != std::to_string(r + 1))
      throw ValidationError("SDP: row " + std::to_string(r + 1) + " has id '" + row[0] + "'");
    for (std::size_t c : {4u, 5u})
      if (row[c] != "+" && row[c] != "-")
        throw ValidationError("SDP: row " + std::to_string(r + 1) + " flag column holds '" + row[c] + "'");
    out.sentence.tokens.push_back(row[1]);
    out.sentence.lemmas.push_back(row[2]);
    out.sentence.pos.push_back(row[3]);
    if (row[5] == "+") predicates.push_back(r);
  }
  if (width - kFixedColumns != predicates.size())
    throw ValidationError("SDP: " + std::to_string(width - kFixedColumns) + " argument columns for " +
                          std::to_string(predicates.size()) + " predicates");

  std::vector<bool> is_node(rows.size(), false);
  std::vector<GraphEdge> edges;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r][4] == "+" || rows[r][5] == "+") is_node[r] = true;
    for (std::size_t k = 0; k < predicates.size(); ++k) {
      const auto& cell = rows[r][kFixedColumns + k];
      if (cell == "_") continue;
      is_node[r] = is_node[predicates[k]] = true;
      edges.push_back(GraphEdge{rows[predicates[k]][0], rows[r][0], cell});
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!is_node[r]) continue;
    const int t = static_cast<int>(r);
    out.graph.nodes.push_back(GraphNode{rows[r][0], rows[r][1], {Span{t, t + 1}}});
    if (rows[r][4] == "+") out.graph.tops.push_back(rows[r][0]);
  }
  // Edges in predicate-major order, matching column order.
  std::stable_sort(edges.begin(), edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
    return std::stoi(a.source) < std::stoi(b.source);
  });
  out.graph.edges = std::move(edges);
  return out;
}

std::vector<SdpSentence> read_sdp_corpus(std::string_view text) {
  std::vector<SdpSentence> out;
  std::istringstream in{std::string(text)};
  std::string line, block;
  auto flush = [&] {
    if (block.find_first_not_of("\n") != std::string::npos) out.push_back(read_sdp(block));
    block.clear();
  };
  bool has_rows = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (has_rows) flush();
      has_rows = false;
      continue;
    }
    if (line.front() != '#') has_rows = true;
    block += line + '\n';
  }
  if (has_rows) flush();
  return out;
}

std::string write_sdp(const SdpSentence& s) {
  const auto& g = s.graph;
  const auto n = s.sentence.size();
  std::vector<const GraphNode*> at_token(n, nullptr);
  for (const auto& node : g.nodes) {
    if (node.anchors.size() != 1 || node.anchors[0].end != node.anchors[0].begin + 1 ||
        node.anchors[0].begin < 0 || static_cast<std::size_t>(node.anchors[0].begin) >= n)
      throw ValidationError("write_sdp: node '" + node.id + "' is not anchored to a single token");
    auto& slot = at_token[static_cast<std::size_t>(node.anchors[0].begin)];
    if (slot) throw ValidationError("write_sdp: two nodes share token " + std::to_string(node.anchors[0].begin));
    slot = &node;
  }
  auto token_of = [&](const std::string& id) { return static_cast<std::size_t>(g.nodes[g.at(id)].anchors[0].begin); };

  std::vector<bool> top(n, false), pred(n, false);
  for (const auto& t : g.tops) top[token_of(t)] = true;
  for (const auto& e : g.edges) pred[token_of(e.source)] = true;
  std::vector<std::size_t> pred_column(n, 0);
  std::size_t columns = 0;
  for (std::size_t t = 0; t < n; ++t)
    if (pred[t]) pred_column[t] = columns++;
  std::vector<std::vector<std::string>> args(n, std::vector<std::string>(columns, "_"));
  for (const auto& e : g.edges) {
    auto& cell = args[token_of(e.target)][pred_column[token_of(e.source)]];
    if (cell != "_") throw ValidationError("write_sdp: parallel edges are not representable");
    cell = e.label;
  }

  std::ostringstream os;
  if (!s.id.empty()) os << '#' << s.id << '\n';
  for (std::size_t t = 0; t < n; ++t) {
    os << (t + 1) << '\t' << s.sentence.tokens[t] << '\t'
       << (t < s.sentence.lemmas.size() ? s.sentence.lemmas[t] : "_") << '\t'
       << (t < s.sentence.pos.size() ? s.sentence.pos[t] : "_") << '\t' << (top[t] ? '+' : '-') << '\t'
       << (pred[t] ? '+' : '-');
    for (const auto& a : args[t]) os << '\t' << a;
    os << '\n';
  }
  return os.str();
}

}  // namespace arbor::io
