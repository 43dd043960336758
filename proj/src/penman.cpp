#include <cctype>
#include <functional>
#include <set>
#include <sstream>

#include "arbor/io.hpp"

namespace arbor::io {
namespace {

enum class Tok { kLParen, kRParen, kSlash, kRole, kString, kSymbol, kEnd };

struct Token {
  Tok kind;
  std::string text;
  std::size_t offset;
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto is_delim = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '/' || c == ':';
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(') {
      out.push_back({Tok::kLParen, "(", i++});
    } else if (c == ')') {
      out.push_back({Tok::kRParen, ")", i++});
    } else if (c == '/') {
      out.push_back({Tok::kSlash, "/", i++});
    } else if (c == ':') {
      std::size_t j = i + 1;
      while (j < s.size() && !is_delim(s[j]) && s[j] != '"') ++j;
      if (j == i + 1) throw ValidationError("PENMAN: empty role at offset " + std::to_string(i));
      out.push_back({Tok::kRole, std::string(s.substr(i + 1, j - i - 1)), i});
      i = j;
    } else if (c == '"') {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != '"') j += (s[j] == '\\') ? 2 : 1;
      if (j >= s.size()) throw ValidationError("PENMAN: unterminated string at offset " + std::to_string(i));
      out.push_back({Tok::kString, std::string(s.substr(i, j - i + 1)), i});
      i = j + 1;
    } else {
      std::size_t j = i;
      while (j < s.size() && !is_delim(s[j]) && s[j] != '"') ++j;
      out.push_back({Tok::kSymbol, std::string(s.substr(i, j - i)), i});
      i = j;
    }
  }
  out.push_back({Tok::kEnd, "", s.size()});
  return out;
}

struct RawEdge {
  std::string role;
  std::optional<std::size_t> node;  // nested node
  std::string atom;                 // variable reference or constant
};

struct RawNode {
  std::string var;
  std::string label;
  std::vector<RawEdge> edges;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<RawNode> parse() {
    if (peek().kind != Tok::kLParen) fail("expected '('");
    parse_node();
    if (peek().kind == Tok::kRParen) fail("unbalanced parentheses: unexpected ')'");
    if (peek().kind != Tok::kEnd) fail("trailing input after the top node");
    return std::move(nodes_);
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("PENMAN: " + msg + " at offset " + std::to_string(peek().offset));
  }

  std::size_t parse_node() {
    next();  // '('
    if (peek().kind == Tok::kEnd) fail("unbalanced parentheses");
    if (peek().kind != Tok::kSymbol) fail("expected a variable");
    RawNode node;
    node.var = next().text;
    if (!vars_.insert(node.var).second) fail("duplicate variable definition '" + node.var + "'");
    if (peek().kind != Tok::kSlash) fail("expected '/' after variable '" + node.var + "'");
    next();
    if (peek().kind != Tok::kSymbol && peek().kind != Tok::kString) fail("expected a concept");
    node.label = next().text;
    const std::size_t self = nodes_.size();
    nodes_.push_back(std::move(node));
    while (true) {
      const auto& t = peek();
      if (t.kind == Tok::kRParen) {
        next();
        return self;
      }
      if (t.kind == Tok::kEnd) fail("unbalanced parentheses");
      if (t.kind != Tok::kRole) fail("expected a role or ')'");
      RawEdge edge;
      edge.role = next().text;
      switch (peek().kind) {
        case Tok::kLParen:
          edge.node = parse_node();
          break;
        case Tok::kSymbol:
        case Tok::kString:
          edge.atom = next().text;
          break;
        default:
          fail("role ':" + edge.role + "' without target");
      }
      nodes_[self].edges.push_back(std::move(edge));
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<RawNode> nodes_;
  std::set<std::string> vars_;
};

bool is_inverse(const std::string& role) {
  return role.size() > kInverseSuffix.size() && role.ends_with(kInverseSuffix);
}

bool is_number(std::string_view s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  bool digit = false;
  for (; i < s.size(); ++i) {
    if (std::isdigit(static_cast<unsigned char>(s[i]))) digit = true;
    else if (s[i] != '.' && s[i] != '/' && s[i] != 'e' && s[i] != 'E') return false;
  }
  return digit;
}

bool bare_constant(std::string_view label) {
  return (label.size() >= 2 && label.front() == '"' && label.back() == '"') || is_number(label) ||
         label == "-" || label == "+";
}

bool plain_symbol(std::string_view label) {
  if (label.empty()) return false;
  if (label.front() == '"') return label.size() >= 2 && label.back() == '"';
  for (char c : label)
    if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '/' || c == ':' || c == '"')
      return false;
  return true;
}

}  // namespace

SemanticGraph read_penman(std::string_view text) {
  auto raw = Parser(lex(text)).parse();
  SemanticGraph g;
  g.framework = Framework::kAmr;
  std::set<std::string> vars;
  for (const auto& n : raw) {
    g.nodes.push_back(GraphNode{n.var, n.label, {}});
    vars.insert(n.var);
  }
  g.tops.push_back(raw.front().var);
  std::size_t constants = 0;
  auto fresh_id = [&] {
    std::string id;
    do {
      id = "_c" + std::to_string(constants++);
    } while (vars.count(id));
    return id;
  };
  for (const auto& n : raw) {
    for (const auto& e : n.edges) {
      std::string target;
      if (e.node) {
        target = raw[*e.node].var;
      } else if (vars.count(e.atom)) {
        target = e.atom;
      } else {
        target = fresh_id();
        g.nodes.push_back(GraphNode{target, e.atom, {}});
      }
      if (is_inverse(e.role)) {
        g.edges.push_back(GraphEdge{target, n.var, e.role.substr(0, e.role.size() - kInverseSuffix.size())});
      } else {
        g.edges.push_back(GraphEdge{n.var, target, e.role});
      }
    }
  }
  return g;
}

std::string write_penman(const SemanticGraph& g) {
  if (g.framework != Framework::kAmr) throw ValidationError("write_penman: graph is not AMR");
  if (g.tops.size() != 1) throw ValidationError("write_penman: graph must have exactly one top");
  if (g.weak_components().size() != 1) throw ValidationError("write_penman: graph is disconnected");
  for (const auto& e : g.edges)
    if (is_inverse(e.label))
      throw ValidationError("write_penman: edge label '" + e.label + "' collides with inverse-role syntax");
  for (const auto& n : g.nodes)
    if (!plain_symbol(n.label)) throw ValidationError("write_penman: label '" + n.label + "' is not writable");

  const auto n = g.nodes.size();
  auto indeg = g.in_degree();
  auto outdeg = g.out_degree();
  std::vector<std::string> var(n);
  std::vector<bool> visited(n, false), written(g.edges.size(), false);
  std::vector<std::vector<std::size_t>> incident(n);
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    auto s = g.at(g.edges[i].source), t = g.at(g.edges[i].target);
    incident[s].push_back(i);
    if (t != s) incident[t].push_back(i);
  }
  const auto top = g.at(g.tops.front());
  std::size_t counter = 0;
  auto name_of = [&](std::size_t node) {
    char c = g.nodes[node].label.empty() ? 'x' : g.nodes[node].label.front();
    c = std::isalpha(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : 'x';
    return std::string(1, c) + std::to_string(counter++);
  };

  std::ostringstream os;
  std::function<void(std::size_t, int)> emit = [&](std::size_t node, int depth) {
    visited[node] = true;
    var[node] = name_of(node);
    os << '(' << var[node] << " / " << g.nodes[node].label;
    for (auto ei : incident[node]) {
      if (written[ei]) continue;
      written[ei] = true;
      const auto& e = g.edges[ei];
      const bool forward = g.at(e.source) == node;
      const auto other = forward ? g.at(e.target) : g.at(e.source);
      os << '\n' << std::string(static_cast<std::size_t>(depth + 1) * 4, ' ') << ':' << e.label
         << (forward ? "" : std::string(kInverseSuffix)) << ' ';
      if (visited[other]) {
        os << var[other];
      } else if (forward && other != top && outdeg[other] == 0 && indeg[other] == 1 &&
                 bare_constant(g.nodes[other].label)) {
        visited[other] = true;
        os << g.nodes[other].label;
      } else {
        emit(other, depth + 1);
      }
    }
    os << ')';
  };
  emit(top, 0);
  return os.str();
}

std::vector<PenmanEntry> read_penman_corpus(std::string_view text) {
  std::vector<PenmanEntry> out;
  std::istringstream in{std::string(text)};
  std::string line, body;
  PenmanEntry cur;
  auto flush = [&] {
    if (body.find_first_not_of(" \t\r\n") != std::string::npos) {
      cur.graph = read_penman(body);
      out.push_back(std::move(cur));
    }
    cur = PenmanEntry{};
    body.clear();
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      if (!body.empty()) flush();
      continue;
    }
    if (line.rfind('#', 0) == 0) {
      std::istringstream meta(line.substr(1));
      std::string key;
      meta >> key;
      if (key == "::id") {
        meta >> cur.id;
      } else if (key == "::tok") {
        std::string w;
        while (meta >> w) cur.tokens.push_back(w);
      }
      continue;
    }
    body += line;
    body += '\n';
  }
  flush();
  return out;
}

}  // namespace arbor::io
