#include "arbor/graph.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace arbor {

std::string_view framework_name(Framework f) {
  switch (f) {
    case Framework::kAmr:
      return "amr";
    case Framework::kDm:
      return "dm";
    case Framework::kUcca:
      return "ucca";
  }
  return "?";
}

Framework parse_framework(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "amr") return Framework::kAmr;
  if (lower == "dm" || lower == "sdp") return Framework::kDm;
  if (lower == "ucca") return Framework::kUcca;
  throw ValidationError("unknown framework '" + std::string(name) + "'");
}

std::optional<std::size_t> SemanticGraph::find(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  return std::nullopt;
}

std::size_t SemanticGraph::at(std::string_view id) const {
  auto pos = find(id);
  if (!pos) throw ValidationError("unknown node id '" + std::string(id) + "'");
  return *pos;
}

std::vector<std::size_t> SemanticGraph::out_degree() const {
  std::vector<std::size_t> deg(nodes.size(), 0);
  for (const auto& e : edges) ++deg[at(e.source)];
  return deg;
}

std::vector<std::size_t> SemanticGraph::in_degree() const {
  std::vector<std::size_t> deg(nodes.size(), 0);
  for (const auto& e : edges) ++deg[at(e.target)];
  return deg;
}

std::vector<std::vector<std::size_t>> SemanticGraph::weak_components() const {
  std::vector<std::size_t> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : edges) {
    auto a = root(at(e.source));
    auto b = root(at(e.target));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < nodes.size(); ++i) groups[root(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [_, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

std::vector<std::string> SemanticGraph::violations() const {
  std::vector<std::string> out;
  std::set<std::string> ids;
  for (const auto& n : nodes) {
    if (!ids.insert(n.id).second) out.push_back("duplicate node id '" + n.id + "'");
    for (const auto& s : n.anchors)
      if (s.begin < 0 || s.end <= s.begin)
        out.push_back("node '" + n.id + "' has an empty or negative anchor span");
  }
  bool endpoints_ok = true;
  for (const auto& e : edges) {
    if (!ids.count(e.source) || !ids.count(e.target)) {
      out.push_back("edge " + e.source + " -> " + e.target + " has a dangling endpoint");
      endpoints_ok = false;
    }
    if (e.label.empty()) out.push_back("edge " + e.source + " -> " + e.target + " has an empty label");
  }
  for (const auto& t : tops)
    if (!ids.count(t)) out.push_back("top '" + t + "' is not a node");
  if (!endpoints_ok) return out;

  switch (framework) {
    case Framework::kAmr:
      if (!nodes.empty()) {
        if (tops.size() != 1) out.push_back("AMR graph must have exactly one top");
        if (weak_components().size() != 1) out.push_back("AMR graph is not weakly connected");
      }
      break;
    case Framework::kDm: {
      std::set<int> used;
      for (const auto& n : nodes) {
        if (n.anchors.empty()) out.push_back("DM node '" + n.id + "' has no anchor");
        for (const auto& s : n.anchors)
          for (int t = s.begin; t < s.end; ++t)
            if (!used.insert(t).second)
              out.push_back("DM token " + std::to_string(t) + " anchors two nodes");
      }
      break;
    }
    case Framework::kUcca: {
      for (const auto& n : nodes) {
        bool terminal = !n.label.empty();
        if (terminal && n.anchors.empty()) out.push_back("UCCA terminal '" + n.id + "' has no anchor");
        if (!terminal && !n.anchors.empty())
          out.push_back("UCCA non-terminal '" + n.id + "' carries anchors");
      }
      for (const auto& e : edges) {
        const auto& src = nodes[at(e.source)];
        const auto& tgt = nodes[at(e.target)];
        if (!src.label.empty()) out.push_back("UCCA terminal '" + src.id + "' has an outgoing edge");
        if (!tgt.label.empty() && e.label != kTerminalRelation)
          out.push_back("UCCA edge into terminal '" + tgt.id + "' must be labeled Terminal");
        if (tgt.label.empty() && e.label == kTerminalRelation)
          out.push_back("UCCA Terminal edge into non-terminal '" + tgt.id + "'");
      }
      break;
    }
  }
  return out;
}

void SemanticGraph::validate() const {
  auto v = violations();
  if (!v.empty()) throw ValidationError(v.front());
}

std::size_t Arborescence::add_node(std::string label, int index, std::vector<Span> anchors) {
  nodes.push_back(ArborNode{std::move(label), index, std::move(anchors), {}});
  return nodes.size() - 1;
}

void Arborescence::add_child(std::size_t parent, std::string label, std::size_t child) {
  nodes.at(parent).children.push_back(ArborEdge{std::move(label), child});
}

std::size_t Arborescence::edge_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes) n += node.children.size();
  return n;
}

std::vector<std::size_t> Arborescence::preorder() const {
  std::vector<std::size_t> order;
  if (nodes.empty()) return order;
  std::vector<bool> seen(nodes.size(), false);
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    if (n >= nodes.size() || seen[n]) continue;  // malformed input, caller validates
    seen[n] = true;
    order.push_back(n);
    const auto& ch = nodes[n].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(it->child);
  }
  return order;
}

bool structurally_equal(const Arborescence& a, const Arborescence& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  if (a.empty()) return true;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t visited = 0;
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    stack.pop_back();
    if (++visited > a.nodes.size()) return false;
    const auto& nx = a.nodes[x];
    const auto& ny = b.nodes[y];
    if (nx.label != ny.label || nx.index != ny.index || nx.anchors != ny.anchors ||
        nx.children.size() != ny.children.size())
      return false;
    for (std::size_t i = 0; i < nx.children.size(); ++i) {
      if (nx.children[i].label != ny.children[i].label) return false;
      stack.emplace_back(nx.children[i].child, ny.children[i].child);
    }
  }
  return visited == a.nodes.size();
}

std::vector<std::string> ValidationReport::all() const {
  std::vector<std::string> out = tree_shape;
  out.insert(out.end(), index_coherence.begin(), index_coherence.end());
  out.insert(out.end(), index_positivity.begin(), index_positivity.end());
  return out;
}

ValidationReport validate_arborescence(const Arborescence& a) {
  ValidationReport report;
  const auto n = a.nodes.size();
  if (n == 0) return report;

  std::vector<int> parents(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& e : a.nodes[i].children) {
      if (e.child >= n) {
        report.tree_shape.push_back("node " + std::to_string(i) + " has an out-of-range child");
        continue;
      }
      ++parents[e.child];
    }
  }
  if (parents[0] != 0) report.tree_shape.push_back("root has a parent");
  for (std::size_t i = 1; i < n; ++i)
    if (parents[i] != 1)
      report.tree_shape.push_back("node " + std::to_string(i) + " has " +
                                  std::to_string(parents[i]) + " parents");
  if (a.edge_count() + 1 != n)
    report.tree_shape.push_back("edge count " + std::to_string(a.edge_count()) +
                                " does not match node count " + std::to_string(n));
  // Traversal from the root must reach every node exactly once.
  std::vector<int> visits(n, 0);
  std::vector<std::size_t> stack{0};
  std::size_t steps = 0;
  while (!stack.empty() && steps <= n) {
    auto x = stack.back();
    stack.pop_back();
    ++steps;
    if (++visits[x] > 1) continue;
    for (const auto& e : a.nodes[x].children)
      if (e.child < n) stack.push_back(e.child);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (visits[i] == 0) report.tree_shape.push_back("node " + std::to_string(i) + " unreachable from root");
    if (visits[i] > 1) report.tree_shape.push_back("node " + std::to_string(i) + " visited twice");
  }

  std::map<int, std::string> label_of;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = a.nodes[i];
    if (node.index <= 0)
      report.index_positivity.push_back("node " + std::to_string(i) + " has non-positive index " +
                                        std::to_string(node.index));
    auto [it, fresh] = label_of.emplace(node.index, node.label);
    if (!fresh && it->second != node.label)
      report.index_coherence.push_back("index " + std::to_string(node.index) + " shared by labels '" +
                                       it->second + "' and '" + node.label + "'");
  }
  return report;
}

namespace {

// Colour refinement shared across both graphs so colour ids are comparable.
struct Colouring {
  std::vector<int> c1, c2;
};

std::string anchors_key(const std::vector<Span>& anchors) {
  std::ostringstream os;
  for (const auto& s : anchors) os << s.begin << ':' << s.end << ',';
  return os.str();
}

Colouring refine(const SemanticGraph& g1, const SemanticGraph& g2) {
  auto initial = [](const SemanticGraph& g) {
    std::set<std::string> tops(g.tops.begin(), g.tops.end());
    std::vector<std::string> keys;
    for (const auto& n : g.nodes)
      keys.push_back(n.label + '\x1f' + anchors_key(n.anchors) + '\x1f' + (tops.count(n.id) ? "T" : "-"));
    return keys;
  };
  auto k1 = initial(g1);
  auto k2 = initial(g2);
  Colouring col;
  std::size_t classes = 0;
  for (std::size_t round = 0; round <= g1.nodes.size() + 1; ++round) {
    std::map<std::string, int> dict;
    for (const auto& k : k1) dict.emplace(k, 0);
    for (const auto& k : k2) dict.emplace(k, 0);
    int next = 0;
    for (auto& [_, id] : dict) id = next++;
    col.c1.clear();
    col.c2.clear();
    for (const auto& k : k1) col.c1.push_back(dict[k]);
    for (const auto& k : k2) col.c2.push_back(dict[k]);
    if (dict.size() == classes) break;
    classes = dict.size();
    auto step = [](const SemanticGraph& g, const std::vector<int>& c) {
      std::vector<std::vector<std::string>> out(g.nodes.size()), in(g.nodes.size());
      for (const auto& e : g.edges) {
        auto s = g.at(e.source), t = g.at(e.target);
        out[s].push_back(e.label + '>' + std::to_string(c[t]));
        in[t].push_back(e.label + '<' + std::to_string(c[s]));
      }
      std::vector<std::string> keys;
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        std::sort(out[i].begin(), out[i].end());
        std::sort(in[i].begin(), in[i].end());
        std::string k = std::to_string(c[i]) + '|';
        for (const auto& x : out[i]) k += x + ',';
        k += '|';
        for (const auto& x : in[i]) k += x + ',';
        keys.push_back(std::move(k));
      }
      return keys;
    };
    k1 = step(g1, col.c1);
    k2 = step(g2, col.c2);
  }
  return col;
}

using EdgeBag = std::map<std::pair<std::size_t, std::size_t>, std::vector<std::string>>;

EdgeBag edge_bag(const SemanticGraph& g) {
  EdgeBag bag;
  for (const auto& e : g.edges) bag[{g.at(e.source), g.at(e.target)}].push_back(e.label);
  for (auto& [_, labels] : bag) std::sort(labels.begin(), labels.end());
  return bag;
}

const std::vector<std::string>& labels_between(const EdgeBag& bag, std::size_t s, std::size_t t) {
  static const std::vector<std::string> kNone;
  auto it = bag.find({s, t});
  return it == bag.end() ? kNone : it->second;
}

}  // namespace

bool graph_isomorphic(const SemanticGraph& g1, const SemanticGraph& g2) {
  if (g1.framework != g2.framework)
    throw ValidationError("graph_isomorphic: framework mismatch (" +
                          std::string(framework_name(g1.framework)) + " vs " +
                          std::string(framework_name(g2.framework)) + ")");
  const auto n = g1.nodes.size();
  if (n != g2.nodes.size() || g1.edges.size() != g2.edges.size()) return false;
  if (std::set<std::string>(g1.tops.begin(), g1.tops.end()).size() !=
      std::set<std::string>(g2.tops.begin(), g2.tops.end()).size())
    return false;
  if (n == 0) return true;

  auto col = refine(g1, g2);
  auto h1 = col.c1, h2 = col.c2;
  std::sort(h1.begin(), h1.end());
  std::sort(h2.begin(), h2.end());
  if (h1 != h2) return false;

  auto bag1 = edge_bag(g1);
  auto bag2 = edge_bag(g2);

  // Assign nodes from the most constrained colour classes first.
  std::map<int, int> class_size;
  for (int c : col.c1) ++class_size[c];
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return class_size[col.c1[a]] < class_size[col.c1[b]];
  });

  std::vector<std::size_t> map(n, n);
  std::vector<bool> used(n, false);
  std::function<bool(std::size_t)> search = [&](std::size_t depth) -> bool {
    if (depth == n) return true;
    const auto x = order[depth];
    for (std::size_t y = 0; y < n; ++y) {
      if (used[y] || col.c2[y] != col.c1[x]) continue;
      if (labels_between(bag1, x, x) != labels_between(bag2, y, y)) continue;
      bool ok = true;
      for (std::size_t d = 0; d < depth && ok; ++d) {
        const auto m = order[d];
        ok = labels_between(bag1, x, m) == labels_between(bag2, y, map[m]) &&
             labels_between(bag1, m, x) == labels_between(bag2, map[m], y);
      }
      if (!ok) continue;
      map[x] = y;
      used[y] = true;
      if (search(depth + 1)) return true;
      used[y] = false;
      map[x] = n;
    }
    return false;
  };
  return search(0);
}

}  // namespace arbor
