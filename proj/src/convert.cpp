#include "arbor/convert.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <regex>
#include <set>

namespace arbor::convert {
namespace {

int first_anchor(const GraphNode& n) {
  return n.anchors.empty() ? std::numeric_limits<int>::max() : n.anchors.front().begin;
}

bool has_inverse_suffix(const std::string& label) { return label.ends_with(kInverseSuffix); }

/// Depth-first spanning of a graph into an arborescence. Each graph node is
/// placed once; every later edge into a placed node gets a leaf copy that
/// shares the original's label, anchors and index.
class TreeBuilder {
 public:
  TreeBuilder(const SemanticGraph& g, std::vector<std::vector<std::size_t>> out_edges, ConversionTrace* trace)
      : g_(g), out_(std::move(out_edges)), placed_(g.nodes.size()), covered_(g.edges.size(), false), trace_(trace) {}

  Arborescence& arbor() { return a_; }
  bool placed(std::size_t node) const { return placed_[node].has_value(); }
  std::size_t position(std::size_t node) const { return *placed_[node]; }
  bool covered(std::size_t edge) const { return covered_[edge]; }
  void cover(std::size_t edge) { covered_[edge] = true; }
  std::size_t target(std::size_t edge) const { return g_.at(g_.edges[edge].target); }
  std::size_t source(std::size_t edge) const { return g_.at(g_.edges[edge].source); }

  std::size_t place(std::size_t node, std::string label) {
    auto pos = a_.add_node(std::move(label), next_index_++, g_.nodes[node].anchors);
    placed_[node] = pos;
    return pos;
  }

  std::size_t place_synthetic(std::string label) { return a_.add_node(std::move(label), next_index_++); }

  std::size_t copy_of(std::size_t node) {
    const auto& orig = a_.nodes[*placed_[node]];
    auto pos = a_.add_node(orig.label, orig.index, orig.anchors);
    if (trace_) trace_->duplicates[g_.nodes[node].id].push_back(pos);
    return pos;
  }

  /// Attaches `node` under `parent` via `label`, as original or copy, and
  /// descends if it was new.
  void attach(std::size_t parent_pos, const std::string& label, std::size_t node) {
    if (placed(node)) {
      a_.add_child(parent_pos, label, copy_of(node));
      return;
    }
    auto pos = place(node, g_.nodes[node].label);
    a_.add_child(parent_pos, label, pos);
    dfs(node);
  }

  void dfs(std::size_t node) {
    const auto pos = position(node);
    for (auto e : out_[node]) {
      if (covered_[e]) continue;
      covered_[e] = true;
      attach(pos, g_.edges[e].label, target(e));
    }
  }

 private:
  const SemanticGraph& g_;
  std::vector<std::vector<std::size_t>> out_;
  Arborescence a_;
  std::vector<std::optional<std::size_t>> placed_;
  std::vector<bool> covered_;
  int next_index_ = 1;
  ConversionTrace* trace_;
};

std::vector<std::vector<std::size_t>> outgoing(const SemanticGraph& g) {
  std::vector<std::vector<std::size_t>> out(g.nodes.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) out[g.at(g.edges[e].source)].push_back(e);
  return out;
}

/// Collapses identically indexed arborescence nodes into graph nodes.
/// Returns the graph and, per arborescence position, the graph node id.
struct Merged {
  SemanticGraph graph;
  std::vector<std::string> id_of;  // arborescence position -> graph node id
};

Merged merge_by_index(const Arborescence& a, Framework f, const std::function<bool(std::size_t)>& skip = {}) {
  auto report = validate_arborescence(a);
  if (!report.ok()) throw ValidationError("invalid arborescence: " + report.all().front());
  Merged m;
  m.graph.framework = f;
  m.id_of.resize(a.nodes.size());
  std::map<int, std::string> by_index;
  for (auto pos : a.preorder()) {
    if (skip && skip(pos)) continue;
    const auto& n = a.nodes[pos];
    auto [it, fresh] = by_index.emplace(n.index, "n" + std::to_string(n.index));
    if (fresh) m.graph.nodes.push_back(GraphNode{it->second, n.label, n.anchors});
    m.id_of[pos] = it->second;
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------- AMR

Arborescence amr_to_arbor(const SemanticGraph& g, ConversionTrace* trace) {
  if (g.framework != Framework::kAmr) throw ValidationError("amr_to_arbor: graph is not AMR");
  g.validate();
  if (g.nodes.empty()) return {};
  if (g.tops.size() != 1) throw ValidationError("amr_to_arbor: graph must have exactly one root");

  auto out = outgoing(g);
  for (auto& edges : out)
    std::stable_sort(edges.begin(), edges.end(), [&](std::size_t x, std::size_t y) {
      const auto& ex = g.edges[x];
      const auto& ey = g.edges[y];
      if (ex.label != ey.label) return ex.label < ey.label;
      return g.nodes[g.at(ex.target)].label < g.nodes[g.at(ey.target)].label;
    });
  TreeBuilder b(g, std::move(out), trace);
  const auto root = g.at(g.tops.front());
  b.place(root, g.nodes[root].label);
  b.dfs(root);
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (!b.placed(i)) throw ValidationError("amr_to_arbor: node '" + g.nodes[i].id + "' is unreachable from the root");
  return std::move(b.arbor());
}

SemanticGraph arbor_to_amr(const Arborescence& a) {
  auto m = merge_by_index(a, Framework::kAmr);
  if (a.empty()) return m.graph;
  for (std::size_t p = 0; p < a.nodes.size(); ++p)
    for (const auto& e : a.nodes[p].children) m.graph.edges.push_back(GraphEdge{m.id_of[p], m.id_of[e.child], e.label});
  m.graph.tops.push_back(m.id_of[0]);
  return m.graph;
}

// ---------------------------------------------------------------- DM

Arborescence dm_to_arbor(const SemanticGraph& g, ConversionTrace* trace) {
  if (g.framework != Framework::kDm) throw ValidationError("dm_to_arbor: graph is not DM");
  if (g.nodes.empty()) return {};
  for (const auto& e : g.edges)
    if (e.label == kNullRelation || e.label == kExtraTopRelation || has_inverse_suffix(e.label))
      throw ValidationError("dm_to_arbor: edge label '" + e.label + "' is reserved");

  // Surface order: children by target anchor, then label.
  auto out = outgoing(g);
  for (auto& edges : out)
    std::stable_sort(edges.begin(), edges.end(), [&](std::size_t x, std::size_t y) {
      auto ax = first_anchor(g.nodes[g.at(g.edges[x].target)]);
      auto ay = first_anchor(g.nodes[g.at(g.edges[y].target)]);
      if (ax != ay) return ax < ay;
      return g.edges[x].label < g.edges[y].label;
    });
  std::vector<std::vector<std::size_t>> in(g.nodes.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) in[g.at(g.edges[e].target)].push_back(e);

  std::set<std::size_t> tops;
  for (const auto& t : g.tops) tops.insert(g.at(t));
  auto by_anchor = [&](std::size_t x, std::size_t y) {
    auto ax = first_anchor(g.nodes[x]), ay = first_anchor(g.nodes[y]);
    return ax != ay ? ax < ay : x < y;
  };
  const auto outdeg = g.out_degree();

  struct Component {
    std::vector<std::size_t> members;
    std::size_t root;
  };
  std::vector<Component> comps;
  for (auto& members : g.weak_components()) {
    std::optional<std::size_t> root;
    for (auto m : members)
      if (tops.count(m) && (!root || by_anchor(m, *root))) root = m;
    if (!root) {
      for (auto m : members)
        if (!root || outdeg[m] > outdeg[*root] || (outdeg[m] == outdeg[*root] && by_anchor(m, *root))) root = m;
    }
    comps.push_back(Component{std::move(members), *root});
  }
  std::optional<std::size_t> primary_top;
  for (auto t : tops)
    if (!primary_top || by_anchor(t, *primary_top)) primary_top = t;
  std::stable_sort(comps.begin(), comps.end(), [&](const Component& x, const Component& y) {
    if (primary_top) {
      bool px = x.root == *primary_top, py = y.root == *primary_top;
      if (px != py) return px;
    }
    return by_anchor(x.root, y.root);
  });

  TreeBuilder b(g, std::move(out), trace);
  std::optional<std::size_t> synthetic;
  if (!primary_top) synthetic = b.place_synthetic(std::string(kRootLabel));

  auto span_component = [&](const Component& c) {
    b.place(c.root, g.nodes[c.root].label);
    b.dfs(c.root);
    while (true) {
      // Breadth-first over placed originals for the first node with an
      // incoming edge outside the arborescence.
      std::optional<std::size_t> pick;
      std::deque<std::size_t> queue{b.position(c.root)};
      std::vector<bool> seen(b.arbor().nodes.size(), false);
      std::map<std::size_t, std::size_t> node_at;  // arborescence position -> graph node
      for (auto m : c.members)
        if (b.placed(m)) node_at[b.position(m)] = m;
      while (!queue.empty() && !pick) {
        auto pos = queue.front();
        queue.pop_front();
        if (seen[pos]) continue;
        seen[pos] = true;
        auto it = node_at.find(pos);
        if (it == node_at.end()) continue;  // a copy
        for (auto e : in[it->second]) {
          if (b.covered(e)) continue;
          if (!pick || by_anchor(b.source(e), b.source(*pick)) ||
              (b.source(e) == b.source(*pick) && g.edges[e].label < g.edges[*pick].label))
            pick = e;
        }
        for (const auto& ch : b.arbor().nodes[pos].children) queue.push_back(ch.child);
      }
      if (!pick) break;
      const auto e = *pick;
      const auto src = b.source(e);
      if (b.placed(src)) throw Error("dm_to_arbor: internal error, reversed edge source already placed");
      b.cover(e);
      auto pos = b.place(src, g.nodes[src].label);
      b.arbor().add_child(b.position(b.target(e)), g.edges[e].label + std::string(kInverseSuffix), pos);
      if (trace) trace->reversed.push_back(g.edges[e]);
      b.dfs(src);
    }
  };

  for (std::size_t i = 0; i < comps.size(); ++i) {
    span_component(comps[i]);
    const auto root_pos = b.position(comps[i].root);
    if (synthetic) {
      b.arbor().add_child(*synthetic, std::string(kNullRelation), root_pos);
      if (trace) trace->null_attached.push_back(g.nodes[comps[i].root].id);
    } else if (i > 0) {
      b.arbor().add_child(0, std::string(kNullRelation), root_pos);
      if (trace) trace->null_attached.push_back(g.nodes[comps[i].root].id);
    }
  }
  // Secondary tops hang off the root as copies.
  for (auto t : tops) {
    if (t == *primary_top) continue;
    b.arbor().add_child(0, std::string(kExtraTopRelation), b.copy_of(t));
  }
  return std::move(b.arbor());
}

SemanticGraph arbor_to_dm(const Arborescence& a) {
  const bool synthetic = !a.empty() && a.nodes[0].label == kRootLabel && a.nodes[0].anchors.empty();
  auto m = merge_by_index(a, Framework::kDm, [&](std::size_t pos) { return synthetic && pos == 0; });
  if (a.empty()) return m.graph;
  // DM ids follow the 1-based token position when available.
  std::map<std::string, std::string> rename;
  std::set<std::string> taken;
  for (const auto& n : m.graph.nodes)
    if (!n.anchors.empty()) {
      auto id = std::to_string(n.anchors.front().begin + 1);
      if (taken.insert(id).second) rename[n.id] = id;
    }
  for (auto& n : m.graph.nodes) {
    if (auto it = rename.find(n.id); it != rename.end()) {
      n.id = it->second;
    } else {
      const auto original = n.id;
      while (taken.count(n.id)) n.id += "'";
      taken.insert(n.id);
      rename[original] = n.id;
    }
  }
  auto id_at = [&](std::size_t pos) {
    auto it = rename.find(m.id_of[pos]);
    return it == rename.end() ? m.id_of[pos] : it->second;
  };
  std::set<std::string> tops;
  if (!synthetic) tops.insert(id_at(0));
  for (std::size_t p = 0; p < a.nodes.size(); ++p) {
    for (const auto& e : a.nodes[p].children) {
      if (p == 0 && (e.label == kNullRelation)) continue;
      if (p == 0 && e.label == kExtraTopRelation) {
        tops.insert(id_at(e.child));
        continue;
      }
      if (synthetic && p == 0) continue;
      if (e.label == kNullRelation || e.label == kExtraTopRelation) continue;
      if (has_inverse_suffix(e.label)) {
        auto base = e.label.substr(0, e.label.size() - kInverseSuffix.size());
        if (base.empty()) throw ValidationError("arbor_to_dm: inverse-suffixed label with empty base");
        m.graph.edges.push_back(GraphEdge{id_at(e.child), id_at(p), base});
      } else {
        m.graph.edges.push_back(GraphEdge{id_at(p), id_at(e.child), e.label});
      }
    }
  }
  for (const auto& n : m.graph.nodes)
    if (tops.count(n.id)) m.graph.tops.push_back(n.id);
  return m.graph;
}

// ---------------------------------------------------------------- UCCA

Arborescence ucca_to_arbor(const SemanticGraph& g, ConversionTrace* trace) {
  if (g.framework != Framework::kUcca) throw ValidationError("ucca_to_arbor: graph is not UCCA");
  if (g.nodes.empty()) return {};
  for (const auto& n : g.nodes)
    if (!n.label.empty() && n.anchors.empty())
      throw ValidationError("ucca_to_arbor: terminal '" + n.id + "' has no anchor");
  g.validate();
  for (const auto& e : g.edges)
    if (e.label == kPhraseRelation) throw ValidationError("ucca_to_arbor: edge label 'phrase' is reserved");

  const auto indeg = g.in_degree();
  std::size_t root;
  if (g.tops.size() == 1) {
    root = g.at(g.tops.front());
  } else {
    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      if (indeg[i] == 0) roots.push_back(i);
    if (roots.size() != 1) throw ValidationError("ucca_to_arbor: graph needs a single root");
    root = roots.front();
  }
  auto out = outgoing(g);
  auto terminal = [&](std::size_t n) { return !g.nodes[n].label.empty(); };

  // A pre-terminal: non-root unit whose outgoing edges all reach terminals
  // that have no other parent.
  std::vector<bool> preterminal(g.nodes.size(), false);
  for (std::size_t n = 0; n < g.nodes.size(); ++n) {
    if (n == root || terminal(n) || out[n].empty()) continue;
    bool all = true;
    for (auto e : out[n]) {
      auto t = g.at(g.edges[e].target);
      all = all && terminal(t) && indeg[t] == 1;
    }
    preterminal[n] = all;
  }

  Arborescence a;
  std::vector<std::optional<std::size_t>> placed(g.nodes.size());
  int next_index = 1;
  std::function<void(std::size_t)> dfs;
  auto attach = [&](std::size_t parent_pos, const std::string& label, std::size_t node) {
    if (placed[node]) {
      const auto orig = a.nodes[*placed[node]];
      auto pos = a.add_node(orig.label, orig.index, orig.anchors);
      a.add_child(parent_pos, label, pos);
      if (trace) trace->duplicates[g.nodes[node].id].push_back(pos);
      return;
    }
    if (preterminal[node]) {
      std::vector<std::size_t> terms;
      for (auto e : out[node]) terms.push_back(g.at(g.edges[e].target));
      std::stable_sort(terms.begin(), terms.end(), [&](std::size_t x, std::size_t y) {
        return first_anchor(g.nodes[x]) < first_anchor(g.nodes[y]);
      });
      const auto& head = g.nodes[terms.front()];
      auto pos = a.add_node(head.label, next_index++, head.anchors);
      a.add_child(parent_pos, label, pos);
      placed[node] = placed[terms.front()] = pos;
      for (std::size_t k = 1; k < terms.size(); ++k) {
        const auto& t = g.nodes[terms[k]];
        auto tp = a.add_node(t.label, next_index++, t.anchors);
        a.add_child(pos, std::string(kPhraseRelation), tp);
        placed[terms[k]] = tp;
      }
      if (trace) {
        auto& c = trace->collapsed[g.nodes[node].id];
        for (auto t : terms) c.push_back(g.nodes[t].id);
      }
      return;
    }
    const bool term = terminal(node);
    auto pos = a.add_node(term ? g.nodes[node].label : label, next_index++, g.nodes[node].anchors);
    if (!term && trace) trace->added_labels[g.nodes[node].id] = label;
    a.add_child(parent_pos, label, pos);
    placed[node] = pos;
    if (!term) dfs(node);
  };
  dfs = [&](std::size_t node) {
    const auto pos = *placed[node];
    for (auto e : out[node]) attach(pos, g.edges[e].label, g.at(g.edges[e].target));
  };

  if (terminal(root)) {
    placed[root] = a.add_node(g.nodes[root].label, next_index++, g.nodes[root].anchors);
  } else {
    placed[root] = a.add_node(std::string(kRootLabel), next_index++);
    if (trace) trace->added_labels[g.nodes[root].id] = std::string(kRootLabel);
  }
  dfs(root);
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (!placed[i]) throw ValidationError("ucca_to_arbor: node '" + g.nodes[i].id + "' is unreachable from the root");
  return a;
}

SemanticGraph arbor_to_ucca(const Arborescence& a) {
  auto m = merge_by_index(a, Framework::kUcca);
  if (a.empty()) return m.graph;
  auto& g = m.graph;

  // Incoming edge labels per index, over every occurrence.
  std::map<int, std::vector<std::string>> incoming;
  std::map<int, bool> has_phrase, has_children;
  has_children[a.nodes[0].index] = true;  // an anchored root still needs a unit above its terminal
  for (const auto& n : a.nodes)
    for (const auto& e : n.children) {
      has_children[n.index] = true;
      incoming[a.nodes[e.child].index].push_back(e.label);
      if (e.label == kPhraseRelation) {
        if (n.anchors.empty()) throw ValidationError("arbor_to_ucca: phrase edge under a node with no anchor");
        has_phrase[n.index] = true;
      }
    }

  std::map<std::string, std::string> unit_of;  // collapsed node id -> its pre-terminal id
  std::vector<GraphNode> extra;
  std::vector<GraphEdge> edges;
  for (auto& n : g.nodes) {
    const int index = std::stoi(n.id.substr(1));
    if (n.anchors.empty()) {
      n.label.clear();
      continue;
    }
    bool collapsed = has_phrase[index] || has_children[index];
    for (const auto& l : incoming[index]) collapsed = collapsed || (l != kTerminalRelation && l != kPhraseRelation);
    if (!collapsed) continue;
    // Split into a unit and its first terminal.
    const std::string unit = n.id;
    const std::string term = n.id + "t";
    extra.push_back(GraphNode{term, n.label, n.anchors});
    n.label.clear();
    n.anchors.clear();
    unit_of[unit] = term;
    edges.push_back(GraphEdge{unit, term, std::string(kTerminalRelation)});
  }
  for (std::size_t p = 0; p < a.nodes.size(); ++p)
    for (const auto& e : a.nodes[p].children) {
      const auto label = e.label == kPhraseRelation ? std::string(kTerminalRelation) : e.label;
      edges.push_back(GraphEdge{m.id_of[p], m.id_of[e.child], label});
    }
  g.nodes.insert(g.nodes.end(), extra.begin(), extra.end());
  g.edges = std::move(edges);
  g.tops.push_back(m.id_of[0]);
  return g;
}

// ---------------------------------------------------------------- dispatch

Arborescence to_arbor(const SemanticGraph& g, ConversionTrace* trace) {
  switch (g.framework) {
    case Framework::kAmr:
      return amr_to_arbor(g, trace);
    case Framework::kDm:
      return dm_to_arbor(g, trace);
    case Framework::kUcca:
      return ucca_to_arbor(g, trace);
  }
  throw Error("unreachable");
}

SemanticGraph from_arbor(const Arborescence& a, Framework f) {
  switch (f) {
    case Framework::kAmr:
      return arbor_to_amr(a);
    case Framework::kDm:
      return arbor_to_dm(a);
    case Framework::kUcca:
      return arbor_to_ucca(a);
  }
  throw Error("unreachable");
}

// ---------------------------------------------------------------- senses

std::pair<std::string, std::string> split_sense(const std::string& label) {
  static const std::regex kSense("^(.+)(-[0-9][0-9])$");
  std::smatch m;
  if (std::regex_match(label, m, kSense)) return {m[1].str(), m[2].str()};
  return {label, ""};
}

void SenseTable::observe(const std::string& lemma, const std::string& suffix) { ++counts_[lemma][suffix]; }

std::size_t SenseTable::count(const std::string& lemma, const std::string& suffix) const {
  auto it = counts_.find(lemma);
  if (it == counts_.end()) return 0;
  auto jt = it->second.find(suffix);
  return jt == it->second.end() ? 0 : jt->second;
}

std::string SenseTable::restore(const std::string& label) const {
  if (!split_sense(label).second.empty()) return label;
  auto it = counts_.find(label);
  if (it == counts_.end()) {
    static const std::regex kWord("^[a-z][a-z-]*$");
    return std::regex_match(label, kWord) ? label + "-01" : label;
  }
  const std::string* best = nullptr;
  std::size_t best_count = 0;
  for (const auto& [suffix, c] : it->second)
    if (c > best_count) {
      best = &suffix;
      best_count = c;
    }
  return label + *best;
}

io::Json SenseTable::to_json() const {
  io::Json j = io::Json::object();
  for (const auto& [lemma, senses] : counts_) {
    io::Json s = io::Json::object();
    for (const auto& [suffix, c] : senses) s[suffix] = c;
    j[lemma] = s;
  }
  return j;
}

SenseTable SenseTable::from_json(const io::Json& j) {
  SenseTable t;
  for (const auto& [lemma, senses] : j.items())
    for (const auto& [suffix, c] : senses.items()) t.counts_[lemma][suffix] = c.get<std::size_t>();
  return t;
}

SemanticGraph strip_senses(const SemanticGraph& g, SenseTable* table) {
  SemanticGraph out = g;
  for (auto& n : out.nodes) {
    auto [lemma, suffix] = split_sense(n.label);
    if (table) table->observe(lemma, suffix);
    n.label = lemma;
  }
  return out;
}

SemanticGraph restore_senses(const SemanticGraph& g, const SenseTable& table) {
  SemanticGraph out = g;
  for (auto& n : out.nodes) n.label = table.restore(n.label);
  return out;
}

}  // namespace arbor::convert
