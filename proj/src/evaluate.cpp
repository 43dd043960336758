#include "arbor/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "arbor/inference.hpp"

namespace arbor {

F1Report F1Report::from_counts(std::size_t matched, std::size_t gold, std::size_t pred) {
  F1Report r;
  r.matched = matched;
  r.gold = gold;
  r.pred = pred;
  r.precision = pred ? static_cast<double>(matched) / static_cast<double>(pred) : 0.0;
  r.recall = gold ? static_cast<double>(matched) / static_cast<double>(gold) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

F1Report& F1Report::operator+=(const F1Report& o) {
  *this = from_counts(matched + o.matched, gold + o.gold, pred + o.pred);
  return *this;
}

io::Json F1Report::to_json() const {
  return io::Json{{"precision", precision}, {"recall", recall}, {"f1", f1},
                  {"matched", matched},     {"gold", gold},     {"pred", pred}};
}

namespace {

std::size_t multiset_overlap(const std::map<std::string, std::size_t>& a, const std::map<std::string, std::size_t>& b) {
  std::size_t n = 0;
  for (const auto& [k, c] : a)
    if (auto it = b.find(k); it != b.end()) n += std::min(c, it->second);
  return n;
}

std::size_t total(const std::map<std::string, std::size_t>& a) {
  std::size_t n = 0;
  for (const auto& kv : a) n += kv.second;
  return n;
}

std::string span_key(std::vector<Span> spans) {
  std::sort(spans.begin(), spans.end());
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
  std::string k;
  for (const auto& s : spans) k += std::to_string(s.begin) + ":" + std::to_string(s.end) + ",";
  return k;
}

/// Anchor identity of every node; UCCA units take the yield of their
/// primary (first incoming) edges.
std::vector<std::string> node_keys(const SemanticGraph& g) {
  const auto n = g.nodes.size();
  std::vector<std::vector<std::size_t>> primary(n);
  std::vector<bool> has_parent(n, false);
  for (const auto& e : g.edges) {
    const auto t = g.at(e.target);
    if (has_parent[t]) continue;
    has_parent[t] = true;
    primary[g.at(e.source)].push_back(t);
  }
  std::vector<std::vector<Span>> yield(n);
  std::vector<int> state(n, 0);
  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    if (state[v] == 2) return;
    if (state[v] == 1) throw ValidationError("triple F1: cyclic primary structure");
    state[v] = 1;
    yield[v] = g.nodes[v].anchors;
    for (auto c : primary[v]) {
      visit(c);
      yield[v].insert(yield[v].end(), yield[c].begin(), yield[c].end());
    }
    state[v] = 2;
  };
  std::vector<std::string> keys(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (g.framework != Framework::kUcca) {
      if (g.nodes[v].anchors.empty())
        throw ValidationError("triple F1 needs anchored nodes; node '" + g.nodes[v].id + "' has none");
      keys[v] = span_key(g.nodes[v].anchors);
      continue;
    }
    visit(v);
    if (yield[v].empty()) throw ValidationError("triple F1: UCCA unit '" + g.nodes[v].id + "' spans no terminals");
    keys[v] = span_key(yield[v]);
  }
  return keys;
}

std::map<std::string, std::size_t> anchored_triples(const SemanticGraph& g) {
  const auto keys = node_keys(g);
  std::map<std::string, std::size_t> t;
  for (const auto& e : g.edges) ++t[keys[g.at(e.source)] + "\t" + e.label + "\t" + keys[g.at(e.target)]];
  for (const auto& top : g.tops) ++t["@top@\t\t" + keys[g.at(top)]];
  return t;
}

}  // namespace

F1Report labeled_triple_f1(const SemanticGraph& gold, const SemanticGraph& pred) {
  if (gold.framework == Framework::kAmr || pred.framework == Framework::kAmr)
    throw ValidationError("triple F1 is for anchored frameworks; score AMR with smatch");
  const auto g = anchored_triples(gold);
  const auto p = anchored_triples(pred);
  return F1Report::from_counts(multiset_overlap(g, p), total(g), total(p));
}

// ---------------------------------------------------------------- smatch

namespace {

constexpr int kUnmapped = -1;

struct SmatchProblem {
  std::size_t ng = 0, np = 0;
  // instance[g][p] = 1 if labels agree
  std::vector<std::vector<int>> instance;
  // gold edges grouped by key with multiplicity
  struct Edge {
    std::size_t a, b;
    std::string label;
    std::size_t count;
  };
  std::vector<Edge> gold_edges;
  std::map<std::tuple<std::size_t, std::string, std::size_t>, std::size_t> pred_edges;
  std::vector<bool> gold_top, pred_top;
  std::size_t gold_triples = 0, pred_triples = 0;
  std::vector<std::vector<std::size_t>> edges_of;  // gold var -> gold edge ids

  std::size_t edge_match(const Edge& e, const std::vector<int>& m) const {
    if (m[e.a] == kUnmapped || m[e.b] == kUnmapped) return 0;
    auto it = pred_edges.find({static_cast<std::size_t>(m[e.a]), e.label, static_cast<std::size_t>(m[e.b])});
    return it == pred_edges.end() ? 0 : std::min(e.count, it->second);
  }

  std::size_t score(const std::vector<int>& m) const {
    std::size_t s = 0;
    for (std::size_t g = 0; g < ng; ++g)
      if (m[g] != kUnmapped) s += instance[g][m[g]] + (gold_top[g] && pred_top[m[g]] ? 1 : 0);
    for (const auto& e : gold_edges) s += edge_match(e, m);
    return s;
  }
};

SmatchProblem build_problem(const SemanticGraph& gold, const SemanticGraph& pred, bool tops) {
  SmatchProblem p;
  p.ng = gold.nodes.size();
  p.np = pred.nodes.size();
  p.instance.assign(p.ng, std::vector<int>(p.np, 0));
  for (std::size_t g = 0; g < p.ng; ++g)
    for (std::size_t q = 0; q < p.np; ++q) p.instance[g][q] = gold.nodes[g].label == pred.nodes[q].label;
  std::map<std::tuple<std::size_t, std::string, std::size_t>, std::size_t> ge;
  for (const auto& e : gold.edges) ++ge[{gold.at(e.source), e.label, gold.at(e.target)}];
  for (const auto& e : pred.edges) ++p.pred_edges[{pred.at(e.source), e.label, pred.at(e.target)}];
  p.edges_of.resize(p.ng);
  for (const auto& [k, c] : ge) {
    p.edges_of[std::get<0>(k)].push_back(p.gold_edges.size());
    if (std::get<2>(k) != std::get<0>(k)) p.edges_of[std::get<2>(k)].push_back(p.gold_edges.size());
    p.gold_edges.push_back({std::get<0>(k), std::get<2>(k), std::get<1>(k), c});
  }
  p.gold_top.assign(p.ng, false);
  p.pred_top.assign(p.np, false);
  std::size_t gt = 0, pt = 0;
  if (tops) {
    for (const auto& t : gold.tops)
      if (!p.gold_top[gold.at(t)]) p.gold_top[gold.at(t)] = true, ++gt;
    for (const auto& t : pred.tops)
      if (!p.pred_top[pred.at(t)]) p.pred_top[pred.at(t)] = true, ++pt;
  }
  p.gold_triples = p.ng + gold.edges.size() + gt;
  p.pred_triples = p.np + pred.edges.size() + pt;
  return p;
}

std::size_t exact_search(const SmatchProblem& p) {
  std::vector<int> m(p.ng, kUnmapped);
  std::vector<bool> used(p.np, false);
  std::size_t best = 0;
  // Triples a gold variable can still contribute once it is assigned.
  std::vector<std::size_t> potential(p.ng);
  for (std::size_t g = 0; g < p.ng; ++g) potential[g] = 1 + (p.gold_top[g] ? 1 : 0);
  for (const auto& e : p.gold_edges) potential[std::max(e.a, e.b)] += e.count;

  std::vector<std::size_t> rest(p.ng + 1, 0);
  for (std::size_t g = p.ng; g-- > 0;) rest[g] = rest[g + 1] + potential[g];

  std::function<void(std::size_t, std::size_t)> go = [&](std::size_t g, std::size_t partial) {
    if (partial + rest[g] <= best && g < p.ng) return;
    if (g == p.ng) {
      best = std::max(best, partial);
      return;
    }
    auto gain = [&](int q) {
      m[g] = q;
      std::size_t s = 0;
      if (q != kUnmapped) s += p.instance[g][q] + (p.gold_top[g] && p.pred_top[q] ? 1 : 0);
      // Edges whose later endpoint is g become decidable now.
      for (auto ei : p.edges_of[g]) {
        const auto& e = p.gold_edges[ei];
        if (std::max(e.a, e.b) == g) s += p.edge_match(e, m);
      }
      return s;
    };
    for (std::size_t q = 0; q < p.np; ++q) {
      if (used[q]) continue;
      used[q] = true;
      go(g + 1, partial + gain(static_cast<int>(q)));
      used[q] = false;
    }
    go(g + 1, partial + gain(kUnmapped));
    m[g] = kUnmapped;
  };
  go(0, 0);
  return best;
}

std::size_t hill_climb(const SmatchProblem& p, std::size_t restarts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t best = 0;
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    std::vector<int> m(p.ng, kUnmapped);
    std::vector<int> owner(p.np, kUnmapped);
    if (r == 0) {
      // Label-matching start.
      for (std::size_t g = 0; g < p.ng; ++g)
        for (std::size_t q = 0; q < p.np; ++q)
          if (owner[q] == kUnmapped && p.instance[g][q]) {
            m[g] = static_cast<int>(q);
            owner[q] = static_cast<int>(g);
            break;
          }
    } else {
      std::vector<std::size_t> perm(p.np);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t g = 0; g < p.ng && g < p.np; ++g) {
        m[g] = static_cast<int>(perm[g]);
        owner[perm[g]] = static_cast<int>(g);
      }
    }
    std::size_t cur = p.score(m);
    // Plateaus are common on sparse overlap; allow a few sideways steps to fresh mappings.
    std::size_t sideways = 2 * (p.ng + p.np);
    std::set<std::vector<int>> seen{m};
    for (bool improved = true; improved;) {
      improved = false;
      std::size_t best_score = cur;
      std::vector<int> best_m;
      std::vector<std::vector<int>> level;
      auto consider = [&](std::vector<int>&& trial) {
        const auto s = p.score(trial);
        if (s > best_score) {
          best_score = s;
          best_m = std::move(trial);
        } else if (s == cur && best_m.empty() && sideways > 0 && !seen.count(trial)) {
          level.push_back(std::move(trial));
        }
      };
      for (std::size_t g = 0; g < p.ng; ++g) {
        for (int q = kUnmapped; q < static_cast<int>(p.np); ++q) {
          if (q == m[g]) continue;
          auto trial = m;
          if (q != kUnmapped && owner[q] != kUnmapped) trial[owner[q]] = m[g];  // swap
          trial[g] = q;
          consider(std::move(trial));
        }
      }
      // Both endpoints of a gold edge onto a same-labeled predicted edge.
      for (const auto& e : p.gold_edges)
        for (const auto& [key, count] : p.pred_edges) {
          if (std::get<1>(key) != e.label) continue;
          const auto qa = static_cast<int>(std::get<0>(key)), qb = static_cast<int>(std::get<2>(key));
          if ((e.a == e.b) != (qa == qb)) continue;
          if (m[e.a] == qa && m[e.b] == qb) continue;
          auto trial = m;
          auto place = [&](std::size_t g, int q) {
            for (std::size_t h = 0; h < p.ng; ++h)
              if (trial[h] == q && h != g) trial[h] = trial[g];
            trial[g] = q;
          };
          place(e.a, qa);
          place(e.b, qb);
          if (trial[e.a] != qa) continue;
          consider(std::move(trial));
        }
      if (best_m.empty() && !level.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, level.size() - 1);
        best_m = std::move(level[pick(rng)]);
        --sideways;
      }
      if (!best_m.empty()) {
        seen.insert(best_m);
        m = std::move(best_m);
        std::fill(owner.begin(), owner.end(), kUnmapped);
        for (std::size_t g = 0; g < p.ng; ++g)
          if (m[g] != kUnmapped) owner[m[g]] = static_cast<int>(g);
        cur = best_score;
        improved = true;
      }
    }
    best = std::max(best, cur);
  }
  return best;
}

}  // namespace

F1Report smatch_score(const SemanticGraph& gold, const SemanticGraph& pred, const SmatchOptions& opt) {
  const auto p = build_problem(gold, pred, opt.include_tops);
  std::size_t matched = 0;
  if (opt.mode == SmatchMode::kExact) {
    if (std::max(p.ng, p.np) > opt.exact_limit)
      throw ValidationError("exact smatch supports at most " + std::to_string(opt.exact_limit) + " variables, got " +
                            std::to_string(std::max(p.ng, p.np)));
    matched = exact_search(p);
  } else {
    matched = hill_climb(p, opt.restarts, opt.seed);
  }
  return F1Report::from_counts(matched, p.gold_triples, p.pred_triples);
}

F1Report graph_score(const SemanticGraph& gold, const SemanticGraph& pred, const SmatchOptions& opt) {
  if (gold.framework != pred.framework) throw ValidationError("graph score: framework mismatch");
  return gold.framework == Framework::kAmr ? smatch_score(gold, pred, opt) : labeled_triple_f1(gold, pred);
}

F1Report relation_f1(const std::vector<RelationSequence>& gold, const std::vector<RelationSequence>& pred) {
  if (gold.size() != pred.size()) throw ValidationError("relation F1: gold and prediction counts differ");
  F1Report acc;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    auto tuples = [](const RelationSequence& rs) {
      std::map<std::string, std::size_t> t;
      for (const auto& r : rs.relations)
        ++t[r.source_label + "\t" + std::to_string(r.source_index) + "\t" + r.relation + "\t" + r.target_label +
            "\t" + std::to_string(r.target_index)];
      return t;
    };
    const auto g = tuples(gold[k]);
    const auto p = tuples(pred[k]);
    acc += F1Report::from_counts(multiset_overlap(g, p), total(g), total(p));
  }
  return acc;
}

// ---------------------------------------------------------------- validity

io::Json ValidityAudit::to_json() const {
  io::Json j{{"graphs", graphs}, {"invalid", invalid}, {"examples", examples}};
  if (auto r = rate()) j["rate"] = *r;
  else j["rate"] = "n/a";
  return j;
}

std::set<std::string> default_functional_labels(Framework f) {
  if (f == Framework::kAmr) return {"ARG0", "ARG1", "ARG2", "ARG3", "ARG4", "ARG5"};
  return {};
}

ValidityAudit validity_audit(const std::vector<SemanticGraph>& graphs, const std::set<std::string>& functional) {
  ValidityAudit a;
  a.graphs = graphs.size();
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const auto& g = graphs[k];
    std::map<std::pair<std::string, std::string>, std::size_t> seen;
    bool bad = false;
    for (const auto& e : g.edges) {
      if (!functional.count(e.label)) continue;
      if (++seen[{e.source, e.label}] == 2) {
        bad = true;
        if (a.examples.size() < 10)
          a.examples.push_back("graph " + std::to_string(k) + ": node '" + e.source + "' has repeated " + e.label);
      }
    }
    a.invalid += bad;
  }
  return a;
}

// ---------------------------------------------------------------- speed

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("fit_line: need at least two paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

io::Json SpeedReport::to_json() const {
  return io::Json{{"sentences", sentences},
                  {"tokens", tokens},
                  {"greedy_seconds", greedy_seconds},
                  {"greedy_tokens_per_sec", greedy_tokens_per_sec},
                  {"beam_size", beam_size},
                  {"beam_seconds", beam_seconds},
                  {"beam_tokens_per_sec", beam_tokens_per_sec},
                  {"total_steps", total_steps},
                  {"total_relations", total_relations},
                  {"linear_fit", {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2}}}};
}

SpeedReport speed_bench(const TransducerModel& m, const std::vector<EncoderInput>& inputs, std::size_t beam_size,
                        std::size_t max_len) {
  using Clock = std::chrono::steady_clock;
  SpeedReport r;
  r.sentences = inputs.size();
  r.beam_size = beam_size;
  std::vector<double> lengths, times;
  for (const auto& in : inputs) {
    r.tokens += in.size();
    const auto t0 = Clock::now();
    const auto res = greedy_decode(m, in, max_len);
    const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
    r.greedy_seconds += dt;
    r.total_steps += res.steps;
    r.total_relations += res.relations.relations.size();
    lengths.push_back(static_cast<double>(res.relations.relations.size()));
    times.push_back(dt);
  }
  for (const auto& in : inputs) {
    const auto t0 = Clock::now();
    beam_decode(m, in, beam_size, max_len);
    r.beam_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
  }
  const auto tps = [&](double s) { return s > 0 ? static_cast<double>(r.tokens) / s : 0.0; };
  r.greedy_tokens_per_sec = tps(r.greedy_seconds);
  r.beam_tokens_per_sec = tps(r.beam_seconds);
  if (lengths.size() >= 2) r.fit = fit_line(lengths, times);
  return r;
}

}  // namespace arbor
