#include "arbor/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "arbor/convert.hpp"
#include "arbor/linearize.hpp"

namespace arbor {

namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Indices of the k largest values, ties by lower index.
std::vector<std::size_t> top_k(const std::vector<double>& v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return v[a] > v[b] || (v[a] == v[b] && a < b); });
  idx.resize(k);
  return idx;
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity(); }

std::mt19937_64& unused_rng() {
  thread_local std::mt19937_64 rng(0);
  return rng;
}

}  // namespace

DecodeResult greedy_decode(const TransducerModel& m, const EncoderInput& in, std::size_t max_len,
                           std::size_t min_len) {
  ad::NoGradScope no_grad;
  auto& rng = unused_rng();
  const auto enc = prepare(m, in, false, rng);
  auto state = start_state(m, enc);
  DecodeResult res;
  RelationInput rel_in;
  for (std::size_t step = 0;; ++step) {
    auto out = target_node_step(m, enc, state, rel_in);
    const auto& pv = out.p_v.value();
    if (step == max_len) {
      res.score += safe_log(pv[kEosId]);
      res.truncated = true;
      break;
    }
    auto best = argmax(pv);
    if (step < min_len && best == kEosId) {
      auto masked = pv;
      masked[kEosId] = -1.0;
      best = argmax(masked);
    }
    res.score += safe_log(pv[best]);
    const auto choice = choice_at(out, best);
    if (is_eos(choice)) break;
    push_node(m, state, describe_choice(m, enc, state, choice), false, rng);

    auto src = source_node_step(m, state);
    const auto u = argmax(src.probs.value());
    res.score += src.log_probs[u];
    const auto j = src.first + u;
    auto rel = relation_type_step(m, state, j);
    const auto r = argmax(rel.probs.value());
    res.score += rel.log_probs[r];
    const auto rid = rel.first + r;
    res.relations.relations.push_back(make_relation(m, state, j, rid));
    rel_in = {rid, j};
  }
  state.finished = true;
  res.relations.eos_terminated = !res.truncated;
  res.steps = state.emitted;
  return res;
}

namespace {

struct Hypothesis {
  DecoderState state;
  std::vector<Relation> relations;
  RelationInput next;
  double score = 0.0;
  bool truncated = false;
};

struct Candidate {
  std::size_t hyp = 0;
  std::size_t target = 0;  // support position in P(v)
  std::size_t source = 0;  // node position
  std::size_t relation = 0;
  double score = 0.0;
  std::size_t order = 0;  // generation order, breaks score ties
};

}  // namespace

DecodeResult beam_decode(const TransducerModel& m, const EncoderInput& in, std::size_t beam_size,
                         std::size_t max_len) {
  if (beam_size == 0) throw ValidationError("beam size must be at least 1");
  ad::NoGradScope no_grad;
  auto& rng = unused_rng();
  const auto enc = prepare(m, in, false, rng);

  std::vector<Hypothesis> beam(1);
  beam[0].state = start_state(m, enc);
  std::vector<Hypothesis> finished;

  auto best_finished = [&]() {
    double b = -std::numeric_limits<double>::infinity();
    for (const auto& f : finished) b = std::max(b, f.score);
    return b;
  };

  for (std::size_t step = 0; !beam.empty(); ++step) {
    std::vector<Candidate> cands;
    // Expanded node states, keyed by (hypothesis, target support position).
    std::vector<std::tuple<std::size_t, std::size_t, DecoderState>> expanded;
    std::size_t order = 0;
    for (std::size_t h = 0; h < beam.size(); ++h) {
      auto& hyp = beam[h];
      auto out = target_node_step(m, enc, hyp.state, hyp.next);
      const auto& pv = out.p_v.value();
      if (step == max_len) {
        Hypothesis done = hyp;
        done.score += safe_log(pv[kEosId]);
        done.truncated = true;
        finished.push_back(std::move(done));
        continue;
      }
      for (auto t : top_k(pv, beam_size)) {
        const double sv = hyp.score + safe_log(pv[t]);
        const auto choice = choice_at(out, t);
        if (is_eos(choice)) {
          Hypothesis done = hyp;
          done.score = sv;
          finished.push_back(std::move(done));
          continue;
        }
        DecoderState st = hyp.state;
        push_node(m, st, describe_choice(m, enc, st, choice), false, rng);
        auto src = source_node_step(m, st);
        for (auto u : top_k(src.probs.value(), beam_size)) {
          const auto j = src.first + u;
          auto rel = relation_type_step(m, st, j);
          for (auto r : top_k(rel.probs.value(), beam_size))
            cands.push_back({h, t, j, rel.first + r, sv + src.log_probs[u] + rel.log_probs[r], order++});
        }
        expanded.emplace_back(h, t, std::move(st));
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.score > b.score || (a.score == b.score && a.order < b.order);
    });
    if (cands.size() > beam_size) cands.resize(beam_size);

    std::vector<Hypothesis> next;
    for (const auto& c : cands) {
      Hypothesis h;
      for (const auto& [eh, et, st] : expanded)
        if (eh == c.hyp && et == c.target) {
          h.state = st;
          break;
        }
      h.relations = beam[c.hyp].relations;
      h.relations.push_back(make_relation(m, h.state, c.source, c.relation));
      h.next = {c.relation, c.source};
      h.score = c.score;
      next.push_back(std::move(h));
    }
    beam = std::move(next);
    // Scores only decrease, so a finished hypothesis at least as good as every
    // live one cannot be overtaken.
    if (!beam.empty() && !finished.empty()) {
      double live = -std::numeric_limits<double>::infinity();
      for (const auto& h : beam) live = std::max(live, h.score);
      if (best_finished() >= live) break;
    }
  }

  const Hypothesis* best = nullptr;
  for (const auto& f : finished)
    if (!best || f.score > best->score) best = &f;
  DecodeResult res;
  res.relations.relations = best->relations;
  res.relations.eos_terminated = !best->truncated;
  res.score = best->score;
  res.truncated = best->truncated;
  res.steps = best->state.emitted;
  return res;
}

ParseResult parse(const TransducerModel& m, const EncoderInput& in, const DecodeOptions& opt) {
  ParseResult r;
  r.decode = opt.greedy || opt.beam_size <= 1 ? greedy_decode(m, in, opt.max_len)
                                               : beam_decode(m, in, opt.beam_size, opt.max_len);
  if (r.decode.truncated) spdlog::warn("decode reached the length limit ({}); graph is partial", opt.max_len);
  r.arbor = relations_to_arbor(r.decode.relations);
  const auto f = in.framework.value_or(m.config().framework);
  r.graph = convert::from_arbor(r.arbor, f);
  if (f == Framework::kAmr) r.graph = convert::restore_senses(r.graph, m.vocabs().senses);
  return r;
}

}  // namespace arbor
