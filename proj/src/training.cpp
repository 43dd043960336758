#include "arbor/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "arbor/evaluate.hpp"
#include "arbor/inference.hpp"

namespace arbor {

using ad::Tensor;

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ValidationError("train: learning rate must be positive");
  if (!(max_grad_norm > 0)) throw ValidationError("train: max gradient norm must be positive");
  if (coverage_weight < 0) throw ValidationError("train: coverage weight must be nonnegative");
  if (label_smoothing < 0 || label_smoothing >= 1) throw ValidationError("train: label smoothing must be in [0, 1)");
  if (batch_size == 0 || max_epochs == 0 || eval_every == 0 || max_decode_len == 0 || beam_size == 0)
    throw ValidationError("train: counts must be positive");
}

io::Json TrainConfig::to_json() const {
  io::Json j{{"learning_rate", learning_rate}, {"beta1", beta1},
             {"beta2", beta2},                 {"adam_eps", adam_eps},
             {"max_grad_norm", max_grad_norm}, {"coverage_weight", coverage_weight},
             {"label_smoothing", label_smoothing}, {"batch_size", batch_size},
             {"max_epochs", max_epochs},       {"patience", patience},
             {"eval_every", eval_every},       {"max_decode_len", max_decode_len},
             {"beam_size", beam_size},         {"seed", seed}};
  if (stop_at_f1) j["stop_at_f1"] = *stop_at_f1;
  return j;
}

TrainConfig TrainConfig::from_json(const io::Json& j, TrainConfig c) try {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("learning_rate", c.learning_rate);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("adam_eps", c.adam_eps);
  get("max_grad_norm", c.max_grad_norm);
  get("coverage_weight", c.coverage_weight);
  get("label_smoothing", c.label_smoothing);
  get("batch_size", c.batch_size);
  get("max_epochs", c.max_epochs);
  get("patience", c.patience);
  get("eval_every", c.eval_every);
  get("max_decode_len", c.max_decode_len);
  get("beam_size", c.beam_size);
  get("seed", c.seed);
  if (j.contains("stop_at_f1") && !j.at("stop_at_f1").is_null()) c.stop_at_f1 = j.at("stop_at_f1").get<double>();
  return c;
} catch (const io::Json::exception& e) {
  throw ValidationError(std::string("train config: ") + e.what());
}

TrainConfig TrainConfig::from_json(const io::Json& j) { return from_json(j, TrainConfig{}); }

// ---------------------------------------------------------------- data

RelationSequence make_reference(const Arborescence& a, OrderingPolicy policy) {
  auto rs = arbor_to_relations(a, policy);
  std::map<int, int> renumber;
  for (const auto& r : rs.relations) renumber.try_emplace(r.target_index, static_cast<int>(renumber.size()) + 1);
  for (std::size_t k = 0; k < rs.relations.size(); ++k) {
    auto& r = rs.relations[k];
    r.target_index = renumber.at(r.target_index);
    if (k > 0) r.source_index = renumber.at(r.source_index);
  }
  rs.eos_terminated = true;
  return rs;
}

Example make_example(const io::CanonicalRecord& r, convert::SenseTable* senses) {
  Example e;
  e.id = r.id;
  e.framework = r.graph.framework;
  e.input.sentence = r.sentence;
  e.input.framework = e.framework;
  e.graph = r.graph;
  const auto g = e.framework == Framework::kAmr ? convert::strip_senses(r.graph, senses) : r.graph;
  e.arbor = convert::to_arbor(g);
  e.reference = make_reference(e.arbor, policy_for(e.framework));
  return e;
}

Vocabularies build_vocabularies(const std::vector<Example>& corpus, const ModelConfig& config,
                                convert::SenseTable senses) {
  Vocabularies v;
  for (const auto& f : config.features) v.feature(f);
  for (const auto& e : corpus) {
    const auto& s = e.input.sentence;
    for (const auto& t : s.tokens) v.words.add(t);
    for (const auto& p : s.pos) v.pos.add(p);
    for (const auto& f : config.features)
      if (auto it = s.features.find(f); it != s.features.end())
        for (const auto& x : it->second) v.feature(f).add(x);
    for (const auto& r : e.reference.relations) {
      v.nodes.add(r.target_label);
      v.relations.add(r.relation);
    }
  }
  v.senses = std::move(senses);
  return v;
}

// ---------------------------------------------------------------- loss

std::vector<double> smoothed_target(std::size_t k, std::size_t gold, double epsilon) {
  if (gold >= k) throw ValidationError("smoothing: gold id out of range");
  std::vector<double> q(k, epsilon / static_cast<double>(k));
  q[gold] += 1.0 - epsilon;
  return q;
}

namespace {

struct GoldTarget {
  std::vector<std::size_t> support;  // positions in P(v)
  EmittedNode node;
};

bool covers(const std::vector<Span>& anchors, std::size_t t) {
  for (const auto& s : anchors)
    if (static_cast<int>(t) >= s.begin && static_cast<int>(t) < s.end) return true;
  return false;
}

GoldTarget gold_target(const TransducerModel& m, const EncodedSentence& enc, const DecoderState& state,
                       const StepOutput& out, const Relation& rel) {
  GoldTarget g;
  const auto& v = m.vocabs();
  std::vector<std::size_t> antecedents;
  for (std::size_t p = 1; p < state.nodes.size(); ++p)
    if (state.nodes[p].index == rel.target_index) {
      if (state.nodes[p].label != rel.target_label)
        throw ValidationError("reference: index " + std::to_string(rel.target_index) + " carries two labels");
      antecedents.push_back(p);
    }
  if (!antecedents.empty()) {
    for (auto p : antecedents) g.support.push_back(support_position(out, {Origin::kDecoder, p}));
    g.node = describe_choice(m, enc, state, {Origin::kDecoder, antecedents.back()});
    return g;
  }
  if (rel.target_index != state.next_index)
    throw ValidationError("reference: new node index " + std::to_string(rel.target_index) + " where " +
                          std::to_string(state.next_index) + " was expected");
  if (v.nodes.contains(rel.target_label))
    g.support.push_back(support_position(out, {Origin::kVocab, v.nodes.id(rel.target_label)}));
  std::vector<std::size_t> matches;
  for (std::size_t t = 0; t < enc.size(); ++t)
    if (enc.copy_labels[t] == rel.target_label && (rel.target_anchors.empty() || covers(rel.target_anchors, t)))
      matches.push_back(t);
  for (auto t : matches) g.support.push_back(support_position(out, {Origin::kEncoder, t}));
  if (g.support.empty()) g.support.push_back(support_position(out, {Origin::kVocab, v.nodes.unk_id()}));

  g.node.label = rel.target_label;
  g.node.index = rel.target_index;
  g.node.anchors = rel.target_anchors;
  if (!matches.empty()) {
    g.node.origin = Origin::kEncoder;
    g.node.source = matches.front();
    g.node.pos_id = enc.pos_ids[matches.front()];
  } else {
    g.node.origin = Origin::kVocab;
    g.node.source = v.nodes.id(rel.target_label);
    g.node.pos_id = v.pos.unk_id();
  }
  return g;
}

Tensor sum_all(const std::vector<Tensor>& terms) {
  if (terms.empty()) return Tensor::scalar(0.0);
  return ad::sum(ad::concat(terms));
}

}  // namespace

SequenceLoss sequence_loss(const TransducerModel& m, const EncoderInput& input, const RelationSequence& reference,
                           const LossOptions& opt, bool train, std::mt19937_64& rng) {
  const double eps = opt.label_smoothing;
  const auto enc = prepare(m, input, train, rng);
  auto state = start_state(m, enc);
  const auto& rels = reference.relations;
  std::vector<Tensor> src_terms, rel_terms, tgt_terms, cov_terms;
  RelationInput rel_in;

  for (std::size_t k = 0; k <= rels.size(); ++k) {
    auto out = target_node_step(m, enc, state, rel_in);
    cov_terms.push_back(out.coverage_loss);

    GoldTarget gold;
    if (k == rels.size()) {
      gold.support = {kEosId};
    } else {
      gold = gold_target(m, enc, state, out, rels[k]);
    }
    auto nll = ad::scale(ad::log(ad::sum(ad::pick(out.p_v, gold.support))), -(1.0 - eps));
    if (eps > 0) {
      const auto K = static_cast<double>(out.vocab_size);
      auto log_gen = ad::log(ad::slice(out.switch_probs, 0, 1));
      auto uniform = ad::add(log_gen, ad::scale(ad::sum(ad::log_softmax(out.vocab_logits)), 1.0 / K));
      nll = ad::sub(nll, ad::scale(uniform, eps));
    }
    tgt_terms.push_back(nll);
    if (k == rels.size()) break;

    const auto& rel = rels[k];
    push_node(m, state, gold.node, train, rng);

    const auto j = rel.source_position.value_or(
        k == 0 ? 0 : resolve_source({rels.begin(), rels.begin() + static_cast<std::ptrdiff_t>(k)},
                                    rel.source_label, rel.source_index));
    auto src = source_node_step(m, state);
    if (j < src.first || j - src.first >= src.probs.size())
      throw ValidationError("reference: relation " + std::to_string(k) + " has an unreachable source");
    src_terms.push_back(ad::scale(ad::pick(src.log_probs, {j - src.first}), -1.0));

    auto rt = relation_type_step(m, state, j);
    std::size_t rid = 0;
    if (!rt.forced) {
      rid = m.vocabs().relations.id(rel.relation);
      if (rid < rt.first) throw ValidationError("reference: 'root' relation below the top node");
      const auto K = static_cast<double>(rt.probs.size());
      auto term = ad::scale(ad::pick(rt.log_probs, {rid - rt.first}), -(1.0 - eps));
      if (eps > 0) term = ad::sub(term, ad::scale(ad::sum(rt.log_probs), eps / K));
      rel_terms.push_back(term);
    }
    rel_in = {rid, j};
  }

  SequenceLoss res;
  auto s = sum_all(src_terms), r = sum_all(rel_terms), t = sum_all(tgt_terms), c = sum_all(cov_terms);
  res.total = ad::add(ad::add(ad::add(s, r), t), ad::scale(c, opt.coverage_weight));
  res.parts = {s.item(), r.item(), t.item(), c.item(), res.total.item()};
  return res;
}

// ---------------------------------------------------------------- optimization

void adam_step(const std::vector<Tensor>& params, AdamState& st, double lr, double beta1, double beta2, double eps) {
  if (st.m.size() != params.size()) {
    st.m.assign(params.size(), {});
    st.v.assign(params.size(), {});
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = const_cast<Tensor&>(params[k]);
    if (!p.has_grad()) continue;
    const auto& g = p.mutable_grad();
    auto& w = p.mutable_value();
    auto& m = st.m[k];
    auto& v = st.v[k];
    if (m.empty()) {
      m.assign(w.size(), 0.0);
      v.assign(w.size(), 0.0);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1 * m[i] + (1 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
}

double global_grad_norm(const std::vector<Tensor>& params) {
  double sq = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].has_grad()) continue;
    for (double g : const_cast<Tensor&>(params[k]).mutable_grad()) {
      if (!std::isfinite(g)) throw Error("non-finite gradient in parameter tensor " + std::to_string(k));
      sq += g * g;
    }
  }
  return std::sqrt(sq);
}

double clip_global_norm(const std::vector<Tensor>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm <= max_norm) return 1.0;
  const double s = max_norm / norm;
  for (const auto& p : params)
    if (p.has_grad())
      for (double& g : const_cast<Tensor&>(p).mutable_grad()) g *= s;
  return s;
}

// ---------------------------------------------------------------- loop

io::Json EpochMetrics::to_json() const {
  io::Json j{{"epoch", epoch}, {"train_loss", train_loss}};
  j["dev_f1"] = dev_f1 ? io::Json(*dev_f1) : io::Json(nullptr);
  j["lr"] = lr;
  j["seconds"] = seconds;
  return j;
}

double dev_relation_f1(const TransducerModel& m, const std::vector<Example>& dev, std::size_t max_len) {
  std::vector<RelationSequence> gold, pred;
  for (const auto& e : dev) {
    gold.push_back(e.reference);
    pred.push_back(greedy_decode(m, e.input, max_len).relations);
  }
  return relation_f1(gold, pred).f1;
}

TrainResult train(TransducerModel& m, const std::vector<Example>& corpus, const std::vector<Example>& dev,
                  const TrainConfig& cfg, const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  if (corpus.empty()) throw ValidationError("train: empty corpus");
  const auto& eval_set = dev.empty() ? corpus : dev;
  std::mt19937_64 rng(cfg.seed);

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return corpus[a].input.size() < corpus[b].input.size(); });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += cfg.batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + cfg.batch_size)));

  const auto params = m.params().tensors();
  const auto& names = m.params().items();
  AdamState adam;
  const LossOptions lopt{cfg.label_smoothing, cfg.coverage_weight};
  TrainResult result;
  std::optional<io::CheckpointData> best;
  std::size_t evals_since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(batches.begin(), batches.end(), rng);
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      m.params().zero_grad();
      ad::Tape tape;
      {
        ad::TapeScope scope(tape);
        std::vector<Tensor> losses;
        for (auto i : batch) {
          auto l = sequence_loss(m, corpus[i].input, corpus[i].reference, lopt, true, rng);
          loss_sum += l.parts.total;
          losses.push_back(l.total);
        }
        auto loss = ad::scale(sum_all(losses), 1.0 / static_cast<double>(batch.size()));
        tape.backward(loss);
      }
      try {
        clip_global_norm(params, cfg.max_grad_norm);
      } catch (const Error&) {
        for (const auto& [name, t] : names)
          if (t.has_grad())
            for (double g : t.grad())
              if (!std::isfinite(g)) throw Error("train: non-finite gradient in " + name + " at epoch " +
                                                 std::to_string(epoch));
        throw;
      }
      adam_step(params, adam, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
      ++result.updates;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / static_cast<double>(corpus.size());
    em.lr = cfg.learning_rate;
    bool stop = false;
    if (epoch % cfg.eval_every == 0 || epoch == cfg.max_epochs) {
      const double f1 = dev_relation_f1(m, eval_set, cfg.max_decode_len);
      em.dev_f1 = f1;
      if (f1 > result.best_dev_f1) {
        result.best_dev_f1 = f1;
        result.best_epoch = epoch;
        best = m.to_checkpoint();
        evals_since_best = 0;
      } else {
        ++evals_since_best;
      }
      if (evals_since_best >= cfg.patience) stop = true;
      if (cfg.stop_at_f1 && f1 >= *cfg.stop_at_f1) stop = true;
    }
    em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    spdlog::info("epoch {} loss {:.4f} dev_f1 {} ({:.1f}s)", epoch, em.train_loss,
                 em.dev_f1 ? fmt::format("{:.4f}", *em.dev_f1) : std::string("-"), em.seconds);
    result.history.push_back(em);
    if (on_epoch) on_epoch(em);
    if (stop) break;
  }
  if (best) m.assign(*best);
  return result;
}

}  // namespace arbor
