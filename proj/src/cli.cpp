#include "arbor/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "arbor/convert.hpp"
#include "arbor/evaluate.hpp"
#include "arbor/inference.hpp"
#include "arbor/io.hpp"
#include "arbor/linearize.hpp"
#include "arbor/training.hpp"

namespace arbor::cli {

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

void setup_logging() {
  auto logger = spdlog::get("arbor");
  if (!logger) {
    logger = spdlog::stderr_color_mt("arbor");
    spdlog::set_default_logger(logger);
  }
  const char* env = std::getenv("ARBOR_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream in(io::read_file(path));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) out.push_back(line);
  }
  return out;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") std::cout << text;
  else io::write_file(path, text);
}

io::Json read_json_file(const std::string& path) {
  try {
    return io::Json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

std::string default_format(Framework f) {
  switch (f) {
    case Framework::kAmr:
      return "penman";
    case Framework::kDm:
      return "sdp";
    case Framework::kUcca:
      return "canonical";
  }
  return "canonical";
}

/// Graph records from any supported input format.
std::vector<io::CanonicalRecord> read_graphs(const std::string& path, const std::string& format, Framework f) {
  std::vector<io::CanonicalRecord> out;
  if (format == "canonical") {
    out = io::read_canonical_file(path);
  } else if (format == "penman") {
    if (f != Framework::kAmr) throw ValidationError("PENMAN input holds AMR graphs");
    std::size_t k = 0;
    for (auto& e : io::read_penman_corpus(io::read_file(path))) {
      io::CanonicalRecord r;
      r.id = e.id.empty() ? std::to_string(k) : e.id;
      r.sentence.tokens = e.tokens;
      r.sentence.pos.assign(e.tokens.size(), "_");
      r.graph = std::move(e.graph);
      out.push_back(std::move(r));
      ++k;
    }
  } else if (format == "sdp") {
    if (f != Framework::kDm) throw ValidationError("SDP input holds DM graphs");
    std::size_t k = 0;
    for (auto& s : io::read_sdp_corpus(io::read_file(path))) {
      io::CanonicalRecord r;
      r.id = s.id.empty() ? std::to_string(k) : s.id;
      r.sentence = std::move(s.sentence);
      r.graph = std::move(s.graph);
      r.graph.framework = Framework::kDm;
      out.push_back(std::move(r));
      ++k;
    }
  } else {
    throw ValidationError("unknown input format '" + format + "'");
  }
  for (const auto& r : out)
    if (r.graph.framework != f)
      throw ValidationError("record '" + r.id + "' is " + std::string(framework_name(r.graph.framework)) +
                            ", expected " + std::string(framework_name(f)));
  return out;
}

std::string write_graph(const io::CanonicalRecord& r, const std::string& format) {
  if (format == "canonical") return io::write_canonical(r) + "\n";
  if (format == "penman") {
    std::string s = "# ::id " + r.id + "\n";
    if (!r.sentence.tokens.empty()) {
      s += "# ::tok";
      for (const auto& t : r.sentence.tokens) s += " " + t;
      s += "\n";
    }
    return s + io::write_penman(r.graph) + "\n\n";
  }
  if (format == "sdp") {
    io::SdpSentence s{r.id, r.sentence, r.graph};
    return io::write_sdp(s) + "\n";
  }
  throw ValidationError("unknown output format '" + format + "'");
}

/// Sentences to parse: canonical records, or whitespace-tokenized lines.
std::vector<EncoderInput> read_inputs(const std::string& path, const std::string& format, Framework f,
                                      std::vector<std::string>* ids) {
  std::vector<EncoderInput> out;
  if (format == "text") {
    std::size_t k = 0;
    for (const auto& line : read_lines(path)) {
      EncoderInput in;
      std::istringstream ws(line);
      for (std::string t; ws >> t;) in.sentence.tokens.push_back(t);
      in.sentence.pos.assign(in.sentence.tokens.size(), "_");
      in.framework = f;
      out.push_back(std::move(in));
      if (ids) ids->push_back(std::to_string(k++));
    }
    return out;
  }
  for (auto& r : read_graphs(path, format, f)) {
    EncoderInput in;
    in.sentence = std::move(r.sentence);
    in.framework = f;
    out.push_back(std::move(in));
    if (ids) ids->push_back(r.id);
  }
  return out;
}

// ---------------------------------------------------------------- subcommands

struct Common {
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  std::string config;
};

struct ConvertArgs {
  std::string framework = "amr", direction = "to-arbor", input, output, format;
};

void run_convert(const ConvertArgs& a) {
  const auto f = parse_framework(a.framework);
  const auto format = a.format.empty() ? (a.direction == "to-arbor" ? default_format(f)
                                                                    : (f == Framework::kAmr ? "penman" : "canonical"))
                                       : a.format;
  std::string out;
  if (a.direction == "to-arbor") {
    for (const auto& r : read_graphs(a.input, format, f)) {
      auto g = r.graph;
      auto arbor = convert::to_arbor(g);
      const auto report = validate_arborescence(arbor);
      if (!report.ok()) throw ValidationError("record '" + r.id + "': " + report.all().front());
      io::Json j{{"id", r.id}, {"framework", std::string(framework_name(f))}, {"arbor", io::arbor_to_json(arbor)}};
      out += j.dump() + "\n";
    }
  } else if (a.direction == "from-arbor") {
    for (const auto& line : read_lines(a.input)) {
      io::Json j;
      try {
        j = io::Json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("arborescence line: ") + e.what());
      }
      io::CanonicalRecord r;
      r.id = j.value("id", std::string());
      r.graph = convert::from_arbor(io::arbor_from_json(j.at("arbor")), f);
      out += write_graph(r, format);
    }
  } else {
    throw ValidationError("--direction must be to-arbor or from-arbor");
  }
  emit(a.output, out);
}

struct LinearizeArgs {
  std::string framework, input, output;
};

void run_linearize(const LinearizeArgs& a) {
  std::string out;
  for (const auto& line : read_lines(a.input)) {
    io::Json j;
    try {
      j = io::Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("arborescence line: ") + e.what());
    }
    const auto f = parse_framework(a.framework.empty() ? j.value("framework", std::string("amr")) : a.framework);
    const auto rs = make_reference(io::arbor_from_json(j.at("arbor")), policy_for(f));
    out += "# " + j.value("id", std::string()) + "\n";
    for (const auto& r : rs.relations)
      out += r.source_label + "\t" + std::to_string(r.source_index) + "\t" + r.relation + "\t" + r.target_label +
             "\t" + std::to_string(r.target_index) + "\n";
    out += "\n";
  }
  emit(a.output, out);
}

bool given(CLI::App* sub, const std::string& name) { return sub->get_option(name)->count() > 0; }

struct TrainArgs {
  std::string framework = "amr", train, dev, output, metrics, embeddings, features;
  std::size_t epochs = 0, batch_size = 0, patience = 0, eval_every = 0, encoder_hidden = 0, layers = 0, word_dim = 0;
  double lr = 0, dropout = 0, label_smoothing = 0, coverage_weight = 0, stop_at_f1 = 0;
};

void run_train(const TrainArgs& a, const Common& c, CLI::App* app, CLI::App* sub) {
  const auto f = parse_framework(a.framework);
  auto mc = ModelConfig::defaults_for(f);
  TrainConfig tc;
  if (!c.config.empty()) {
    const auto j = read_json_file(c.config);
    if (j.contains("model")) {
      auto merged = mc.to_json();
      merged.update(j.at("model"));
      mc = ModelConfig::from_json(merged);
    }
    if (j.contains("train")) tc = TrainConfig::from_json(j.at("train"), tc);
  }
  if (given(app, "--seed")) tc.seed = c.seed;
  if (given(sub, "--epochs")) tc.max_epochs = a.epochs;
  if (given(sub, "--batch-size")) tc.batch_size = a.batch_size;
  if (given(sub, "--patience")) tc.patience = a.patience;
  if (given(sub, "--eval-every")) tc.eval_every = a.eval_every;
  if (given(sub, "--lr")) tc.learning_rate = a.lr;
  if (given(sub, "--label-smoothing")) tc.label_smoothing = a.label_smoothing;
  if (given(sub, "--coverage-weight")) tc.coverage_weight = a.coverage_weight;
  if (given(sub, "--stop-at-f1")) tc.stop_at_f1 = a.stop_at_f1;
  if (given(sub, "--dropout")) mc.dropout = a.dropout;
  if (given(sub, "--encoder-hidden")) {
    mc.encoder_hidden = a.encoder_hidden;
    mc.decoder_hidden = 2 * a.encoder_hidden;
  }
  if (given(sub, "--layers")) mc.encoder_layers = mc.decoder_layers = a.layers;
  if (given(sub, "--word-dim")) mc.word_dim = a.word_dim;
  if (given(sub, "--features")) mc.features = split_commas(a.features);
  mc.validate();
  tc.validate();

  convert::SenseTable senses;
  std::vector<Example> corpus, dev;
  for (const auto& r : io::read_canonical_file(a.train)) corpus.push_back(make_example(r, &senses));
  if (!a.dev.empty())
    for (const auto& r : io::read_canonical_file(a.dev)) dev.push_back(make_example(r));
  auto vocabs = build_vocabularies(corpus, mc, senses);
  TransducerModel m(mc, vocabs, tc.seed);
  if (!a.embeddings.empty()) {
    const auto hits = m.load_pretrained_words(io::load_embeddings(a.embeddings, mc.word_dim));
    spdlog::info("pretrained vectors for {} of {} words", hits, vocabs.words.size());
  }
  spdlog::info("{} training and {} dev sentences, {} parameters", corpus.size(), dev.size(), m.params().count());

  std::ofstream metrics;
  if (!a.metrics.empty()) {
    metrics.open(a.metrics, std::ios::trunc);
    if (!metrics) throw IoError("cannot open '" + a.metrics + "' for writing");
  }
  auto res = train(m, corpus, dev, tc, [&](const EpochMetrics& e) {
    if (metrics.is_open()) metrics << e.to_json().dump() << "\n" << std::flush;
  });
  m.save(a.output);
  spdlog::info("best dev F1 {:.4f} at epoch {}; saved {}", res.best_dev_f1, res.best_epoch, a.output);
}

struct ParseArgs {
  std::string model, input, output, input_format = "canonical", format = "canonical", framework;
  std::size_t beam = 5, max_len = 100;
  bool greedy = false;
};

void run_parse(const ParseArgs& a, const Common& c) {
  const auto m = TransducerModel::load(a.model);
  const auto f = a.framework.empty() ? m.config().framework : parse_framework(a.framework);
  std::vector<std::string> ids;
  const auto inputs = read_inputs(a.input, a.input_format, f, &ids);
  DecodeOptions opt;
  opt.beam_size = a.beam;
  opt.max_len = a.max_len;
  opt.greedy = a.greedy;
  std::vector<std::string> rendered(inputs.size());
  parallel_for(inputs.size(), c.jobs, [&](std::size_t i) {
    auto res = parse(m, inputs[i], opt);
    io::CanonicalRecord r{ids[i], inputs[i].sentence, std::move(res.graph)};
    rendered[i] = write_graph(r, a.format);
  });
  std::string out;
  for (const auto& r : rendered) out += r;
  emit(a.output, out);
}

struct EvalArgs {
  std::string gold, pred, output, framework, format = "canonical", smatch_mode = "hill-climb", functional;
};

void run_eval(const EvalArgs& a, const Common& c, CLI::App* sub) {
  auto gold = a.format == "canonical" ? io::read_canonical_file(a.gold)
                                      : read_graphs(a.gold, a.format, parse_framework(a.framework));
  auto pred = a.format == "canonical" ? io::read_canonical_file(a.pred)
                                      : read_graphs(a.pred, a.format, parse_framework(a.framework));
  if (gold.size() != pred.size())
    throw ValidationError("gold has " + std::to_string(gold.size()) + " graphs, prediction " +
                          std::to_string(pred.size()));
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i].id != pred[i].id)
      throw ValidationError("record " + std::to_string(i) + ": gold id '" + gold[i].id + "' vs prediction '" +
                            pred[i].id + "'");
  SmatchOptions so;
  so.seed = c.seed;
  if (a.smatch_mode == "exact") so.mode = SmatchMode::kExact;
  else if (a.smatch_mode != "hill-climb") throw ValidationError("--smatch-mode must be exact or hill-climb");

  std::vector<F1Report> scores(gold.size());
  parallel_for(gold.size(), c.jobs, [&](std::size_t i) { scores[i] = graph_score(gold[i].graph, pred[i].graph, so); });
  F1Report total;
  for (const auto& s : scores) total += s;

  const auto f = gold.empty() ? (a.framework.empty() ? Framework::kAmr : parse_framework(a.framework))
                              : gold.front().graph.framework;
  const auto functional = given(sub, "--functional-labels")
                              ? [&] {
                                  auto v = split_commas(a.functional);
                                  return std::set<std::string>(v.begin(), v.end());
                                }()
                              : default_functional_labels(f);
  std::vector<SemanticGraph> graphs;
  for (const auto& r : pred) graphs.push_back(r.graph);
  const auto audit = validity_audit(graphs, functional);

  io::Json report{{"framework", std::string(framework_name(f))},
                  {"metric", f == Framework::kAmr ? "smatch" : "labeled_triple_f1"},
                  {"sentences", gold.size()},
                  {"score", total.to_json()},
                  {"validity", audit.to_json()}};
  emit(a.output, report.dump(2) + "\n");
}

struct BenchArgs {
  std::string model, input, output, input_format = "canonical", framework;
  std::size_t beam = 5, max_len = 100;
};

void run_bench(const BenchArgs& a) {
  const auto m = TransducerModel::load(a.model);
  const auto f = a.framework.empty() ? m.config().framework : parse_framework(a.framework);
  const auto inputs = read_inputs(a.input, a.input_format, f, nullptr);
  const auto report = speed_bench(m, inputs, a.beam, a.max_len);
  emit(a.output, report.to_json().dump(2) + "\n");
}

}  // namespace

int run(int argc, const char* const* argv) {
  setup_logging();
  CLI::App app{"arbor: semantic graph parsing by relation-sequence transduction"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Common c;
  app.add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app.add_option("--jobs", c.jobs, "Worker threads for parse/eval")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--config", c.config, "JSON config file with \"model\" and \"train\" sections");

  ConvertArgs ca;
  auto* conv = app.add_subcommand("convert", "Framework graphs <-> unified arborescences");
  conv->add_option("--framework", ca.framework)->check(CLI::IsMember({"amr", "dm", "ucca"}))->capture_default_str();
  conv->add_option("--direction", ca.direction)->check(CLI::IsMember({"to-arbor", "from-arbor"}))->capture_default_str();
  conv->add_option("--input,-i", ca.input)->required();
  conv->add_option("--output,-o", ca.output);
  conv->add_option("--format", ca.format, "penman, sdp or canonical");

  LinearizeArgs la;
  auto* lin = app.add_subcommand("linearize", "Arborescences -> relation TSV");
  lin->add_option("--framework", la.framework);
  lin->add_option("--input,-i", la.input)->required();
  lin->add_option("--output,-o", la.output);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a model on canonical JSONL");
  tr->add_option("--framework", ta.framework)->check(CLI::IsMember({"amr", "dm", "ucca"}))->capture_default_str();
  tr->add_option("--train", ta.train)->required();
  tr->add_option("--dev", ta.dev);
  tr->add_option("--output,-o", ta.output)->required();
  tr->add_option("--metrics", ta.metrics);
  tr->add_option("--embeddings", ta.embeddings, "Word vectors, one 'word f1 .. fd' per line");
  tr->add_option("--features", ta.features, "Comma-separated feature columns");
  tr->add_option("--epochs", ta.epochs);
  tr->add_option("--batch-size", ta.batch_size);
  tr->add_option("--patience", ta.patience);
  tr->add_option("--eval-every", ta.eval_every);
  tr->add_option("--lr", ta.lr);
  tr->add_option("--dropout", ta.dropout);
  tr->add_option("--label-smoothing", ta.label_smoothing);
  tr->add_option("--coverage-weight", ta.coverage_weight);
  tr->add_option("--stop-at-f1", ta.stop_at_f1);
  tr->add_option("--encoder-hidden", ta.encoder_hidden, "Per direction; the decoder gets twice this");
  tr->add_option("--layers", ta.layers);
  tr->add_option("--word-dim", ta.word_dim);

  ParseArgs pa;
  auto* ps = app.add_subcommand("parse", "Parse sentences with a trained model");
  ps->add_option("--model,-m", pa.model)->required();
  ps->add_option("--input,-i", pa.input)->required();
  ps->add_option("--output,-o", pa.output);
  ps->add_option("--input-format", pa.input_format)->check(CLI::IsMember({"canonical", "text", "penman", "sdp"}));
  ps->add_option("--format", pa.format)->check(CLI::IsMember({"canonical", "penman", "sdp"}))->capture_default_str();
  ps->add_option("--framework", pa.framework);
  ps->add_option("--beam", pa.beam)->check(CLI::PositiveNumber)->capture_default_str();
  ps->add_option("--max-len", pa.max_len)->check(CLI::PositiveNumber)->capture_default_str();
  ps->add_flag("--greedy", pa.greedy);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Score predictions against gold graphs");
  ev->add_option("--gold", ea.gold)->required();
  ev->add_option("--pred", ea.pred)->required();
  ev->add_option("--output,-o", ea.output);
  ev->add_option("--framework", ea.framework);
  ev->add_option("--format", ea.format)->check(CLI::IsMember({"canonical", "penman", "sdp"}))->capture_default_str();
  ev->add_option("--smatch-mode", ea.smatch_mode)->check(CLI::IsMember({"exact", "hill-climb"}))->capture_default_str();
  ev->add_option("--functional-labels", ea.functional, "Comma-separated labels for the validity audit");

  BenchArgs ba;
  auto* be = app.add_subcommand("bench", "Decoding speed report");
  be->add_option("--model,-m", ba.model)->required();
  be->add_option("--input,-i", ba.input)->required();
  be->add_option("--output,-o", ba.output);
  be->add_option("--input-format", ba.input_format)->check(CLI::IsMember({"canonical", "text", "penman", "sdp"}));
  be->add_option("--framework", ba.framework);
  be->add_option("--beam", ba.beam)->check(CLI::PositiveNumber)->capture_default_str();
  be->add_option("--max-len", ba.max_len)->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (conv->parsed()) run_convert(ca);
    else if (lin->parsed()) run_linearize(la);
    else if (tr->parsed()) run_train(ta, c, &app, tr);
    else if (ps->parsed()) run_parse(pa, c);
    else if (ev->parsed()) run_eval(ea, c, ev);
    else if (be->parsed()) run_bench(ba);
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("malformed JSON: {}", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"arbor"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace arbor::cli
