// Reference sequences, the decomposed loss, Adam and the training loop.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "arbor/convert.hpp"
#include "arbor/decoder.hpp"
#include "arbor/linearize.hpp"
#include "arbor/model.hpp"

namespace arbor {

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double max_grad_norm = 5.0;
  double coverage_weight = 1.0;
  double label_smoothing = 0.1;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;  // evaluations without improvement
  std::size_t eval_every = 1;
  std::optional<double> stop_at_f1;  // stop once dev F1 reaches this
  std::size_t max_decode_len = 100;
  std::size_t beam_size = 5;
  std::uint64_t seed = 1;

  void validate() const;
  io::Json to_json() const;
  /// Keys absent from `j` keep the values already in `base`.
  static TrainConfig from_json(const io::Json& j, TrainConfig base);
  static TrainConfig from_json(const io::Json& j);
};

struct Example {
  std::string id;
  Framework framework = Framework::kAmr;
  EncoderInput input;
  SemanticGraph graph;  // as annotated (AMR senses intact)
  Arborescence arbor;
  RelationSequence reference;
};

/// Pre-order relations with indices renumbered by first occurrence, closed
/// by EOS.
RelationSequence make_reference(const Arborescence& a, OrderingPolicy policy);

/// Converts a record; AMR senses are stripped and counted into `senses`.
Example make_example(const io::CanonicalRecord& r, convert::SenseTable* senses = nullptr);

/// Vocabularies over a training corpus. Feature columns follow `config`.
Vocabularies build_vocabularies(const std::vector<Example>& corpus, const ModelConfig& config,
                                convert::SenseTable senses = {});

struct LossOptions {
  double label_smoothing = 0.1;
  double coverage_weight = 1.0;
};

struct LossBreakdown {
  double nll_source = 0.0;
  double nll_relation = 0.0;
  double nll_target = 0.0;
  double coverage_penalty = 0.0;
  double total = 0.0;
};

struct SequenceLoss {
  ad::Tensor total;  // scalar; differentiable when a tape is active
  LossBreakdown parts;
};

/// (1-ε)·onehot(gold) + ε/K.
std::vector<double> smoothed_target(std::size_t k, std::size_t gold, double epsilon);

/// Teacher-forced loss of `reference` (EOS included) given `input`.
SequenceLoss sequence_loss(const TransducerModel& m, const EncoderInput& input, const RelationSequence& reference,
                           const LossOptions& opt, bool train, std::mt19937_64& rng);

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;
};

/// Bias-corrected Adam on every tensor holding a gradient.
void adam_step(const std::vector<ad::Tensor>& params, AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

double global_grad_norm(const std::vector<ad::Tensor>& params);
/// Rescales all gradients when their global L2 norm exceeds `max_norm`;
/// returns the factor applied. Throws on a non-finite gradient.
double clip_global_norm(const std::vector<ad::Tensor>& params, double max_norm);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-sequence total
  std::optional<double> dev_f1;
  double lr = 0.0;
  double seconds = 0.0;
  io::Json to_json() const;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_dev_f1 = -1.0;
  std::size_t updates = 0;
};

/// Greedy-decode relation F1 of `m` against the examples' references.
double dev_relation_f1(const TransducerModel& m, const std::vector<Example>& dev, std::size_t max_len);

/// Mini-batches bucketed by sentence length; dev relation F1 drives early
/// stopping and the best parameters are restored at the end. An empty dev
/// set means the training corpus is evaluated.
TrainResult train(TransducerModel& m, const std::vector<Example>& corpus, const std::vector<Example>& dev,
                  const TrainConfig& cfg, const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace arbor
