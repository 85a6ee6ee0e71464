#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jobmatch/contrastive.hpp"
#include "jobmatch/embedding.hpp"
#include "jobmatch/pairs.hpp"

namespace jobmatch {

struct ClassifierConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 3;
  double warmup_frac = 0.1;         // fraction of steps with rising lr
  double floor_ratio = 1.0 / 32.0;  // lr at both ends, relative to the peak
  std::uint64_t seed = 0;
  bool train_encoder = true;  // false trains the head only

  void validate() const;
};

// Slanted-triangular schedule: lr_max * (1 + p * (r - 1)) / r with
// r = 1 / floor_ratio, p rising linearly to 1 over the warmup steps and then
// falling linearly back to 0 at total_steps.
double slanted_triangular_lr(std::size_t step, std::size_t total_steps, const ClassifierConfig& cfg);

// Toy encoder plus a linear head over [u; v; |u - v|; u * v] of the
// L2-normalized query (u) and candidate (v) embeddings. Logit 1 is "related".
struct PairScorerParams {
  ToyEncoderParams encoder;
  std::vector<double> head_weights;  // 2 x 4d, row-major
  std::array<double, 2> head_bias{0.0, 0.0};

  static PairScorerParams init(ToyEncoderParams encoder, std::uint64_t seed, double head_scale = 0.01);
  void validate() const;
  std::size_t parameter_count() const;
};

using Logits = std::array<double, 2>;

Logits head_logits(std::span<const double> u, std::span<const double> v, const PairScorerParams& params);
Logits pair_logits(const std::string& query, const std::string& candidate, const PairScorerParams& params);

// Softmax probability of the positive class.
double positive_probability(const Logits& z);

// Mean two-way softmax cross-entropy. Throws on non-finite logits.
LossValue cross_entropy(std::span<const Logits> logits, std::span<const int> labels);
LossValue bce_loss(const std::vector<LabeledPair>& batch, const PairScorerParams& params);

struct PairScorerGradient {
  LossValue loss;
  std::vector<double> projection;
  std::vector<double> head_weights;
  std::array<double, 2> head_bias{0.0, 0.0};
};

PairScorerGradient bce_grad(const std::vector<LabeledPair>& batch, const PairScorerParams& params);

struct ClassifierResult {
  PairScorerParams params;
  std::vector<TrainLogEntry> log;
};

// Minibatch gradient descent over epochs * ceil(n / batch_size) steps with
// the slanted-triangular schedule. Requires both labels to be present.
ClassifierResult train_classifier(const std::vector<LabeledPair>& data, PairScorerParams params,
                                  const ClassifierConfig& cfg);

double score_pair(const std::string& query, const std::string& candidate, const PairScorerParams& params);

// Fraction of pairs whose predicted class (probability >= 0.5) matches the label.
double pair_accuracy(const std::vector<LabeledPair>& data, const PairScorerParams& params);

}  // namespace jobmatch
