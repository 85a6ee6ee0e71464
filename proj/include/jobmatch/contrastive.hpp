#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jobmatch/embedding.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/pairs.hpp"

namespace jobmatch {

struct ContrastiveConfig {
  std::size_t k_negatives = 16;  // denominator terms per anchor besides the positive
  std::size_t batch_size = 32;
  double learning_rate = 2e-6;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  bool symmetric = true;     // average the u->v and v->u directions
  double temperature = 1.0;  // 1 = plain cosine logits
  bool dedup = true;         // drop in-batch duplicates from the denominator
  double heldout_frac = 0.1;

  void validate() const;
};

struct LossValue {
  double value = 0.0;
  std::vector<double> per_example;
};

// Duplicate-text groups of a batch. Rows i != j with equal anchor group or
// equal positive group are false negatives for each other.
struct BatchGroups {
  std::vector<std::size_t> anchor;
  std::vector<std::size_t> positive;

  static BatchGroups distinct(std::size_t n);
  static BatchGroups from_pairs(const std::vector<ContrastivePair>& batch);
};

// Denominator index sets for one direction. Entry i always starts with i (the
// positive), followed by up to k in-batch negatives sampled without
// replacement; all eligible negatives are used when fewer than k exist.
std::vector<std::vector<std::size_t>> denominator_sets(std::size_t n, const BatchGroups& groups,
                                                       const ContrastiveConfig& cfg,
                                                       std::uint64_t step, bool reverse);

// l_i = -log( exp(sim(u_i, v_i)) / sum_{j in D_i} exp(sim(u_i, v_j)) ), cosine
// similarity, mean over i. With cfg.symmetric the v->u direction is averaged in.
LossValue infonce_loss(const EmbeddingMatrix& u, const EmbeddingMatrix& v,
                       const ContrastiveConfig& cfg, const BatchGroups* groups = nullptr,
                       std::uint64_t step = 0);

LossValue infonce_loss(const std::vector<ContrastivePair>& batch, const ToyEncoderParams& params,
                       const ContrastiveConfig& cfg, std::uint64_t step = 0);

struct InfoNceGradient {
  LossValue loss;
  std::vector<double> projection;  // d loss / d projection, hash_dim x embed_dim
};

// Exact gradient of infonce_loss(batch, params, cfg, step) w.r.t. the projection.
InfoNceGradient infonce_grad(const std::vector<ContrastivePair>& batch,
                             const ToyEncoderParams& params, const ContrastiveConfig& cfg,
                             std::uint64_t step = 0);

struct TrainLogEntry {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct ContrastiveResult {
  ToyEncoderParams params;
  std::vector<TrainLogEntry> log;
  // Held-out loss before training (index 0) and after each epoch. Empty
  // when no pairs are held out.
  std::vector<double> heldout_loss;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, ToyEncoderParams last_good)
      : Error(what), last_good_(std::move(last_good)) {}
  const ToyEncoderParams& last_good() const { return last_good_; }

 private:
  ToyEncoderParams last_good_;
};

// Mean InfoNCE over consecutive batch_size chunks of the pairs.
double chunked_infonce_loss(const std::vector<ContrastivePair>& pairs,
                            const ToyEncoderParams& params, const ContrastiveConfig& cfg);

// Splits off cfg.heldout_frac of the pairs (seeded), then runs
// epochs * floor(n_train / batch_size) constant-lr gradient steps.
ContrastiveResult train_contrastive(const std::vector<ContrastivePair>& pairs,
                                    ToyEncoderParams params, const ContrastiveConfig& cfg);

}  // namespace jobmatch
