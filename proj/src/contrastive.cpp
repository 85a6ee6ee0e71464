#include "jobmatch/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "encoder_math.hpp"
#include "jobmatch/kernels.hpp"
#include "jobmatch/random.hpp"
#include "jobmatch/text.hpp"

namespace jobmatch {
namespace {

constexpr std::uint64_t kSplitStream = 0x53504c4954ULL;
constexpr std::uint64_t kEpochStream = 0x45504f4348ULL;
constexpr std::uint64_t kHeldoutStep = 0x484f4c44ULL << 20;

struct CoreResult {
  LossValue loss;
  std::vector<double> d_a;  // d loss / d raw anchor embeddings, n x d
  std::vector<double> d_b;  // d loss / d raw positive embeddings, n x d
};

double log_sum_exp(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double x : z) s += std::exp(x - m);
  return m + std::log(s);
}

// Loss, and optionally its gradient, for raw n x d anchor/positive embeddings.
CoreResult infonce_core(std::span<const double> a, std::span<const double> b, std::size_t n,
                        std::size_t d, const BatchGroups& groups, const ContrastiveConfig& cfg,
                        std::uint64_t step, bool want_grad) {
  if (n < 2) throw ValidationError("infonce: batch needs at least 2 pairs");
  std::vector<double> an(n), bn(n);
  kernels::row_norms(a, d, an);
  kernels::row_norms(b, d, bn);
  for (std::size_t i = 0; i < n; ++i) {
    if (an[i] == 0.0 || bn[i] == 0.0) {
      throw Error("infonce: undefined similarity, zero-norm embedding in row " + std::to_string(i));
    }
  }
  std::vector<double> sim(n * n);
  kernels::cosine_block(a, an, b, bn, d, sim);

  const double inv_t = 1.0 / cfg.temperature;
  const int directions = cfg.symmetric ? 2 : 1;
  const double weight = 1.0 / (static_cast<double>(n) * directions);
  std::vector<double> g(want_grad ? n * n : 0, 0.0);  // d loss / d sim(i, j)

  CoreResult out;
  out.loss.per_example.assign(n, 0.0);
  for (int dir = 0; dir < directions; ++dir) {
    const bool reverse = dir == 1;
    const auto sets = denominator_sets(n, groups, cfg, step, reverse);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& set = sets[i];
      std::vector<double> z(set.size());
      for (std::size_t t = 0; t < set.size(); ++t) {
        const std::size_t j = set[t];
        z[t] = inv_t * (reverse ? sim[j * n + i] : sim[i * n + j]);
      }
      const double lse = log_sum_exp(z);
      const double li = lse - z[0];
      out.loss.per_example[i] += li / directions;
      if (!want_grad) continue;
      for (std::size_t t = 0; t < set.size(); ++t) {
        const std::size_t j = set[t];
        const double p = std::exp(z[t] - lse);
        const double coeff = weight * inv_t * (p - (t == 0 ? 1.0 : 0.0));
        if (reverse) {
          g[j * n + i] += coeff;
        } else {
          g[i * n + j] += coeff;
        }
      }
    }
  }
  out.loss.value = std::accumulate(out.loss.per_example.begin(), out.loss.per_example.end(), 0.0) /
                   static_cast<double>(n);
  if (!want_grad) return out;

  // d cos(a, b) / d a = (b_hat - cos * a_hat) / |a|.
  out.d_a.assign(n * d, 0.0);
  out.d_b.assign(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.data() + i * d;
    for (std::size_t j = 0; j < n; ++j) {
      const double gij = g[i * n + j];
      if (gij == 0.0) continue;
      const double* bj = b.data() + j * d;
      const double s = sim[i * n + j];
      double* dai = out.d_a.data() + i * d;
      double* dbj = out.d_b.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) {
        const double ah = ai[k] / an[i];
        const double bh = bj[k] / bn[j];
        dai[k] += gij * (bh - s * ah) / an[i];
        dbj[k] += gij * (ah - s * bh) / bn[j];
      }
    }
  }
  return out;
}

struct FeaturizedPairs {
  std::vector<SparseFeatures> anchors;
  std::vector<SparseFeatures> positives;
  BatchGroups groups;
};

FeaturizedPairs featurize_pairs(const std::vector<ContrastivePair>& batch, std::size_t hash_dim) {
  std::vector<std::string> a, p;
  a.reserve(batch.size());
  p.reserve(batch.size());
  for (const auto& pair : batch) {
    a.push_back(pair.anchor);
    p.push_back(pair.positive);
  }
  return {detail::featurize_all(a, hash_dim), detail::featurize_all(p, hash_dim),
          BatchGroups::from_pairs(batch)};
}

CoreResult core_from_features(const FeaturizedPairs& f, const ToyEncoderParams& params,
                              const ContrastiveConfig& cfg, std::uint64_t step, bool want_grad) {
  const auto a = detail::embed_features(f.anchors, params);
  const auto b = detail::embed_features(f.positives, params);
  return infonce_core(a, b, f.anchors.size(), params.embed_dim, f.groups, cfg, step, want_grad);
}

InfoNceGradient grad_from_features(const FeaturizedPairs& f, const ToyEncoderParams& params,
                                   const ContrastiveConfig& cfg, std::uint64_t step) {
  CoreResult core = core_from_features(f, params, cfg, step, true);
  InfoNceGradient out;
  out.loss = std::move(core.loss);
  out.projection.assign(params.projection.size(), 0.0);
  detail::scatter_projection_grad(f.anchors, core.d_a, params.embed_dim, out.projection);
  detail::scatter_projection_grad(f.positives, core.d_b, params.embed_dim, out.projection);
  return out;
}

std::vector<ContrastivePair> subset(const std::vector<ContrastivePair>& pairs,
                                    const std::vector<std::size_t>& idx, std::size_t begin,
                                    std::size_t end) {
  std::vector<ContrastivePair> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(pairs[idx[i]]);
  return out;
}

}  // namespace

void ContrastiveConfig::validate() const {
  if (batch_size < 2) throw ValidationError("contrastive: batch_size must be >= 2");
  if (k_negatives < 1 || k_negatives > batch_size - 1) {
    throw ValidationError("contrastive: k_negatives must be in [1, batch_size - 1]");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("contrastive: learning_rate must be positive");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ValidationError("contrastive: temperature must be positive");
  }
  if (!(heldout_frac >= 0.0 && heldout_frac < 1.0)) {
    throw ValidationError("contrastive: heldout_frac must be in [0, 1)");
  }
}

BatchGroups BatchGroups::distinct(std::size_t n) {
  BatchGroups g;
  g.anchor.resize(n);
  g.positive.resize(n);
  std::iota(g.anchor.begin(), g.anchor.end(), 0);
  std::iota(g.positive.begin(), g.positive.end(), 0);
  return g;
}

BatchGroups BatchGroups::from_pairs(const std::vector<ContrastivePair>& batch) {
  BatchGroups g;
  std::unordered_map<std::string, std::size_t> ids;
  auto group_of = [&](const std::string& s) {
    return ids.emplace(text::fold_key(s), ids.size()).first->second;
  };
  for (const auto& p : batch) {
    g.anchor.push_back(group_of(p.anchor));
    g.positive.push_back(group_of(p.positive));
  }
  return g;
}

std::vector<std::vector<std::size_t>> denominator_sets(std::size_t n, const BatchGroups& groups,
                                                       const ContrastiveConfig& cfg,
                                                       std::uint64_t step, bool reverse) {
  if (groups.anchor.size() != n || groups.positive.size() != n) {
    throw ValidationError("infonce: batch groups do not match batch size");
  }
  std::vector<std::vector<std::size_t>> sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> eligible;
    eligible.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (cfg.dedup && (groups.anchor[i] == groups.anchor[j] || groups.positive[i] == groups.positive[j])) {
        continue;
      }
      eligible.push_back(j);
    }
    auto& set = sets[i];
    set.push_back(i);
    if (cfg.k_negatives >= eligible.size()) {
      set.insert(set.end(), eligible.begin(), eligible.end());
    } else {
      Rng rng(mix_seed(cfg.seed, step, 2 * i + (reverse ? 1 : 0)));
      for (std::size_t t : rng.sample_indices(eligible.size(), cfg.k_negatives)) set.push_back(eligible[t]);
    }
  }
  return sets;
}

LossValue infonce_loss(const EmbeddingMatrix& u, const EmbeddingMatrix& v,
                       const ContrastiveConfig& cfg, const BatchGroups* groups, std::uint64_t step) {
  if (u.rows() != v.rows()) throw ValidationError("infonce: U and V must have the same number of rows");
  if (u.dim != v.dim) throw ValidationError("infonce: dimension mismatch");
  const BatchGroups fallback = BatchGroups::distinct(u.rows());
  return infonce_core(u.values, v.values, u.rows(), u.dim, groups ? *groups : fallback, cfg, step,
                      false)
      .loss;
}

LossValue infonce_loss(const std::vector<ContrastivePair>& batch, const ToyEncoderParams& params,
                       const ContrastiveConfig& cfg, std::uint64_t step) {
  return core_from_features(featurize_pairs(batch, params.hash_dim), params, cfg, step, false).loss;
}

InfoNceGradient infonce_grad(const std::vector<ContrastivePair>& batch,
                             const ToyEncoderParams& params, const ContrastiveConfig& cfg,
                             std::uint64_t step) {
  params.validate();
  InfoNceGradient g = grad_from_features(featurize_pairs(batch, params.hash_dim), params, cfg, step);
  for (std::size_t i = 0; i < g.projection.size(); ++i) {
    if (!std::isfinite(g.projection[i])) {
      throw Error("infonce_grad: non-finite gradient at projection entry " + std::to_string(i) +
                  " (batch of " + std::to_string(batch.size()) + ", loss " +
                  std::to_string(g.loss.value) + ")");
    }
  }
  return g;
}

double chunked_infonce_loss(const std::vector<ContrastivePair>& pairs,
                            const ToyEncoderParams& params, const ContrastiveConfig& cfg) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t begin = 0, chunk = 0; begin + 1 < pairs.size(); begin += cfg.batch_size, ++chunk) {
    const std::size_t end = std::min(pairs.size(), begin + cfg.batch_size);
    if (end - begin < 2) break;
    std::vector<ContrastivePair> batch(pairs.begin() + begin, pairs.begin() + end);
    const LossValue l = infonce_loss(batch, params, cfg, kHeldoutStep + chunk);
    for (double x : l.per_example) sum += x;
    count += l.per_example.size();
  }
  if (count == 0) throw ValidationError("chunked_infonce_loss: need at least 2 pairs");
  return sum / static_cast<double>(count);
}

ContrastiveResult train_contrastive(const std::vector<ContrastivePair>& pairs,
                                    ToyEncoderParams params, const ContrastiveConfig& cfg) {
  cfg.validate();
  params.validate();
  const std::size_t n = pairs.size();
  if (n < cfg.batch_size) {
    throw ValidationError("train_contrastive: " + std::to_string(n) + " pairs is fewer than batch_size " +
                          std::to_string(cfg.batch_size));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng(mix_seed(cfg.seed, kSplitStream)).shuffle(order);
  std::size_t n_held = static_cast<std::size_t>(std::floor(cfg.heldout_frac * static_cast<double>(n)));
  n_held = std::min(n_held, n - cfg.batch_size);
  if (n_held < 2) n_held = 0;

  const auto heldout = subset(pairs, order, 0, n_held);
  const auto train = subset(pairs, order, n_held, n);

  ContrastiveResult result;
  auto log_heldout = [&] {
    if (!heldout.empty()) result.heldout_loss.push_back(chunked_infonce_loss(heldout, params, cfg));
  };
  log_heldout();

  std::vector<std::string> anchors, positives;
  for (const auto& p : train) {
    anchors.push_back(p.anchor);
    positives.push_back(p.positive);
  }
  const auto fa = detail::featurize_all(anchors, params.hash_dim);
  const auto fp = detail::featurize_all(positives, params.hash_dim);

  const std::size_t steps_per_epoch = train.size() / cfg.batch_size;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> perm(train.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng(mix_seed(cfg.seed, kEpochStream, epoch)).shuffle(perm);
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      FeaturizedPairs batch;
      std::vector<ContrastivePair> texts;
      for (std::size_t t = s * cfg.batch_size; t < (s + 1) * cfg.batch_size; ++t) {
        batch.anchors.push_back(fa[perm[t]]);
        batch.positives.push_back(fp[perm[t]]);
        texts.push_back(train[perm[t]]);
      }
      batch.groups = BatchGroups::from_pairs(texts);
      InfoNceGradient g = grad_from_features(batch, params, cfg, step);
      const bool finite = std::isfinite(g.loss.value) &&
                          std::all_of(g.projection.begin(), g.projection.end(),
                                      [](double x) { return std::isfinite(x); });
      if (!finite) {
        throw TrainingDiverged("train_contrastive: loss diverged at step " + std::to_string(step),
                               params);
      }
      ToyEncoderParams next = params;
      for (std::size_t k = 0; k < next.projection.size(); ++k) {
        next.projection[k] -= cfg.learning_rate * g.projection[k];
        if (!std::isfinite(next.projection[k])) {
          throw TrainingDiverged("train_contrastive: parameters overflowed at step " + std::to_string(step),
                                 params);
        }
      }
      params = std::move(next);
      result.log.push_back({step, epoch, cfg.learning_rate, g.loss.value});
    }
    log_heldout();
  }
  result.params = std::move(params);
  return result;
}

}  // namespace jobmatch
