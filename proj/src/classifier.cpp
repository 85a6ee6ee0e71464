#include "jobmatch/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "encoder_math.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/kernels.hpp"
#include "jobmatch/random.hpp"

namespace jobmatch {
namespace {

constexpr std::uint64_t kHeadStream = 0x48454144ULL;
constexpr std::uint64_t kEpochStream = 0x434c53ULL;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Row i of raw -> unit vectors, with norms kept for the backward pass.
std::vector<double> unit_rows(const std::vector<double>& raw, std::size_t d, std::vector<double>& norms) {
  const std::size_t n = raw.size() / d;
  norms.resize(n);
  kernels::row_norms(raw, d, norms);
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (norms[i] == 0.0) throw Error("pair scorer: zero embedding, similarity undefined");
    for (std::size_t k = 0; k < d; ++k) out[i * d + k] = raw[i * d + k] / norms[i];
  }
  return out;
}

struct Batch {
  std::vector<SparseFeatures> queries;
  std::vector<SparseFeatures> docs;
  std::vector<int> labels;
};

PairScorerGradient forward_backward(const Batch& batch, const PairScorerParams& params, bool want_grad) {
  const std::size_t n = batch.labels.size();
  if (n == 0) throw ValidationError("bce_loss: empty batch");
  const std::size_t d = params.encoder.embed_dim;
  std::vector<double> qn, cn;
  const auto u = unit_rows(detail::embed_features(batch.queries, params.encoder), d, qn);
  const auto v = unit_rows(detail::embed_features(batch.docs, params.encoder), d, cn);

  std::vector<Logits> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = head_logits({u.data() + i * d, d}, {v.data() + i * d, d}, params);
  }
  PairScorerGradient out;
  out.loss = cross_entropy(logits, batch.labels);
  if (!want_grad) return out;

  const std::size_t f = 4 * d;
  out.head_weights.assign(2 * f, 0.0);
  std::vector<double> du(n * d, 0.0), dv(n * d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p1 = positive_probability(logits[i]);
    const std::array<double, 2> dz{((1.0 - p1) - (batch.labels[i] == 0 ? 1.0 : 0.0)) * inv_n,
                                   (p1 - (batch.labels[i] == 1 ? 1.0 : 0.0)) * inv_n};
    const double* ui = u.data() + i * d;
    const double* vi = v.data() + i * d;
    for (int c = 0; c < 2; ++c) {
      out.head_bias[c] += dz[c];
      double* gw = out.head_weights.data() + c * f;
      for (std::size_t k = 0; k < d; ++k) {
        gw[k] += dz[c] * ui[k];
        gw[d + k] += dz[c] * vi[k];
        gw[2 * d + k] += dz[c] * std::abs(ui[k] - vi[k]);
        gw[3 * d + k] += dz[c] * ui[k] * vi[k];
      }
    }
    if (!params.head_weights.empty()) {
      const double* w0 = params.head_weights.data();
      const double* w1 = params.head_weights.data() + f;
      double* dui = du.data() + i * d;
      double* dvi = dv.data() + i * d;
      for (std::size_t k = 0; k < d; ++k) {
        auto df = [&](std::size_t idx) { return dz[0] * w0[idx] + dz[1] * w1[idx]; };
        const double s = sign(ui[k] - vi[k]);
        dui[k] = df(k) + s * df(2 * d + k) + vi[k] * df(3 * d + k);
        dvi[k] = df(d + k) - s * df(2 * d + k) + ui[k] * df(3 * d + k);
      }
    }
  }
  out.projection.assign(params.encoder.projection.size(), 0.0);
  // Through the normalization: d e = (d x - x (x . d x)) / |e|.
  auto through_norm = [d](std::vector<double>& g, const std::vector<double>& x,
                          const std::vector<double>& norms) {
    for (std::size_t i = 0; i < norms.size(); ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += x[i * d + k] * g[i * d + k];
      for (std::size_t k = 0; k < d; ++k) g[i * d + k] = (g[i * d + k] - x[i * d + k] * dot) / norms[i];
    }
  };
  through_norm(du, u, qn);
  through_norm(dv, v, cn);
  detail::scatter_projection_grad(batch.queries, du, d, out.projection);
  detail::scatter_projection_grad(batch.docs, dv, d, out.projection);
  return out;
}

Batch featurize_batch(const std::vector<LabeledPair>& data, std::size_t hash_dim) {
  std::vector<std::string> q, c;
  Batch b;
  for (const auto& p : data) {
    q.push_back(p.query);
    c.push_back(p.document);
    b.labels.push_back(p.label);
  }
  b.queries = detail::featurize_all(q, hash_dim);
  b.docs = detail::featurize_all(c, hash_dim);
  return b;
}

}  // namespace

void ClassifierConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("classifier: learning_rate must be positive");
  }
  if (batch_size < 1) throw ValidationError("classifier: batch_size must be >= 1");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) {
    throw ValidationError("classifier: warmup_frac must be in (0, 1)");
  }
  if (!(floor_ratio > 0.0 && floor_ratio <= 1.0)) {
    throw ValidationError("classifier: floor_ratio must be in (0, 1]");
  }
}

double slanted_triangular_lr(std::size_t step, std::size_t total_steps, const ClassifierConfig& cfg) {
  const double t = static_cast<double>(step);
  const double total = static_cast<double>(std::max<std::size_t>(total_steps, 1));
  const double cut = std::max(1.0, std::floor(total * cfg.warmup_frac));
  double p;
  if (t < cut) {
    p = t / cut;
  } else {
    p = 1.0 - (t - cut) / (cut * (1.0 / cfg.warmup_frac - 1.0));
  }
  p = std::clamp(p, 0.0, 1.0);
  const double r = 1.0 / cfg.floor_ratio;
  return cfg.learning_rate * (1.0 + p * (r - 1.0)) / r;
}

PairScorerParams PairScorerParams::init(ToyEncoderParams encoder, std::uint64_t seed, double head_scale) {
  PairScorerParams p;
  p.encoder = std::move(encoder);
  p.head_weights.resize(2 * 4 * p.encoder.embed_dim);
  Rng rng(mix_seed(seed, kHeadStream));
  for (double& w : p.head_weights) w = head_scale * rng.normal();
  return p;
}

void PairScorerParams::validate() const {
  encoder.validate();
  if (head_weights.size() != 8 * encoder.embed_dim) throw ValidationError("pair scorer: head has wrong size");
  for (double w : head_weights) {
    if (!std::isfinite(w)) throw ValidationError("pair scorer: non-finite head weight");
  }
  if (!std::isfinite(head_bias[0]) || !std::isfinite(head_bias[1])) {
    throw ValidationError("pair scorer: non-finite head bias");
  }
}

std::size_t PairScorerParams::parameter_count() const {
  return encoder.parameter_count() + head_weights.size() + head_bias.size();
}

Logits head_logits(std::span<const double> u, std::span<const double> v, const PairScorerParams& params) {
  const std::size_t d = u.size();
  const std::size_t f = 4 * d;
  Logits z = params.head_bias;
  for (int c = 0; c < 2; ++c) {
    const double* w = params.head_weights.data() + c * f;
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      s += w[k] * u[k] + w[d + k] * v[k] + w[2 * d + k] * std::abs(u[k] - v[k]) +
           w[3 * d + k] * u[k] * v[k];
    }
    z[c] += s;
  }
  return z;
}

Logits pair_logits(const std::string& query, const std::string& candidate, const PairScorerParams& params) {
  const auto e = encode({query, candidate}, params.encoder, std::nullopt, true);
  return head_logits(e.row(0), e.row(1), params);
}

double positive_probability(const Logits& z) { return 1.0 / (1.0 + std::exp(z[0] - z[1])); }

LossValue cross_entropy(std::span<const Logits> logits, std::span<const int> labels) {
  if (logits.empty() || logits.size() != labels.size()) {
    throw ValidationError("cross_entropy: need one label per logit pair");
  }
  LossValue out;
  out.per_example.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto& z = logits[i];
    if (!std::isfinite(z[0]) || !std::isfinite(z[1])) throw Error("cross_entropy: non-finite logits");
    const double m = std::max(z[0], z[1]);
    const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
    out.per_example.push_back(lse - z[labels[i] == 1 ? 1 : 0]);
  }
  out.value = std::accumulate(out.per_example.begin(), out.per_example.end(), 0.0) /
              static_cast<double>(out.per_example.size());
  return out;
}

LossValue bce_loss(const std::vector<LabeledPair>& batch, const PairScorerParams& params) {
  return forward_backward(featurize_batch(batch, params.encoder.hash_dim), params, false).loss;
}

PairScorerGradient bce_grad(const std::vector<LabeledPair>& batch, const PairScorerParams& params) {
  return forward_backward(featurize_batch(batch, params.encoder.hash_dim), params, true);
}

ClassifierResult train_classifier(const std::vector<LabeledPair>& data, PairScorerParams params,
                                  const ClassifierConfig& cfg) {
  cfg.validate();
  params.validate();
  const bool has_pos = std::any_of(data.begin(), data.end(), [](const auto& p) { return p.label == 1; });
  const bool has_neg = std::any_of(data.begin(), data.end(), [](const auto& p) { return p.label == 0; });
  if (!has_pos || !has_neg) throw ValidationError("train_classifier: data must contain both classes");

  const Batch all = featurize_batch(data, params.encoder.hash_dim);
  const std::size_t n = data.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = cfg.epochs * steps_per_epoch;

  ClassifierResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng(mix_seed(cfg.seed, kEpochStream, epoch)).shuffle(perm);
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      Batch batch;
      for (std::size_t t = s * cfg.batch_size; t < std::min(n, (s + 1) * cfg.batch_size); ++t) {
        batch.queries.push_back(all.queries[perm[t]]);
        batch.docs.push_back(all.docs[perm[t]]);
        batch.labels.push_back(all.labels[perm[t]]);
      }
      const double lr = slanted_triangular_lr(step, total, cfg);
      PairScorerGradient g = forward_backward(batch, params, true);
      if (!std::isfinite(g.loss.value)) {
        throw Error("train_classifier: loss diverged at step " + std::to_string(step));
      }
      for (std::size_t k = 0; k < params.head_weights.size(); ++k) params.head_weights[k] -= lr * g.head_weights[k];
      params.head_bias[0] -= lr * g.head_bias[0];
      params.head_bias[1] -= lr * g.head_bias[1];
      if (cfg.train_encoder) {
        for (std::size_t k = 0; k < params.encoder.projection.size(); ++k) {
          params.encoder.projection[k] -= lr * g.projection[k];
        }
      }
      result.log.push_back({step, epoch, lr, g.loss.value});
    }
  }
  result.params = std::move(params);
  return result;
}

double score_pair(const std::string& query, const std::string& candidate, const PairScorerParams& params) {
  return positive_probability(pair_logits(query, candidate, params));
}

double pair_accuracy(const std::vector<LabeledPair>& data, const PairScorerParams& params) {
  if (data.empty()) throw ValidationError("pair_accuracy: no pairs");
  std::vector<std::string> q, c;
  for (const auto& p : data) {
    q.push_back(p.query);
    c.push_back(p.document);
  }
  const auto eq = encode(q, params.encoder, std::nullopt, true);
  const auto ec = encode(c, params.encoder, std::nullopt, true);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int predicted = positive_probability(head_logits(eq.row(i), ec.row(i), params)) >= 0.5 ? 1 : 0;
    if (predicted == data[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace jobmatch
