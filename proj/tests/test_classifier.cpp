#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "jobmatch/classifier.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/random.hpp"
#include "jobmatch/synthetic.hpp"

using namespace jobmatch;

namespace {

double ce(Logits z, int label) {
  std::vector<Logits> zs{z};
  std::vector<int> ls{label};
  return cross_entropy(zs, ls).value;
}

// Independent transcription of the slanted-triangular schedule.
double stlr(double t, double T, double lr_max, double frac = 0.1, double ratio = 32) {
  const double cut = std::max(1.0, std::floor(T * frac));
  const double p = t < cut ? t / cut : 1 - (t - cut) / (cut * (1 / frac - 1));
  return lr_max * (1 + std::clamp(p, 0.0, 1.0) * (ratio - 1)) / ratio;
}

std::vector<LabeledPair> synthetic_training(std::size_t clusters, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.clusters = clusters;
  auto corpus = generate_synthetic(spec);
  return make_classification_set(corpus.title_pairs, SamplerConfig::ratio_1_2(seed), true).pairs;
}

}  // namespace

TEST_CASE("cross-entropy examples") {
  CHECK(std::abs(ce({0, 0}, 1) - std::log(2.0)) < 1e-12);
  CHECK(std::abs(ce({0, 0}, 0) - std::log(2.0)) < 1e-12);
  CHECK(ce({0, 20}, 1) < 1e-8);
  CHECK(ce({20, 0}, 0) < 1e-8);
  std::vector<Logits> zs{{0, 3}, {0, 3}};
  std::vector<int> ls{1, 0};
  auto l = cross_entropy(zs, ls);
  CHECK(std::abs(l.value - (ce({0, 3}, 1) + ce({0, 3}, 0)) / 2) < 1e-12);
  std::vector<Logits> bad{{0, std::nan("")}};
  std::vector<int> one{1};
  CHECK_THROWS_AS(cross_entropy(bad, one), Error);
}

TEST_CASE("positive probability") {
  CHECK(positive_probability({1.5, 1.5}) == 0.5);
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    Logits z{rng.normal() * 5, rng.normal() * 5};
    const double c = rng.normal() * 100;
    CHECK(std::abs(positive_probability(z) - positive_probability({z[0] + c, z[1] + c})) < 1e-12);
    const double p = positive_probability(z);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("slanted-triangular schedule") {
  ClassifierConfig cfg;
  const std::size_t T = 300;
  CHECK(slanted_triangular_lr(0, T, cfg) == doctest::Approx(cfg.learning_rate / 32).epsilon(1e-12));
  CHECK(slanted_triangular_lr(30, T, cfg) == doctest::Approx(cfg.learning_rate).epsilon(1e-12));
  CHECK(slanted_triangular_lr(T, T, cfg) == doctest::Approx(cfg.learning_rate / 32).epsilon(1e-12));
  for (std::size_t t = 0; t <= T; ++t) {
    CHECK(slanted_triangular_lr(t, T, cfg) == doctest::Approx(stlr(t, T, cfg.learning_rate)).epsilon(1e-12));
  }
  CHECK(cfg.learning_rate == 1e-4);
  CHECK(cfg.batch_size == 32);
  CHECK(cfg.epochs == 3);
}

TEST_CASE("bce gradient matches central finite differences") {
  const double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = PairScorerParams::init(ToyEncoderParams::init(32, 4, seed), seed, 0.5);
    std::vector<LabeledPair> batch = {{"cider maker", "cider brewer", 1, PairOrigin::gold},
                                      {"cider maker", "night nurse", 0, PairOrigin::sampled_negative},
                                      {"baker", "bread baker", 1, PairOrigin::gold}};
    auto g = bce_grad(batch, p);
    CHECK(std::abs(g.loss.value - bce_loss(batch, p).value) < 1e-12);
    double max_rel = 0;
    auto check = [&](double analytic, auto&& perturb) {
      auto plus = p, minus = p;
      perturb(plus, h);
      perturb(minus, -h);
      const double fd = (bce_loss(batch, plus).value - bce_loss(batch, minus).value) / (2 * h);
      const double scale = std::max(std::abs(analytic), std::abs(fd));
      if (scale < 1e-7) {
        CHECK(std::abs(analytic - fd) < 1e-9);
      } else {
        max_rel = std::max(max_rel, std::abs(analytic - fd) / scale);
      }
    };
    for (std::size_t k = 0; k < p.encoder.projection.size(); ++k) {
      check(g.projection[k], [k](PairScorerParams& q, double d) { q.encoder.projection[k] += d; });
    }
    for (std::size_t k = 0; k < p.head_weights.size(); ++k) {
      check(g.head_weights[k], [k](PairScorerParams& q, double d) { q.head_weights[k] += d; });
    }
    for (std::size_t k = 0; k < 2; ++k) {
      check(g.head_bias[k], [k](PairScorerParams& q, double d) { q.head_bias[k] += d; });
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("training separates synthetic pairs") {
  const auto data = synthetic_training(10, 1);
  auto init = PairScorerParams::init(ToyEncoderParams::init(1024, 16, 1), 1);
  ClassifierConfig cfg;
  cfg.learning_rate = 20;
  cfg.epochs = 8;
  cfg.seed = 1;
  auto r = train_classifier(data, init, cfg);
  CHECK(pair_accuracy(data, r.params) >= 0.95);
  CHECK(r.log.size() == 8 * ((data.size() + 31) / 32));
  CHECK(r.log.back().loss < r.log.front().loss);

  auto again = train_classifier(data, init, cfg);
  REQUIRE(again.log.size() == r.log.size());
  for (std::size_t i = 0; i < r.log.size(); ++i) CHECK(again.log[i].loss == r.log[i].loss);

  // Gold pairs outscore the sampled negatives of the same query.
  std::size_t wins = 0, total = 0;
  for (const auto& a : data) {
    if (a.label != 1) continue;
    for (const auto& b : data) {
      if (b.label != 0 || b.query != a.query) continue;
      wins += score_pair(a.query, a.document, r.params) > score_pair(b.query, b.document, r.params);
      ++total;
    }
  }
  CHECK(static_cast<double>(wins) >= 0.95 * static_cast<double>(total));

  SUBCASE("head-only training leaves the encoder untouched") {
    cfg.train_encoder = false;
    cfg.epochs = 1;
    auto head = train_classifier(data, init, cfg);
    CHECK(head.params.encoder == init.encoder);
    CHECK(head.params.head_weights != init.head_weights);
  }
}

TEST_CASE("single-class data is rejected") {
  std::vector<LabeledPair> only = {{"a", "b", 1, PairOrigin::gold}};
  auto init = PairScorerParams::init(ToyEncoderParams::init(32, 4, 0), 0);
  CHECK_THROWS_AS(train_classifier(only, init, ClassifierConfig{}), ValidationError);
}
