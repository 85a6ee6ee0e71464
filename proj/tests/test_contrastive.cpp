#include "doctest.h"

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "jobmatch/contrastive.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/random.hpp"
#include "jobmatch/synthetic.hpp"

using namespace jobmatch;

namespace {

EmbeddingMatrix matrix(const std::vector<std::vector<double>>& rows) {
  EmbeddingMatrix m;
  m.dim = rows[0].size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.ids.push_back(std::to_string(i));
    m.values.insert(m.values.end(), rows[i].begin(), rows[i].end());
  }
  return m;
}

EmbeddingMatrix random_matrix(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (auto& r : rows) {
    for (auto& x : r) x = rng.normal();
  }
  return matrix(rows);
}

// Direct transcription of the loss with full denominators.
double oracle_loss(const EmbeddingMatrix& u, const EmbeddingMatrix& v, bool symmetric) {
  const std::size_t n = u.rows();
  auto cos = [&](const EmbeddingMatrix& a, std::size_t i, const EmbeddingMatrix& b, std::size_t j) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < a.dim; ++k) {
      dot += a.row(i)[k] * b.row(j)[k];
      na += a.row(i)[k] * a.row(i)[k];
      nb += b.row(j)[k] * b.row(j)[k];
    }
    return dot / std::sqrt(na * nb);
  };
  auto direction = [&](const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0;
      for (std::size_t j = 0; j < n; ++j) denom += std::exp(cos(a, i, b, j));
      total += -std::log(std::exp(cos(a, i, b, i)) / denom);
    }
    return total / static_cast<double>(n);
  };
  const double forward = direction(u, v);
  return symmetric ? (forward + direction(v, u)) / 2 : forward;
}

ContrastiveConfig full(bool symmetric = true) {
  ContrastiveConfig c;
  c.k_negatives = 31;
  c.symmetric = symmetric;
  return c;
}

std::vector<ContrastivePair> random_batch(Rng& rng, std::size_t n) {
  static const char* words[] = {"cider", "maker", "baker", "chef", "nurse", "driver", "clerk", "welder"};
  std::vector<ContrastivePair> b;
  for (std::size_t i = 0; i < n; ++i) {
    auto w = [&] { return std::string(words[rng.below(8)]); };
    b.push_back({w() + " " + w() + std::to_string(i), w() + " " + w() + " " + w(), PairType::title_alt_title});
  }
  return b;
}

}  // namespace

TEST_CASE("uniform similarities give ln n") {
  // Identical rows: every similarity is 1.
  auto u = matrix({{1, 2}, {1, 2}, {1, 2}, {1, 2}});
  auto groups = BatchGroups::distinct(4);
  auto l = infonce_loss(u, u, full(), &groups);
  CHECK(std::abs(l.value - std::log(4.0)) < 1e-9);
  for (double x : l.per_example) CHECK(std::abs(x - std::log(4.0)) < 1e-9);
}

TEST_CASE("two orthonormal pairs") {
  auto u = matrix({{1, 0}, {0, 1}});
  auto l = infonce_loss(u, u, full());
  const double expected = std::log(1 + std::exp(-1.0));
  CHECK(std::abs(expected - 0.31326) < 1e-5);
  CHECK(std::abs(l.value - expected) < 1e-12);
  CHECK(std::abs(l.value - 0.31326) < 1e-5);
}

TEST_CASE("full-denominator loss matches the direct oracle") {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(7), d = 2 + rng.below(6);
    auto u = random_matrix(rng, n, d), v = random_matrix(rng, n, d);
    for (bool sym : {false, true}) {
      CHECK(std::abs(infonce_loss(u, v, full(sym)).value - oracle_loss(u, v, sym)) < 1e-12);
    }
  }
}

TEST_CASE("loss invariants") {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(10), d = 3;
    auto u = random_matrix(rng, n, d), v = random_matrix(rng, n, d);
    ContrastiveConfig cfg;
    cfg.k_negatives = 1 + rng.below(n);
    cfg.seed = rng.next();
    auto l = infonce_loss(u, v, cfg, nullptr, t);

    // Mean of per-example terms, each above the cosine lower bound.
    double mean = 0;
    for (double x : l.per_example) mean += x;
    CHECK(std::abs(mean / static_cast<double>(l.per_example.size()) - l.value) < 1e-12);
    const std::size_t denom = std::min<std::size_t>(cfg.k_negatives, n - 1) + 1;
    const double bound = std::log(1 + static_cast<double>(denom - 1) * std::exp(-2.0));
    for (double x : l.per_example) CHECK(x >= bound - 1e-12);

    // Positive per-row rescaling leaves the loss unchanged.
    auto us = u, vs = v;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = 0.1 + 10 * rng.uniform(), b = 0.1 + 10 * rng.uniform();
      for (auto& x : us.row(i)) x *= a;
      for (auto& x : vs.row(i)) x *= b;
    }
    CHECK(std::abs(infonce_loss(us, vs, cfg, nullptr, t).value - l.value) < 1e-9);
  }
}

TEST_CASE("loss preconditions") {
  auto one = matrix({{1, 0}});
  CHECK_THROWS_AS(infonce_loss(one, one, full()), ValidationError);
  auto zero = matrix({{1, 0}, {0, 0}});
  CHECK_THROWS_AS(infonce_loss(zero, zero, full()), Error);
  ContrastiveConfig bad;
  bad.k_negatives = 32;
  bad.batch_size = 32;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.k_negatives = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("denominator sets") {
  ContrastiveConfig cfg;
  cfg.k_negatives = 3;
  cfg.seed = 17;
  auto groups = BatchGroups::distinct(10);
  auto sets = denominator_sets(10, groups, cfg, 0, false);
  for (std::size_t i = 0; i < 10; ++i) {
    REQUIRE(sets[i].size() == 4);
    CHECK(sets[i][0] == i);
    CHECK(std::set<std::size_t>(sets[i].begin(), sets[i].end()).size() == 4);
  }
  CHECK(denominator_sets(10, groups, cfg, 0, false) == sets);
  CHECK(denominator_sets(10, groups, cfg, 1, false) != sets);
  cfg.k_negatives = 20;
  for (const auto& s : denominator_sets(10, groups, cfg, 0, false)) CHECK(s.size() == 10);
}

TEST_CASE("dedup excludes in-batch duplicates from the denominator") {
  std::vector<ContrastivePair> batch = {{"cider maker", "cider brewer", PairType::title_alt_title},
                                        {"Cider Maker", "cider producer", PairType::title_alt_title},
                                        {"baker", "bread baker", PairType::title_alt_title}};
  auto groups = BatchGroups::from_pairs(batch);
  CHECK(groups.anchor[0] == groups.anchor[1]);
  ContrastiveConfig cfg;
  cfg.k_negatives = 2;
  auto sets = denominator_sets(3, groups, cfg, 0, false);
  CHECK(sets[0] == std::vector<std::size_t>{0, 2});
  CHECK(sets[1] == std::vector<std::size_t>{1, 2});
  CHECK(sets[2].size() == 3);
  cfg.dedup = false;
  CHECK(denominator_sets(3, groups, cfg, 0, false)[0].size() == 3);

  auto p = ToyEncoderParams::init(256, 8, 1);
  cfg.dedup = true;
  const double with = infonce_loss(batch, p, cfg).value;
  cfg.dedup = false;
  CHECK(with != infonce_loss(batch, p, cfg).value);
}

TEST_CASE("analytic gradient matches central finite differences") {
  const double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto batch = random_batch(rng, 4);
    auto params = ToyEncoderParams::init(48, 8, seed);
    ContrastiveConfig cfg;
    cfg.k_negatives = 1 + seed % 3;
    cfg.batch_size = 4;
    cfg.symmetric = seed % 2 == 0;
    cfg.seed = seed;
    auto g = infonce_grad(batch, params, cfg, seed);
    CHECK(std::abs(g.loss.value - infonce_loss(batch, params, cfg, seed).value) < 1e-12);
    double max_rel = 0;
    for (std::size_t k = 0; k < params.projection.size(); ++k) {
      auto plus = params, minus = params;
      plus.projection[k] += h;
      minus.projection[k] -= h;
      const double fd =
          (infonce_loss(batch, plus, cfg, seed).value - infonce_loss(batch, minus, cfg, seed).value) / (2 * h);
      const double a = g.projection[k];
      const double scale = std::max(std::abs(a), std::abs(fd));
      if (scale < 1e-7) {
        CHECK(std::abs(a - fd) < 1e-9);
        continue;
      }
      max_rel = std::max(max_rel, std::abs(a - fd) / scale);
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("zero projection is rejected") {
  auto params = ToyEncoderParams::init(32, 4, 0);
  std::fill(params.projection.begin(), params.projection.end(), 0.0);
  Rng rng(1);
  CHECK_THROWS_AS(infonce_grad(random_batch(rng, 4), params, full()), Error);
}

TEST_CASE("training on the synthetic corpus") {
  SyntheticSpec spec;
  spec.clusters = 8;
  auto corpus = generate_synthetic(spec);
  auto pairs = make_contrastive_set(corpus.entities, Task::A, spec.languages).pairs;
  auto init = ToyEncoderParams::init(1024, 16, 3);
  ContrastiveConfig cfg;
  cfg.learning_rate = 300;
  cfg.epochs = 5;
  cfg.seed = 3;
  auto r = train_contrastive(pairs, init, cfg);
  REQUIRE(r.heldout_loss.size() == 6);
  CHECK(r.heldout_loss.back() < r.heldout_loss.front());
  CHECK(r.log.size() == 5 * ((pairs.size() - pairs.size() / 10) / 32));

  auto again = train_contrastive(pairs, init, cfg);
  CHECK(again.params == r.params);

  cfg.epochs = 0;
  CHECK(train_contrastive(pairs, init, cfg).params == init);

  std::vector<ContrastivePair> few(pairs.begin(), pairs.begin() + 10);
  CHECK_THROWS_AS(train_contrastive(few, init, ContrastiveConfig{}), ValidationError);
}

TEST_CASE("divergence aborts with the last good parameters") {
  SyntheticSpec spec;
  spec.clusters = 4;
  auto pairs = make_contrastive_set(generate_synthetic(spec).entities, Task::A, spec.languages).pairs;
  auto init = ToyEncoderParams::init(256, 8, 3);
  ContrastiveConfig cfg;
  cfg.learning_rate = 1e308;
  cfg.batch_size = 8;
  cfg.k_negatives = 4;
  cfg.epochs = 3;
  try {
    train_contrastive(pairs, init, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK_NOTHROW(e.last_good().validate());
  }
}
