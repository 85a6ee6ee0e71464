#include "doctest.h"

#include <vector>

#include "jobmatch/embedding.hpp"
#include "jobmatch/kernels.hpp"
#include "jobmatch/random.hpp"

using namespace jobmatch;
using kernels::Backend;

namespace {

std::vector<double> block(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("OpenMP kernels match the serial reference bit for bit") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t n = 37 + seed, m = 53, dim = 19;
    const auto u = block(n * dim, seed), v = block(m * dim, seed + 100);

    std::vector<double> un_s(n), un_o(n), vn(m);
    kernels::row_norms(u, dim, un_s, Backend::serial);
    kernels::row_norms(u, dim, un_o, Backend::omp);
    CHECK(un_s == un_o);
    kernels::row_norms(v, dim, vn, Backend::serial);

    std::vector<double> cs(n * m), co(n * m);
    kernels::cosine_block(u, un_s, v, vn, dim, cs, Backend::serial);
    kernels::cosine_block(u, un_s, v, vn, dim, co, Backend::omp);
    CHECK(cs == co);
    for (double x : cs) CHECK(std::abs(x) <= 1.0);

    const std::size_t hash = 256;
    const auto proj = block(hash * dim, seed + 7);
    std::vector<SparseFeatures> feats;
    for (int i = 0; i < 40; ++i) feats.push_back(featurize("text " + std::to_string(i * (seed + 1)), hash));
    std::vector<double> ps(40 * dim), po(40 * dim);
    kernels::project_rows(feats, proj, dim, ps, Backend::serial);
    kernels::project_rows(feats, proj, dim, po, Backend::omp);
    CHECK(ps == po);

    Rng rng(seed);
    std::vector<std::vector<char>> rel(30);
    std::vector<std::size_t> gold(30);
    for (std::size_t q = 0; q < rel.size(); ++q) {
      rel[q].resize(1 + rng.below(60));
      for (auto& r : rel[q]) {
        r = rng.below(4) == 0;
        gold[q] += r;
      }
      gold[q] += rng.below(2);  // some golds unretrieved
      gold[q] = std::max<std::size_t>(gold[q], 1);
    }
    std::vector<double> as(30), ao(30);
    kernels::average_precisions(rel, gold, as, Backend::serial);
    kernels::average_precisions(rel, gold, ao, Backend::omp);
    CHECK(as == ao);
  }
}

TEST_CASE("project_rows agrees with project") {
  auto p = ToyEncoderParams::init(128, 8, 4);
  std::vector<SparseFeatures> feats = {featurize("cider maker", 128), featurize("baker", 128)};
  std::vector<double> out(2 * 8);
  kernels::project_rows(feats, p.projection, 8, out);
  for (std::size_t i = 0; i < 2; ++i) {
    auto ref = project(feats[i], p);
    for (std::size_t j = 0; j < 8; ++j) CHECK(out[i * 8 + j] == doctest::Approx(ref[j]).epsilon(1e-12));
  }
}
