// Serial vs OpenMP kernels. Run with OMP_NUM_THREADS set to the core count.
#include <benchmark/benchmark.h>

#include <vector>

#include "jobmatch/embedding.hpp"
#include "jobmatch/kernels.hpp"
#include "jobmatch/random.hpp"

namespace {

using jobmatch::kernels::Backend;

std::vector<double> random_block(std::size_t n, std::uint64_t seed) {
  jobmatch::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void BM_Cosine(benchmark::State& state, Backend backend) {
  const std::size_t n = static_cast<std::size_t>(state.range(0)), m = 2 * n, dim = 64;
  const auto u = random_block(n * dim, 1), v = random_block(m * dim, 2);
  std::vector<double> un(n), vn(m), out(n * m);
  jobmatch::kernels::row_norms(u, dim, un, Backend::serial);
  jobmatch::kernels::row_norms(v, dim, vn, Backend::serial);
  for (auto _ : state) {
    jobmatch::kernels::cosine_block(u, un, v, vn, dim, out, backend);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * m));
}

void BM_Project(benchmark::State& state, Backend backend) {
  const std::size_t rows = static_cast<std::size_t>(state.range(0)), hash = 4096, dim = 64;
  const auto proj = random_block(hash * dim, 3);
  std::vector<jobmatch::SparseFeatures> feats(rows);
  for (std::size_t i = 0; i < rows; ++i) feats[i] = jobmatch::featurize("title number " + std::to_string(i), hash);
  std::vector<double> out(rows * dim);
  for (auto _ : state) {
    jobmatch::kernels::project_rows(feats, proj, dim, out, backend);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows));
}

void BM_AveragePrecision(benchmark::State& state, Backend backend) {
  const std::size_t lists = static_cast<std::size_t>(state.range(0)), depth = 2000;
  jobmatch::Rng rng(4);
  std::vector<std::vector<char>> rel(lists, std::vector<char>(depth));
  std::vector<std::size_t> gold(lists);
  for (std::size_t q = 0; q < lists; ++q) {
    for (auto& r : rel[q]) {
      r = rng.below(50) == 0;
      gold[q] += r;
    }
    gold[q] = std::max<std::size_t>(gold[q], 1);
  }
  std::vector<double> out(lists);
  for (auto _ : state) {
    jobmatch::kernels::average_precisions(rel, gold, out, backend);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * lists));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Cosine, serial, Backend::serial)->Arg(128)->Arg(512);
BENCHMARK_CAPTURE(BM_Cosine, omp, Backend::omp)->Arg(128)->Arg(512);
BENCHMARK_CAPTURE(BM_Project, serial, Backend::serial)->Arg(4096);
BENCHMARK_CAPTURE(BM_Project, omp, Backend::omp)->Arg(4096);
BENCHMARK_CAPTURE(BM_AveragePrecision, serial, Backend::serial)->Arg(1000);
BENCHMARK_CAPTURE(BM_AveragePrecision, omp, Backend::omp)->Arg(1000);

BENCHMARK_MAIN();
