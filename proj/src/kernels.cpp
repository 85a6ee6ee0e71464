#include "jobmatch/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace jobmatch::kernels {
namespace {

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

inline double cosine_entry(const double* u, double un, const double* v, double vn, std::size_t d) {
  return std::clamp(dot(u, v, d) / (un * vn), -1.0, 1.0);
}

inline void project_one(const SparseFeatures& f, const double* projection, std::size_t dim,
                        double* out) {
  std::fill(out, out + dim, 0.0);
  for (const auto& [bucket, count] : f.entries) {
    const double* row = projection + static_cast<std::size_t>(bucket) * dim;
    for (std::size_t k = 0; k < dim; ++k) out[k] += count * row[k];
  }
}

inline double ap_one(const std::vector<char>& rel, std::size_t gold) {
  if (gold == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < rel.size(); ++r) {
    if (rel[r]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(gold);
}

}  // namespace

void row_norms(std::span<const double> values, std::size_t dim, std::span<double> out,
               Backend backend) {
  const long n = static_cast<long>(out.size());
  if (backend == Backend::serial) {
    for (long i = 0; i < n; ++i) {
      const double* r = values.data() + i * dim;
      out[i] = std::sqrt(dot(r, r, dim));
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const double* r = values.data() + i * dim;
    out[i] = std::sqrt(dot(r, r, dim));
  }
}

void cosine_block(std::span<const double> u, std::span<const double> u_norms,
                  std::span<const double> v, std::span<const double> v_norms, std::size_t dim,
                  std::span<double> out, Backend backend) {
  const long n = static_cast<long>(u_norms.size());
  const std::size_t m = v_norms.size();
  if (backend == Backend::serial) {
    for (long i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        out[i * m + j] = cosine_entry(u.data() + i * dim, u_norms[i], v.data() + j * dim, v_norms[j], dim);
      }
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      out[i * m + j] = cosine_entry(u.data() + i * dim, u_norms[i], v.data() + j * dim, v_norms[j], dim);
    }
  }
}

void project_rows(std::span<const SparseFeatures> features, std::span<const double> projection,
                  std::size_t dim, std::span<double> out, Backend backend) {
  const long n = static_cast<long>(features.size());
  if (backend == Backend::serial) {
    for (long i = 0; i < n; ++i) project_one(features[i], projection.data(), dim, out.data() + i * dim);
    return;
  }
#pragma omp parallel for schedule(dynamic, 32)
  for (long i = 0; i < n; ++i) project_one(features[i], projection.data(), dim, out.data() + i * dim);
}

void average_precisions(std::span<const std::vector<char>> relevant,
                        std::span<const std::size_t> gold_sizes, std::span<double> out,
                        Backend backend) {
  const long n = static_cast<long>(relevant.size());
  if (backend == Backend::serial) {
    for (long q = 0; q < n; ++q) out[q] = ap_one(relevant[q], gold_sizes[q]);
    return;
  }
#pragma omp parallel for schedule(dynamic, 8)
  for (long q = 0; q < n; ++q) out[q] = ap_one(relevant[q], gold_sizes[q]);
}

}  // namespace jobmatch::kernels
