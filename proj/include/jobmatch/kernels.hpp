#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP implementation and a
// plain serial one; the serial versions are the reference the tests compare
// against and the baseline in bench/. Both compute every output element
// with the same arithmetic, so results are bitwise identical.

#include <cstddef>
#include <span>
#include <vector>

#include "jobmatch/embedding.hpp"

namespace jobmatch::kernels {

enum class Backend { serial, omp };

// L2 norm of each row of a row-major rows x dim block.
void row_norms(std::span<const double> values, std::size_t dim, std::span<double> out,
               Backend backend = Backend::omp);

// out[i * m + j] = <u_i, v_j> / (|u_i| |v_j|), clamped to [-1, 1]. Norms must
// be non-zero.
void cosine_block(std::span<const double> u, std::span<const double> u_norms,
                  std::span<const double> v, std::span<const double> v_norms, std::size_t dim,
                  std::span<double> out, Backend backend = Backend::omp);

// out row i = features[i] projected through a hash_dim x dim matrix.
void project_rows(std::span<const SparseFeatures> features, std::span<const double> projection,
                  std::size_t dim, std::span<double> out, Backend backend = Backend::omp);

// Average precision for many ranked lists at once. relevant[q][r] is true
// iff the document at rank r + 1 of list q is gold; gold_sizes[q] is |gold|.
void average_precisions(std::span<const std::vector<char>> relevant,
                        std::span<const std::size_t> gold_sizes, std::span<double> out,
                        Backend backend = Backend::omp);

}  // namespace jobmatch::kernels
