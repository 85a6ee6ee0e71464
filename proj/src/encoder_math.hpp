#pragma once

// Shared pieces of the toy-encoder backward passes.

#include <span>
#include <string>
#include <vector>

#include "jobmatch/embedding.hpp"

namespace jobmatch::detail {

std::vector<SparseFeatures> featurize_all(const std::vector<std::string>& texts, std::size_t hash_dim);

// Raw (unnormalized) embeddings of pre-featurized texts, n x embed_dim.
std::vector<double> embed_features(std::span<const SparseFeatures> features,
                                   const ToyEncoderParams& params);

// grad[h, :] += x_i[h] * d_embedding[i, :] for every row i. Rows are
// accumulated in index order.
void scatter_projection_grad(std::span<const SparseFeatures> features,
                             std::span<const double> d_embedding, std::size_t dim,
                             std::span<double> grad);

}  // namespace jobmatch::detail
