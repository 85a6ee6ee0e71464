#include "encoder_math.hpp"

#include "jobmatch/kernels.hpp"

namespace jobmatch::detail {

std::vector<SparseFeatures> featurize_all(const std::vector<std::string>& texts, std::size_t hash_dim) {
  std::vector<SparseFeatures> out(texts.size());
  const long n = static_cast<long>(texts.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (long i = 0; i < n; ++i) out[i] = featurize(texts[i], hash_dim);
  return out;
}

std::vector<double> embed_features(std::span<const SparseFeatures> features,
                                   const ToyEncoderParams& params) {
  std::vector<double> out(features.size() * params.embed_dim);
  kernels::project_rows(features, params.projection, params.embed_dim, out);
  return out;
}

void scatter_projection_grad(std::span<const SparseFeatures> features,
                             std::span<const double> d_embedding, std::size_t dim,
                             std::span<double> grad) {
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double* de = d_embedding.data() + i * dim;
    for (const auto& [bucket, count] : features[i].entries) {
      double* g = grad.data() + static_cast<std::size_t>(bucket) * dim;
      for (std::size_t k = 0; k < dim; ++k) g[k] += count * de[k];
    }
  }
}

}  // namespace jobmatch::detail
