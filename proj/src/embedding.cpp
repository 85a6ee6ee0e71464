#include "jobmatch/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "jobmatch/error.hpp"
#include "jobmatch/io.hpp"
#include "jobmatch/kernels.hpp"
#include "jobmatch/random.hpp"
#include "jobmatch/text.hpp"

namespace jobmatch {
namespace {

constexpr double kNormTolerance = 1e-6;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

float to_le(float f) {
  if constexpr (std::endian::native == std::endian::little) return f;
  auto bits = std::bit_cast<std::uint32_t>(f);
  bits = (bits >> 24) | ((bits >> 8) & 0xFF00) | ((bits << 8) & 0xFF0000) | (bits << 24);
  return std::bit_cast<float>(bits);
}

}  // namespace

void EmbeddingMatrix::validate() const {
  if (values.size() != ids.size() * dim) {
    throw ValidationError("embedding matrix: " + std::to_string(values.size()) + " values for " +
                          std::to_string(ids.size()) + " rows of dim " + std::to_string(dim));
  }
  for (std::size_t i = 0; i < rows(); ++i) {
    double sq = 0.0;
    for (double x : row(i)) {
      if (!std::isfinite(x)) throw ValidationError("embedding matrix: non-finite value in row '" + ids[i] + "'");
      sq += x * x;
    }
    if (normalized && std::abs(std::sqrt(sq) - 1.0) > kNormTolerance) {
      throw ValidationError("embedding matrix: row '" + ids[i] + "' has norm " +
                            std::to_string(std::sqrt(sq)) + " but matrix is marked normalized");
    }
  }
}

void EmbeddingMatrix::normalize_rows() {
  std::vector<double> norms(rows());
  kernels::row_norms(values, dim, norms);
  for (std::size_t i = 0; i < rows(); ++i) {
    if (norms[i] == 0.0) throw Error("cannot normalize zero embedding for '" + ids[i] + "'");
    for (double& x : row(i)) x /= norms[i];
  }
  normalized = true;
}

ToyEncoderParams ToyEncoderParams::init(std::size_t hash_dim, std::size_t embed_dim,
                                        std::uint64_t seed, double scale) {
  ToyEncoderParams p;
  p.hash_dim = hash_dim;
  p.embed_dim = embed_dim;
  p.seed = seed;
  if (embed_dim < 2 || hash_dim < embed_dim) {
    throw ValidationError("toy encoder requires hash_dim >= embed_dim >= 2");
  }
  Rng rng(mix_seed(seed, 0x50524f4aULL));
  p.projection.resize(hash_dim * embed_dim);
  for (double& w : p.projection) w = scale * rng.normal();
  return p;
}

void ToyEncoderParams::validate() const {
  if (embed_dim < 2 || hash_dim < embed_dim) {
    throw ValidationError("toy encoder requires hash_dim >= embed_dim >= 2");
  }
  if (projection.size() != hash_dim * embed_dim) {
    throw ValidationError("toy encoder projection has wrong size");
  }
  for (double w : projection) {
    if (!std::isfinite(w)) throw ValidationError("toy encoder projection is not finite");
  }
}

std::string apply_prompt(const std::optional<PromptTemplate>& prompt, const std::string& text) {
  if (!prompt || prompt->text.empty()) return text;
  if (text.empty()) return prompt->text;
  return prompt->text + " " + text;
}

SparseFeatures featurize(const std::string& input, std::size_t hash_dim) {
  const std::string folded = text::fold_key(input);
  std::vector<std::string_view> chars;
  chars.reserve(folded.size() + 2);
  chars.push_back("^");
  for (auto c : text::utf8_chars(folded)) chars.push_back(c);
  chars.push_back("$");

  std::map<std::uint32_t, double> counts;
  for (std::size_t n = 2; n <= 3; ++n) {
    for (std::size_t i = 0; i + n <= chars.size(); ++i) {
      std::uint64_t h = fnv1a(std::string_view(n == 2 ? "2" : "3"));
      for (std::size_t k = 0; k < n; ++k) {
        h = fnv1a(chars[i + k], h);
        h = fnv1a("\x1f", h);
      }
      counts[static_cast<std::uint32_t>(h % hash_dim)] += 1.0;
    }
  }
  SparseFeatures f;
  f.entries.assign(counts.begin(), counts.end());
  return f;
}

std::vector<double> project(const SparseFeatures& features, const ToyEncoderParams& params) {
  std::vector<double> out(params.embed_dim);
  kernels::project_rows(std::span(&features, 1), params.projection, params.embed_dim, out,
                        kernels::Backend::serial);
  return out;
}

EmbeddingMatrix encode(const std::vector<std::string>& texts, const ToyEncoderParams& params,
                       const std::optional<PromptTemplate>& prompt, bool normalize,
                       EncodeStats* stats) {
  std::vector<std::string> ids(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) ids[i] = std::to_string(i);
  return encode(ids, texts, params, prompt, normalize, stats);
}

EmbeddingMatrix encode(const std::vector<std::string>& ids, const std::vector<std::string>& texts,
                       const ToyEncoderParams& params, const std::optional<PromptTemplate>& prompt,
                       bool normalize, EncodeStats* stats) {
  if (texts.empty()) throw ValidationError("encode: no texts");
  if (ids.size() != texts.size()) throw ValidationError("encode: ids and texts differ in length");
  if (params.projection.size() != params.hash_dim * params.embed_dim) {
    throw ValidationError("encode: projection has wrong size");
  }
  std::vector<SparseFeatures> features(texts.size());
  std::size_t empty = 0;
  const long n = static_cast<long>(texts.size());
#pragma omp parallel for schedule(dynamic, 32) reduction(+ : empty)
  for (long i = 0; i < n; ++i) {
    if (texts[i].empty()) ++empty;
    features[i] = featurize(apply_prompt(prompt, texts[i]), params.hash_dim);
  }
  EmbeddingMatrix m;
  m.ids = ids;
  m.dim = params.embed_dim;
  m.values.resize(texts.size() * params.embed_dim);
  kernels::project_rows(features, params.projection, params.embed_dim, m.values);
  if (normalize) m.normalize_rows();
  if (stats) {
    stats->texts += texts.size();
    stats->empty_texts += empty;
  }
  return m;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ValidationError("cosine: dimension mismatch");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    uv += u[k] * v[k];
    uu += u[k] * u[k];
    vv += v[k] * v[k];
  }
  if (uu == 0.0 || vv == 0.0) throw Error("undefined similarity: zero vector");
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

DenseMatrix similarity_matrix(const EmbeddingMatrix& u, const EmbeddingMatrix& v) {
  if (u.dim != v.dim) {
    throw ValidationError("similarity_matrix: dimension mismatch (" + std::to_string(u.dim) +
                          " vs " + std::to_string(v.dim) + ")");
  }
  std::vector<double> un(u.rows()), vn(v.rows());
  kernels::row_norms(u.values, u.dim, un);
  kernels::row_norms(v.values, v.dim, vn);
  for (std::size_t i = 0; i < un.size(); ++i) {
    if (un[i] == 0.0) throw Error("undefined similarity: zero vector for '" + u.ids[i] + "'");
  }
  for (std::size_t j = 0; j < vn.size(); ++j) {
    if (vn[j] == 0.0) throw Error("undefined similarity: zero vector for '" + v.ids[j] + "'");
  }
  DenseMatrix out{u.rows(), v.rows(), std::vector<double>(u.rows() * v.rows())};
  kernels::cosine_block(u.values, un, v.values, vn, u.dim, out.values);
  return out;
}

std::filesystem::path export_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& dir,
                                        const std::string& stem) {
  m.validate();
  std::filesystem::create_directories(dir);
  const std::string ids_file = stem == "embeddings" ? "ids.txt" : stem + ".ids.txt";

  std::string blob(m.values.size() * sizeof(float), '\0');
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const float f = to_le(static_cast<float>(m.values[i]));
    std::memcpy(blob.data() + i * sizeof(float), &f, sizeof(float));
  }
  io::write_file(dir / (stem + ".f32"), blob);

  std::string ids;
  for (const auto& id : m.ids) ids += id + "\n";
  io::write_file(dir / ids_file, ids);

  nlohmann::ordered_json meta;
  meta["count"] = m.rows();
  meta["dim"] = m.dim;
  meta["normalized"] = m.normalized;
  meta["ids_file"] = ids_file;
  const auto meta_path = dir / (stem + ".json");
  io::write_file(meta_path, meta.dump(2) + "\n");
  return meta_path;
}

EmbeddingMatrix import_embeddings(const std::filesystem::path& meta_path,
                                  const std::filesystem::path& blob_path) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(meta_path.string() + ": " + e.what());
  }
  for (const char* key : {"count", "dim", "normalized", "ids_file"}) {
    if (!meta.contains(key)) throw ValidationError(meta_path.string() + ": missing key '" + key + "'");
  }
  EmbeddingMatrix m;
  const auto count = meta["count"].get<std::size_t>();
  m.dim = meta["dim"].get<std::size_t>();
  m.normalized = meta["normalized"].get<bool>();

  const auto ids = io::read_lines(meta_path.parent_path() / meta["ids_file"].get<std::string>());
  for (const auto& id : ids) {
    if (!id.empty()) m.ids.push_back(id);
  }
  if (m.ids.size() != count) {
    throw ValidationError(meta_path.string() + ": sidecar count " + std::to_string(count) +
                          " but ids file has " + std::to_string(m.ids.size()) + " ids");
  }
  const std::string blob = io::read_file(blob_path);
  if (blob.size() != count * m.dim * sizeof(float)) {
    throw ValidationError(blob_path.string() + ": size " + std::to_string(blob.size()) +
                          " bytes, expected count*dim*4 = " +
                          std::to_string(count * m.dim * sizeof(float)));
  }
  m.values.resize(count * m.dim);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    float f;
    std::memcpy(&f, blob.data() + i * sizeof(float), sizeof(float));
    m.values[i] = static_cast<double>(to_le(f));
  }
  m.validate();
  return m;
}

EmbeddingMatrix import_embeddings(const std::filesystem::path& meta_path) {
  auto blob = meta_path;
  blob.replace_extension(".f32");
  return import_embeddings(meta_path, blob);
}

}  // namespace jobmatch
